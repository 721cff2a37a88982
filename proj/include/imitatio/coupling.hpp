#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "imitatio/kernel.hpp"
#include "imitatio/matrix.hpp"
#include "imitatio/structure.hpp"

namespace imitatio {

/// Inverse-CDF coupling of one matrix row: smallest state j with
/// cumulative row mass above u. States ordered 0..n-1.
int apply_coupling(const StochasticMatrix& matrix, int state, double u);

/// Word coupling f_a: applies the letter couplings right to left, so the
/// last letter of the word acts on `state` first (with the last uniform).
/// The marginal over uniform us equals the row of word_matrix(word).
int compose_coupling(const ImitationKernel& kernel, const Word& word, int state,
                     const std::vector<double>& us);

/// Regeneration data for the Doeblin sampler: a common depth n0_bar, one
/// witness word per state that reaches `target` with probability >= epsilon,
/// and the mixture matrix q_bar those words induce. epsilon_star is the
/// guaranteed agreement window of the star coupling, the smallest entry of
/// q_bar's target column.
struct DoeblinCertificate {
  int target = 0;
  std::int64_t n0_bar = 0;
  std::vector<Word> words;  // indexed by state, each of depth n0_bar
  double epsilon = 0.0;
  double rho_bar = 0.0;
  StochasticMatrix q_bar = StochasticMatrix(1, 1.0);
  double epsilon_star = 0.0;
};

/// Searches depth by depth for the smallest n such that every state can
/// reach a common target through some word of depth exactly n, then picks
/// max-probability witness words by dynamic programming. Requires the
/// uniqueness verdict to be Unique. `depth_cap` bounds the search
/// (default 10*|G|^2*max letter).
DoeblinCertificate doeblin_certificate(const ImitationKernel& kernel,
                                       std::optional<std::int64_t> depth_cap =
                                           std::nullopt);

/// Inverse-CDF of row `state` of q_bar with the target state moved to the
/// front of the ordering: every state maps to the target when u < epsilon_star.
int star_coupling(const DoeblinCertificate& cert, int state, double u);

std::string certificate_to_json(const DoeblinCertificate& cert);

/// Word lookup keyed back to front, for matching the trailing letters of a
/// growing decrement sequence without copying it.
class WordTrie {
 public:
  void insert(const Word& word);

  /// Walks the trie from the last letter of `buffer` backwards; true when a
  /// stored word is spelled by some suffix.
  bool matches_suffix(const std::vector<std::int64_t>& buffer) const;

  bool empty() const { return words_ == 0; }
  std::size_t size() const { return words_; }

 private:
  struct Node {
    std::map<std::int64_t, int> next;
    bool terminal = false;
  };
  std::vector<Node> nodes_{1};
  std::size_t words_ = 0;
};

}  // namespace imitatio
