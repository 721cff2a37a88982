#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "imitatio/kernel.hpp"

namespace imitatio {

/// A word over the depth alphabet; letters are decrements, first letter is
/// the decrement taken at the top site of the walk segment it describes.
using Word = std::vector<std::int64_t>;

/// Total depth s(a): the sum of the letters.
std::int64_t word_depth(const Word& word);

/// Matrix of a word: the product of the letter matrices applied deepest
/// letter first, so it maps the value at the bottom of the segment to the
/// value at the top. word_matrix(concat(a,b)) == word_matrix(b) * word_matrix(a).
StochasticMatrix word_matrix(const ImitationKernel& kernel, const Word& word);

/// Weight of a word: the product of its letters' theta values.
double word_theta(const ImitationKernel& kernel, const Word& word);

enum class Verdict { Unique, NonUniquePeriodic, NonUniqueMultipleClasses };

std::string to_string(Verdict v);

struct Decomposition {
  std::vector<std::vector<int>> closed_classes;  // each sorted; ordered by least member
  std::vector<int> transient;                    // sorted
};

/// Communicating classes of the support graph (arc i->j when some depth's
/// matrix has a positive (i,j) entry).
Decomposition communicating_decomposition(const ImitationKernel& kernel);

/// gcd of the support depths; an infinite tail contains consecutive
/// integers, so any tail forces the gcd to 1.
std::int64_t alphabet_gcd(const ImitationKernel& kernel);

/// For gcd d > 1 every depth is a multiple of d and the process splits into
/// d independent copies of the reduced kernel whose depth l stands for l*d.
ImitationKernel reduce_kernel(const ImitationKernel& kernel);

struct Restriction {
  ImitationKernel kernel;
  std::vector<int> kept;  // kept[new_state] = original state
};

/// Restriction to the recurrent states. Requires exactly one closed class.
Restriction restrict_to_recurrent(const ImitationKernel& kernel);

struct PeriodInfo {
  std::int64_t period = 0;
  std::vector<std::vector<int>> partition;  // classes G_0..G_{d-1}, root in G_0
};

/// Period and periodic partition of an essentially irreducible kernel with
/// alphabet gcd 1 (reduce first when needed). A positive word entry
/// P_b(i,j) with i in G_h lands j in G_{(h + depth(b)) mod period}.
PeriodInfo chain_period_and_partition(const ImitationKernel& kernel);

struct StructureReport {
  std::int64_t d_A = 1;
  Decomposition decomposition;
  bool essentially_irreducible = false;
  // Period data of the recurrent part, states in original labels.
  // Absent when there are multiple closed classes.
  std::optional<PeriodInfo> period;
  Verdict verdict = Verdict::Unique;
  std::vector<std::string> stages;  // human-readable audit of the pipeline
};

/// Full classification pipeline: decompose, restrict, reduce by the
/// alphabet gcd, compute the chain period. Compatible laws are unique
/// exactly when the kernel is essentially irreducible and the (reduced)
/// period is 1.
StructureReport uniqueness_verdict(const ImitationKernel& kernel);

std::string structure_report_to_json(const StructureReport& report,
                                     const ImitationKernel& kernel);

}  // namespace imitatio
