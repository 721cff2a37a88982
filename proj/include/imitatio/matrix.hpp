#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace imitatio {

// Row sums may deviate from 1 by at most this much before a matrix or
// distribution is rejected.
inline constexpr double kRowSumTol = 1e-9;
// Entries below this threshold count as structural zeros.
inline constexpr double kPositiveTol = 1e-12;

/// Square row-stochastic matrix, row-major storage, 0-based states.
class StochasticMatrix {
 public:
  StochasticMatrix() = default;
  explicit StochasticMatrix(std::size_t n, double fill = 0.0)
      : n_(n), a_(n * n, fill) {}

  static StochasticMatrix identity(std::size_t n);
  static StochasticMatrix from_rows(const std::vector<std::vector<double>>& rows);

  std::size_t size() const { return n_; }
  bool empty() const { return n_ == 0; }

  double operator()(std::size_t i, std::size_t j) const { return a_[i * n_ + j]; }
  double& operator()(std::size_t i, std::size_t j) { return a_[i * n_ + j]; }
  std::span<const double> row(std::size_t i) const {
    return {a_.data() + i * n_, n_};
  }

  /// Violation messages; empty when entries are nonnegative and every row
  /// sums to 1 within kRowSumTol. `what` names the matrix in messages.
  std::vector<std::string> check(const std::string& what) const;

  /// Divides each row by its sum. Call only after check() passed.
  void renormalize_rows();

  /// this += w * m
  void add_scaled(const StochasticMatrix& m, double w);

  std::vector<std::vector<double>> to_rows() const;

  friend StochasticMatrix operator*(const StochasticMatrix& a,
                                    const StochasticMatrix& b);
  friend bool operator==(const StochasticMatrix& a,
                         const StochasticMatrix& b) = default;

 private:
  std::size_t n_ = 0;
  std::vector<double> a_;
};

/// Probability vector over states 0..size-1.
struct Distribution {
  std::vector<double> w;

  std::size_t size() const { return w.size(); }
  std::vector<std::string> check(const std::string& what) const;

  /// Inverse CDF: smallest state whose cumulative mass exceeds u.
  int sample(double u) const;
};

}  // namespace imitatio
