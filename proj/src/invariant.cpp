#include "imitatio/invariant.hpp"

#include <algorithm>
#include <cmath>

#include "imitatio/errors.hpp"
#include "imitatio/structure.hpp"

namespace imitatio {

StochasticMatrix p_hat(const ImitationKernel& kernel) {
  StochasticMatrix m(kernel.states());
  for (const auto& e : kernel.support()) m.add_scaled(e.matrix, e.theta);
  if (kernel.tail()) m.add_scaled(kernel.tail()->matrix, kernel.tail()->mass);
  return m;
}

double invariant_residual(const StochasticMatrix& p, const Distribution& lambda) {
  std::size_t n = p.size();
  double worst = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    double v = 0.0;
    for (std::size_t i = 0; i < n; ++i) v += lambda.w[i] * p(i, j);
    worst = std::max(worst, std::abs(v - lambda.w[j]));
  }
  return worst;
}

namespace {

constexpr double kResidualTarget = 1e-12;
constexpr std::size_t kDenseLimit = 2000;

// Solves M x = b in place by LU with partial pivoting; M is dense row-major.
// Returns the pivoted LU so further right-hand sides can reuse it.
struct LuSolver {
  std::size_t n;
  std::vector<double> lu;
  std::vector<std::size_t> perm;

  LuSolver(std::vector<double> m, std::size_t n_) : n(n_), lu(std::move(m)), perm(n_) {
    for (std::size_t i = 0; i < n; ++i) perm[i] = i;
    for (std::size_t col = 0; col < n; ++col) {
      std::size_t piv = col;
      double best = std::abs(lu[perm[col] * n + col]);
      for (std::size_t r = col + 1; r < n; ++r) {
        double v = std::abs(lu[perm[r] * n + col]);
        if (v > best) {
          best = v;
          piv = r;
        }
      }
      if (best == 0.0) throw Error("invariant solve: singular system");
      std::swap(perm[col], perm[piv]);
      double d = lu[perm[col] * n + col];
      for (std::size_t r = col + 1; r < n; ++r) {
        double f = lu[perm[r] * n + col] / d;
        lu[perm[r] * n + col] = f;
        for (std::size_t c = col + 1; c < n; ++c)
          lu[perm[r] * n + c] -= f * lu[perm[col] * n + c];
      }
    }
  }

  std::vector<double> solve(const std::vector<double>& b) const {
    std::vector<double> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      double v = b[perm[i]];
      for (std::size_t j = 0; j < i; ++j) v -= lu[perm[i] * n + j] * y[j];
      y[i] = v;
    }
    for (std::size_t ii = n; ii-- > 0;) {
      double v = y[ii];
      for (std::size_t j = ii + 1; j < n; ++j) v -= lu[perm[ii] * n + j] * y[j];
      y[ii] = v / lu[perm[ii] * n + ii];
    }
    return y;
  }
};

// Stationary vector of an irreducible stochastic matrix by a direct solve
// of lambda (P - I) = 0 with the normalization sum(lambda) = 1, plus
// iterative refinement to push the residual to rounding level.
std::vector<double> stationary_irreducible(const StochasticMatrix& p) {
  std::size_t n = p.size();
  if (n == 1) return {1.0};

  if (n > kDenseLimit) {
    // Power iteration for matrices too large for the dense path.
    std::vector<double> x(n, 1.0 / double(n)), y(n);
    for (std::size_t iter = 0; iter < 1000000; ++iter) {
      std::fill(y.begin(), y.end(), 0.0);
      for (std::size_t i = 0; i < n; ++i) {
        double xi = x[i];
        if (xi == 0.0) continue;
        for (std::size_t j = 0; j < n; ++j) y[j] += xi * p(i, j);
      }
      double diff = 0.0, sum = 0.0;
      for (std::size_t j = 0; j < n; ++j) sum += y[j];
      for (std::size_t j = 0; j < n; ++j) {
        y[j] /= sum;
        diff = std::max(diff, std::abs(y[j] - x[j]));
      }
      x.swap(y);
      if (diff < 1e-13) return x;
    }
    throw Error("invariant solve: power iteration did not converge");
  }

  // System rows: column-balance equations (P - I)^T, first row replaced by
  // the normalization.
  std::vector<double> m(n * n, 0.0);
  for (std::size_t j = 0; j < n; ++j) m[0 * n + j] = 1.0;
  for (std::size_t row = 1; row < n; ++row)
    for (std::size_t j = 0; j < n; ++j)
      m[row * n + j] = p(j, row) - (j == row ? 1.0 : 0.0);

  LuSolver solver(m, n);
  std::vector<double> b(n, 0.0);
  b[0] = 1.0;
  std::vector<double> x = solver.solve(b);

  // Two rounds of refinement on the same factorization.
  for (int round = 0; round < 2; ++round) {
    std::vector<double> r(n, 0.0);
    for (std::size_t j = 0; j < n; ++j) r[0] += x[j];
    r[0] -= 1.0;
    for (std::size_t row = 1; row < n; ++row) {
      double v = 0.0;
      for (std::size_t j = 0; j < n; ++j)
        v += (p(j, row) - (j == row ? 1.0 : 0.0)) * x[j];
      r[row] = v;
    }
    std::vector<double> d = solver.solve(r);
    for (std::size_t j = 0; j < n; ++j) x[j] -= d[j];
  }
  for (auto& v : x) v = std::max(v, 0.0);
  double sum = 0.0;
  for (double v : x) sum += v;
  for (auto& v : x) v /= sum;
  return x;
}

}  // namespace

Distribution invariant_distribution(
    const StochasticMatrix& p,
    const std::optional<std::vector<double>>& class_weights) {
  std::size_t n = p.size();

  // Closed classes of the matrix's own support graph, via a throwaway
  // one-depth kernel.
  ImitationKernel probe(n, {{1, 1.0, p}});
  auto decomp = communicating_decomposition(probe);
  const auto& classes = decomp.closed_classes;

  std::vector<double> weights;
  if (classes.size() == 1) {
    weights = {1.0};
  } else {
    if (!class_weights)
      throw PreconditionError(
          "invariant_distribution: " + std::to_string(classes.size()) +
          " closed classes; supply one mixture weight per class");
    weights = *class_weights;
    if (weights.size() != classes.size())
      throw PreconditionError(
          "invariant_distribution: expected " + std::to_string(classes.size()) +
          " mixture weights, got " + std::to_string(weights.size()));
    double sum = 0.0;
    for (double w : weights) {
      if (w < 0.0)
        throw PreconditionError("invariant_distribution: negative mixture weight");
      sum += w;
    }
    if (std::abs(sum - 1.0) > kRowSumTol)
      throw PreconditionError("invariant_distribution: mixture weights must sum to 1");
    for (auto& w : weights) w /= sum;
  }

  Distribution lambda;
  lambda.w.assign(n, 0.0);
  for (std::size_t c = 0; c < classes.size(); ++c) {
    if (weights[c] == 0.0) continue;
    const auto& members = classes[c];
    StochasticMatrix sub(members.size());
    for (std::size_t i = 0; i < members.size(); ++i)
      for (std::size_t j = 0; j < members.size(); ++j)
        sub(i, j) = p(std::size_t(members[i]), std::size_t(members[j]));
    sub.renormalize_rows();
    auto x = stationary_irreducible(sub);
    for (std::size_t i = 0; i < members.size(); ++i)
      lambda.w[std::size_t(members[i])] += weights[c] * x[i];
  }

  double res = invariant_residual(p, lambda);
  if (res > kResidualTarget && p.size() <= kDenseLimit)
    throw Error("invariant solve: residual " + std::to_string(res) +
                " above 1e-12");
  return lambda;
}

}  // namespace imitatio
