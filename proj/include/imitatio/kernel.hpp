#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "imitatio/errors.hpp"
#include "imitatio/matrix.hpp"

namespace imitatio {

enum class TailFamily { Geometric, PowerLaw };

/// Infinite tail of the decrement law: all depths k >= start share one
/// matrix and carry total mass `mass`, split geometrically
/// (theta_{start+j} = mass*(1-param)*param^j) or by a power law
/// (theta_{start+j} proportional to (start+j)^-param, param > 1).
struct TailSpec {
  TailFamily family = TailFamily::Geometric;
  std::int64_t start = 0;
  double param = 0.0;
  double mass = 0.0;
  StochasticMatrix matrix;

  double theta_at(std::int64_t k) const;   // mass of depth k >= start
  double mass_from(std::int64_t k) const;  // total mass of depths >= k >= start

  /// Depth for residual tail mass u in [0, mass): smallest k with
  /// cumulative tail mass through k exceeding u.
  std::int64_t sample(double u) const;

  void prepare();  // builds the power-law normalizer and CDF cache

 private:
  // Power-law bookkeeping, filled by prepare().
  double normalizer_ = 0.0;              // sum of (start+j)^-param over j >= 0
  std::vector<double> cum_;              // cumulative (start+j)^-param
};

/// Finite-alphabet imitation kernel: depths k with weights theta_k and one
/// stochastic matrix per depth, plus an optional infinite tail.
class ImitationKernel {
 public:
  struct SupportEntry {
    std::int64_t k = 0;
    double theta = 0.0;
    StochasticMatrix matrix;
  };

  ImitationKernel() = default;
  ImitationKernel(std::size_t states, std::vector<SupportEntry> support,
                  std::optional<TailSpec> tail = std::nullopt,
                  std::vector<std::string> labels = {});

  std::size_t states() const { return states_; }
  const std::vector<SupportEntry>& support() const { return support_; }
  const std::optional<TailSpec>& tail() const { return tail_; }
  const std::vector<std::string>& labels() const { return labels_; }
  bool has_tail() const { return tail_.has_value(); }

  std::int64_t max_finite_depth() const;
  std::vector<std::int64_t> support_depths() const;  // finite depths, ascending

  /// Weight of one depth; 0 when the depth carries no mass.
  double theta_at(std::int64_t k) const;
  /// Matrix attached to a depth (finite entry or tail matrix). Throws when
  /// the depth carries no mass.
  const StochasticMatrix& matrix_at(std::int64_t k) const;

  /// Violation messages; empty when the kernel is structurally valid.
  std::vector<std::string> validate() const;

  /// Renormalizes rows and prepares tail caches. Call after validate()
  /// passed; parse_kernel_spec does this automatically.
  void finalize();

  /// Inverse CDF of the decrement law theta.
  std::int64_t sample_decrement(double u) const;

 private:
  std::size_t states_ = 0;
  std::vector<SupportEntry> support_;  // ascending by k
  std::optional<TailSpec> tail_;
  std::vector<std::string> labels_;
};

/// Parses, validates and finalizes a kernel from its JSON spec text.
/// Throws KernelValidationError listing every violation found.
ImitationKernel parse_kernel_spec(const std::string& text);

/// Inverse of parse_kernel_spec, stable under round trips.
std::string kernel_to_json(const ImitationKernel& kernel);

enum class Coalescence { ProvenCoalescent, Unknown };

struct CoalescenceCheck {
  Coalescence verdict = Coalescence::Unknown;
  double tail_square_sum = 0.0;  // sum over k of (mass of depths >= k)^2
  bool sum_converged = false;    // false when the reported sum is a cutoff value
  std::string reason;
};

/// Decides whether the decrement law provably makes backward walks from any
/// two sites meet: the alphabet gcd must be 1 and the squared-tail series
/// must converge (finite support and geometric tails always do; power-law
/// tails do exactly when the exponent exceeds 1.5).
CoalescenceCheck coalescence_verdict(const ImitationKernel& kernel);

}  // namespace imitatio
