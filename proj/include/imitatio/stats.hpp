#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "imitatio/kernel.hpp"
#include "imitatio/samplers.hpp"

namespace imitatio {

/// Empirical law over window patterns, kept as exact integer counts.
struct EmpiricalDistribution {
  std::vector<std::int64_t> window;
  int states = 0;
  std::uint64_t total = 0;
  std::map<std::vector<int>, std::uint64_t> counts;
};

EmpiricalDistribution empirical_window_distribution(const SampleBatch& batch,
                                                    int states);

/// 0.5 * sum over patterns of |p - q|. Both sides must share window and
/// alphabet; patterns absent from one side count as frequency zero.
double tv_distance(const EmpiricalDistribution& p,
                   const EmpiricalDistribution& q);
double tv_distance(const std::vector<double>& p, const std::vector<double>& q);

/// Upper quantile of the chi-square law, via the regularized incomplete gamma.
double chi_square_quantile(double p, int df);

struct GofResult {
  double statistic = 0.0;
  double critical = 0.0;
  int df = 0;
  bool pass = false;
  std::vector<std::uint64_t> observed;
  std::vector<double> expected;
};

/// Pearson chi-square of the site marginal in `batch` against `target`,
/// alpha = 0.01. Requires every expected count >= 5.
GofResult gof_invariant(const SampleBatch& batch, std::int64_t site,
                        const Distribution& target);

struct TestRecord {
  std::string name;
  double statistic = 0.0;
  double critical = 0.0;
  bool pass = false;
  std::uint64_t n = 0;
  std::uint64_t seed = 0;
};

struct TvRecord {
  std::string a;
  std::string b;
  double tv = 0.0;
  double ci_half_width = 0.0;
  double threshold = 0.0;
  bool pass = false;
  bool underpowered = false;
};

struct ValidationReport {
  std::vector<std::int64_t> window;
  std::uint64_t replicas = 0;
  std::uint64_t seed = 0;
  std::vector<TestRecord> tests;
  std::vector<TvRecord> tv_estimates;
  bool all_pass = false;

  std::string to_text() const;
};

/// Samples the window with every algorithm (cftp, eps at two thresholds,
/// doeblin, forward oracle) and cross-checks: GOF of each source against
/// lambda-hat plus all pairwise TV distances. Requires a Unique verdict.
ValidationReport cross_algorithm_report(const ImitationKernel& kernel,
                                        const std::vector<std::int64_t>& window,
                                        std::uint64_t replicas,
                                        std::uint64_t seed);

}  // namespace imitatio
