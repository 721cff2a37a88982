#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "imitatio/coupling.hpp"
#include "imitatio/kernel.hpp"
#include "imitatio/matrix.hpp"
#include "imitatio/random_source.hpp"
#include "imitatio/walks.hpp"

namespace imitatio {

// Boundary condition fixing the values at every site <= r.
struct ConstantBoundary {
  int state = 0;
};
struct IidBoundary {
  Distribution law;  // one independent draw per site, recomputable
};
struct AlternatingBoundary {
  std::vector<int> pattern;  // value at site k is pattern[(k+phase) mod len]
  std::int64_t phase = 0;
};
struct ExplicitBoundary {
  std::map<std::int64_t, int> values;
  int fill = 0;  // sites missing from the map
};
using BoundarySpec =
    std::variant<ConstantBoundary, IidBoundary, AlternatingBoundary,
                 ExplicitBoundary>;

int boundary_value(const BoundarySpec& boundary, std::int64_t site,
                   SiteRandomness& rnd);

enum class Algorithm { Cftp, EpsPerfect, Doeblin, Forward };
std::string to_string(Algorithm a);

struct ReplicateDiagnostics {
  Algorithm algorithm = Algorithm::Cftp;
  std::uint64_t seed = 0;      // filled by the batch runner
  std::uint64_t steps = 0;     // decrement draws consumed by walks
  std::optional<std::int64_t> s_lambda;   // realized coalescence site (cftp)
  std::optional<std::int64_t> threshold;  // u (eps)
};

struct Replicate {
  std::vector<std::int64_t> window;  // ascending, deduplicated
  std::vector<int> values;           // parallel to window
  ReplicateDiagnostics diag;
};

/// Simulates X_n for n in (r, max window] in increasing order, reading
/// sites <= r from the boundary. Returns every simulated site.
std::map<std::int64_t, int> forward_simulate(const ImitationKernel& kernel,
                                             const BoundarySpec& boundary,
                                             std::int64_t r,
                                             const std::vector<std::int64_t>& window,
                                             SiteRandomness& rnd);

/// Algorithm 1: exact sampling via coalescence of the backward walks.
/// Draws the value at the coalescence site from `invariant` and rebuilds
/// the window values through the memoized decrements. Refuses kernels
/// whose decrement law is not provably coalescent.
Replicate cftp_sample(const ImitationKernel& kernel,
                      const std::vector<std::int64_t>& window,
                      SiteRandomness& rnd, const Distribution& invariant,
                      std::uint64_t step_cap = kDefaultStepCap);

/// Algorithm 2: runs each walk down to the threshold u and plants an
/// independent invariant draw at every distinct landing site. Walks that
/// meet share all later decrements, so they land together. Total variation
/// error is bounded by the chance some pair coalesces only below u.
Replicate eps_perfect_sample(const ImitationKernel& kernel,
                             const std::vector<std::int64_t>& window,
                             std::int64_t threshold, SiteRandomness& rnd,
                             const Distribution& invariant,
                             std::uint64_t step_cap = kDefaultStepCap);

/// Algorithm 3: regeneration through Doeblin segments. Each walk group
/// advances under rightmost-moves; when the trailing letters spell a
/// certificate word on a stretch lying more than n0_bar above every other
/// group, a dedicated uniform decides regeneration. On success the
/// segment top is pinned to the certificate target and the group's sites
/// are filled upward, star-coupling across previously recorded segments.
Replicate doeblin_sample(const ImitationKernel& kernel,
                         const std::vector<std::int64_t>& window,
                         const DoeblinCertificate& cert, SiteRandomness& rnd,
                         std::uint64_t step_cap = kDefaultStepCap);

/// Unique-stationary-element sampler for essentially irreducible periodic
/// kernels: cftp when the decrement law is provably coalescent, otherwise
/// the eps-perfect sampler at `threshold`.
Replicate stationary_sample_periodic(const ImitationKernel& kernel,
                                     const std::vector<std::int64_t>& window,
                                     SiteRandomness& rnd,
                                     std::int64_t threshold,
                                     std::uint64_t step_cap = kDefaultStepCap);

struct SampleOptions {
  Algorithm algorithm = Algorithm::Cftp;
  std::uint64_t replicas = 1;
  std::uint64_t seed = 1;
  std::optional<std::int64_t> threshold;  // required for EpsPerfect
  std::optional<std::vector<double>> invariant_weights;
  std::optional<BoundarySpec> boundary;      // Forward only
  std::optional<std::int64_t> forward_start; // Forward only; default min-200
  std::uint64_t step_cap = kDefaultStepCap;
  unsigned threads = 0;  // 0 picks the hardware count
  bool estimate_eps_error = true;
};

struct SampleBatch {
  Algorithm algorithm = Algorithm::Cftp;
  std::uint64_t master_seed = 0;
  std::vector<std::int64_t> window;          // ascending, deduplicated
  std::vector<std::vector<int>> replicates;  // [replica][window index]
  std::vector<ReplicateDiagnostics> diagnostics;
  std::optional<TailEstimate> eps_error;
};

/// Runs `replicas` independent replicates concurrently, one RandomSource
/// per replicate seeded from (seed, index), so output never depends on
/// the thread count. Kernels whose letter gcd d exceeds 1 are reduced and
/// sampled residue class by residue class, independently, then interleaved.
SampleBatch sample_batch(const ImitationKernel& kernel,
                         const std::vector<std::int64_t>& window,
                         const SampleOptions& options);

/// CSV rows replica,site,state ordered by (replica, site); states 1-based.
std::string batch_to_csv(const SampleBatch& batch);

/// Sidecar document: algorithm, seed, per-replicate steps and realized
/// coalescence data, and the eps error estimate when present.
std::string batch_diagnostics_json(const SampleBatch& batch);

}  // namespace imitatio
