#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <vector>

#include "imitatio/kernel.hpp"
#include "imitatio/random_source.hpp"

namespace imitatio {

inline constexpr std::uint64_t kDefaultStepCap = 100000000ull;

/// One backward walk: positions T_0 = start > T_1 > ... with
/// T_{i+1} = T_i - K_{T_i}.
struct WalkTrajectory {
  std::int64_t start = 0;
  std::vector<std::int64_t> positions;  // includes start, strictly decreasing
};

struct WalkLanding {
  std::uint64_t steps = 0;   // M_r: number of steps to reach the threshold
  std::int64_t site = 0;     // V_r: first position at or below the threshold
};

/// Walks from `start` until the position is <= threshold.
WalkLanding walk_to_threshold(std::int64_t start, std::int64_t threshold,
                              SiteRandomness& rnd,
                              std::uint64_t step_cap = kDefaultStepCap,
                              WalkTrajectory* trajectory = nullptr);

struct CoalescenceReport {
  std::vector<std::int64_t> window;
  /// Pairwise coalescence points, keyed by (smaller site, larger site);
  /// empty optional = not within the horizon.
  std::map<std::pair<std::int64_t, std::int64_t>, std::optional<std::int64_t>>
      pairwise;
  /// Site of the last merger once a single walk remains; for a singleton
  /// window the site itself; empty when the horizon cut the run short.
  std::optional<std::int64_t> s_lambda;
  /// Window sites grouped by the walk they ended up merged into.
  std::vector<std::vector<std::int64_t>> classes;
  /// Every site any walk visited, ascending. Each visited site above
  /// s_lambda keeps its decrement in the shared source, so values can be
  /// propagated forward along the arcs site -> site - K_site.
  std::vector<std::int64_t> visited;
  std::uint64_t steps = 0;
};

/// Runs the backward walks of all window sites jointly under the
/// rightmost-moves rule: only the rightmost walk advances, and walks that
/// land on an occupied site merge. Stops once a single walk remains, or
/// when every position has dropped below min(window) - horizon.
CoalescenceReport joint_coalescence(const std::vector<std::int64_t>& window,
                                    SiteRandomness& rnd,
                                    std::optional<std::int64_t> horizon,
                                    std::uint64_t step_cap = kDefaultStepCap);

/// Distance chain between two walks under rightmost-moves: the distance
/// drops by an independent theta draw and reflects to its absolute value.
/// Returns the number of steps until it first hits 0 exactly, or nullopt
/// if that does not happen within `horizon` steps.
std::optional<std::uint64_t> von_schelling_simulate(const ImitationKernel& kernel,
                                                    std::int64_t start_distance,
                                                    std::uint64_t horizon,
                                                    SiteRandomness& rnd);

struct TailEstimate {
  double fraction = 0.0;        // estimate of P(some pairwise point < u)
  double ci_half_width = 0.0;   // Wilson score 95% half width
  std::uint64_t replicas = 0;
  std::uint64_t hits = 0;
  bool heuristic = true;        // always a horizon-limited Monte Carlo figure
};

/// Monte Carlo estimate of the chance that some finite pairwise
/// coalescence point of the window lies below u. Horizon-limited, so a
/// heuristic: pairs that neither meet nor cross u within the horizon
/// count as "not below".
TailEstimate s_hat_tail_estimate(const ImitationKernel& kernel,
                                 const std::vector<std::int64_t>& window,
                                 std::int64_t u, std::int64_t horizon,
                                 std::uint64_t replicas, std::uint64_t seed);

}  // namespace imitatio
