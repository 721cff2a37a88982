#include "imitatio/walks.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <unordered_map>

#include "imitatio/errors.hpp"

namespace imitatio {

WalkLanding walk_to_threshold(std::int64_t start, std::int64_t threshold,
                              SiteRandomness& rnd, std::uint64_t step_cap,
                              WalkTrajectory* trajectory) {
  if (start <= threshold)
    throw PreconditionError("walk_to_threshold: start must exceed the threshold");
  if (trajectory) {
    trajectory->start = start;
    trajectory->positions = {start};
  }
  std::int64_t pos = start;
  std::uint64_t steps = 0;
  while (pos > threshold) {
    if (steps >= step_cap)
      throw StepCapExceeded("walk_to_threshold: step cap " +
                            std::to_string(step_cap) + " exceeded");
    pos -= rnd.decrement_at(pos);
    ++steps;
    if (trajectory) trajectory->positions.push_back(pos);
  }
  return {steps, pos};
}

namespace {

// Tiny union-find over group ids.
struct Groups {
  std::vector<int> parent;
  int fresh() {
    parent.push_back(int(parent.size()));
    return parent.back();
  }
  int find(int x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  }
};

}  // namespace

CoalescenceReport joint_coalescence(const std::vector<std::int64_t>& window,
                                    SiteRandomness& rnd,
                                    std::optional<std::int64_t> horizon,
                                    std::uint64_t step_cap) {
  if (window.empty())
    throw PreconditionError("joint_coalescence: empty window");
  if (horizon && *horizon <= 0)
    throw PreconditionError("joint_coalescence: horizon must be positive");

  CoalescenceReport report;
  report.window = window;
  std::sort(report.window.begin(), report.window.end());
  report.window.erase(std::unique(report.window.begin(), report.window.end()),
                      report.window.end());
  const auto& sites = report.window;

  if (sites.size() == 1) {
    report.s_lambda = sites.front();
    report.classes = {{sites.front()}};
    report.visited = {sites.front()};
    return report;
  }

  Groups groups;
  std::unordered_map<std::int64_t, int> visited_by;  // site -> group id
  std::map<std::int64_t, int> position_of;           // current position -> group id
  std::vector<std::vector<std::int64_t>> members;    // by group id
  visited_by.reserve(1024);

  for (auto s : sites) {
    int g = groups.fresh();
    members.push_back({s});
    visited_by[s] = g;
    position_of[s] = g;
  }

  const std::int64_t floor_bound =
      horizon ? sites.front() - *horizon : std::numeric_limits<std::int64_t>::min();
  std::optional<std::int64_t> last_merge;

  while (position_of.size() > 1) {
    if (horizon && position_of.rbegin()->first < floor_bound) break;

    auto top = *position_of.rbegin();  // rightmost walk moves
    std::int64_t pos = top.first;
    int gid = groups.find(top.second);
    position_of.erase(pos);
    std::int64_t second = position_of.rbegin()->first;

    while (true) {
      if (report.steps >= step_cap)
        throw StepCapExceeded("joint_coalescence: step cap " +
                              std::to_string(step_cap) + " exceeded");
      pos -= rnd.decrement_at(pos);
      ++report.steps;

      auto hit = visited_by.find(pos);
      if (hit != visited_by.end() && groups.find(hit->second) != gid) {
        // First site shared with another walk: the pairwise coalescence
        // point of everything in the two groups.
        int other = groups.find(hit->second);
        for (auto m : members[std::size_t(gid)])
          for (auto n : members[std::size_t(other)]) {
            auto key = std::minmax(m, n);
            report.pairwise[{key.first, key.second}] = pos;
          }
        last_merge = pos;
        // The group that visited `pos` earlier may have walked on below it;
        // the merged walk resumes from the deeper position.
        std::int64_t other_pos = 0;
        for (auto it = position_of.begin(); it != position_of.end(); ++it)
          if (groups.find(it->second) == other) {
            other_pos = it->first;
            position_of.erase(it);
            break;
          }
        groups.parent[other] = gid;
        auto& mine = members[std::size_t(gid)];
        auto& theirs = members[std::size_t(other)];
        mine.insert(mine.end(), theirs.begin(), theirs.end());
        theirs.clear();
        position_of[std::min(pos, other_pos)] = gid;
        break;
      }
      visited_by[pos] = gid;
      if (pos <= second) {  // yields the turn to the next rightmost walk
        position_of[pos] = gid;
        break;
      }
    }
  }

  if (position_of.size() == 1) report.s_lambda = last_merge;

  for (std::size_t g = 0; g < members.size(); ++g)
    if (!members[g].empty()) {
      auto cls = members[g];
      std::sort(cls.begin(), cls.end());
      report.classes.push_back(std::move(cls));
    }
  std::sort(report.classes.begin(), report.classes.end());

  // Cross-group pairs that never met stay open.
  for (std::size_t a = 0; a < sites.size(); ++a)
    for (std::size_t b = a + 1; b < sites.size(); ++b) {
      std::pair<std::int64_t, std::int64_t> key{sites[a], sites[b]};
      if (!report.pairwise.count(key)) report.pairwise[key] = std::nullopt;
    }

  report.visited.reserve(visited_by.size());
  for (const auto& [site, g] : visited_by) report.visited.push_back(site);
  std::sort(report.visited.begin(), report.visited.end());
  return report;
}

std::optional<std::uint64_t> von_schelling_simulate(const ImitationKernel& kernel,
                                                    std::int64_t start_distance,
                                                    std::uint64_t horizon,
                                                    SiteRandomness& rnd) {
  if (start_distance < 0)
    throw PreconditionError("von_schelling_simulate: negative start distance");
  std::int64_t d = start_distance;
  for (std::uint64_t step = 0; step < horizon; ++step) {
    if (d == 0) return step;
    std::int64_t k =
        kernel.sample_decrement(rnd.stream_uniform(Stream::VonSchelling, step));
    d = d >= k ? d - k : k - d;
  }
  return d == 0 ? std::optional<std::uint64_t>(horizon) : std::nullopt;
}

TailEstimate s_hat_tail_estimate(const ImitationKernel& kernel,
                                 const std::vector<std::int64_t>& window,
                                 std::int64_t u, std::int64_t horizon,
                                 std::uint64_t replicas, std::uint64_t seed) {
  if (replicas == 0)
    throw PreconditionError("s_hat_tail_estimate: need at least one replica");
  if (window.size() < 2)
    throw PreconditionError("s_hat_tail_estimate: window needs at least two sites");
  std::uint64_t hits = 0;
  for (std::uint64_t i = 0; i < replicas; ++i) {
    RandomSource rnd(kernel, RandomSource::replica_seed(seed, i));
    auto report = joint_coalescence(window, rnd, horizon);
    bool below = false;
    for (const auto& [pair, site] : report.pairwise)
      if (site && *site < u) below = true;
    if (below) ++hits;
  }
  TailEstimate est;
  est.replicas = replicas;
  est.hits = hits;
  est.fraction = double(hits) / double(replicas);
  // Wilson score half-width: stays positive at zero hits, where the plain
  // normal approximation would collapse to an empty interval.
  const double z = 1.96;
  const double n = double(replicas);
  const double p = est.fraction;
  est.ci_half_width = z *
                      std::sqrt(p * (1.0 - p) / n + z * z / (4.0 * n * n)) /
                      (1.0 + z * z / n);
  return est;
}

}  // namespace imitatio
