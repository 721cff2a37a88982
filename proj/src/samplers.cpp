#include "imitatio/samplers.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <mutex>
#include <set>
#include <thread>

#include "imitatio/errors.hpp"
#include "imitatio/invariant.hpp"
#include "imitatio/structure.hpp"
#include "json.hpp"

namespace imitatio {

namespace {

std::vector<std::int64_t> sorted_window(const std::vector<std::int64_t>& w) {
  if (w.empty()) throw PreconditionError("sampler: empty window");
  auto out = w;
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

std::int64_t floor_div(std::int64_t a, std::int64_t b) {
  std::int64_t q = a / b, r = a % b;
  return (r != 0 && ((r < 0) != (b < 0))) ? q - 1 : q;
}

}  // namespace

int boundary_value(const BoundarySpec& boundary, std::int64_t site,
                   SiteRandomness& rnd) {
  if (const auto* c = std::get_if<ConstantBoundary>(&boundary)) return c->state;
  if (const auto* iid = std::get_if<IidBoundary>(&boundary))
    return iid->law.sample(
        rnd.stream_uniform(Stream::BoundaryIid, std::uint64_t(site)));
  if (const auto* alt = std::get_if<AlternatingBoundary>(&boundary)) {
    const std::int64_t len = std::int64_t(alt->pattern.size());
    if (len == 0)
      throw PreconditionError("boundary_value: empty alternating pattern");
    std::int64_t idx = ((site + alt->phase) % len + len) % len;
    return alt->pattern[std::size_t(idx)];
  }
  const auto& ex = std::get<ExplicitBoundary>(boundary);
  auto it = ex.values.find(site);
  return it == ex.values.end() ? ex.fill : it->second;
}

std::string to_string(Algorithm a) {
  switch (a) {
    case Algorithm::Cftp: return "cftp";
    case Algorithm::EpsPerfect: return "eps";
    case Algorithm::Doeblin: return "doeblin";
    case Algorithm::Forward: return "forward";
  }
  return "?";
}

std::map<std::int64_t, int> forward_simulate(const ImitationKernel& kernel,
                                             const BoundarySpec& boundary,
                                             std::int64_t r,
                                             const std::vector<std::int64_t>& window,
                                             SiteRandomness& rnd) {
  auto sites = sorted_window(window);
  const std::int64_t top = sites.back();
  if (top <= r)
    throw PreconditionError("forward_simulate: window must extend beyond r");
  std::map<std::int64_t, int> x;
  for (std::int64_t n = r + 1; n <= top; ++n) {
    std::int64_t k = rnd.decrement_at(n);
    std::int64_t src_site = n - k;
    int src = src_site <= r ? boundary_value(boundary, src_site, rnd)
                            : x.at(src_site);
    x[n] = apply_coupling(kernel.matrix_at(k), src, rnd.uniform_at(n));
  }
  return x;
}

Replicate cftp_sample(const ImitationKernel& kernel,
                      const std::vector<std::int64_t>& window,
                      SiteRandomness& rnd, const Distribution& invariant,
                      std::uint64_t step_cap) {
  auto check = coalescence_verdict(kernel);
  if (check.verdict != Coalescence::ProvenCoalescent)
    throw PreconditionError(
        "cftp_sample: decrement law not provably coalescent (" + check.reason +
        "); use the eps-perfect sampler instead");
  if (invariant.size() != kernel.states())
    throw PreconditionError("cftp_sample: invariant size mismatch");

  auto report = joint_coalescence(window, rnd, std::nullopt, step_cap);
  const std::int64_t sl = *report.s_lambda;

  std::map<std::int64_t, int> value;
  value[sl] = invariant.sample(rnd.stream_uniform(Stream::InvariantDraw, 0));
  for (std::int64_t site : report.visited) {
    if (site <= sl) continue;
    std::int64_t k = rnd.decrement_at(site);
    auto src = value.find(site - k);
    if (src == value.end())
      throw Error("cftp_sample: internal: fill read an unassigned site");
    value[site] =
        apply_coupling(kernel.matrix_at(k), src->second, rnd.uniform_at(site));
  }

  Replicate rep;
  rep.window = report.window;
  rep.values.reserve(rep.window.size());
  for (auto site : rep.window) rep.values.push_back(value.at(site));
  rep.diag.algorithm = Algorithm::Cftp;
  rep.diag.steps = report.steps;
  rep.diag.s_lambda = sl;
  return rep;
}

Replicate eps_perfect_sample(const ImitationKernel& kernel,
                             const std::vector<std::int64_t>& window,
                             std::int64_t threshold, SiteRandomness& rnd,
                             const Distribution& invariant,
                             std::uint64_t step_cap) {
  auto sites = sorted_window(window);
  if (threshold >= sites.front())
    throw PreconditionError("eps_perfect_sample: threshold must lie below the window");
  if (invariant.size() != kernel.states())
    throw PreconditionError("eps_perfect_sample: invariant size mismatch");

  std::vector<std::int64_t> visited;
  std::set<std::int64_t> landings;
  std::uint64_t steps = 0;
  for (auto site : sites) {
    WalkTrajectory traj;
    auto landing = walk_to_threshold(site, threshold, rnd, step_cap, &traj);
    steps += landing.steps;
    visited.insert(visited.end(), traj.positions.begin(), traj.positions.end());
    landings.insert(landing.site);
  }
  std::sort(visited.begin(), visited.end());
  visited.erase(std::unique(visited.begin(), visited.end()), visited.end());

  std::map<std::int64_t, int> value;
  std::uint64_t draw = 0;
  for (auto site : landings)  // ascending: draw indices are reproducible
    value[site] = invariant.sample(rnd.stream_uniform(Stream::InvariantDraw, draw++));
  for (auto site : visited) {
    if (value.count(site)) continue;
    std::int64_t k = rnd.decrement_at(site);
    auto src = value.find(site - k);
    if (src == value.end())
      throw Error("eps_perfect_sample: internal: fill read an unassigned site");
    value[site] =
        apply_coupling(kernel.matrix_at(k), src->second, rnd.uniform_at(site));
  }

  Replicate rep;
  rep.window = sites;
  for (auto site : sites) rep.values.push_back(value.at(site));
  rep.diag.algorithm = Algorithm::EpsPerfect;
  rep.diag.steps = steps;
  rep.diag.threshold = threshold;
  return rep;
}

namespace {

struct DoeblinGroup {
  std::int64_t pos = 0;
  bool alive = true;
  std::vector<std::int64_t> members;
  std::vector<std::int64_t> visited;
  std::vector<std::int64_t> buffer;  // trailing letters, walk order
  std::int64_t buffer_depth = 0;
  struct Segment {
    std::int64_t bottom, top;
    double ustar;
  };
  std::vector<Segment> segments;  // recorded (failed) regeneration windows
};

}  // namespace

Replicate doeblin_sample(const ImitationKernel& kernel,
                         const std::vector<std::int64_t>& window,
                         const DoeblinCertificate& cert, SiteRandomness& rnd,
                         std::uint64_t step_cap) {
  auto sites = sorted_window(window);
  if (cert.q_bar.size() != kernel.states())
    throw PreconditionError("doeblin_sample: certificate does not match the kernel");
  const std::int64_t n0 = cert.n0_bar;

  WordTrie trie;
  for (const auto& w : cert.words) trie.insert(w);

  std::vector<DoeblinGroup> groups(sites.size());
  std::vector<int> parent(sites.size());
  auto find = [&](int x) {
    while (parent[std::size_t(x)] != x)
      x = parent[std::size_t(x)] = parent[std::size_t(parent[std::size_t(x)])];
    return x;
  };
  std::map<std::int64_t, int> positions;     // current position -> group id
  std::map<std::int64_t, int> visited_by;    // site -> group id
  for (std::size_t i = 0; i < sites.size(); ++i) {
    parent[i] = int(i);
    groups[i].pos = sites[i];
    groups[i].members = {sites[i]};
    groups[i].visited = {sites[i]};
    positions[sites[i]] = int(i);
    visited_by[sites[i]] = int(i);
  }

  std::map<std::int64_t, int> results;
  std::uint64_t steps = 0, ustar_index = 0;

  auto fill_group = [&](int gid, std::int64_t success_top) {
    DoeblinGroup& g = groups[std::size_t(gid)];
    std::sort(g.visited.begin(), g.visited.end());
    std::sort(g.segments.begin(), g.segments.end(),
              [](const DoeblinGroup::Segment& a, const DoeblinGroup::Segment& b) {
                return a.bottom < b.bottom;
              });
    std::map<std::int64_t, int> value;
    value[success_top] = cert.target;
    for (std::int64_t site : g.visited) {
      if (site <= success_top) continue;
      // locate the recorded segment containing or topped by this site
      auto seg = std::upper_bound(
          g.segments.begin(), g.segments.end(), site,
          [](std::int64_t s, const DoeblinGroup::Segment& x) {
            return s <= x.bottom;
          });
      const DoeblinGroup::Segment* hit =
          seg == g.segments.begin() ? nullptr : &*std::prev(seg);
      if (hit && site < hit->top) continue;  // segment interior, never read
      if (hit && site == hit->top) {
        value[site] = star_coupling(cert, value.at(hit->bottom), hit->ustar);
        continue;
      }
      std::int64_t k = rnd.decrement_at(site);
      auto src = value.find(site - k);
      if (src == value.end())
        throw Error("doeblin_sample: internal: fill read an unassigned site");
      value[site] = apply_coupling(kernel.matrix_at(k), src->second,
                                   rnd.uniform_at(site));
    }
    for (auto m : g.members) results[m] = value.at(m);
  };

  while (!positions.empty()) {
    auto it = std::prev(positions.end());  // rightmost walk moves
    const std::int64_t pos = it->first;
    const int gid = find(it->second);
    DoeblinGroup& g = groups[std::size_t(gid)];

    if (steps >= step_cap)
      throw StepCapExceeded("doeblin_sample: step cap " +
                            std::to_string(step_cap) + " exceeded");
    const std::int64_t k = rnd.decrement_at(pos);
    ++steps;
    const std::int64_t land = pos - k;
    g.buffer.push_back(k);
    g.buffer_depth += k;
    while (g.buffer_depth - g.buffer.front() >= n0) {
      g.buffer_depth -= g.buffer.front();
      g.buffer.erase(g.buffer.begin());
    }

    auto touch = visited_by.find(land);
    if (touch != visited_by.end() && find(touch->second) != gid) {
      // First contact with another walk's path: the memoized decrements
      // would retrace that path exactly, so merge at once and resume from
      // the deeper position. Merging resets segment detection.
      const int other = find(touch->second);
      DoeblinGroup& o = groups[std::size_t(other)];
      if (!o.alive)
        throw Error("doeblin_sample: internal: walk reached a retired path");
      positions.erase(it);
      positions.erase(o.pos);
      const std::int64_t merged_pos = o.pos;
      parent[std::size_t(other)] = gid;
      g.members.insert(g.members.end(), o.members.begin(), o.members.end());
      g.visited.insert(g.visited.end(), o.visited.begin(), o.visited.end());
      g.segments.insert(g.segments.end(), o.segments.begin(), o.segments.end());
      o.alive = false;
      o.members.clear();
      o.visited.clear();
      o.segments.clear();
      g.buffer.clear();
      g.buffer_depth = 0;
      g.pos = merged_pos;
      positions[merged_pos] = gid;
      continue;
    }

    positions.erase(it);
    visited_by.emplace(land, gid);
    g.visited.push_back(land);
    g.pos = land;
    positions[land] = gid;

    if (!trie.matches_suffix(g.buffer)) continue;
    const std::int64_t top = land + n0;
    bool clear_below = true;  // every other walk more than n0 below the segment
    for (const auto& [p, pg] : positions) {
      if (find(pg) == gid) continue;
      if (land - p <= n0) {
        clear_below = false;
        break;
      }
    }
    if (!clear_below) continue;
    bool overlaps = false;
    for (const auto& s : g.segments)
      if (land < s.top && s.bottom < top) {
        overlaps = true;
        break;
      }
    if (overlaps) continue;

    const double ustar = rnd.stream_uniform(Stream::SegmentAccept, ustar_index++);
    if (ustar < cert.epsilon_star) {
      fill_group(gid, top);
      positions.erase(land);
      g.alive = false;
    } else {
      g.segments.push_back({land, top, ustar});
    }
  }

  Replicate rep;
  rep.window = sites;
  for (auto site : sites) rep.values.push_back(results.at(site));
  rep.diag.algorithm = Algorithm::Doeblin;
  rep.diag.steps = steps;
  return rep;
}

Replicate stationary_sample_periodic(const ImitationKernel& kernel,
                                     const std::vector<std::int64_t>& window,
                                     SiteRandomness& rnd,
                                     std::int64_t threshold,
                                     std::uint64_t step_cap) {
  auto report = uniqueness_verdict(kernel);
  if (report.verdict != Verdict::NonUniquePeriodic)
    throw PreconditionError("stationary_sample_periodic: verdict is " +
                            to_string(report.verdict) +
                            "; this sampler handles NonUniquePeriodic kernels");
  auto inv = invariant_distribution(p_hat(kernel));
  if (coalescence_verdict(kernel).verdict == Coalescence::ProvenCoalescent)
    return cftp_sample(kernel, window, rnd, inv, step_cap);
  return eps_perfect_sample(kernel, window, threshold, rnd, inv, step_cap);
}

namespace {

struct ResidueGroup {
  std::int64_t h = 0;
  std::vector<std::int64_t> mapped;  // (site - h) / d, ascending
  std::vector<std::size_t> idx;      // positions in the batch window
  std::int64_t mapped_threshold = 0; // eps only
};

struct BatchContext {
  const ImitationKernel* kernel = nullptr;
  std::int64_t d = 1;
  std::optional<ImitationKernel> reduced;
  std::optional<Distribution> invariant;
  std::optional<DoeblinCertificate> cert;
  std::vector<ResidueGroup> residues;  // empty when d == 1 or Forward
  BoundarySpec boundary = ConstantBoundary{0};
  std::int64_t forward_start = 0;
};

const ImitationKernel& working_kernel(const BatchContext& ctx) {
  return ctx.reduced ? *ctx.reduced : *ctx.kernel;
}

}  // namespace

SampleBatch sample_batch(const ImitationKernel& kernel,
                         const std::vector<std::int64_t>& window,
                         const SampleOptions& options) {
  if (options.replicas == 0)
    throw PreconditionError("sample_batch: need at least one replicate");
  SampleBatch batch;
  batch.algorithm = options.algorithm;
  batch.master_seed = options.seed;
  batch.window = sorted_window(window);

  BatchContext ctx;
  ctx.kernel = &kernel;
  ctx.d = options.algorithm == Algorithm::Forward ? 1 : alphabet_gcd(kernel);

  const bool needs_invariant =
      options.algorithm == Algorithm::Cftp ||
      options.algorithm == Algorithm::EpsPerfect ||
      (options.algorithm == Algorithm::Forward && !options.boundary);
  if (needs_invariant)
    ctx.invariant =
        invariant_distribution(p_hat(kernel), options.invariant_weights);

  if (options.algorithm == Algorithm::EpsPerfect) {
    if (!options.threshold)
      throw PreconditionError("sample_batch: eps sampler needs a threshold");
    if (*options.threshold >= batch.window.front())
      throw PreconditionError("sample_batch: threshold must lie below the window");
  }

  if (ctx.d > 1) {
    ctx.reduced = reduce_kernel(kernel);
    std::map<std::int64_t, ResidueGroup> by_h;
    for (std::size_t i = 0; i < batch.window.size(); ++i) {
      const std::int64_t site = batch.window[i];
      const std::int64_t mapped = floor_div(site, ctx.d);
      const std::int64_t h = site - ctx.d * mapped;
      auto& grp = by_h[h];
      grp.h = h;
      grp.mapped.push_back(mapped);
      grp.idx.push_back(i);
    }
    for (auto& [h, grp] : by_h) {
      if (options.threshold)
        grp.mapped_threshold = floor_div(*options.threshold - h, ctx.d);
      ctx.residues.push_back(std::move(grp));
    }
  }

  if (options.algorithm == Algorithm::Doeblin)
    ctx.cert = doeblin_certificate(working_kernel(ctx));
  if (options.algorithm == Algorithm::Forward) {
    ctx.forward_start =
        options.forward_start.value_or(batch.window.front() - 200);
    if (options.boundary)
      ctx.boundary = *options.boundary;
    else
      ctx.boundary = IidBoundary{*ctx.invariant};
  }

  batch.replicates.assign(options.replicas, {});
  batch.diagnostics.assign(options.replicas, {});

  auto run_one = [&](std::uint64_t i) {
    const std::uint64_t seed_i = RandomSource::replica_seed(options.seed, i);
    std::vector<int> values(batch.window.size(), -1);
    ReplicateDiagnostics diag;
    diag.algorithm = options.algorithm;
    diag.seed = seed_i;

    if (options.algorithm == Algorithm::Forward) {
      RandomSource rnd(kernel, seed_i);
      auto sim = forward_simulate(kernel, ctx.boundary, ctx.forward_start,
                                  batch.window, rnd);
      for (std::size_t w = 0; w < batch.window.size(); ++w) {
        const std::int64_t site = batch.window[w];
        values[w] = site <= ctx.forward_start
                        ? boundary_value(ctx.boundary, site, rnd)
                        : sim.at(site);
      }
      diag.steps = std::uint64_t(batch.window.back() - ctx.forward_start);
    } else if (ctx.d == 1) {
      RandomSource rnd(kernel, seed_i);
      Replicate rep;
      switch (options.algorithm) {
        case Algorithm::Cftp:
          rep = cftp_sample(kernel, batch.window, rnd, *ctx.invariant,
                            options.step_cap);
          break;
        case Algorithm::EpsPerfect:
          rep = eps_perfect_sample(kernel, batch.window, *options.threshold,
                                   rnd, *ctx.invariant, options.step_cap);
          break;
        case Algorithm::Doeblin:
          rep = doeblin_sample(kernel, batch.window, *ctx.cert, rnd,
                               options.step_cap);
          break;
        default:
          throw Error("sample_batch: unreachable");
      }
      values = rep.values;
      diag.steps = rep.diag.steps;
      diag.s_lambda = rep.diag.s_lambda;
      diag.threshold = rep.diag.threshold;
    } else {
      for (const auto& grp : ctx.residues) {
        RandomSource rnd(*ctx.reduced,
                         RandomSource::residue_seed(seed_i, std::uint64_t(grp.h)));
        Replicate rep;
        switch (options.algorithm) {
          case Algorithm::Cftp:
            rep = cftp_sample(*ctx.reduced, grp.mapped, rnd, *ctx.invariant,
                              options.step_cap);
            break;
          case Algorithm::EpsPerfect:
            rep = eps_perfect_sample(*ctx.reduced, grp.mapped,
                                     grp.mapped_threshold, rnd, *ctx.invariant,
                                     options.step_cap);
            break;
          case Algorithm::Doeblin:
            rep = doeblin_sample(*ctx.reduced, grp.mapped, *ctx.cert, rnd,
                                 options.step_cap);
            break;
          default:
            throw Error("sample_batch: unreachable");
        }
        for (std::size_t j = 0; j < grp.idx.size(); ++j)
          values[grp.idx[j]] = rep.values[j];
        diag.steps += rep.diag.steps;
      }
      diag.threshold = options.threshold;
    }
    batch.replicates[i] = std::move(values);
    batch.diagnostics[i] = diag;
  };

  unsigned nthreads = options.threads
                          ? options.threads
                          : std::max(1u, std::thread::hardware_concurrency());
  nthreads = unsigned(std::min<std::uint64_t>(nthreads, options.replicas));
  if (nthreads <= 1) {
    for (std::uint64_t i = 0; i < options.replicas; ++i) run_one(i);
  } else {
    std::atomic<std::uint64_t> next{0};
    std::atomic<bool> failed{false};
    std::mutex err_mutex;
    std::exception_ptr first_error;
    auto worker = [&]() {
      while (!failed.load(std::memory_order_relaxed)) {
        const std::uint64_t i = next.fetch_add(1);
        if (i >= options.replicas) return;
        try {
          run_one(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(err_mutex);
          if (!first_error) first_error = std::current_exception();
          failed.store(true);
          return;
        }
      }
    };
    std::vector<std::thread> pool;
    pool.reserve(nthreads);
    for (unsigned t = 0; t < nthreads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
  }

  if (options.algorithm == Algorithm::EpsPerfect && options.estimate_eps_error) {
    const std::uint64_t est_n = std::min<std::uint64_t>(options.replicas, 2000);
    const std::uint64_t est_seed = options.seed ^ 0x9E3779B97F4A7C15ull;
    if (batch.window.size() < 2) {
      TailEstimate exact;
      exact.replicas = est_n;
      exact.heuristic = false;  // single walk: the marginal is exact
      batch.eps_error = exact;
    } else if (ctx.d == 1) {
      const std::int64_t u = *options.threshold;
      const std::int64_t horizon = 10 * (batch.window.front() - u) + 1000;
      batch.eps_error = s_hat_tail_estimate(kernel, batch.window, u, horizon,
                                            est_n, est_seed);
    } else {
      TailEstimate combined;
      combined.replicas = est_n;
      double miss = 1.0;
      for (const auto& grp : ctx.residues) {
        if (grp.mapped.size() < 2) continue;
        const std::int64_t u = grp.mapped_threshold;
        const std::int64_t horizon = 10 * (grp.mapped.front() - u) + 1000;
        auto est = s_hat_tail_estimate(*ctx.reduced, grp.mapped, u, horizon,
                                       est_n, est_seed ^ std::uint64_t(grp.h));
        miss *= 1.0 - est.fraction;  // residue processes are independent
        combined.ci_half_width += est.ci_half_width;
        combined.hits += est.hits;
      }
      combined.fraction = 1.0 - miss;
      batch.eps_error = combined;
    }
  }
  return batch;
}

std::string batch_to_csv(const SampleBatch& batch) {
  std::string out = "replica,site,state\n";
  out.reserve(out.size() + batch.replicates.size() * batch.window.size() * 12);
  for (std::size_t i = 0; i < batch.replicates.size(); ++i)
    for (std::size_t w = 0; w < batch.window.size(); ++w) {
      out += std::to_string(i);
      out += ',';
      out += std::to_string(batch.window[w]);
      out += ',';
      out += std::to_string(batch.replicates[i][w] + 1);
      out += '\n';
    }
  return out;
}

std::string batch_diagnostics_json(const SampleBatch& batch) {
  nlohmann::ordered_json j;
  j["algorithm"] = to_string(batch.algorithm);
  j["seed"] = batch.master_seed;
  j["replicas"] = batch.replicates.size();
  j["window"] = batch.window;
  std::optional<std::int64_t> threshold;
  j["steps"] = nlohmann::ordered_json::array();
  j["s_lambda"] = nlohmann::ordered_json::array();
  j["replica_seeds"] = nlohmann::ordered_json::array();
  for (const auto& d : batch.diagnostics) {
    j["steps"].push_back(d.steps);
    if (d.s_lambda)
      j["s_lambda"].push_back(*d.s_lambda);
    else
      j["s_lambda"].push_back(nullptr);
    j["replica_seeds"].push_back(d.seed);
    if (d.threshold) threshold = d.threshold;
  }
  if (threshold)
    j["threshold"] = *threshold;
  else
    j["threshold"] = nullptr;
  if (batch.eps_error) {
    j["eps_error"] = {{"fraction", batch.eps_error->fraction},
                      {"ci_half_width", batch.eps_error->ci_half_width},
                      {"replicas", batch.eps_error->replicas},
                      {"hits", batch.eps_error->hits},
                      {"heuristic", batch.eps_error->heuristic}};
  } else {
    j["eps_error"] = nullptr;
  }
  return j.dump(2) + "\n";
}

}  // namespace imitatio
