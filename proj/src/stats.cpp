#include "imitatio/stats.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "imitatio/errors.hpp"
#include "imitatio/invariant.hpp"
#include "imitatio/structure.hpp"

namespace imitatio {

EmpiricalDistribution empirical_window_distribution(const SampleBatch& batch,
                                                    int states) {
  if (batch.replicates.empty())
    throw PreconditionError("empirical_window_distribution: empty batch");
  EmpiricalDistribution dist;
  dist.window = batch.window;
  dist.states = states;
  dist.total = batch.replicates.size();
  for (const auto& rep : batch.replicates) ++dist.counts[rep];
  return dist;
}

double tv_distance(const EmpiricalDistribution& p,
                   const EmpiricalDistribution& q) {
  if (p.window != q.window || p.states != q.states)
    throw PreconditionError("tv_distance: pattern domains differ");
  if (p.total == 0 || q.total == 0)
    throw PreconditionError("tv_distance: empty distribution");
  double sum = 0.0;
  auto ip = p.counts.begin();
  auto iq = q.counts.begin();
  while (ip != p.counts.end() || iq != q.counts.end()) {
    if (iq == q.counts.end() || (ip != p.counts.end() && ip->first < iq->first)) {
      sum += double(ip->second) / double(p.total);
      ++ip;
    } else if (ip == p.counts.end() || iq->first < ip->first) {
      sum += double(iq->second) / double(q.total);
      ++iq;
    } else {
      sum += std::fabs(double(ip->second) / double(p.total) -
                       double(iq->second) / double(q.total));
      ++ip;
      ++iq;
    }
  }
  return 0.5 * sum;
}

double tv_distance(const std::vector<double>& p, const std::vector<double>& q) {
  if (p.size() != q.size())
    throw PreconditionError("tv_distance: pattern domains differ");
  double sum = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) sum += std::fabs(p[i] - q[i]);
  return 0.5 * sum;
}

namespace {

// Regularized lower incomplete gamma P(a, x); series for x < a+1,
// continued fraction otherwise.
double gamma_p(double a, double x) {
  if (x <= 0.0) return 0.0;
  const double lg = std::lgamma(a);
  if (x < a + 1.0) {
    double ap = a, sum = 1.0 / a, del = sum;
    for (int i = 0; i < 500; ++i) {
      ap += 1.0;
      del *= x / ap;
      sum += del;
      if (std::fabs(del) < std::fabs(sum) * 1e-15) break;
    }
    return sum * std::exp(-x + a * std::log(x) - lg);
  }
  const double tiny = 1e-300;
  double b = x + 1.0 - a, c = 1.0 / tiny, d = 1.0 / b, h = d;
  for (int i = 1; i <= 500; ++i) {
    double an = -double(i) * (double(i) - a);
    b += 2.0;
    d = an * d + b;
    if (std::fabs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::fabs(c) < tiny) c = tiny;
    d = 1.0 / d;
    double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < 1e-15) break;
  }
  return 1.0 - std::exp(-x + a * std::log(x) - lg) * h;
}

}  // namespace

double chi_square_quantile(double p, int df) {
  if (df < 1 || p <= 0.0 || p >= 1.0)
    throw PreconditionError("chi_square_quantile: need df >= 1 and p in (0,1)");
  const double a = 0.5 * double(df);
  auto cdf = [&](double x) { return gamma_p(a, 0.5 * x); };
  double hi = std::max(1.0, double(df));
  while (cdf(hi) < p) hi *= 2.0;
  double lo = 0.0;
  for (int i = 0; i < 200; ++i) {
    double mid = 0.5 * (lo + hi);
    (cdf(mid) < p ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

GofResult gof_invariant(const SampleBatch& batch, std::int64_t site,
                        const Distribution& target) {
  auto pos = std::find(batch.window.begin(), batch.window.end(), site);
  if (pos == batch.window.end())
    throw PreconditionError("gof_invariant: site not in the batch window");
  const std::size_t col = std::size_t(pos - batch.window.begin());
  const int n = int(target.size());
  const double total = double(batch.replicates.size());

  GofResult res;
  res.df = n - 1;
  res.observed.assign(std::size_t(n), 0);
  res.expected.assign(std::size_t(n), 0.0);
  for (const auto& rep : batch.replicates) {
    int g = rep[col];
    if (g < 0 || g >= n)
      throw PreconditionError("gof_invariant: state outside the target alphabet");
    ++res.observed[std::size_t(g)];
  }
  for (int g = 0; g < n; ++g) {
    res.expected[std::size_t(g)] = total * target.w[std::size_t(g)];
    if (res.expected[std::size_t(g)] < 5.0)
      throw PreconditionError(
          "gof_invariant: expected count below 5; increase replicas");
  }
  for (int g = 0; g < n; ++g) {
    double diff = double(res.observed[std::size_t(g)]) - res.expected[std::size_t(g)];
    res.statistic += diff * diff / res.expected[std::size_t(g)];
  }
  res.critical = chi_square_quantile(0.99, res.df);
  res.pass = res.statistic <= res.critical;
  return res;
}

namespace {

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

}  // namespace

std::string ValidationReport::to_text() const {
  std::string out = "imitatio validation report\n";
  out += "window:";
  for (auto s : window) out += " " + std::to_string(s);
  out += "\nreplicas: " + std::to_string(replicas);
  out += "\nseed: " + std::to_string(seed);
  out += "\n\ngoodness of fit (alpha = 0.01):\n";
  for (const auto& t : tests) {
    out += t.pass ? "  [PASS] " : "  [FAIL] ";
    out += t.name + "  chi2=" + fmt(t.statistic) + " critical=" + fmt(t.critical) +
           " n=" + std::to_string(t.n) + " seed=" + std::to_string(t.seed) + "\n";
  }
  out += "\npairwise total variation:\n";
  for (const auto& e : tv_estimates) {
    out += e.pass ? "  [PASS] " : "  [FAIL] ";
    out += e.a + " vs " + e.b + "  tv=" + fmt(e.tv) + " ci=" + fmt(e.ci_half_width) +
           " threshold=" + fmt(e.threshold);
    if (e.underpowered) out += "  UNDERPOWERED (need >= 10000 replicas)";
    out += "\n";
  }
  out += "\noverall: ";
  out += all_pass ? "PASS" : "FAIL";
  out += "\n";
  return out;
}

ValidationReport cross_algorithm_report(const ImitationKernel& kernel,
                                        const std::vector<std::int64_t>& window,
                                        std::uint64_t replicas,
                                        std::uint64_t seed) {
  auto verdict = uniqueness_verdict(kernel);
  if (verdict.verdict != Verdict::Unique)
    throw PreconditionError("cross_algorithm_report: verdict is " +
                            to_string(verdict.verdict) +
                            "; cross-validation needs a unique law");
  if (replicas == 0)
    throw PreconditionError("cross_algorithm_report: need replicas >= 1");

  ValidationReport report;
  report.replicas = replicas;
  report.seed = seed;

  std::vector<std::int64_t> sites = window;
  std::sort(sites.begin(), sites.end());
  sites.erase(std::unique(sites.begin(), sites.end()), sites.end());
  report.window = sites;
  const std::int64_t lo = sites.front();

  auto lambda_hat = invariant_distribution(p_hat(kernel));

  struct Source {
    std::string name;
    SampleBatch batch;
  };
  std::vector<Source> sources;
  auto run = [&](const std::string& name, Algorithm alg,
                 std::optional<std::int64_t> threshold, std::uint64_t salt) {
    SampleOptions opts;
    opts.algorithm = alg;
    opts.replicas = replicas;
    opts.seed = seed + salt;
    opts.threshold = threshold;
    if (alg == Algorithm::Forward) opts.forward_start = lo - 200;
    sources.push_back({name, sample_batch(kernel, sites, opts)});
  };
  run("cftp", Algorithm::Cftp, std::nullopt, 0);
  run("eps(u=" + std::to_string(lo - 50) + ")", Algorithm::EpsPerfect, lo - 50, 1);
  run("eps(u=" + std::to_string(lo - 500) + ")", Algorithm::EpsPerfect, lo - 500, 2);
  run("doeblin", Algorithm::Doeblin, std::nullopt, 3);
  run("forward(r=" + std::to_string(lo - 200) + ")", Algorithm::Forward,
      std::nullopt, 4);

  const bool underpowered = replicas < 10000;
  bool ok = true;

  for (const auto& s : sources) {
    TestRecord t;
    t.name = "gof " + s.name + " site " + std::to_string(lo);
    t.n = replicas;
    t.seed = s.batch.master_seed;
    auto g = gof_invariant(s.batch, lo, lambda_hat);
    t.statistic = g.statistic;
    t.critical = g.critical;
    t.pass = g.pass;
    ok = ok && t.pass;
    report.tests.push_back(std::move(t));
  }

  std::vector<EmpiricalDistribution> dists;
  dists.reserve(sources.size());
  for (const auto& s : sources)
    dists.push_back(empirical_window_distribution(s.batch, int(kernel.states())));
  for (std::size_t i = 0; i < sources.size(); ++i)
    for (std::size_t j = i + 1; j < sources.size(); ++j) {
      TvRecord e;
      e.a = sources[i].name;
      e.b = sources[j].name;
      e.tv = tv_distance(dists[i], dists[j]);
      // plug-in binomial half-width; honest at the 0.02 decision threshold
      e.ci_half_width = 1.96 * std::sqrt(0.25 * (2.0 / double(replicas)));
      e.threshold = 0.02;
      e.underpowered = underpowered;
      e.pass = e.tv < e.threshold && !underpowered;
      ok = ok && e.pass;
      report.tv_estimates.push_back(std::move(e));
    }

  report.all_pass = ok;
  return report;
}

}  // namespace imitatio
