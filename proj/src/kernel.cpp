#include "imitatio/kernel.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "imitatio/structure.hpp"
#include "json.hpp"

namespace imitatio {

namespace {

std::string fmt(double x) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.12g", x);
  return buf;
}

// Tail of the series sum_{n >= x} n^-alpha by Euler-Maclaurin; accurate to
// a few ulps once x is a few thousand.
double power_series_tail(double x, double alpha) {
  return std::pow(x, 1.0 - alpha) / (alpha - 1.0) +
         0.5 * std::pow(x, -alpha) +
         alpha / 12.0 * std::pow(x, -alpha - 1.0);
}

constexpr std::size_t kPowerLawCacheCap = 1u << 20;

}  // namespace

double TailSpec::theta_at(std::int64_t k) const {
  if (k < start) return 0.0;
  if (family == TailFamily::Geometric) {
    return mass * (1.0 - param) * std::pow(param, double(k - start));
  }
  return mass * std::pow(double(k), -param) / normalizer_;
}

double TailSpec::mass_from(std::int64_t k) const {
  if (k <= start) return mass;
  if (family == TailFamily::Geometric)
    return mass * std::pow(param, double(k - start));
  std::size_t idx = std::size_t(k - start);  // terms with index < idx are below k
  double remaining;
  if (idx <= cum_.size())
    remaining = normalizer_ - (idx == 0 ? 0.0 : cum_[idx - 1]);
  else
    remaining = power_series_tail(double(k), param);
  return mass * remaining / normalizer_;
}

std::int64_t TailSpec::sample(double u) const {
  if (u >= mass) u = std::nextafter(mass, 0.0);
  if (u < 0.0) u = 0.0;
  if (family == TailFamily::Geometric) {
    // smallest j with mass*(1 - param^(j+1)) > u
    double j_est = std::log1p(-u / mass) / std::log(param) - 1.0;
    std::int64_t j = std::max<std::int64_t>(0, std::int64_t(std::floor(j_est)));
    while (j > 0 && mass * (1.0 - std::pow(param, double(j))) > u) --j;
    while (mass * (1.0 - std::pow(param, double(j + 1))) <= u) ++j;
    return start + j;
  }
  // Power law: cumulative through start+i is mass*cum_[i]/normalizer_.
  double target = u * normalizer_ / mass;  // want smallest i with cum_[i] > target
  if (!cum_.empty() && cum_.back() > target) {
    auto it = std::upper_bound(cum_.begin(), cum_.end(), target);
    return start + std::int64_t(it - cum_.begin());
  }
  // Beyond the cache: the law there is defined by the same series-tail
  // formula used in mass_from, so inversion stays consistent and monotone.
  double r = normalizer_ - target;  // want smallest k with tail(k+1) < r
  double x_est = std::pow(std::max(r, 1e-300) * (param - 1.0), 1.0 / (1.0 - param));
  std::int64_t k = std::max<std::int64_t>(start + std::int64_t(cum_.size()),
                                          std::int64_t(x_est) - 2);
  while (power_series_tail(double(k + 1), param) >= r) ++k;
  while (k > start + std::int64_t(cum_.size()) &&
         power_series_tail(double(k), param) < r)
    --k;
  return k;
}

void TailSpec::prepare() {
  if (family != TailFamily::PowerLaw) return;
  cum_.clear();
  // Normalizer: explicit partial sum plus a series-tail remainder.
  const std::size_t head = 65536;
  double sum = 0.0;
  for (std::size_t j = 0; j < head; ++j)
    sum += std::pow(double(start) + double(j), -param);
  normalizer_ = sum + power_series_tail(double(start) + double(head), param);
  // CDF cache, stopped at the cap or once the uncovered tail is negligible.
  double cum = 0.0;
  for (std::size_t j = 0; j < kPowerLawCacheCap; ++j) {
    cum += std::pow(double(start) + double(j), -param);
    cum_.push_back(cum);
    if (normalizer_ - cum < 1e-12 * normalizer_) break;
  }
}

ImitationKernel::ImitationKernel(std::size_t states,
                                 std::vector<SupportEntry> support,
                                 std::optional<TailSpec> tail,
                                 std::vector<std::string> labels)
    : states_(states),
      support_(std::move(support)),
      tail_(std::move(tail)),
      labels_(std::move(labels)) {
  std::stable_sort(support_.begin(), support_.end(),
                   [](const auto& a, const auto& b) { return a.k < b.k; });
}

std::int64_t ImitationKernel::max_finite_depth() const {
  return support_.empty() ? 0 : support_.back().k;
}

std::vector<std::int64_t> ImitationKernel::support_depths() const {
  std::vector<std::int64_t> out;
  out.reserve(support_.size());
  for (const auto& e : support_) out.push_back(e.k);
  return out;
}

double ImitationKernel::theta_at(std::int64_t k) const {
  for (const auto& e : support_)
    if (e.k == k) return e.theta;
  if (tail_ && k >= tail_->start) return tail_->theta_at(k);
  return 0.0;
}

const StochasticMatrix& ImitationKernel::matrix_at(std::int64_t k) const {
  for (const auto& e : support_)
    if (e.k == k) return e.matrix;
  if (tail_ && k >= tail_->start) return tail_->matrix;
  throw Error("depth " + std::to_string(k) + " carries no mass");
}

std::vector<std::string> ImitationKernel::validate() const {
  std::vector<std::string> v;
  if (states_ < 1) v.push_back("kernel must have at least one state");
  if (support_.empty() && !tail_) v.push_back("kernel has no support and no tail");
  if (!labels_.empty() && labels_.size() != states_)
    v.push_back("labels: expected " + std::to_string(states_) + " entries, got " +
                std::to_string(labels_.size()));

  double total = 0.0;
  for (std::size_t i = 0; i < support_.size(); ++i) {
    const auto& e = support_[i];
    std::string name = "support depth " + std::to_string(e.k);
    if (e.k < 1) v.push_back(name + ": depths must be >= 1");
    if (i > 0 && support_[i - 1].k == e.k)
      v.push_back(name + ": duplicate depth");
    if (e.theta <= 0.0)
      v.push_back(name + ": theta must be positive, got " + fmt(e.theta));
    if (e.matrix.size() != states_)
      v.push_back(name + ": matrix is " + std::to_string(e.matrix.size()) +
                  "x" + std::to_string(e.matrix.size()) + ", expected " +
                  std::to_string(states_));
    else
      for (auto& m : e.matrix.check(name + " matrix")) v.push_back(m);
    total += e.theta;
  }

  if (tail_) {
    const TailSpec& t = *tail_;
    if (!support_.empty() && t.start <= max_finite_depth())
      v.push_back("tail: start must exceed the largest finite depth");
    if (t.start < 1) v.push_back("tail: start must be >= 1");
    if (!(t.mass > 0.0 && t.mass < 1.0))
      v.push_back("tail: mass must lie in (0,1), got " + fmt(t.mass));
    if (t.family == TailFamily::Geometric) {
      if (!(t.param > 0.0 && t.param < 1.0))
        v.push_back("tail: geometric ratio must lie in (0,1), got " + fmt(t.param));
    } else {
      if (!(t.param > 1.0))
        v.push_back("tail: power-law exponent must exceed 1, got " + fmt(t.param));
    }
    if (t.matrix.size() != states_)
      v.push_back("tail: matrix is " + std::to_string(t.matrix.size()) + "x" +
                  std::to_string(t.matrix.size()) + ", expected " +
                  std::to_string(states_));
    else
      for (auto& m : t.matrix.check("tail matrix")) v.push_back(m);
    total += t.mass;
  }

  if ((!support_.empty() || tail_) && std::abs(total - 1.0) > kRowSumTol)
    v.push_back("decrement weights sum to " + fmt(total) +
                ", off by more than " + fmt(kRowSumTol));
  return v;
}

void ImitationKernel::finalize() {
  for (auto& e : support_) e.matrix.renormalize_rows();
  if (tail_) {
    tail_->matrix.renormalize_rows();
    tail_->prepare();
  }
}

std::int64_t ImitationKernel::sample_decrement(double u) const {
  double cum = 0.0;
  for (const auto& e : support_) {
    cum += e.theta;
    if (cum > u) return e.k;
  }
  if (tail_) return tail_->sample(u - cum);
  return support_.back().k;  // u landed in the rounding slack at the top
}

namespace {

using nlohmann::json;

StochasticMatrix matrix_from_json(const json& j, const std::string& name,
                                  std::vector<std::string>& errs) {
  if (!j.is_array()) {
    errs.push_back(name + ": matrix must be an array of rows");
    return {};
  }
  std::vector<std::vector<double>> rows;
  for (const auto& row : j) {
    if (!row.is_array()) {
      errs.push_back(name + ": matrix rows must be arrays");
      return {};
    }
    std::vector<double> r;
    for (const auto& x : row) {
      if (!x.is_number()) {
        errs.push_back(name + ": matrix entries must be numbers");
        return {};
      }
      r.push_back(x.get<double>());
    }
    rows.push_back(std::move(r));
  }
  for (const auto& r : rows)
    if (r.size() != rows.size()) {
      errs.push_back(name + ": matrix must be square");
      return {};
    }
  return StochasticMatrix::from_rows(rows);
}

}  // namespace

ImitationKernel parse_kernel_spec(const std::string& text) {
  std::vector<std::string> errs;
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw KernelValidationError({std::string("malformed JSON: ") + e.what()});
  }
  if (!j.is_object()) throw KernelValidationError({"spec must be a JSON object"});

  std::size_t states = 0;
  if (!j.contains("states") || !j["states"].is_number_integer() ||
      j["states"].get<std::int64_t>() < 2)
    errs.push_back("states: required integer >= 2");
  else
    states = j["states"].get<std::size_t>();

  std::vector<std::string> labels;
  if (j.contains("labels")) {
    if (!j["labels"].is_array())
      errs.push_back("labels: must be an array of strings");
    else
      for (const auto& l : j["labels"]) {
        if (!l.is_string()) {
          errs.push_back("labels: must be an array of strings");
          labels.clear();
          break;
        }
        labels.push_back(l.get<std::string>());
      }
  }

  std::vector<ImitationKernel::SupportEntry> support;
  if (!j.contains("support") || !j["support"].is_array()) {
    errs.push_back("support: required array of {k, theta, matrix}");
  } else {
    for (const auto& e : j["support"]) {
      ImitationKernel::SupportEntry entry;
      if (!e.is_object() || !e.contains("k") || !e["k"].is_number_integer() ||
          !e.contains("theta") || !e["theta"].is_number() ||
          !e.contains("matrix")) {
        errs.push_back("support: each entry needs integer k, number theta and a matrix");
        continue;
      }
      entry.k = e["k"].get<std::int64_t>();
      entry.theta = e["theta"].get<double>();
      entry.matrix = matrix_from_json(e["matrix"],
                                      "support depth " + std::to_string(entry.k), errs);
      support.push_back(std::move(entry));
    }
  }

  std::optional<TailSpec> tail;
  if (j.contains("tail")) {
    const auto& t = j["tail"];
    TailSpec spec;
    if (!t.is_object() || !t.contains("family") || !t["family"].is_string() ||
        !t.contains("start") || !t["start"].is_number_integer() ||
        !t.contains("param") || !t["param"].is_number() ||
        !t.contains("mass") || !t["mass"].is_number() || !t.contains("matrix")) {
      errs.push_back("tail: needs family, integer start, param, mass and a matrix");
    } else {
      std::string fam = t["family"].get<std::string>();
      if (fam == "geometric")
        spec.family = TailFamily::Geometric;
      else if (fam == "powerlaw")
        spec.family = TailFamily::PowerLaw;
      else
        errs.push_back("tail: family must be \"geometric\" or \"powerlaw\"");
      spec.start = t["start"].get<std::int64_t>();
      spec.param = t["param"].get<double>();
      spec.mass = t["mass"].get<double>();
      spec.matrix = matrix_from_json(t["matrix"], "tail", errs);
      tail = std::move(spec);
    }
  }

  if (!errs.empty()) throw KernelValidationError(std::move(errs));

  ImitationKernel kernel(states, std::move(support), std::move(tail),
                         std::move(labels));
  auto violations = kernel.validate();
  if (!violations.empty()) throw KernelValidationError(std::move(violations));
  kernel.finalize();
  return kernel;
}

std::string kernel_to_json(const ImitationKernel& kernel) {
  nlohmann::ordered_json j;
  j["states"] = kernel.states();
  if (!kernel.labels().empty()) j["labels"] = kernel.labels();
  j["support"] = nlohmann::ordered_json::array();
  for (const auto& e : kernel.support()) {
    nlohmann::ordered_json entry;
    entry["k"] = e.k;
    entry["theta"] = e.theta;
    entry["matrix"] = e.matrix.to_rows();
    j["support"].push_back(std::move(entry));
  }
  if (kernel.tail()) {
    const TailSpec& t = *kernel.tail();
    nlohmann::ordered_json tail;
    tail["family"] = t.family == TailFamily::Geometric ? "geometric" : "powerlaw";
    tail["start"] = t.start;
    tail["param"] = t.param;
    tail["mass"] = t.mass;
    tail["matrix"] = t.matrix.to_rows();
    j["tail"] = std::move(tail);
  }
  return j.dump(2) + "\n";
}

CoalescenceCheck coalescence_verdict(const ImitationKernel& kernel) {
  CoalescenceCheck out;
  std::int64_t d = alphabet_gcd(kernel);

  // Sum over k >= 1 of the squared upper-tail mass of theta.
  double sum = 0.0;
  bool converged = true;
  std::int64_t cut = kernel.has_tail() ? kernel.tail()->start
                                       : kernel.max_finite_depth() + 1;
  double mass_from_cut = kernel.has_tail() ? kernel.tail()->mass : 0.0;
  {
    // Finite range: walk k downward accumulating theta mass.
    double tail_mass = mass_from_cut;
    std::vector<double> masses;  // mass from k, for k = cut-1 .. 1
    for (std::int64_t k = cut - 1; k >= 1; --k) {
      tail_mass += kernel.theta_at(k);
      masses.push_back(tail_mass);
    }
    for (double m : masses) sum += m * m;
  }
  if (kernel.has_tail()) {
    const TailSpec& t = *kernel.tail();
    if (t.family == TailFamily::Geometric) {
      // mass_from(k) = mass * p^(k-start): squares form a geometric series.
      sum += t.mass * t.mass / (1.0 - t.param * t.param);
    } else if (t.param > 1.5) {
      const std::int64_t K = 100000;
      for (std::int64_t k = t.start; k < t.start + K; ++k) {
        double m = t.mass_from(k);
        sum += m * m;
      }
      // For k >= start+K, mass_from(k) = s * T(k) with T the series tail of
      // n^-alpha and s = mass/normalizer. Close the sum of s^2 T(k)^2 by
      // Euler-Maclaurin on T's two leading terms a*x^(1-alpha) + b*x^-alpha.
      double alpha = t.param, a = 1.0 / (alpha - 1.0), b = 0.5;
      double x = double(t.start + K);
      double tK = power_series_tail(x, alpha);
      double s = t.mass_from(t.start + K) / tK;
      double integral =
          a * a * std::pow(x, 3.0 - 2.0 * alpha) / (2.0 * alpha - 3.0) +
          2.0 * a * b * std::pow(x, 2.0 - 2.0 * alpha) / (2.0 * alpha - 2.0) +
          b * b * std::pow(x, 1.0 - 2.0 * alpha) / (2.0 * alpha - 1.0);
      sum += s * s * (integral + 0.5 * tK * tK);
    } else {
      // Divergent: report a cutoff partial sum.
      const std::int64_t K = 100000;
      for (std::int64_t k = t.start; k < t.start + K; ++k) {
        double m = t.mass_from(k);
        sum += m * m;
      }
      converged = false;
    }
  }
  out.tail_square_sum = sum;
  out.sum_converged = converged;

  if (d != 1) {
    out.verdict = Coalescence::Unknown;
    out.reason = "alphabet gcd is " + std::to_string(d) +
                 "; walks started at sites in different residue classes never meet";
    return out;
  }
  if (!converged) {
    out.verdict = Coalescence::Unknown;
    out.reason = "squared-tail series diverges (power-law exponent <= 1.5); "
                 "reported sum is a cutoff value";
    return out;
  }
  out.verdict = Coalescence::ProvenCoalescent;
  if (!kernel.has_tail())
    out.reason = "finite support with gcd 1";
  else if (kernel.tail()->family == TailFamily::Geometric)
    out.reason = "geometric tail; squared-tail series sums in closed form";
  else
    out.reason = "power-law exponent exceeds 1.5; squared-tail series converges";
  return out;
}

}  // namespace imitatio
