#include "imitatio/cli.hpp"

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "imitatio/coupling.hpp"
#include "imitatio/errors.hpp"
#include "imitatio/invariant.hpp"
#include "imitatio/kernel.hpp"
#include "imitatio/samplers.hpp"
#include "imitatio/stats.hpp"
#include "imitatio/structure.hpp"
#include "imitatio/walks.hpp"
#include "json.hpp"

namespace imitatio {

namespace {

struct CliConfig {
  std::string kernel_path;
  std::string window_spec;
  std::string algorithm = "cftp";
  std::optional<std::int64_t> threshold;
  std::uint64_t replicas = 10000;
  std::uint64_t seed = 1;
  std::int64_t horizon = 100000;
  std::string out;
  std::vector<double> invariant_weights;
  unsigned threads = 0;
};

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw KernelValidationError({"cannot read kernel file: " + path});
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::vector<std::int64_t> parse_window(const std::string& spec) {
  auto parse_int = [](const std::string& s) {
    std::size_t used = 0;
    std::int64_t v = 0;
    try {
      v = std::stoll(s, &used);
    } catch (const std::exception&) {
      throw UsageError("bad window bound: " + s);
    }
    if (used != s.size()) throw UsageError("bad window bound: " + s);
    return v;
  };
  auto dots = spec.find("..");
  std::int64_t a, b;
  if (dots == std::string::npos) {
    a = b = parse_int(spec);
  } else {
    a = parse_int(spec.substr(0, dots));
    b = parse_int(spec.substr(dots + 2));
  }
  if (b < a) throw UsageError("window " + spec + " is empty");
  if (b - a > 1000000) throw UsageError("window " + spec + " is too wide");
  std::vector<std::int64_t> w;
  w.reserve(std::size_t(b - a + 1));
  for (std::int64_t s = a; s <= b; ++s) w.push_back(s);
  return w;
}

std::uint64_t step_cap_from_env() {
  const char* env = std::getenv("IMITATIO_STEP_CAP");
  if (!env || !*env) return kDefaultStepCap;
  char* end = nullptr;
  unsigned long long v = std::strtoull(env, &end, 10);
  if (!end || *end != '\0' || v == 0)
    throw UsageError(std::string("IMITATIO_STEP_CAP is not a positive integer: ") + env);
  return v;
}

void emit(const std::string& text, const std::string& out_path) {
  if (out_path.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream out(out_path, std::ios::binary);
  if (!out) throw UsageError("cannot write output file: " + out_path);
  out << text;
}

int run_analyze(const CliConfig& cfg) {
  auto kernel = parse_kernel_spec(read_file(cfg.kernel_path));
  auto report = uniqueness_verdict(kernel);

  nlohmann::ordered_json doc;
  doc["kernel"] = nlohmann::ordered_json::parse(kernel_to_json(kernel));
  doc["structure"] =
      nlohmann::ordered_json::parse(structure_report_to_json(report, kernel));

  std::optional<std::vector<double>> weights;
  if (!cfg.invariant_weights.empty()) weights = cfg.invariant_weights;
  try {
    auto lambda = invariant_distribution(p_hat(kernel), weights);
    doc["invariant"] = lambda.w;
  } catch (const Error& e) {
    doc["invariant"] = nullptr;
    doc["invariant_note"] = e.what();
  }

  auto check = coalescence_verdict(kernel);
  doc["coalescence"] = {
      {"verdict", check.verdict == Coalescence::ProvenCoalescent
                      ? "ProvenCoalescent"
                      : "Unknown"},
      {"tail_square_sum", check.tail_square_sum},
      {"sum_converged", check.sum_converged},
      {"reason", check.reason}};

  if (report.verdict == Verdict::Unique) {
    auto cert = doeblin_certificate(kernel);
    doc["doeblin_certificate"] = nlohmann::ordered_json::parse(certificate_to_json(cert));
  } else {
    doc["doeblin_certificate"] = nullptr;
  }

  emit(doc.dump(2) + "\n", cfg.out);
  return 0;
}

int run_sample(const CliConfig& cfg) {
  auto kernel = parse_kernel_spec(read_file(cfg.kernel_path));
  auto window = parse_window(cfg.window_spec);

  SampleOptions opts;
  if (cfg.algorithm == "cftp")
    opts.algorithm = Algorithm::Cftp;
  else if (cfg.algorithm == "eps")
    opts.algorithm = Algorithm::EpsPerfect;
  else if (cfg.algorithm == "doeblin")
    opts.algorithm = Algorithm::Doeblin;
  else
    throw UsageError("unknown algorithm: " + cfg.algorithm +
                     " (choose cftp, eps or doeblin)");
  if (opts.algorithm == Algorithm::EpsPerfect && !cfg.threshold)
    throw UsageError("--algorithm eps needs --threshold");
  opts.replicas = cfg.replicas;
  opts.seed = cfg.seed;
  opts.threshold = cfg.threshold;
  opts.step_cap = step_cap_from_env();
  opts.threads = cfg.threads;
  if (!cfg.invariant_weights.empty()) opts.invariant_weights = cfg.invariant_weights;

  auto batch = sample_batch(kernel, window, opts);
  emit(batch_to_csv(batch), cfg.out);
  if (cfg.out.empty())
    std::cerr << batch_diagnostics_json(batch);
  else
    emit(batch_diagnostics_json(batch), cfg.out + ".diag.json");
  return 0;
}

int run_validate(const CliConfig& cfg) {
  auto kernel = parse_kernel_spec(read_file(cfg.kernel_path));
  auto window = parse_window(cfg.window_spec);
  auto report = cross_algorithm_report(kernel, window, cfg.replicas, cfg.seed);
  emit(report.to_text(), cfg.out);
  return report.all_pass ? 0 : 4;
}

int run_walks(const CliConfig& cfg) {
  auto kernel = parse_kernel_spec(read_file(cfg.kernel_path));
  auto window = parse_window(cfg.window_spec);
  if (cfg.replicas == 0) throw UsageError("--replicas must be at least 1");
  if (cfg.horizon <= 0) throw UsageError("--horizon must be positive");

  const std::uint64_t cap = step_cap_from_env();
  std::string csv = "replica,s_lambda,steps\n";
  std::uint64_t hits = 0;
  for (std::uint64_t i = 0; i < cfg.replicas; ++i) {
    RandomSource rnd(kernel, RandomSource::replica_seed(cfg.seed, i));
    auto rep = joint_coalescence(window, rnd, cfg.horizon, cap);
    csv += std::to_string(i);
    csv += ',';
    if (rep.s_lambda) {
      csv += std::to_string(*rep.s_lambda);
      ++hits;
    }
    csv += ',';
    csv += std::to_string(rep.steps);
    csv += '\n';
  }
  emit(csv, cfg.out);
  std::cerr << "replicas=" << cfg.replicas << " coalesced=" << hits
            << " fraction=" << double(hits) / double(cfg.replicas)
            << " horizon=" << cfg.horizon << "\n";
  return 0;
}

}  // namespace

int run_cli(int argc, char** argv) {
  CLI::App app{"imitation kernels: structure analysis and perfect sampling"};
  app.require_subcommand(1);
  CliConfig cfg;

  auto add_common = [&](CLI::App* sub, bool needs_window) {
    sub->add_option("kernel", cfg.kernel_path, "kernel spec file (JSON)")
        ->required();
    auto* w = sub->add_option("--window", cfg.window_spec,
                              "site window, inclusive range a..b");
    if (needs_window) w->required();
    sub->add_option("--replicas", cfg.replicas, "number of replicates");
    sub->add_option("--seed", cfg.seed, "master seed");
    sub->add_option("--out", cfg.out, "output path (default stdout)");
    sub->add_option("--invariant-weights", cfg.invariant_weights,
                    "mixture weights for multiple closed classes")
        ->delimiter(',');
    sub->add_option("--threads", cfg.threads, "worker threads (0 = auto)");
  };

  auto* analyze = app.add_subcommand(
      "analyze", "classify the kernel and emit certificates");
  add_common(analyze, false);

  auto* sample = app.add_subcommand("sample", "draw stationary window samples");
  add_common(sample, true);
  sample->add_option("--algorithm", cfg.algorithm, "cftp | eps | doeblin");
  sample->add_option("--threshold", cfg.threshold,
                     "eps sampler threshold u (below the window)");

  auto* validate = app.add_subcommand(
      "validate", "cross-check all samplers statistically");
  add_common(validate, true);

  auto* walks = app.add_subcommand(
      "walks", "backward-walk coalescence diagnostics");
  add_common(walks, true);
  walks->add_option("--horizon", cfg.horizon, "budget below the window");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 3;
  }

  try {
    if (analyze->parsed()) return run_analyze(cfg);
    if (sample->parsed()) return run_sample(cfg);
    if (validate->parsed()) return run_validate(cfg);
    return run_walks(cfg);
  } catch (const KernelValidationError& e) {
    std::cerr << "kernel file rejected:\n";
    for (const auto& v : e.violations) std::cerr << "  - " << v << "\n";
    return 2;
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 3;
  } catch (const PreconditionError& e) {
    std::cerr << "precondition failed: " << e.what() << "\n";
    return 3;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}

}  // namespace imitatio
