#include "doctest.h"

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "imitatio/errors.hpp"
#include "imitatio/invariant.hpp"
#include "imitatio/samplers.hpp"
#include "json.hpp"
#include "test_util.hpp"

using namespace imitatio;

namespace {

ImitationKernel k_doubled() {
  // letters 2 and 4: every residue class mod 2 runs an independent copy
  return ImitationKernel(2, {{2, 0.5, testutil::i2()}, {4, 0.5, testutil::j2()}});
}

double agreement(const SampleBatch& batch) {
  std::size_t same = 0;
  for (const auto& rep : batch.replicates)
    same += std::size_t(rep[0] == rep[1]);
  return double(same) / double(batch.replicates.size());
}

}  // namespace

TEST_CASE("boundary values") {
  auto k = testutil::k_unique();
  RandomSource rnd(k, 11);

  CHECK(boundary_value(ConstantBoundary{1}, -40, rnd) == 1);
  CHECK(boundary_value(ConstantBoundary{1}, 3, rnd) == 1);

  BoundarySpec alt = AlternatingBoundary{{0, 1}, 0};
  CHECK(boundary_value(alt, 0, rnd) == 0);
  CHECK(boundary_value(alt, -1, rnd) == 1);
  CHECK(boundary_value(alt, -2, rnd) == 0);
  BoundarySpec shifted = AlternatingBoundary{{0, 1}, 1};
  CHECK(boundary_value(shifted, 0, rnd) == 1);
  CHECK_THROWS_AS(boundary_value(AlternatingBoundary{{}, 0}, 0, rnd),
                  PreconditionError);

  BoundarySpec expl = ExplicitBoundary{{{-3, 1}}, 0};
  CHECK(boundary_value(expl, -3, rnd) == 1);
  CHECK(boundary_value(expl, -4, rnd) == 0);

  BoundarySpec iid = IidBoundary{Distribution{{0.5, 0.5}}};
  for (std::int64_t site : {-7, -1, 0, 12}) {
    int first = boundary_value(iid, site, rnd);
    CHECK(first >= 0);
    CHECK(first < 2);
    CHECK(boundary_value(iid, site, rnd) == first);  // recomputable
  }
}

TEST_CASE("forward simulation from a constant boundary") {
  auto k = testutil::k_all_identity();
  RandomSource rnd(k, 5);
  auto x = forward_simulate(k, ConstantBoundary{0}, 0, {1, 4}, rnd);
  REQUIRE(x.size() == 4);  // every site in (0, 4]
  for (std::int64_t n = 1; n <= 4; ++n) CHECK(x.at(n) == 0);

  RandomSource rnd2(k, 5);
  auto y = forward_simulate(k, ConstantBoundary{1}, -2, {3}, rnd2);
  for (std::int64_t n = -1; n <= 3; ++n) CHECK(y.at(n) == 1);

  RandomSource rnd3(k, 5);
  CHECK_THROWS_AS(forward_simulate(k, ConstantBoundary{0}, 0, {-5}, rnd3),
                  PreconditionError);
}

TEST_CASE("cftp is deterministic in the seed") {
  auto k = testutil::k_unique();
  auto inv = invariant_distribution(p_hat(k));
  RandomSource a(k, 99);
  RandomSource b(k, 99);
  auto ra = cftp_sample(k, {0, 1, 5}, a, inv);
  auto rb = cftp_sample(k, {5, 1, 0, 1}, b, inv);  // unsorted, duplicated
  CHECK(ra.window == std::vector<std::int64_t>{0, 1, 5});
  CHECK(ra.window == rb.window);
  CHECK(ra.values == rb.values);
  CHECK(ra.diag.s_lambda.has_value());
  CHECK(*ra.diag.s_lambda <= 0);
  CHECK(ra.diag.steps > 0);
}

TEST_CASE("cftp adjacent agreement matches the two-thirds law") {
  auto k = testutil::k_unique();
  auto inv = invariant_distribution(p_hat(k));
  const std::uint64_t n = 20000;
  std::size_t same = 0;
  for (std::uint64_t i = 0; i < n; ++i) {
    RandomSource rnd(k, RandomSource::replica_seed(42, i));
    auto rep = cftp_sample(k, {0, 1}, rnd, inv);
    same += std::size_t(rep.values[0] == rep.values[1]);
  }
  CHECK(std::fabs(double(same) / double(n) - 2.0 / 3.0) < 0.02);
}

TEST_CASE("cftp refuses a heavy-tailed decrement law") {
  auto k = testutil::k_tail(TailFamily::PowerLaw, 1.2);
  auto inv = invariant_distribution(p_hat(k));
  RandomSource rnd(k, 1);
  try {
    cftp_sample(k, {0}, rnd, inv);
    FAIL("expected PreconditionError");
  } catch (const PreconditionError& e) {
    CHECK(std::string(e.what()).find("eps") != std::string::npos);
  }
}

TEST_CASE("eps sampler marginal and threshold checks") {
  auto k = testutil::k_unique();
  auto inv = invariant_distribution(p_hat(k));
  const std::uint64_t n = 20000;
  std::size_t zeros = 0;
  for (std::uint64_t i = 0; i < n; ++i) {
    RandomSource rnd(k, RandomSource::replica_seed(7, i));
    auto rep = eps_perfect_sample(k, {0}, -30, rnd, inv);
    CHECK(rep.diag.threshold == -30);
    zeros += std::size_t(rep.values[0] == 0);
  }
  CHECK(std::fabs(double(zeros) / double(n) - 0.5) < 0.02);

  RandomSource rnd(k, 3);
  CHECK_THROWS_AS(eps_perfect_sample(k, {0, 4}, 0, rnd, inv), PreconditionError);
  CHECK_THROWS_AS(eps_perfect_sample(k, {0, 4}, 2, rnd, inv), PreconditionError);
}

TEST_CASE("doeblin sampler agrees with the exact law") {
  auto k = testutil::k_unique();
  auto cert = doeblin_certificate(k);
  const std::uint64_t n = 20000;
  std::size_t same = 0, zeros = 0;
  for (std::uint64_t i = 0; i < n; ++i) {
    RandomSource rnd(k, RandomSource::replica_seed(12, i));
    auto rep = doeblin_sample(k, {0, 1}, cert, rnd);
    same += std::size_t(rep.values[0] == rep.values[1]);
    zeros += std::size_t(rep.values[0] == 0);
  }
  CHECK(std::fabs(double(same) / double(n) - 2.0 / 3.0) < 0.02);
  CHECK(std::fabs(double(zeros) / double(n) - 0.5) < 0.02);

  RandomSource a(k, 77);
  RandomSource b(k, 77);
  auto ra = doeblin_sample(k, {-2, 0, 3}, cert, a);
  auto rb = doeblin_sample(k, {-2, 0, 3}, cert, b);
  CHECK(ra.values == rb.values);
  CHECK(ra.diag.steps == rb.diag.steps);
}

TEST_CASE("periodic stationary sampler alternates exactly") {
  auto k = testutil::k_periodic();
  std::size_t zero_starts = 0;
  const std::uint64_t n = 500;
  for (std::uint64_t i = 0; i < n; ++i) {
    RandomSource rnd(k, RandomSource::replica_seed(3, i));
    auto rep = stationary_sample_periodic(k, {0, 1, 2}, rnd, -50);
    CHECK(rep.values[0] != rep.values[1]);
    CHECK(rep.values[0] == rep.values[2]);
    zero_starts += std::size_t(rep.values[0] == 0);
  }
  double freq = double(zero_starts) / double(n);
  CHECK(freq > 0.4);
  CHECK(freq < 0.6);

  auto unique_kernel = testutil::k_unique();
  RandomSource rnd(unique_kernel, 1);
  CHECK_THROWS_AS(stationary_sample_periodic(unique_kernel, {0}, rnd, -50),
                  PreconditionError);
}

TEST_CASE("batch output is independent of the thread count") {
  auto k = testutil::k_unique();
  SampleOptions opt;
  opt.algorithm = Algorithm::Cftp;
  opt.replicas = 2000;
  opt.seed = 31;
  opt.threads = 1;
  auto serial = sample_batch(k, {0, 1}, opt);
  opt.threads = 4;
  auto parallel = sample_batch(k, {0, 1}, opt);
  CHECK(batch_to_csv(serial) == batch_to_csv(parallel));
  CHECK(batch_diagnostics_json(serial) == batch_diagnostics_json(parallel));
}

TEST_CASE("batch replicates are a stable prefix sequence") {
  auto k = testutil::k_unique();
  SampleOptions opt;
  opt.replicas = 100;
  opt.seed = 8;
  auto small = sample_batch(k, {0, 1}, opt);
  opt.replicas = 1000;
  auto large = sample_batch(k, {0, 1}, opt);
  for (std::size_t i = 0; i < 100; ++i)
    CHECK(small.replicates[i] == large.replicates[i]);
}

TEST_CASE("reduced residue classes sample independently") {
  auto k = k_doubled();
  SampleOptions opt;
  opt.algorithm = Algorithm::Cftp;
  opt.replicas = 20000;
  opt.seed = 5;
  auto batch = sample_batch(k, {0, 1}, opt);
  // sites 0 and 1 live in different residue classes, hence independent
  CHECK(std::fabs(agreement(batch) - 0.5) < 0.02);

  opt.algorithm = Algorithm::EpsPerfect;
  opt.threshold = -41;
  opt.replicas = 2000;
  auto eps = sample_batch(k, {0, 1}, opt);
  CHECK(eps.replicates.size() == 2000);
  CHECK(eps.window == std::vector<std::int64_t>{0, 1});
  CHECK(eps.eps_error.has_value());
}

TEST_CASE("forward batch approximates the stationary pair law") {
  auto k = testutil::k_unique();
  SampleOptions opt;
  opt.algorithm = Algorithm::Forward;
  opt.replicas = 20000;
  opt.seed = 13;
  auto batch = sample_batch(k, {0, 1}, opt);
  CHECK(std::fabs(agreement(batch) - 2.0 / 3.0) < 0.02);
}

TEST_CASE("batch csv and diagnostics formats") {
  auto k = testutil::k_unique();
  SampleOptions opt;
  opt.replicas = 50;
  opt.seed = 2;
  auto batch = sample_batch(k, {0, 1, 2}, opt);

  auto csv = batch_to_csv(batch);
  std::size_t lines = 0;
  for (char c : csv) lines += std::size_t(c == '\n');
  CHECK(lines == 1 + 50 * 3);
  CHECK(csv.rfind("replica,site,state\n", 0) == 0);

  auto doc = nlohmann::json::parse(batch_diagnostics_json(batch));
  CHECK(doc["algorithm"] == "cftp");
  CHECK(doc["seed"] == 2);
  CHECK(doc["replicas"] == 50);
  CHECK(doc["window"] == nlohmann::json({0, 1, 2}));
  CHECK(doc["steps"].size() == 50);
  CHECK(doc["s_lambda"].size() == 50);
  CHECK(doc["replica_seeds"].size() == 50);
  CHECK(doc["threshold"].is_null());
  CHECK(doc["eps_error"].is_null());

  opt.algorithm = Algorithm::EpsPerfect;
  opt.threshold = -25;
  auto eps = sample_batch(k, {0, 1, 2}, opt);
  auto epsdoc = nlohmann::json::parse(batch_diagnostics_json(eps));
  CHECK(epsdoc["threshold"] == -25);
  REQUIRE(!epsdoc["eps_error"].is_null());
  CHECK(epsdoc["eps_error"].contains("fraction"));
  CHECK(epsdoc["eps_error"].contains("ci_half_width"));
  CHECK(epsdoc["eps_error"].contains("heuristic"));
}

TEST_CASE("batch rejects bad options") {
  auto k = testutil::k_unique();
  SampleOptions opt;
  opt.replicas = 0;
  CHECK_THROWS_AS(sample_batch(k, {0}, opt), PreconditionError);

  opt.replicas = 10;
  opt.algorithm = Algorithm::EpsPerfect;
  CHECK_THROWS_AS(sample_batch(k, {0}, opt), PreconditionError);  // no threshold
  opt.threshold = 5;
  CHECK_THROWS_AS(sample_batch(k, {0}, opt), PreconditionError);
}

TEST_CASE("worker exceptions surface from the thread pool") {
  auto k = testutil::k_tail(TailFamily::PowerLaw, 1.2);
  SampleOptions opt;
  opt.algorithm = Algorithm::Cftp;
  opt.replicas = 8;
  opt.threads = 4;
  CHECK_THROWS_AS(sample_batch(k, {0}, opt), PreconditionError);
}
