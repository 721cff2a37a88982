#include "doctest.h"

#include <random>

#include "imitatio/structure.hpp"
#include "test_util.hpp"

using namespace imitatio;

TEST_CASE("word matrix composes contravariantly") {
  auto k = testutil::k_unique();
  std::mt19937_64 gen(11);
  std::uniform_int_distribution<int> letter(1, 2);
  for (int trial = 0; trial < 50; ++trial) {
    Word a, b;
    for (int i = 0; i < trial % 4 + 1; ++i) a.push_back(letter(gen));
    for (int i = 0; i < trial % 3 + 1; ++i) b.push_back(letter(gen));
    Word ab = a;
    ab.insert(ab.end(), b.begin(), b.end());
    CHECK(word_matrix(k, ab) == word_matrix(k, b) * word_matrix(k, a));
  }
  CHECK(word_matrix(k, {}) == StochasticMatrix::identity(2));
}

TEST_CASE("word theta is the letter product") {
  auto k = testutil::k_unique();
  CHECK(word_theta(k, {1, 2, 1}) == doctest::Approx(0.125));
  CHECK(word_theta(k, {3}) == 0.0);
}

TEST_CASE("communicating decomposition") {
  auto two = communicating_decomposition(testutil::k_all_identity());
  REQUIRE(two.closed_classes.size() == 2);
  CHECK(two.closed_classes[0] == std::vector<int>{0});
  CHECK(two.closed_classes[1] == std::vector<int>{1});
  CHECK(two.transient.empty());

  auto one = communicating_decomposition(testutil::k_unique());
  REQUIRE(one.closed_classes.size() == 1);
  CHECK(one.closed_classes[0] == std::vector<int>{0, 1});
}

TEST_CASE("transient states are recognized and dropped") {
  // state 2 leaks into {0,1} and nothing returns
  auto leak = StochasticMatrix::from_rows(
      {{0.0, 1.0, 0.0}, {1.0, 0.0, 0.0}, {0.4, 0.4, 0.2}});
  ImitationKernel k(3, {{1, 1.0, leak}});
  auto dec = communicating_decomposition(k);
  REQUIRE(dec.closed_classes.size() == 1);
  CHECK(dec.closed_classes[0] == std::vector<int>{0, 1});
  CHECK(dec.transient == std::vector<int>{2});

  auto restricted = restrict_to_recurrent(k);
  CHECK(restricted.kernel.states() == 2);
  CHECK(restricted.kept == std::vector<int>{0, 1});
  CHECK(restricted.kernel.matrix_at(1)(0, 1) == doctest::Approx(1.0));
}

TEST_CASE("alphabet gcd and kernel reduction") {
  CHECK(alphabet_gcd(testutil::k_unique()) == 1);
  CHECK(alphabet_gcd(testutil::k_tail(TailFamily::Geometric, 0.5)) == 1);

  ImitationKernel doubled(2, {{2, 0.5, testutil::i2()}, {4, 0.5, testutil::j2()}});
  CHECK(alphabet_gcd(doubled) == 2);
  auto reduced = reduce_kernel(doubled);
  CHECK(reduced.support_depths() == std::vector<std::int64_t>{1, 2});
  CHECK(reduced.theta_at(1) == doctest::Approx(0.5));
  CHECK(reduced.matrix_at(2) == testutil::j2());
}

TEST_CASE("period and partition") {
  auto p = chain_period_and_partition(testutil::k_periodic());
  CHECK(p.period == 2);
  REQUIRE(p.partition.size() == 2);
  CHECK(p.partition[0] == std::vector<int>{0});
  CHECK(p.partition[1] == std::vector<int>{1});

  CHECK(chain_period_and_partition(testutil::k_unique()).period == 1);
}

TEST_CASE("positive word entries advance the periodic classes") {
  auto k = testutil::k_periodic();
  auto p = chain_period_and_partition(k);
  std::vector<int> class_of(k.states());
  for (std::size_t h = 0; h < p.partition.size(); ++h)
    for (int g : p.partition[h]) class_of[std::size_t(g)] = int(h);

  std::mt19937_64 gen(7);
  for (int trial = 0; trial < 40; ++trial) {
    Word w;
    std::int64_t depth = 0;
    for (int i = 0; i <= trial % 5; ++i) {
      w.push_back(1);
      depth += 1;
    }
    auto m = word_matrix(k, w);
    for (std::size_t i = 0; i < 2; ++i)
      for (std::size_t j = 0; j < 2; ++j)
        if (m(i, j) > 0.0)
          CHECK((class_of[i] + depth) % p.period == class_of[j]);
  }
}

TEST_CASE("uniqueness verdict triple") {
  CHECK(uniqueness_verdict(testutil::k_unique()).verdict == Verdict::Unique);

  auto periodic = uniqueness_verdict(testutil::k_periodic());
  CHECK(periodic.verdict == Verdict::NonUniquePeriodic);
  REQUIRE(periodic.period.has_value());
  CHECK(periodic.period->period == 2);

  CHECK(uniqueness_verdict(testutil::k_all_identity()).verdict ==
        Verdict::NonUniqueMultipleClasses);
}

TEST_CASE("gcd reduction decides uniqueness on the reduced kernel") {
  // depths {2,4}: two independent copies of the k=1,2 kernel, each unique
  ImitationKernel doubled(2, {{2, 0.5, testutil::i2()}, {4, 0.5, testutil::j2()}});
  auto rep = uniqueness_verdict(doubled);
  CHECK(rep.d_A == 2);
  CHECK(rep.verdict == Verdict::Unique);

  // depths {2,6}, both flips: the reduced kernel {1,3} all-flip has period 2
  ImitationKernel flip2(2, {{2, 0.5, testutil::j2()}, {6, 0.5, testutil::j2()}});
  auto rep2 = uniqueness_verdict(flip2);
  CHECK(rep2.d_A == 2);
  CHECK(rep2.verdict == Verdict::NonUniquePeriodic);
  REQUIRE(rep2.period.has_value());
  CHECK(rep2.period->period == 2);
}
