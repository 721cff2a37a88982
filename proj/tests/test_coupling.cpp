#include "doctest.h"

#include <cmath>
#include <random>

#include "imitatio/coupling.hpp"
#include "imitatio/errors.hpp"
#include "test_util.hpp"

using namespace imitatio;

TEST_CASE("apply_coupling is the row inverse cdf") {
  auto m = StochasticMatrix::from_rows({{0.25, 0.25, 0.5},
                                        {0.0, 1.0, 0.0},
                                        {0.5, 0.0, 0.5}});
  CHECK(apply_coupling(m, 0, 0.2) == 0);
  CHECK(apply_coupling(m, 0, 0.25) == 1);
  CHECK(apply_coupling(m, 0, 0.3) == 1);
  CHECK(apply_coupling(m, 0, 0.6) == 2);
  CHECK(apply_coupling(m, 1, 0.99) == 1);
  CHECK(apply_coupling(m, 2, 0.49) == 0);
  CHECK(apply_coupling(m, 2, 0.51) == 2);
}

TEST_CASE("apply_coupling reproduces the row law on a fine grid") {
  auto m = testutil::mixer();
  const std::size_t n = 1000000;
  std::size_t ones = 0;
  for (std::size_t i = 0; i < n; ++i)
    ones += std::size_t(apply_coupling(m, 0, (double(i) + 0.5) / double(n)));
  double freq = double(ones) / double(n);
  CHECK(std::fabs(freq - 0.4) < 0.005);
}

TEST_CASE("compose_coupling applies the innermost letter first") {
  auto k = testutil::k_unique();
  // word (1,2): outer I, inner flip; from state 0 the flip acts first
  std::vector<double> us{0.3, 0.3};
  int inner = apply_coupling(k.matrix_at(2), 0, 0.3);
  int outer = apply_coupling(k.matrix_at(1), inner, 0.3);
  CHECK(compose_coupling(k, {1, 2}, 0, us) == outer);
  CHECK(compose_coupling(k, {}, 1, {}) == 1);
}

TEST_CASE("compose_coupling marginal is the word matrix row") {
  auto k = testutil::k_tail(TailFamily::Geometric, 0.5);
  // word (1,2): tail letter at the bottom, mixer on top
  auto row = word_matrix(k, {1, 2});
  const std::size_t grid = 1000;
  std::size_t ones = 0;
  for (std::size_t i = 0; i < grid; ++i)
    for (std::size_t j = 0; j < grid; ++j) {
      double u1 = (double(i) + 0.5) / double(grid);
      double u2 = (double(j) + 0.5) / double(grid);
      ones += std::size_t(compose_coupling(k, {1, 2}, 0, {u1, u2}));
    }
  CHECK(std::fabs(double(ones) / double(grid * grid) - row(0, 1)) < 0.005);
}

TEST_CASE("compose_coupling matches sequential application on random words") {
  auto k = testutil::k_tail(TailFamily::Geometric, 0.5);
  std::mt19937_64 gen(3);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (int trial = 0; trial < 30; ++trial) {
    Word w;
    std::vector<double> us;
    for (int i = 0; i <= trial % 4; ++i) {
      w.push_back(1 + std::int64_t(gen() % 4));
      us.push_back(unif(gen));
    }
    int g = int(gen() % 2);
    int expect = g;
    for (std::size_t i = w.size(); i-- > 0;)
      expect = apply_coupling(k.matrix_at(w[i]), expect, us[i]);
    CHECK(compose_coupling(k, w, g, us) == expect);
  }
}

TEST_CASE("doeblin certificate oracle") {
  auto cert = doeblin_certificate(testutil::k_unique());
  CHECK(cert.n0_bar == 2);
  CHECK(cert.target == 0);
  CHECK(cert.epsilon == doctest::Approx(1.0));
  CHECK(cert.rho_bar == doctest::Approx(0.75));
  CHECK(cert.epsilon_star == doctest::Approx(1.0 / 3.0));
  REQUIRE(cert.words.size() == 2);
  CHECK(cert.words[0] == Word{1, 1});
  CHECK(cert.words[1] == Word{2});
  CHECK(cert.q_bar(0, 0) == doctest::Approx(1.0 / 3.0));
  CHECK(cert.q_bar(0, 1) == doctest::Approx(2.0 / 3.0));
  CHECK(cert.q_bar(1, 0) == doctest::Approx(2.0 / 3.0));
  CHECK(cert.q_bar(1, 1) == doctest::Approx(1.0 / 3.0));

  auto text = certificate_to_json(cert);
  CHECK(text.find("\"n0_bar\": 2") != std::string::npos);
}

TEST_CASE("certificate words all have the certified depth") {
  auto k = testutil::k_tail(TailFamily::Geometric, 0.5);
  auto cert = doeblin_certificate(k);
  CHECK(cert.n0_bar >= 1);
  CHECK(cert.epsilon > 0.0);
  CHECK(cert.epsilon_star > 0.0);
  CHECK(cert.rho_bar > 0.0);
  CHECK(cert.rho_bar <= 1.0 + 1e-12);
  for (const auto& w : cert.words) {
    std::int64_t depth = 0;
    for (auto l : w) depth += l;
    CHECK(depth == cert.n0_bar);
  }
}

TEST_CASE("certificate needs a unique law") {
  CHECK_THROWS_AS(doeblin_certificate(testutil::k_periodic()), PreconditionError);
  CHECK_THROWS_AS(doeblin_certificate(testutil::k_all_identity()),
                  PreconditionError);
}

TEST_CASE("star coupling funnels every state into the target") {
  for (auto kernel : {testutil::k_unique(), testutil::k_tail(TailFamily::Geometric, 0.5)}) {
    auto cert = doeblin_certificate(kernel);
    for (int g = 0; g < int(kernel.states()); ++g) {
      CHECK(star_coupling(cert, g, 0.0) == cert.target);
      CHECK(star_coupling(cert, g, cert.epsilon_star * 0.999) == cert.target);
    }
  }
}

TEST_CASE("star coupling reproduces the q_bar rows") {
  auto cert = doeblin_certificate(testutil::k_unique());
  const std::size_t n = 200000;
  for (int g = 0; g < 2; ++g) {
    std::size_t hit_target = 0;
    for (std::size_t i = 0; i < n; ++i)
      if (star_coupling(cert, g, (double(i) + 0.5) / double(n)) == cert.target)
        ++hit_target;
    CHECK(std::fabs(double(hit_target) / double(n) -
                    cert.q_bar(std::size_t(g), std::size_t(cert.target))) < 0.005);
  }
}

TEST_CASE("word trie suffix matching") {
  WordTrie trie;
  CHECK(trie.empty());
  trie.insert({1, 1});
  trie.insert({2});
  CHECK(trie.size() == 2);
  CHECK(!trie.empty());

  CHECK(trie.matches_suffix({2}));
  CHECK(trie.matches_suffix({1, 2}));          // suffix (2)
  CHECK(trie.matches_suffix({1, 1}));
  CHECK(trie.matches_suffix({2, 1, 1}));       // suffix (1,1)
  CHECK(!trie.matches_suffix({1}));
  CHECK(!trie.matches_suffix({}));
  CHECK(!trie.matches_suffix({3, 3}));
}

TEST_CASE("certificate picks the best guaranteed column") {
  auto m = testutil::mixer();
  ImitationKernel k(2, {{2, 0.5, m}, {3, 0.5, m}});
  auto cert = doeblin_certificate(k);
  // depth 2 admits only the word (2), so q_bar is the mixer itself
  CHECK(cert.n0_bar == 2);
  // column 1 has the larger floor: min(0.4, 0.7) beats min(0.6, 0.3)
  CHECK(cert.target == 1);
  CHECK(cert.epsilon == doctest::Approx(0.4));
  CHECK(cert.rho_bar == doctest::Approx(0.5));
}
