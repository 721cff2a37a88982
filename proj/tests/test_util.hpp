#pragma once

#include <map>
#include <stdexcept>
#include <vector>

#include "imitatio/kernel.hpp"
#include "imitatio/random_source.hpp"

namespace testutil {

using imitatio::ImitationKernel;
using imitatio::StochasticMatrix;

inline StochasticMatrix i2() { return StochasticMatrix::identity(2); }

inline StochasticMatrix j2() {
  return StochasticMatrix::from_rows({{0.0, 1.0}, {1.0, 0.0}});
}

// theta_1 = theta_2 = 1/2, P_1 = I, P_2 = flip: the unique-law workhorse.
inline ImitationKernel k_unique() {
  return ImitationKernel(2, {{1, 0.5, i2()}, {2, 0.5, j2()}});
}

// Single depth 1 with the flip matrix: irreducible, period 2.
inline ImitationKernel k_periodic() {
  return ImitationKernel(2, {{1, 1.0, j2()}});
}

inline ImitationKernel k_all_identity() {
  return ImitationKernel(2, {{1, 0.5, i2()}, {2, 0.5, i2()}});
}

inline StochasticMatrix mixer() {
  return StochasticMatrix::from_rows({{0.6, 0.4}, {0.3, 0.7}});
}

inline ImitationKernel k_tail(imitatio::TailFamily family, double param) {
  imitatio::TailSpec tail;
  tail.family = family;
  tail.start = 2;
  tail.param = param;
  tail.mass = 0.6;
  tail.matrix = StochasticMatrix::from_rows({{0.5, 0.5}, {0.5, 0.5}});
  ImitationKernel k(2, {{1, 0.4, mixer()}}, tail);
  auto errs = k.validate();
  if (!errs.empty()) throw std::runtime_error(errs.front());
  k.finalize();
  return k;
}

// Deterministic decrements and uniforms set up by the test itself.
class Scripted final : public imitatio::SiteRandomness {
 public:
  std::map<std::int64_t, std::int64_t> decrements;
  std::map<std::int64_t, double> uniforms;
  double fallback_uniform = 0.5;

  std::int64_t decrement_at(std::int64_t site) override {
    auto it = decrements.find(site);
    if (it == decrements.end())
      throw std::runtime_error("scripted run hit an unscripted site " +
                               std::to_string(site));
    return it->second;
  }
  double uniform_at(std::int64_t site) override {
    auto it = uniforms.find(site);
    return it == uniforms.end() ? fallback_uniform : it->second;
  }
  double stream_uniform(imitatio::Stream, std::uint64_t) override {
    return fallback_uniform;
  }
};

}  // namespace testutil
