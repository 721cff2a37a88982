#pragma once

#include <cstdint>
#include <unordered_map>

namespace imitatio {

class ImitationKernel;

/// Auxiliary randomness lanes, separate from the per-site (K, U) pairs.
enum class Stream : std::uint64_t {
  InvariantDraw = 1,   // boundary values drawn from an invariant distribution
  SegmentAccept = 2,   // the U* draws of the regeneration sampler
  VonSchelling = 3,    // decrements of the distance chain
  BoundaryIid = 4,     // iid boundary specs, indexed by site
};

/// Anything that can hand out the site-indexed randomness the samplers
/// consume. The production implementation is RandomSource; tests inject
/// scripted decrements through this interface.
class SiteRandomness {
 public:
  virtual ~SiteRandomness() = default;
  virtual std::int64_t decrement_at(std::int64_t site) = 0;  // K_n
  virtual double uniform_at(std::int64_t site) = 0;          // U_n
  virtual double stream_uniform(Stream tag, std::uint64_t index) = 0;
};

/// Counter-based deterministic source: every value is a pure function of
/// (seed, site) or (seed, stream, index), so query order never matters and
/// a replayed run reproduces the same field bit for bit. Decrements are
/// additionally memoized per site, making "each site's K is drawn once"
/// checkable.
class RandomSource final : public SiteRandomness {
 public:
  RandomSource(const ImitationKernel& kernel, std::uint64_t seed);
  // The kernel is held by pointer and must outlive the source.
  RandomSource(ImitationKernel&& kernel, std::uint64_t seed) = delete;

  std::int64_t decrement_at(std::int64_t site) override;
  double uniform_at(std::int64_t site) override;
  double stream_uniform(Stream tag, std::uint64_t index) override;

  std::uint64_t seed() const { return seed_; }
  std::size_t decrement_cache_size() const { return memo_.size(); }

  /// Seed for replica i of a batch run under a master seed.
  static std::uint64_t replica_seed(std::uint64_t master, std::uint64_t replica);
  /// Seed for the residue-h subprocess of a reduced kernel.
  static std::uint64_t residue_seed(std::uint64_t seed, std::uint64_t residue);

 private:
  const ImitationKernel* kernel_;
  std::uint64_t seed_;
  std::unordered_map<std::int64_t, std::int64_t> memo_;
};

}  // namespace imitatio
