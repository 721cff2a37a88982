#include "imitatio/random_source.hpp"

#include "imitatio/kernel.hpp"

namespace imitatio {

namespace {

// splitmix64 finalizer; bijective, strong avalanche.
inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

inline std::uint64_t keyed(std::uint64_t seed, std::uint64_t lane,
                           std::uint64_t index) {
  return mix64(mix64(mix64(seed) ^ lane) ^ index);
}

inline double to_unit(std::uint64_t h) {
  return double(h >> 11) * 0x1.0p-53;
}

// Lane salts for the two per-site values and the auxiliary streams.
constexpr std::uint64_t kLaneDecrement = 0x1B873593D4A5C681ULL;
constexpr std::uint64_t kLaneUniform = 0x7F4A7C15F39CC060ULL;
constexpr std::uint64_t kLaneStreamBase = 0xA24BAED4963EE407ULL;
constexpr std::uint64_t kReplicaSalt = 0x9FB21C651E98DF25ULL;
constexpr std::uint64_t kResidueSalt = 0xD6E8FEB86659FD93ULL;

}  // namespace

RandomSource::RandomSource(const ImitationKernel& kernel, std::uint64_t seed)
    : kernel_(&kernel), seed_(seed) {}

std::int64_t RandomSource::decrement_at(std::int64_t site) {
  auto it = memo_.find(site);
  if (it != memo_.end()) return it->second;
  double u = to_unit(keyed(seed_, kLaneDecrement, std::uint64_t(site)));
  std::int64_t k = kernel_->sample_decrement(u);
  memo_.emplace(site, k);
  return k;
}

double RandomSource::uniform_at(std::int64_t site) {
  return to_unit(keyed(seed_, kLaneUniform, std::uint64_t(site)));
}

double RandomSource::stream_uniform(Stream tag, std::uint64_t index) {
  return to_unit(
      keyed(seed_, kLaneStreamBase + std::uint64_t(tag) * 0x9E3779B97F4A7C15ULL,
            index));
}

std::uint64_t RandomSource::replica_seed(std::uint64_t master,
                                         std::uint64_t replica) {
  return mix64(mix64(master ^ kReplicaSalt) + replica);
}

std::uint64_t RandomSource::residue_seed(std::uint64_t seed,
                                         std::uint64_t residue) {
  return mix64(mix64(seed ^ kResidueSalt) + residue);
}

}  // namespace imitatio
