#pragma once

#include <cstdint>
#include <random>

namespace epiopt {

using Rng = std::mt19937_64;

/// SplitMix64 finalizer. Used to derive independent stream seeds from a base
/// seed and an index so that episode i of an evaluation does not depend on
/// how many draws episode i-1 consumed.
constexpr std::uint64_t mix_seed(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index) noexcept {
  return mix_seed(mix_seed(base) ^ mix_seed(index + 0x632be59bd9b4e019ULL));
}

// Stream tags keep training, evaluation and model sampling seeds disjoint.
namespace stream {
inline constexpr std::uint64_t kTrain = 0x7472616eULL;
inline constexpr std::uint64_t kEval = 0x6576616cULL;
inline constexpr std::uint64_t kInit = 0x696e6974ULL;
inline constexpr std::uint64_t kSweep = 0x73776565ULL;
}  // namespace stream

inline double uniform01(Rng& rng) {
  return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

}  // namespace epiopt
