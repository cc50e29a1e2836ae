#pragma once

#include <cstdint>
#include <random>

#include "geltc/tensor.hpp"

namespace geltc {

using Rng = std::mt19937_64;

/// SplitMix64 finalizer. Bijective on 64-bit words.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Seed of the sub-stream `stream` derived from `base`. Replication k of an
/// experiment uses derive_seed(base_seed, k); the per-replication RNG streams
/// (truth, contexts, rewards, policy) are derive_seed(replication_seed, id).
constexpr std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) noexcept {
  return mix64(base ^ mix64(stream + 1));
}

inline Rng make_rng(std::uint64_t seed) { return Rng(seed); }

/// Tensor with i.i.d. standard normal entries.
Tensor gaussian_tensor(const Dims& dims, Rng& rng);

}  // namespace geltc
