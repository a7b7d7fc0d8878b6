#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace abstractnet {

// All randomness in the library flows through this engine so that results are
// reproducible from a single 64-bit seed.
using Rng = std::mt19937_64;

/// SplitMix64 finalizer. Bijective on 64-bit values.
std::uint64_t splitmix64(std::uint64_t x);

/// Derives an independent stream seed from a parent seed and an index.
std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t index);

/// Derives a stream seed from a parent seed and a string key (e.g. a file stem).
std::uint64_t derive_seed(std::uint64_t parent, std::string_view key);

/// 64-bit FNV-1a over the bytes of `text`.
std::uint64_t fnv1a64(std::string_view text);

}  // namespace abstractnet
