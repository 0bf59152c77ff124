#pragma once

#include <cstdint>
#include <random>
#include <string>

namespace sclera {

using Rng = std::mt19937_64;

/// Independent stream `stream` derived from a user seed.
Rng make_rng(std::uint64_t seed, std::uint64_t stream = 0);

// The std distributions are implementation-defined; these helpers keep
// draws identical across standard libraries.

/// Uniform double in [0, 1).
double uniform01(Rng& rng);
/// Uniform double in [lo, hi).
double uniform(Rng& rng, double lo, double hi);
/// Uniform integer in [lo, hi] (inclusive).
std::int64_t uniform_int(Rng& rng, std::int64_t lo, std::int64_t hi);
/// True with probability p.
bool bernoulli(Rng& rng, double p);

template <typename It>
void shuffle(It first, It last, Rng& rng) {
  const auto n = static_cast<std::int64_t>(last - first);
  for (std::int64_t i = n - 1; i > 0; --i) {
    const auto j = uniform_int(rng, 0, i);
    std::swap(first[i], first[j]);
  }
}

std::string serialize_rng(const Rng& rng);
Rng deserialize_rng(const std::string& state);

}  // namespace sclera
