#pragma once

#include <cstdint>
#include <random>

namespace atlasgp {

using Rng = std::mt19937_64;

std::uint64_t splitmix64(std::uint64_t x);

/// Order-independent seed for stream (a, b) under a master seed.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a, std::uint64_t b = 0);

inline Rng make_rng(std::uint64_t master, std::uint64_t a, std::uint64_t b = 0)
{
    return Rng(derive_seed(master, a, b));
}

} // namespace atlasgp
