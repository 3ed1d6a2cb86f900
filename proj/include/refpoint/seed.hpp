#pragma once

#include <cstdint>

namespace refpoint {

/// Deterministic mixing of a base seed with stream indices (splitmix64 rounds).
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b = 0);

}  // namespace refpoint
