#pragma once

#include "refpoint/fusion/config.hpp"

#include <span>
#include <vector>

// Serial direct-loop implementation of the fusion network, kept as the
// reference the optimized kernels are tested and benchmarked against.
namespace refpoint::reference {

/// Outputs, batch x output_dim.
template <typename T>
std::vector<T> naive_forward(const fusion::NetworkConfig& cfg, std::span<const T> params, std::span<const T> x,
                             std::size_t batch);

/// Parameter gradient for d loss / d output = d_out.
template <typename T>
std::vector<T> naive_backward(const fusion::NetworkConfig& cfg, std::span<const T> params, std::span<const T> x,
                              std::size_t batch, std::span<const T> d_out);

}  // namespace refpoint::reference
