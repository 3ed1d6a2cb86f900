#pragma once

#include "refpoint/fusion/config.hpp"
#include "refpoint/fusion/layout.hpp"

#include <array>
#include <cstdint>
#include <span>
#include <vector>

namespace refpoint::fusion {

/// Activations kept between forward and backward for one batch.
template <typename T>
struct Workspace {
    std::size_t batch = 0;
    std::array<std::vector<T>, 3> branch_in;
    std::array<std::vector<std::vector<T>>, 3> branch_act;
    std::vector<T> concat;
    std::vector<std::vector<T>> joint_col;
    std::vector<std::vector<T>> joint_act;
    std::vector<T> output;  // batch x output_dim
    std::vector<T> grad_a, grad_b, grad_col;
};

/// Per-modality 1x1 convolution stacks, channel concatenation, k x k joint
/// convolutions, flatten, dense regression head. Activations are laid out
/// (batch, time, feature, channel). Parameters live in a flat vector described
/// by layout().
template <typename T>
class FusionNet {
public:
    explicit FusionNet(const NetworkConfig& cfg);

    const NetworkConfig& config() const { return cfg_; }
    const ParamLayout& layout() const { return layout_; }
    std::size_t num_params() const { return layout_.total(); }

    /// x: batch rows in SampleTensor layout (36 x 6 x 3). Result in ws.output.
    /// Throws Errc::ShapeMismatch.
    void forward(std::span<const T> params, std::span<const T> x, std::size_t batch, Workspace<T>& ws) const;

    /// Gradient of a loss w.r.t. every parameter given d loss / d output for the
    /// batch last passed to forward(). grad is overwritten.
    void backward(std::span<const T> params, std::span<const T> d_out, Workspace<T>& ws, std::span<T> grad) const;

private:
    void prepare(Workspace<T>& ws, std::size_t batch) const;

    NetworkConfig cfg_;
    ParamLayout layout_;
};

/// He-normal conv kernels, Glorot-uniform dense kernel, zero biases.
template <typename T>
std::vector<T> init_params(const ParamLayout& layout, std::uint64_t seed);

extern template class FusionNet<float>;
extern template class FusionNet<double>;

}  // namespace refpoint::fusion
