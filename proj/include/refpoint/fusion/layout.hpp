#pragma once

#include "refpoint/fusion/config.hpp"

#include <cstddef>
#include <string>
#include <vector>

namespace refpoint::fusion {

enum class ParamKind { ConvKernel, DenseKernel, Bias };

/// One tensor inside the flat parameter vector. Kernels use the
/// (kernel_h, kernel_w, in, out) order; dense kernels are (in, out).
struct ParamTensor {
    std::string name;
    ParamKind kind = ParamKind::Bias;
    std::vector<int> shape;
    std::size_t offset = 0;
    std::size_t size = 0;
    int fan_in = 0;
    int fan_out = 0;
};

/// Fixed order: branches (finger, eye, head; active only), each layer kernel then
/// bias; joint layers; dense kernel, dense bias.
class ParamLayout {
public:
    explicit ParamLayout(const NetworkConfig& cfg);

    const std::vector<ParamTensor>& tensors() const { return tensors_; }
    std::size_t total() const { return total_; }

    /// Index into tensors() for branch b (Modality index), layer l.
    std::size_t branch_kernel(int modality, int layer) const;
    std::size_t joint_kernel(int layer) const;
    std::size_t dense_kernel() const;

    const ParamTensor& find(const std::string& name) const;  // Errc::InvalidArgument

private:
    void add(std::string name, ParamKind kind, std::vector<int> shape, int fan_in, int fan_out);

    std::vector<ParamTensor> tensors_;
    std::size_t total_ = 0;
    NetworkConfig cfg_;
};

}  // namespace refpoint::fusion
