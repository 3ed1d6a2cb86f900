#pragma once

#include "refpoint/frames.hpp"

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace refpoint::fusion {

/// Architecture of the fusion network. Each active branch sees a
/// frames x features_per_branch slab with `dims` coordinate channels.
struct NetworkConfig {
    int frames = SampleTensor::kFrames;
    int features_per_branch = 2;
    int dims = SampleTensor::kDims;
    int feature_maps = 128;
    int branch_layers = 2;  // 1x1 kernels
    int joint_layers = 2;
    int joint_kernel = 2;   // square, stride 1, "same" padding (extra row/column at the end)
    int output_dim = 3;
    /// Which modality branches exist (indexed by Modality).
    std::array<bool, 3> branches{true, true, true};

    int active_branch_count() const;
    std::vector<Modality> active_branches() const;
    int positions() const { return frames * features_per_branch; }
    int sample_size() const { return frames * kModalityCount * features_per_branch * dims; }

    /// Throws Errc::InvalidArgument.
    void validate() const;

    bool operator==(const NetworkConfig&) const = default;

    static NetworkConfig with_branches(std::array<bool, 3> mask) {
        NetworkConfig c;
        c.branches = mask;
        return c;
    }
};

struct TrainConfig {
    int epochs = 50;
    int batch_size = 32;
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    /// halve the learning rate after this many epochs without validation improvement
    int plateau_patience = 5;
    double plateau_factor = 0.5;
    std::uint64_t seed = 2021;
    /// fraction of users held out for validation when no explicit split is given
    double validation_fraction = 0.2;

    /// Throws Errc::InvalidArgument.
    void validate() const;
};

/// Subset of modalities as a branch mask: "finger", "gaze" (eye), "head", "fusion".
std::array<bool, 3> branch_mask_for(const std::string& subset);
std::string subset_name(const std::array<bool, 3>& mask);

}  // namespace refpoint::fusion
