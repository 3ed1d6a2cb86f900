#include "refpoint/fusion/config.hpp"

#include "refpoint/error.hpp"

namespace refpoint::fusion {

int NetworkConfig::active_branch_count() const {
    int n = 0;
    for (bool b : branches) n += b ? 1 : 0;
    return n;
}

std::vector<Modality> NetworkConfig::active_branches() const {
    std::vector<Modality> out;
    for (Modality m : kAllModalities) {
        if (branches[static_cast<int>(m)]) out.push_back(m);
    }
    return out;
}

void NetworkConfig::validate() const {
    if (frames < 1 || features_per_branch < 1 || dims < 1 || feature_maps < 1 || output_dim < 1) {
        throw Error(Errc::InvalidArgument, "network dimensions must be >= 1");
    }
    if (branch_layers < 1 || joint_layers < 0 || joint_kernel < 1) {
        throw Error(Errc::InvalidArgument, "need >= 1 branch layer, >= 0 joint layers and kernel >= 1");
    }
    if (active_branch_count() == 0) throw Error(Errc::InvalidArgument, "at least one modality branch required");
    if (frames != SampleTensor::kFrames || dims != SampleTensor::kDims ||
        features_per_branch * kModalityCount != SampleTensor::kFeatures) {
        throw Error(Errc::InvalidArgument, "network input shape must match the 36 x 6 x 3 sample layout");
    }
}

void TrainConfig::validate() const {
    if (epochs < 1) throw Error(Errc::InvalidArgument, "epochs must be >= 1");
    if (batch_size < 1) throw Error(Errc::InvalidArgument, "batch_size must be >= 1");
    if (!(lr > 0)) throw Error(Errc::InvalidArgument, "learning rate must be > 0");
    if (beta1 < 0 || beta1 >= 1 || beta2 < 0 || beta2 >= 1 || !(eps > 0)) {
        throw Error(Errc::InvalidArgument, "Adam parameters out of range");
    }
    if (plateau_patience < 1 || !(plateau_factor > 0 && plateau_factor <= 1)) {
        throw Error(Errc::InvalidArgument, "plateau schedule out of range");
    }
    if (validation_fraction <= 0 || validation_fraction >= 1) {
        throw Error(Errc::InvalidArgument, "validation_fraction must lie in (0, 1)");
    }
}

std::array<bool, 3> branch_mask_for(const std::string& subset) {
    if (subset == "fusion") return {true, true, true};
    if (subset == "finger") return {true, false, false};
    if (subset == "gaze" || subset == "eye") return {false, true, false};
    if (subset == "head") return {false, false, true};
    throw Error(Errc::InvalidArgument, "unknown modality subset '" + subset + "'");
}

std::string subset_name(const std::array<bool, 3>& mask) {
    if (mask[0] && mask[1] && mask[2]) return "fusion";
    std::string out;
    const char* names[3] = {"finger", "gaze", "head"};
    for (int i = 0; i < 3; ++i) {
        if (!mask[i]) continue;
        if (!out.empty()) out += "+";
        out += names[i];
    }
    return out;
}

}  // namespace refpoint::fusion
