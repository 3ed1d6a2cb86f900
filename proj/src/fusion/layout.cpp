#include "refpoint/fusion/layout.hpp"

#include "refpoint/error.hpp"

namespace refpoint::fusion {

ParamLayout::ParamLayout(const NetworkConfig& cfg) : cfg_(cfg) {
    cfg.validate();
    const int fm = cfg.feature_maps;
    const char* names[3] = {"finger", "eye", "head"};
    for (Modality m : cfg.active_branches()) {
        const std::string prefix = names[static_cast<int>(m)];
        for (int l = 0; l < cfg.branch_layers; ++l) {
            const int cin = l == 0 ? cfg.dims : fm;
            add(prefix + ".conv" + std::to_string(l) + ".kernel", ParamKind::ConvKernel, {1, 1, cin, fm}, cin, fm);
            add(prefix + ".conv" + std::to_string(l) + ".bias", ParamKind::Bias, {fm}, cin, fm);
        }
    }
    const int k = cfg.joint_kernel;
    for (int l = 0; l < cfg.joint_layers; ++l) {
        const int cin = l == 0 ? fm * cfg.active_branch_count() : fm;
        add("joint.conv" + std::to_string(l) + ".kernel", ParamKind::ConvKernel, {k, k, cin, fm}, k * k * cin, fm);
        add("joint.conv" + std::to_string(l) + ".bias", ParamKind::Bias, {fm}, k * k * cin, fm);
    }
    const int channels = cfg.joint_layers > 0 ? fm : fm * cfg.active_branch_count();
    const int flat = cfg.positions() * channels;
    add("dense.kernel", ParamKind::DenseKernel, {flat, cfg.output_dim}, flat, cfg.output_dim);
    add("dense.bias", ParamKind::Bias, {cfg.output_dim}, flat, cfg.output_dim);
}

void ParamLayout::add(std::string name, ParamKind kind, std::vector<int> shape, int fan_in, int fan_out) {
    ParamTensor t;
    t.name = std::move(name);
    t.kind = kind;
    t.size = 1;
    for (int s : shape) t.size *= static_cast<std::size_t>(s);
    t.shape = std::move(shape);
    t.offset = total_;
    t.fan_in = fan_in;
    t.fan_out = fan_out;
    total_ += t.size;
    tensors_.push_back(std::move(t));
}

std::size_t ParamLayout::branch_kernel(int modality, int layer) const {
    std::size_t idx = 0;
    for (Modality m : cfg_.active_branches()) {
        if (static_cast<int>(m) == modality) return idx + 2 * static_cast<std::size_t>(layer);
        idx += 2 * static_cast<std::size_t>(cfg_.branch_layers);
    }
    throw Error(Errc::InvalidArgument, "branch not present in this network");
}

std::size_t ParamLayout::joint_kernel(int layer) const {
    return 2 * static_cast<std::size_t>(cfg_.branch_layers * cfg_.active_branch_count() + layer);
}

std::size_t ParamLayout::dense_kernel() const { return tensors_.size() - 2; }

const ParamTensor& ParamLayout::find(const std::string& name) const {
    for (const auto& t : tensors_) {
        if (t.name == name) return t;
    }
    throw Error(Errc::InvalidArgument, "no parameter tensor named " + name);
}

}  // namespace refpoint::fusion
