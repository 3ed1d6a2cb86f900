#include "refpoint/fusion/network.hpp"

#include "refpoint/error.hpp"
#include "refpoint/fusion/kernels.hpp"

#include <cmath>
#include <cstring>
#include <random>

namespace refpoint::fusion {

namespace k = kernels;

template <typename T>
FusionNet<T>::FusionNet(const NetworkConfig& cfg) : cfg_(cfg), layout_(cfg) {}

template <typename T>
void FusionNet<T>::prepare(Workspace<T>& ws, std::size_t batch) const {
    if (ws.batch == batch && ws.output.size() == batch * static_cast<std::size_t>(cfg_.output_dim)) return;
    const std::size_t rows = batch * static_cast<std::size_t>(cfg_.positions());
    const auto fm = static_cast<std::size_t>(cfg_.feature_maps);
    const auto nb = static_cast<std::size_t>(cfg_.active_branch_count());
    const auto kk = static_cast<std::size_t>(cfg_.joint_kernel * cfg_.joint_kernel);
    ws.batch = batch;
    for (Modality m : cfg_.active_branches()) {
        const int mi = static_cast<int>(m);
        ws.branch_in[mi].assign(rows * static_cast<std::size_t>(cfg_.dims), T(0));
        ws.branch_act[mi].assign(static_cast<std::size_t>(cfg_.branch_layers), std::vector<T>(rows * fm));
    }
    ws.concat.assign(rows * fm * nb, T(0));
    ws.joint_col.resize(static_cast<std::size_t>(cfg_.joint_layers));
    ws.joint_act.resize(static_cast<std::size_t>(cfg_.joint_layers));
    std::size_t widest = rows * fm * nb;
    for (int l = 0; l < cfg_.joint_layers; ++l) {
        const std::size_t cin = l == 0 ? fm * nb : fm;
        ws.joint_col[static_cast<std::size_t>(l)].assign(rows * kk * cin, T(0));
        ws.joint_act[static_cast<std::size_t>(l)].assign(rows * fm, T(0));
        widest = std::max(widest, rows * kk * cin);
    }
    ws.output.assign(batch * static_cast<std::size_t>(cfg_.output_dim), T(0));
    ws.grad_a.assign(rows * fm * nb, T(0));
    ws.grad_b.assign(rows * fm * nb, T(0));
    ws.grad_col.assign(widest, T(0));
}

template <typename T>
void FusionNet<T>::forward(std::span<const T> params, std::span<const T> x, std::size_t batch,
                           Workspace<T>& ws) const {
    const auto sample = static_cast<std::size_t>(cfg_.sample_size());
    if (params.size() != layout_.total()) throw Error(Errc::ShapeMismatch, "parameter vector size mismatch");
    if (batch == 0 || x.size() != batch * sample) throw Error(Errc::ShapeMismatch, "input batch size mismatch");
    prepare(ws, batch);

    const auto& tensors = layout_.tensors();
    const int tf = cfg_.frames;
    const int fpb = cfg_.features_per_branch;
    const int dims = cfg_.dims;
    const auto fm = static_cast<std::size_t>(cfg_.feature_maps);
    const std::size_t rows = batch * static_cast<std::size_t>(cfg_.positions());
    const auto nb = static_cast<std::size_t>(cfg_.active_branch_count());
    const std::size_t concat_c = fm * nb;

    std::size_t slot = 0;
    for (Modality m : cfg_.active_branches()) {
        const int mi = static_cast<int>(m);
        T* in = ws.branch_in[static_cast<std::size_t>(mi)].data();
        for (std::size_t b = 0; b < batch; ++b) {
            for (int t = 0; t < tf; ++t) {
                for (int j = 0; j < fpb; ++j) {
                    const std::size_t src = b * sample + static_cast<std::size_t>((t * fpb * kModalityCount + mi * fpb + j) * dims);
                    const std::size_t dst = ((b * static_cast<std::size_t>(tf) + static_cast<std::size_t>(t)) * static_cast<std::size_t>(fpb) + static_cast<std::size_t>(j)) * static_cast<std::size_t>(dims);
                    std::memcpy(in + dst, x.data() + src, sizeof(T) * static_cast<std::size_t>(dims));
                }
            }
        }
        const T* cur = in;
        std::size_t cin = static_cast<std::size_t>(dims);
        for (int l = 0; l < cfg_.branch_layers; ++l) {
            const ParamTensor& w = tensors[layout_.branch_kernel(mi, l)];
            const ParamTensor& bias = tensors[layout_.branch_kernel(mi, l) + 1];
            T* out = ws.branch_act[static_cast<std::size_t>(mi)][static_cast<std::size_t>(l)].data();
            k::gemm_nn(rows, fm, cin, cur, params.data() + w.offset, out, false);
            k::add_bias(rows, fm, params.data() + bias.offset, out);
            k::relu_inplace(rows * fm, out);
            cur = out;
            cin = fm;
        }
        for (std::size_t r = 0; r < rows; ++r) {
            std::memcpy(ws.concat.data() + r * concat_c + slot * fm, cur + r * fm, sizeof(T) * fm);
        }
        ++slot;
    }

    const int kern = cfg_.joint_kernel;
    const int pad = (kern - 1) / 2;
    const T* cur = ws.concat.data();
    std::size_t cin = concat_c;
    for (int l = 0; l < cfg_.joint_layers; ++l) {
        const auto li = static_cast<std::size_t>(l);
        const ParamTensor& w = tensors[layout_.joint_kernel(l)];
        const ParamTensor& bias = tensors[layout_.joint_kernel(l) + 1];
        T* col = ws.joint_col[li].data();
        T* out = ws.joint_act[li].data();
        k::im2col(batch, tf, fpb, static_cast<int>(cin), kern, pad, cur, col);
        k::gemm_nn(rows, fm, static_cast<std::size_t>(kern * kern) * cin, col, params.data() + w.offset, out, false);
        k::add_bias(rows, fm, params.data() + bias.offset, out);
        k::relu_inplace(rows * fm, out);
        cur = out;
        cin = fm;
    }

    const ParamTensor& dw = tensors[layout_.dense_kernel()];
    const ParamTensor& db = tensors[layout_.dense_kernel() + 1];
    const auto out_dim = static_cast<std::size_t>(cfg_.output_dim);
    const std::size_t flat = static_cast<std::size_t>(cfg_.positions()) * cin;
    k::gemm_nn(batch, out_dim, flat, cur, params.data() + dw.offset, ws.output.data(), false);
    k::add_bias(batch, out_dim, params.data() + db.offset, ws.output.data());
}

template <typename T>
void FusionNet<T>::backward(std::span<const T> params, std::span<const T> d_out, Workspace<T>& ws,
                            std::span<T> grad) const {
    const std::size_t batch = ws.batch;
    const auto out_dim = static_cast<std::size_t>(cfg_.output_dim);
    if (params.size() != layout_.total() || grad.size() != layout_.total()) {
        throw Error(Errc::ShapeMismatch, "parameter/gradient vector size mismatch");
    }
    if (batch == 0 || d_out.size() != batch * out_dim) throw Error(Errc::ShapeMismatch, "output gradient size mismatch");

    const auto& tensors = layout_.tensors();
    const int tf = cfg_.frames;
    const int fpb = cfg_.features_per_branch;
    const auto fm = static_cast<std::size_t>(cfg_.feature_maps);
    const std::size_t rows = batch * static_cast<std::size_t>(cfg_.positions());
    const auto nb = static_cast<std::size_t>(cfg_.active_branch_count());
    const std::size_t concat_c = fm * nb;
    const int kern = cfg_.joint_kernel;
    const int pad = (kern - 1) / 2;
    T* g = grad.data();
    const T* p = params.data();

    // dense head
    const T* last = cfg_.joint_layers > 0 ? ws.joint_act.back().data() : ws.concat.data();
    const std::size_t last_c = cfg_.joint_layers > 0 ? fm : concat_c;
    const std::size_t flat = static_cast<std::size_t>(cfg_.positions()) * last_c;
    const ParamTensor& dw = tensors[layout_.dense_kernel()];
    const ParamTensor& db = tensors[layout_.dense_kernel() + 1];
    k::gemm_tn(flat, out_dim, batch, last, d_out.data(), g + dw.offset, false);
    k::column_sums(batch, out_dim, d_out.data(), g + db.offset, false);
    T* d_cur = ws.grad_a.data();
    T* d_next = ws.grad_b.data();
    k::gemm_nt(batch, flat, out_dim, d_out.data(), p + dw.offset, d_cur, false);

    for (int l = cfg_.joint_layers - 1; l >= 0; --l) {
        const auto li = static_cast<std::size_t>(l);
        const std::size_t cin = l == 0 ? concat_c : fm;
        const std::size_t width = static_cast<std::size_t>(kern * kern) * cin;
        const ParamTensor& w = tensors[layout_.joint_kernel(l)];
        const ParamTensor& bias = tensors[layout_.joint_kernel(l) + 1];
        k::relu_mask(rows * fm, ws.joint_act[li].data(), d_cur);
        k::gemm_tn(width, fm, rows, ws.joint_col[li].data(), d_cur, g + w.offset, false);
        k::column_sums(rows, fm, d_cur, g + bias.offset, false);
        k::gemm_nt(rows, width, fm, d_cur, p + w.offset, ws.grad_col.data(), false);
        k::col2im(batch, tf, fpb, static_cast<int>(cin), kern, pad, ws.grad_col.data(), d_next, false);
        std::swap(d_cur, d_next);
    }

    // d_cur now holds d(concat): rows x concat_c
    std::size_t slot = 0;
    for (Modality m : cfg_.active_branches()) {
        const int mi = static_cast<int>(m);
        const auto& acts = ws.branch_act[static_cast<std::size_t>(mi)];
        T* d = d_next;
        for (std::size_t r = 0; r < rows; ++r) {
            std::memcpy(d + r * fm, d_cur + r * concat_c + slot * fm, sizeof(T) * fm);
        }
        T* d_prev = ws.grad_col.data();
        for (int l = cfg_.branch_layers - 1; l >= 0; --l) {
            const auto li = static_cast<std::size_t>(l);
            const std::size_t cin = l == 0 ? static_cast<std::size_t>(cfg_.dims) : fm;
            const T* input = l == 0 ? ws.branch_in[static_cast<std::size_t>(mi)].data() : acts[li - 1].data();
            const ParamTensor& w = tensors[layout_.branch_kernel(mi, l)];
            const ParamTensor& bias = tensors[layout_.branch_kernel(mi, l) + 1];
            k::relu_mask(rows * fm, acts[li].data(), d);
            k::gemm_tn(cin, fm, rows, input, d, g + w.offset, false);
            k::column_sums(rows, fm, d, g + bias.offset, false);
            if (l > 0) {
                k::gemm_nt(rows, cin, fm, d, p + w.offset, d_prev, false);
                std::swap(d, d_prev);
            }
        }
        ++slot;
    }
}

template <typename T>
std::vector<T> init_params(const ParamLayout& layout, std::uint64_t seed) {
    std::vector<T> out(layout.total(), T(0));
    std::mt19937_64 rng(seed);
    for (const auto& t : layout.tensors()) {
        T* dst = out.data() + t.offset;
        if (t.kind == ParamKind::ConvKernel) {
            std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / t.fan_in));
            for (std::size_t i = 0; i < t.size; ++i) dst[i] = static_cast<T>(dist(rng));
        } else if (t.kind == ParamKind::DenseKernel) {
            const double limit = std::sqrt(6.0 / (t.fan_in + t.fan_out));
            std::uniform_real_distribution<double> dist(-limit, limit);
            for (std::size_t i = 0; i < t.size; ++i) dst[i] = static_cast<T>(dist(rng));
        }
    }
    return out;
}

template class FusionNet<float>;
template class FusionNet<double>;
template std::vector<float> init_params<float>(const ParamLayout&, std::uint64_t);
template std::vector<double> init_params<double>(const ParamLayout&, std::uint64_t);

}  // namespace refpoint::fusion
