#include "refpoint/reference/naive_net.hpp"

#include "refpoint/error.hpp"
#include "refpoint/fusion/layout.hpp"

namespace refpoint::reference {

using fusion::NetworkConfig;
using fusion::ParamLayout;

namespace {

// map[t][f][c] as a flat vector
template <typename T>
struct Map {
    int h = 0, w = 0, c = 0;
    std::vector<T> v;

    Map(int h_, int w_, int c_) : h(h_), w(w_), c(c_), v(static_cast<std::size_t>(h_ * w_ * c_), T(0)) {}
    T& at(int y, int x, int ch) { return v[static_cast<std::size_t>((y * w + x) * c + ch)]; }
    T at(int y, int x, int ch) const { return v[static_cast<std::size_t>((y * w + x) * c + ch)]; }
};

template <typename T>
struct Trace {
    std::vector<Map<T>> branch_in;                // per active branch
    std::vector<std::vector<Map<T>>> branch_out;  // per active branch, per layer
    std::vector<Map<T>> joint_in;                 // per joint layer
    std::vector<Map<T>> joint_out;
    Map<T> flat_src{0, 0, 0};
    std::vector<T> out;
};

template <typename T>
Map<T> conv(const Map<T>& in, const T* w, const T* b, int k, int pad, int cout) {
    Map<T> out(in.h, in.w, cout);
    for (int y = 0; y < in.h; ++y) {
        for (int x = 0; x < in.w; ++x) {
            for (int o = 0; o < cout; ++o) {
                T acc = b[o];
                for (int ky = 0; ky < k; ++ky) {
                    for (int kx = 0; kx < k; ++kx) {
                        const int sy = y + ky - pad, sx = x + kx - pad;
                        if (sy < 0 || sy >= in.h || sx < 0 || sx >= in.w) continue;
                        for (int i = 0; i < in.c; ++i) {
                            acc += in.at(sy, sx, i) * w[((ky * k + kx) * in.c + i) * cout + o];
                        }
                    }
                }
                out.at(y, x, o) = acc > T(0) ? acc : T(0);
            }
        }
    }
    return out;
}

// Given dL/d(out) of a ReLU conv, accumulate dL/dW, dL/db and return dL/d(in).
template <typename T>
Map<T> conv_back(const Map<T>& in, const Map<T>& out, Map<T> d_out, const T* w, T* gw, T* gb, int k, int pad) {
    const int cout = out.c;
    Map<T> d_in(in.h, in.w, in.c);
    for (int y = 0; y < out.h; ++y) {
        for (int x = 0; x < out.w; ++x) {
            for (int o = 0; o < cout; ++o) {
                if (!(out.at(y, x, o) > T(0))) continue;
                const T g = d_out.at(y, x, o);
                gb[o] += g;
                for (int ky = 0; ky < k; ++ky) {
                    for (int kx = 0; kx < k; ++kx) {
                        const int sy = y + ky - pad, sx = x + kx - pad;
                        if (sy < 0 || sy >= in.h || sx < 0 || sx >= in.w) continue;
                        for (int i = 0; i < in.c; ++i) {
                            const std::size_t wi = static_cast<std::size_t>(((ky * k + kx) * in.c + i) * cout + o);
                            gw[wi] += g * in.at(sy, sx, i);
                            d_in.at(sy, sx, i) += g * w[wi];
                        }
                    }
                }
            }
        }
    }
    return d_in;
}

template <typename T>
Trace<T> run(const NetworkConfig& cfg, const ParamLayout& layout, const T* p, const T* x) {
    Trace<T> tr;
    const int fpb = cfg.features_per_branch;
    const int fm = cfg.feature_maps;
    const auto& ts = layout.tensors();
    const auto active = cfg.active_branches();
    for (Modality m : active) {
        const int mi = static_cast<int>(m);
        Map<T> in(cfg.frames, fpb, cfg.dims);
        for (int t = 0; t < cfg.frames; ++t)
            for (int j = 0; j < fpb; ++j)
                for (int d = 0; d < cfg.dims; ++d)
                    in.at(t, j, d) = x[(t * fpb * kModalityCount + mi * fpb + j) * cfg.dims + d];
        tr.branch_in.push_back(in);
        std::vector<Map<T>> outs;
        const Map<T>* cur = &tr.branch_in.back();
        for (int l = 0; l < cfg.branch_layers; ++l) {
            const auto& w = ts[layout.branch_kernel(mi, l)];
            const auto& b = ts[layout.branch_kernel(mi, l) + 1];
            outs.push_back(conv(*cur, p + w.offset, p + b.offset, 1, 0, fm));
            cur = &outs.back();
        }
        tr.branch_out.push_back(std::move(outs));
    }
    Map<T> cat(cfg.frames, fpb, fm * static_cast<int>(active.size()));
    for (std::size_t a = 0; a < active.size(); ++a) {
        const Map<T>& src = tr.branch_out[a].back();
        for (int y = 0; y < cat.h; ++y)
            for (int xx = 0; xx < cat.w; ++xx)
                for (int o = 0; o < fm; ++o) cat.at(y, xx, static_cast<int>(a) * fm + o) = src.at(y, xx, o);
    }
    Map<T> cur = cat;
    const int pad = (cfg.joint_kernel - 1) / 2;
    for (int l = 0; l < cfg.joint_layers; ++l) {
        const auto& w = ts[layout.joint_kernel(l)];
        const auto& b = ts[layout.joint_kernel(l) + 1];
        tr.joint_in.push_back(cur);
        cur = conv(cur, p + w.offset, p + b.offset, cfg.joint_kernel, pad, fm);
        tr.joint_out.push_back(cur);
    }
    tr.flat_src = cur;
    const auto& dw = ts[layout.dense_kernel()];
    const auto& db = ts[layout.dense_kernel() + 1];
    tr.out.assign(static_cast<std::size_t>(cfg.output_dim), T(0));
    for (int o = 0; o < cfg.output_dim; ++o) {
        T acc = p[db.offset + static_cast<std::size_t>(o)];
        for (std::size_t i = 0; i < cur.v.size(); ++i) acc += cur.v[i] * p[dw.offset + i * static_cast<std::size_t>(cfg.output_dim) + static_cast<std::size_t>(o)];
        tr.out[static_cast<std::size_t>(o)] = acc;
    }
    return tr;
}

void check_shapes(const NetworkConfig& cfg, const ParamLayout& layout, std::size_t np, std::size_t nx, std::size_t batch) {
    if (np != layout.total()) throw Error(Errc::ShapeMismatch, "parameter vector size mismatch");
    if (batch == 0 || nx != batch * static_cast<std::size_t>(cfg.sample_size())) {
        throw Error(Errc::ShapeMismatch, "input batch size mismatch");
    }
}

}  // namespace

template <typename T>
std::vector<T> naive_forward(const NetworkConfig& cfg, std::span<const T> params, std::span<const T> x,
                             std::size_t batch) {
    const ParamLayout layout(cfg);
    check_shapes(cfg, layout, params.size(), x.size(), batch);
    std::vector<T> out;
    for (std::size_t b = 0; b < batch; ++b) {
        const Trace<T> tr = run(cfg, layout, params.data(), x.data() + b * static_cast<std::size_t>(cfg.sample_size()));
        out.insert(out.end(), tr.out.begin(), tr.out.end());
    }
    return out;
}

template <typename T>
std::vector<T> naive_backward(const NetworkConfig& cfg, std::span<const T> params, std::span<const T> x,
                              std::size_t batch, std::span<const T> d_out) {
    const ParamLayout layout(cfg);
    check_shapes(cfg, layout, params.size(), x.size(), batch);
    if (d_out.size() != batch * static_cast<std::size_t>(cfg.output_dim)) throw Error(Errc::ShapeMismatch, "d_out size");
    const auto& ts = layout.tensors();
    const T* p = params.data();
    std::vector<T> g(layout.total(), T(0));
    const int fm = cfg.feature_maps;
    const int pad = (cfg.joint_kernel - 1) / 2;
    const auto active = cfg.active_branches();

    for (std::size_t b = 0; b < batch; ++b) {
        const Trace<T> tr = run(cfg, layout, p, x.data() + b * static_cast<std::size_t>(cfg.sample_size()));
        const T* dy = d_out.data() + b * static_cast<std::size_t>(cfg.output_dim);
        const auto& dw = ts[layout.dense_kernel()];
        const auto& db = ts[layout.dense_kernel() + 1];
        Map<T> d_cur(tr.flat_src.h, tr.flat_src.w, tr.flat_src.c);
        for (int o = 0; o < cfg.output_dim; ++o) {
            g[db.offset + static_cast<std::size_t>(o)] += dy[o];
            for (std::size_t i = 0; i < tr.flat_src.v.size(); ++i) {
                const std::size_t wi = dw.offset + i * static_cast<std::size_t>(cfg.output_dim) + static_cast<std::size_t>(o);
                g[wi] += dy[o] * tr.flat_src.v[i];
                d_cur.v[i] += dy[o] * p[wi];
            }
        }
        for (int l = cfg.joint_layers - 1; l >= 0; --l) {
            const auto li = static_cast<std::size_t>(l);
            const auto& w = ts[layout.joint_kernel(l)];
            const auto& bb = ts[layout.joint_kernel(l) + 1];
            d_cur = conv_back(tr.joint_in[li], tr.joint_out[li], d_cur, p + w.offset, g.data() + w.offset,
                              g.data() + bb.offset, cfg.joint_kernel, pad);
        }
        for (std::size_t a = 0; a < active.size(); ++a) {
            const int mi = static_cast<int>(active[a]);
            Map<T> d(cfg.frames, cfg.features_per_branch, fm);
            for (int y = 0; y < d.h; ++y)
                for (int xx = 0; xx < d.w; ++xx)
                    for (int o = 0; o < fm; ++o) d.at(y, xx, o) = d_cur.at(y, xx, static_cast<int>(a) * fm + o);
            for (int l = cfg.branch_layers - 1; l >= 0; --l) {
                const auto li = static_cast<std::size_t>(l);
                const Map<T>& in = l == 0 ? tr.branch_in[a] : tr.branch_out[a][li - 1];
                const auto& w = ts[layout.branch_kernel(mi, l)];
                const auto& bb = ts[layout.branch_kernel(mi, l) + 1];
                d = conv_back(in, tr.branch_out[a][li], d, p + w.offset, g.data() + w.offset, g.data() + bb.offset, 1, 0);
            }
        }
    }
    return g;
}

template std::vector<float> naive_forward<float>(const NetworkConfig&, std::span<const float>, std::span<const float>, std::size_t);
template std::vector<double> naive_forward<double>(const NetworkConfig&, std::span<const double>, std::span<const double>, std::size_t);
template std::vector<float> naive_backward<float>(const NetworkConfig&, std::span<const float>, std::span<const float>, std::size_t, std::span<const float>);
template std::vector<double> naive_backward<double>(const NetworkConfig&, std::span<const double>, std::span<const double>, std::size_t, std::span<const double>);

}  // namespace refpoint::reference
