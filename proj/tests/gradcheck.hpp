#pragma once

#include "fixtures.hpp"

#include "refpoint/fusion/loss.hpp"
#include "refpoint/fusion/network.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>
#include <vector>

namespace gradcheck {

struct TensorError {
    std::string name;
    std::size_t checked = 0;
    double rel = 0.0;  // |analytic - numeric| / max(|analytic|, |numeric|), as vector norms over checked entries
};

/// Central differences of the mean angular loss at float64 against backward().
/// `per_tensor` = 0 checks every entry, otherwise that many random entries per tensor.
inline std::vector<TensorError> check(const refpoint::fusion::NetworkConfig& cfg, std::size_t batch,
                                      std::size_t per_tensor, std::uint64_t seed, double h = 1e-6) {
    using namespace refpoint::fusion;
    FusionNet<double> net(cfg);
    std::vector<double> params = init_params<double>(net.layout(), seed);
    // non-zero biases so their gradients are exercised away from the init point
    std::mt19937_64 rng(seed + 1);
    std::normal_distribution<double> g(0.0, 0.05);
    for (const auto& t : net.layout().tensors()) {
        if (t.kind == ParamKind::Bias) {
            for (std::size_t i = 0; i < t.size; ++i) params[t.offset + i] = g(rng);
        }
    }
    const auto x = fixtures::random_input<double>(batch, static_cast<std::size_t>(cfg.sample_size()), seed + 2);
    const auto y = fixtures::random_input<double>(batch, 3, seed + 3);

    Workspace<double> ws;
    auto loss_at = [&](const std::vector<double>& p) {
        net.forward(p, x, batch, ws);
        return mad_loss<double>(ws.output, y);
    };
    net.forward(params, x, batch, ws);
    std::vector<double> d_out(batch * 3);
    mad_loss<double>(ws.output, y, d_out);
    std::vector<double> grad(net.num_params());
    net.backward(params, d_out, ws, grad);

    std::vector<TensorError> out;
    for (const auto& t : net.layout().tensors()) {
        std::vector<std::size_t> idx;
        if (per_tensor == 0 || per_tensor >= t.size) {
            for (std::size_t i = 0; i < t.size; ++i) idx.push_back(t.offset + i);
        } else {
            std::uniform_int_distribution<std::size_t> pick(0, t.size - 1);
            for (std::size_t k = 0; k < per_tensor; ++k) idx.push_back(t.offset + pick(rng));
        }
        double diff = 0, na = 0, nn = 0;
        for (std::size_t i : idx) {
            std::vector<double> p = params;
            p[i] = params[i] + h;
            const double lp = loss_at(p);
            p[i] = params[i] - h;
            const double lm = loss_at(p);
            const double numeric = (lp - lm) / (2 * h);
            diff += (grad[i] - numeric) * (grad[i] - numeric);
            na += grad[i] * grad[i];
            nn += numeric * numeric;
        }
        const double denom = std::max({std::sqrt(na), std::sqrt(nn), 1e-300});
        out.push_back({t.name, idx.size(), std::sqrt(diff) / denom});
    }
    return out;
}

}  // namespace gradcheck
