#include "refpoint/fusion/adam.hpp"

#include "refpoint/error.hpp"

#include <cmath>

namespace refpoint::fusion {

void adam_step(std::span<float> params, std::span<const float> grad, AdamState& state, double lr, double beta1,
               double beta2, double eps) {
    const std::size_t n = params.size();
    if (grad.size() != n || state.m.size() != n || state.v.size() != n) {
        throw Error(Errc::ShapeMismatch, "Adam state does not match the parameter vector");
    }
    ++state.step;
    const double c1 = 1.0 - std::pow(beta1, static_cast<double>(state.step));
    const double c2 = 1.0 - std::pow(beta2, static_cast<double>(state.step));
    const auto b1 = static_cast<float>(beta1);
    const auto b2 = static_cast<float>(beta2);
    const auto step = static_cast<float>(lr / c1);
    const auto inv_c2 = static_cast<float>(1.0 / c2);
    const auto e = static_cast<float>(eps);
    float* m = state.m.data();
    float* v = state.v.data();
    const auto len = static_cast<long>(n);
#pragma omp parallel for simd schedule(static)
    for (long i = 0; i < len; ++i) {
        const float g = grad[static_cast<std::size_t>(i)];
        m[i] = b1 * m[i] + (1.0f - b1) * g;
        v[i] = b2 * v[i] + (1.0f - b2) * g * g;
        params[static_cast<std::size_t>(i)] -= step * m[i] / (std::sqrt(v[i] * inv_c2) + e);
    }
}

}  // namespace refpoint::fusion
