#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace refpoint::fusion {

struct AdamState {
    std::vector<float> m;
    std::vector<float> v;
    std::int64_t step = 0;

    void reset(std::size_t n) {
        m.assign(n, 0.0f);
        v.assign(n, 0.0f);
        step = 0;
    }
};

/// One bias-corrected Adam update.
void adam_step(std::span<float> params, std::span<const float> grad, AdamState& state, double lr, double beta1,
               double beta2, double eps);

}  // namespace refpoint::fusion
