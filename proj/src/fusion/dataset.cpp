#include "refpoint/fusion/dataset.hpp"

#include <cmath>

namespace refpoint::fusion {

namespace {
constexpr int kT = SampleTensor::kFrames;
constexpr int kD = SampleTensor::kDims;
}  // namespace

Normalizer Normalizer::fit(std::span<const SampleTensor> samples) {
    Normalizer n;
    std::array<double, 9> sum{}, sq{};
    std::array<double, 3> count{};
    for (const auto& s : samples) {
        for (int m = 0; m < kModalityCount; ++m) {
            if (!s.present[static_cast<std::size_t>(m)]) continue;
            count[static_cast<std::size_t>(m)] += kT;
            for (int t = 0; t < kT; ++t) {
                for (int d = 0; d < kD; ++d) {
                    const double v = s.at(t, 2 * m, d);
                    sum[static_cast<std::size_t>(m * kD + d)] += v;
                    sq[static_cast<std::size_t>(m * kD + d)] += v * v;
                }
            }
        }
    }
    for (int m = 0; m < kModalityCount; ++m) {
        const double c = count[static_cast<std::size_t>(m)];
        if (c == 0) continue;
        for (int d = 0; d < kD; ++d) {
            const auto i = static_cast<std::size_t>(m * kD + d);
            const double mu = sum[i] / c;
            const double var = std::max(sq[i] / c - mu * mu, 0.0);
            n.mean[i] = mu;
            n.sd[i] = std::sqrt(var) > 1e-6 ? std::sqrt(var) : 1.0;
        }
    }
    return n;
}

template <typename T>
void Normalizer::apply(const SampleTensor& s, T* out) const {
    for (int t = 0; t < kT; ++t) {
        for (int f = 0; f < SampleTensor::kFeatures; ++f) {
            const int m = f / 2;
            const bool present = s.present[static_cast<std::size_t>(m)];
            for (int d = 0; d < kD; ++d) {
                double v = s.at(t, f, d);
                if (!present) {
                    v = 0.0;
                } else if (f % 2 == 0) {
                    const auto i = static_cast<std::size_t>(m * kD + d);
                    v = (v - mean[i]) / sd[i];
                }
                out[SampleTensor::index(t, f, d)] = static_cast<T>(v);
            }
        }
    }
}

template <typename T>
PackedSet<T> pack(std::span<const SampleTensor> samples, const Normalizer& norm) {
    PackedSet<T> p;
    p.n = samples.size();
    p.x.resize(p.n * SampleTensor::kSize);
    p.y.resize(p.n * 3);
    for (std::size_t i = 0; i < p.n; ++i) {
        norm.apply(samples[i], p.x.data() + i * SampleTensor::kSize);
        const Vec3 l = samples[i].label.vec();
        for (int d = 0; d < 3; ++d) p.y[3 * i + static_cast<std::size_t>(d)] = static_cast<T>(l[d]);
    }
    return p;
}

template void Normalizer::apply<float>(const SampleTensor&, float*) const;
template void Normalizer::apply<double>(const SampleTensor&, double*) const;
template PackedSet<float> pack<float>(std::span<const SampleTensor>, const Normalizer&);
template PackedSet<double> pack<double>(std::span<const SampleTensor>, const Normalizer&);

}  // namespace refpoint::fusion
