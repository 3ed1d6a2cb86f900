#pragma once

#include "refpoint/frames.hpp"

#include <array>
#include <span>
#include <vector>

namespace refpoint::fusion {

/// Standardizes position features (finger, eye, head positions) with train-set
/// statistics; direction features pass through. Modalities that were absent
/// stay zero.
struct Normalizer {
    std::array<double, 9> mean{};  // [modality][dim]
    std::array<double, 9> sd{1, 1, 1, 1, 1, 1, 1, 1, 1};

    static Normalizer fit(std::span<const SampleTensor> samples);
    static Normalizer identity() { return {}; }

    template <typename T>
    void apply(const SampleTensor& s, T* out) const;
};

/// Samples packed for the network: inputs n x 648, labels n x 3.
template <typename T>
struct PackedSet {
    std::vector<T> x;
    std::vector<T> y;
    std::size_t n = 0;
};

template <typename T>
PackedSet<T> pack(std::span<const SampleTensor> samples, const Normalizer& norm);

}  // namespace refpoint::fusion
