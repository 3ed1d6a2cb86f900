#pragma once

#include "refpoint/synth.hpp"

#include <algorithm>
#include <random>
#include <vector>

namespace fixtures {

/// Preprocessed samples of noiseless, unoccluded events cycling over every
/// (pose, target) pair of the default scenario.
inline std::vector<refpoint::SampleTensor> noiseless_samples(std::size_t n, std::uint64_t seed) {
    using namespace refpoint;
    static const Scenario s = build_default_scenario();
    std::vector<std::pair<int, TargetRef>> plan;
    for (const auto& pose : s.poses) {
        for (int r : pose.visible_rois) plan.push_back({pose.id, {RefType::Volume, r}});
        if (!pose.point_referencing) continue;
        for (const auto& poi : s.pois) {
            if (std::find(pose.visible_rois.begin(), pose.visible_rois.end(), poi.roi_id) != pose.visible_rois.end()) {
                plan.push_back({pose.id, {RefType::Point, poi.id}});
            }
        }
    }
    std::vector<SampleTensor> out;
    for (std::size_t i = 0; i < n; ++i) {
        const auto& [pose, target] = plan[i % plan.size()];
        SensorEvent ev = generate_event(s, pose, target, DriverProfile::noiseless(), OcclusionModel::none(),
                                        derive_seed(seed, i));
        ev.header.user_id = user_id_for(static_cast<int>(i % 4));
        out.push_back(preprocess_event(ev, s));
    }
    return out;
}

/// Random network input rows in sample layout.
template <typename T>
std::vector<T> random_input(std::size_t batch, std::size_t sample_size, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g(0.0, 1.0);
    std::vector<T> x(batch * sample_size);
    for (auto& v : x) v = static_cast<T>(g(rng));
    return x;
}

}  // namespace fixtures
