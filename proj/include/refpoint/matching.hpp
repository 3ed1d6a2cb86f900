#pragma once

#include "refpoint/geo.hpp"
#include "refpoint/scenario.hpp"

#include <array>
#include <vector>

namespace refpoint {

/// ROI boxes as 8 vertices each. Vertex i has bit 0 set for the far end of the
/// first box edge, bit 1 for the second and bit 2 for the third (only RayBox
/// relies on this ordering).
struct RoiMap {
    std::vector<int> ids;
    std::vector<std::array<Vec3, 8>> vertices;

    std::size_t size() const { return ids.size(); }
    /// Throws Errc::InvalidArgument: empty map, duplicate ids, zero-volume box.
    void validate() const;

    /// All ROIs of the scenario, vertices in ECEF.
    static RoiMap from_scenario(const Scenario& s);
};

enum class MatchMode {
    Algorithm1,  // per-axis clamp distance to the box of normalized vertex directions
    RayBox,      // 0 when the ray hits the box, otherwise the angle to the centroid (comparison only)
};

struct RoiScore {
    int id = 0;
    double distance = 0.0;        // d_i
    double centroid_angle = 0.0;  // radians between the fused vector and the vertex mean
};

struct MatchResult {
    int roi_id = 0;
    std::vector<RoiScore> scores;  // in RoiMap order
    std::vector<int> ranking;      // ids ascending by (distance, centroid_angle, id)
};

/// Vertices are mapped with `to_car` first (identity when already in the car frame).
/// Throws Errc::ZeroVector when |fused| <= 1e-12.
MatchResult match_roi(const Vec3& fused, const RoiMap& rois, const RigidTransform& to_car,
                      MatchMode mode = MatchMode::Algorithm1);

std::vector<int> rank_rois(const Vec3& fused, const RoiMap& rois, const RigidTransform& to_car,
                           MatchMode mode = MatchMode::Algorithm1);

/// Car-frame copy of the map, for matching many vectors from one pose.
RoiMap to_car_frame(const RoiMap& rois, const RigidTransform& to_car);

}  // namespace refpoint
