#pragma once

#include "refpoint/geo.hpp"

#include <json.hpp>

#include <array>
#include <filesystem>
#include <string>
#include <vector>

namespace refpoint {

/// Side category of a target relative to the car heading: beyond 45 degrees is far.
/// Positive bearing is left (ISO 8855).
enum class SideCategory : int { FarLeft = 0, NearLeft = 1, NearRight = 2, FarRight = 3 };
inline constexpr int kSideCategoryCount = 4;

std::string_view to_string(SideCategory c) noexcept;
SideCategory categorize_bearing(double bearing_rad);

struct CarPose {
    int id = 0;
    TyreFootprint<GeodeticPoint> tyres{};
    RigidTransform ecef_to_car;  // derived from the tyres on load
    std::vector<int> visible_rois;  // ROI ids used as volume targets from this pose
    bool point_referencing = true;   // whether POI events are recorded from this pose
};

struct Roi {
    int id = 0;
    std::array<GeodeticPoint, 8> vertices{};
    std::array<EcefPoint, 8> ecef{};
};

struct Poi {
    int id = 0;
    int roi_id = 0;
    GeodeticPoint point{};
    EcefPoint ecef{};
};

/// Target of a referencing event: a ROI (volume) or a POI (point).
struct TargetRef {
    RefType type = RefType::Volume;
    int id = 0;
};

struct Scenario {
    Ellipsoid ellipsoid{};
    std::vector<CarPose> poses;
    std::vector<Roi> rois;
    std::vector<Poi> pois;
    std::string comment;

    const CarPose& pose(int id) const;  // Errc::UnknownPose
    const Roi& roi(int id) const;       // Errc::UnknownTarget
    const Poi& poi(int id) const;       // Errc::UnknownTarget

    /// ROI that the target belongs to.
    int roi_of(const TargetRef& target) const;

    /// Unit ground-truth vector in the car frame of the given pose.
    CarVector ground_truth(int pose_id, const TargetRef& target) const;

    /// Bearing of the ground-truth vector (radians, left positive).
    double bearing(int pose_id, const TargetRef& target) const;
    SideCategory category(int pose_id, const TargetRef& target) const;

    /// Recompute ECEF points and pose transforms from the geodetic data.
    void finalize();
    /// Throws Errc::FormatError when an invariant is violated.
    void validate() const;
};

/// Scenario map file. Angles in decimal degrees on disk, radians in memory.
nlohmann::json scenario_to_json(const Scenario& s);
Scenario scenario_from_json(const nlohmann::json& j);
Scenario load_scenario(const std::filesystem::path& path);
void save_scenario(const Scenario& s, const std::filesystem::path& path);

}  // namespace refpoint
