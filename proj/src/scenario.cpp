#include "refpoint/scenario.hpp"

#include "refpoint/error.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

namespace refpoint {

using nlohmann::json;

std::string_view to_string(SideCategory c) noexcept {
    switch (c) {
        case SideCategory::FarLeft: return "far-left";
        case SideCategory::NearLeft: return "near-left";
        case SideCategory::NearRight: return "near-right";
        case SideCategory::FarRight: return "far-right";
    }
    return "unknown";
}

SideCategory categorize_bearing(double bearing_rad) {
    const bool far = std::abs(bearing_rad) > std::numbers::pi / 4;
    if (bearing_rad >= 0.0) return far ? SideCategory::FarLeft : SideCategory::NearLeft;
    return far ? SideCategory::FarRight : SideCategory::NearRight;
}

const CarPose& Scenario::pose(int id) const {
    auto it = std::find_if(poses.begin(), poses.end(), [id](const CarPose& p) { return p.id == id; });
    if (it == poses.end()) throw Error(Errc::UnknownPose, "no car pose with id " + std::to_string(id));
    return *it;
}

const Roi& Scenario::roi(int id) const {
    auto it = std::find_if(rois.begin(), rois.end(), [id](const Roi& r) { return r.id == id; });
    if (it == rois.end()) throw Error(Errc::UnknownTarget, "no ROI with id " + std::to_string(id));
    return *it;
}

const Poi& Scenario::poi(int id) const {
    auto it = std::find_if(pois.begin(), pois.end(), [id](const Poi& p) { return p.id == id; });
    if (it == pois.end()) throw Error(Errc::UnknownTarget, "no POI with id " + std::to_string(id));
    return *it;
}

int Scenario::roi_of(const TargetRef& target) const {
    return target.type == RefType::Volume ? roi(target.id).id : poi(target.id).roi_id;
}

CarVector Scenario::ground_truth(int pose_id, const TargetRef& target) const {
    const RigidTransform& t = pose(pose_id).ecef_to_car;
    if (target.type == RefType::Volume) {
        const Roi& r = roi(target.id);
        return ground_truth_vector(r.ecef, t, RefType::Volume);
    }
    const Poi& p = poi(target.id);
    return ground_truth_vector(std::span<const EcefPoint>(&p.ecef, 1), t, RefType::Point);
}

double Scenario::bearing(int pose_id, const TargetRef& target) const {
    const CarVector g = ground_truth(pose_id, target);
    return std::atan2(g.y, g.x);
}

SideCategory Scenario::category(int pose_id, const TargetRef& target) const {
    return categorize_bearing(bearing(pose_id, target));
}

void Scenario::finalize() {
    for (auto& r : rois) {
        for (std::size_t i = 0; i < r.vertices.size(); ++i) r.ecef[i] = wgs84_to_ecef(r.vertices[i], ellipsoid);
    }
    for (auto& p : pois) p.ecef = wgs84_to_ecef(p.point, ellipsoid);
    for (auto& p : poses) p.ecef_to_car = car_pose_transform(p.tyres, ellipsoid);
}

namespace {

// Distance in meters from p to the surface of the parallelepiped spanned by
// vertex 0 and the edges to vertices 1, 2 and 4. Negative when p is off the box.
double surface_distance(const Roi& r, const Vec3& p) {
    const Vec3 o = r.ecef[0].vec();
    Mat3 edges;
    edges.col(0) = r.ecef[1].vec() - o;
    edges.col(1) = r.ecef[2].vec() - o;
    edges.col(2) = r.ecef[4].vec() - o;
    const Vec3 c = edges.colPivHouseholderQr().solve(p - o);
    double best = std::numeric_limits<double>::infinity();
    for (int a = 0; a < 3; ++a) {
        const double len = edges.col(a).norm();
        // distance outside the slab along this axis
        const double outside = std::max({-c[a], c[a] - 1.0, 0.0}) * len;
        if (outside > 0.01) return -1.0;
        best = std::min({best, std::abs(c[a]) * len, std::abs(1.0 - c[a]) * len});
    }
    return best;
}

json geodetic_to_json(const GeodeticPoint& p) {
    return json::array({rad_to_deg(p.lat), rad_to_deg(p.lon), p.alt});
}

GeodeticPoint geodetic_from_json(const json& j) {
    if (!j.is_array() || j.size() != 3) throw Error(Errc::FormatError, "expected [lat, lon, alt]");
    GeodeticPoint p = GeodeticPoint::from_degrees(j[0].get<double>(), j[1].get<double>(), j[2].get<double>());
    if (!p.is_valid()) throw Error(Errc::FormatError, "geodetic point out of range");
    return p;
}

}  // namespace

void Scenario::validate() const {
    if (!ellipsoid.is_valid()) throw Error(Errc::FormatError, "invalid ellipsoid axes");
    if (rois.empty()) throw Error(Errc::FormatError, "scenario has no ROI");
    if (poses.empty()) throw Error(Errc::FormatError, "scenario has no car pose");
    for (const auto& p : poses) {
        for (int id : p.visible_rois) roi(id);
    }
    for (const auto& p : pois) {
        const Roi& r = roi(p.roi_id);
        const double d = surface_distance(r, p.ecef.vec());
        if (d < 0.0 || d > 0.01) {
            throw Error(Errc::FormatError,
                        "POI " + std::to_string(p.id) + " is not on the surface of ROI " + std::to_string(r.id));
        }
    }
}

json scenario_to_json(const Scenario& s) {
    json j;
    j["comment"] = s.comment;
    j["ellipsoid"] = {{"semi_major", s.ellipsoid.semi_major}, {"semi_minor", s.ellipsoid.semi_minor}};
    j["car_poses"] = json::array();
    for (const auto& p : s.poses) {
        j["car_poses"].push_back({
            {"id", p.id},
            {"tyres",
             {{"FL", geodetic_to_json(p.tyres.front_left)},
              {"FR", geodetic_to_json(p.tyres.front_right)},
              {"RL", geodetic_to_json(p.tyres.rear_left)},
              {"RR", geodetic_to_json(p.tyres.rear_right)}}},
            {"visible_rois", p.visible_rois},
            {"point_referencing", p.point_referencing},
        });
    }
    j["rois"] = json::array();
    for (const auto& r : s.rois) {
        json verts = json::array();
        for (const auto& v : r.vertices) verts.push_back(geodetic_to_json(v));
        j["rois"].push_back({{"id", r.id}, {"vertices", verts}});
    }
    j["pois"] = json::array();
    for (const auto& p : s.pois) {
        j["pois"].push_back({{"id", p.id}, {"roi_id", p.roi_id}, {"point", geodetic_to_json(p.point)}});
    }
    return j;
}

Scenario scenario_from_json(const json& j) {
    try {
        Scenario s;
        s.comment = j.value("comment", "");
        if (j.contains("ellipsoid")) {
            s.ellipsoid.semi_major = j.at("ellipsoid").at("semi_major").get<double>();
            s.ellipsoid.semi_minor = j.at("ellipsoid").at("semi_minor").get<double>();
        }
        for (const auto& jp : j.at("car_poses")) {
            CarPose p;
            p.id = jp.at("id").get<int>();
            const auto& t = jp.at("tyres");
            p.tyres = {geodetic_from_json(t.at("FL")), geodetic_from_json(t.at("FR")),
                       geodetic_from_json(t.at("RL")), geodetic_from_json(t.at("RR"))};
            if (jp.contains("visible_rois")) p.visible_rois = jp.at("visible_rois").get<std::vector<int>>();
            p.point_referencing = jp.value("point_referencing", true);
            s.poses.push_back(std::move(p));
        }
        for (const auto& jr : j.at("rois")) {
            Roi r;
            r.id = jr.at("id").get<int>();
            const auto& verts = jr.at("vertices");
            if (verts.size() != 8) {
                throw Error(Errc::FormatError, "ROI " + std::to_string(r.id) + " needs 8 vertices");
            }
            for (std::size_t i = 0; i < 8; ++i) r.vertices[i] = geodetic_from_json(verts[i]);
            s.rois.push_back(r);
        }
        if (j.contains("pois")) {
            for (const auto& jp : j.at("pois")) {
                Poi p;
                p.id = jp.value("id", static_cast<int>(s.pois.size()) + 1);
                p.roi_id = jp.at("roi_id").get<int>();
                p.point = geodetic_from_json(jp.at("point"));
                s.pois.push_back(p);
            }
        }
        for (auto& p : s.poses) {
            if (p.visible_rois.empty()) {
                for (const auto& r : s.rois) p.visible_rois.push_back(r.id);
            }
        }
        s.finalize();
        s.validate();
        return s;
    } catch (const json::exception& e) {
        throw Error(Errc::FormatError, std::string("scenario: ") + e.what());
    }
}

Scenario load_scenario(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(Errc::IoError, "cannot open scenario file " + path.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw Error(Errc::FormatError, path.string() + ": " + e.what());
    }
    return scenario_from_json(j);
}

void save_scenario(const Scenario& s, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw Error(Errc::IoError, "cannot write scenario file " + path.string());
    out << scenario_to_json(s).dump(2) << '\n';
}

}  // namespace refpoint
