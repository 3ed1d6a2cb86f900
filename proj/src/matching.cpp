#include "refpoint/matching.hpp"

#include "refpoint/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

namespace refpoint {

void RoiMap::validate() const {
    if (ids.empty()) throw Error(Errc::InvalidArgument, "ROI map is empty");
    if (ids.size() != vertices.size()) throw Error(Errc::InvalidArgument, "ROI ids and vertex sets differ in length");
    if (std::set<int>(ids.begin(), ids.end()).size() != ids.size()) {
        throw Error(Errc::InvalidArgument, "duplicate ROI id");
    }
    for (std::size_t r = 0; r < vertices.size(); ++r) {
        Vec3 lo = vertices[r][0], hi = vertices[r][0];
        for (const Vec3& v : vertices[r]) {
            lo = lo.cwiseMin(v);
            hi = hi.cwiseMax(v);
        }
        const Vec3 ext = hi - lo;
        if (!(ext.x() > 0 && ext.y() > 0 && ext.z() > 0)) {
            throw Error(Errc::InvalidArgument, "ROI " + std::to_string(ids[r]) + " has zero bounding volume");
        }
    }
}

RoiMap RoiMap::from_scenario(const Scenario& s) {
    RoiMap m;
    for (const Roi& r : s.rois) {
        m.ids.push_back(r.id);
        std::array<Vec3, 8> v;
        for (std::size_t i = 0; i < 8; ++i) v[i] = r.ecef[i].vec();
        m.vertices.push_back(v);
    }
    return m;
}

RoiMap to_car_frame(const RoiMap& rois, const RigidTransform& to_car) {
    RoiMap out = rois;
    for (auto& box : out.vertices) {
        for (auto& v : box) v = to_car.apply(v);
    }
    return out;
}

namespace {

double clamp_distance(const Vec3& dir, const std::array<Vec3, 8>& box) {
    Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
    Vec3 hi = -lo;
    for (const Vec3& v : box) {
        const Vec3 u = v.normalized();
        lo = lo.cwiseMin(u);
        hi = hi.cwiseMax(u);
    }
    double sq = 0.0;
    for (int a = 0; a < 3; ++a) {
        const double d = std::max({lo[a] - dir[a], 0.0, dir[a] - hi[a]});
        sq += d * d;
    }
    return std::sqrt(sq);
}

// Slab test in the parallelepiped's own coordinates, t >= 0.
bool ray_hits(const Vec3& dir, const std::array<Vec3, 8>& box) {
    Mat3 edges;
    edges.col(0) = box[1] - box[0];
    edges.col(1) = box[2] - box[0];
    edges.col(2) = box[4] - box[0];
    const Mat3 inv = edges.inverse();
    const Vec3 q = inv * (-box[0]);
    const Vec3 w = inv * dir;
    double t0 = 0.0;
    double t1 = std::numeric_limits<double>::infinity();
    for (int a = 0; a < 3; ++a) {
        if (std::abs(w[a]) < 1e-15) {
            if (q[a] < 0.0 || q[a] > 1.0) return false;
            continue;
        }
        double ta = (0.0 - q[a]) / w[a];
        double tb = (1.0 - q[a]) / w[a];
        if (ta > tb) std::swap(ta, tb);
        t0 = std::max(t0, ta);
        t1 = std::min(t1, tb);
        if (t0 > t1) return false;
    }
    return true;
}

}  // namespace

MatchResult match_roi(const Vec3& fused, const RoiMap& rois, const RigidTransform& to_car, MatchMode mode) {
    const double n = fused.norm();
    if (!(n > 1e-12)) throw Error(Errc::ZeroVector, "fused vector has zero norm");
    rois.validate();
    const Vec3 dir = fused / n;

    MatchResult res;
    res.scores.reserve(rois.size());
    for (std::size_t r = 0; r < rois.size(); ++r) {
        std::array<Vec3, 8> box;
        Vec3 mean = Vec3::Zero();
        for (std::size_t i = 0; i < 8; ++i) {
            box[i] = to_car.apply(rois.vertices[r][i]);
            mean += box[i];
        }
        mean /= 8.0;
        RoiScore s;
        s.id = rois.ids[r];
        s.centroid_angle = angle_between(fused, mean);
        s.distance = mode == MatchMode::Algorithm1 ? clamp_distance(dir, box)
                                                    : (ray_hits(dir, box) ? 0.0 : s.centroid_angle);
        res.scores.push_back(s);
    }

    std::vector<RoiScore> order = res.scores;
    std::sort(order.begin(), order.end(), [](const RoiScore& a, const RoiScore& b) {
        if (a.distance != b.distance) return a.distance < b.distance;
        if (a.centroid_angle != b.centroid_angle) return a.centroid_angle < b.centroid_angle;
        return a.id < b.id;
    });
    for (const auto& s : order) res.ranking.push_back(s.id);
    res.roi_id = res.ranking.front();
    return res;
}

std::vector<int> rank_rois(const Vec3& fused, const RoiMap& rois, const RigidTransform& to_car, MatchMode mode) {
    return match_roi(fused, rois, to_car, mode).ranking;
}

}  // namespace refpoint
