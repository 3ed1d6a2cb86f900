#include "refpoint/geo.hpp"

#include "refpoint/error.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <string>

namespace refpoint {

double angle_between(const Vec3& a, const Vec3& b) {
    const double na = a.norm();
    const double nb = b.norm();
    if (na == 0.0 || nb == 0.0) {
        throw Error(Errc::ZeroVector, "angle with a zero vector");
    }
    // atan2 form stays accurate near 0 and pi
    return std::atan2(a.cross(b).norm(), a.dot(b));
}

bool GeodeticPoint::is_valid() const {
    return std::isfinite(lat) && std::isfinite(lon) && std::isfinite(alt) &&
           std::abs(lat) <= std::numbers::pi / 2 && std::abs(lon) <= std::numbers::pi;
}

RigidTransform RigidTransform::inverse() const {
    RigidTransform inv;
    inv.rotation = rotation.transpose();
    inv.pivot = translation;
    inv.translation = pivot;
    return inv;
}

RigidTransform RigidTransform::compose(const RigidTransform& inner) const {
    RigidTransform out;
    out.rotation = rotation * inner.rotation;
    out.pivot = inner.pivot;
    out.translation = rotation * (inner.translation - pivot) + translation;
    return out;
}

bool RigidTransform::is_valid(double tol) const {
    if (!rotation.allFinite() || !translation.allFinite() || !pivot.allFinite()) return false;
    const Mat3 gram = rotation.transpose() * rotation;
    if ((gram - Mat3::Identity()).cwiseAbs().maxCoeff() > tol) return false;
    return std::abs(rotation.determinant() - 1.0) <= tol;
}

double prime_vertical_radius(double lat, const Ellipsoid& ell) {
    const double s = std::sin(lat);
    return ell.semi_major / std::sqrt(1.0 - ell.ecc_sq() * s * s);
}

EcefPoint wgs84_to_ecef(const GeodeticPoint& p, const Ellipsoid& ell) {
    const double n = prime_vertical_radius(p.lat, ell);
    const double cos_lat = std::cos(p.lat);
    return {
        (n + p.alt) * cos_lat * std::cos(p.lon),
        (n + p.alt) * cos_lat * std::sin(p.lon),
        (1.0 - ell.ecc_sq()) * (n + p.alt) * std::sin(p.lat),
    };
}

namespace {

constexpr double kMinTyreSpacing = 0.5;    // meters
constexpr double kMinSineOfFootprint = 1e-3;

}  // namespace

RigidTransform car_pose_transform(const TyreFootprint<EcefPoint>& tyres) {
    const std::array<Vec3, 4> pts{tyres.front_left.vec(), tyres.front_right.vec(),
                                  tyres.rear_left.vec(), tyres.rear_right.vec()};
    for (std::size_t i = 0; i < pts.size(); ++i) {
        for (std::size_t j = i + 1; j < pts.size(); ++j) {
            if ((pts[i] - pts[j]).norm() <= kMinTyreSpacing) {
                throw Error(Errc::DegenerateFootprint,
                            "tyre points " + std::to_string(i) + " and " + std::to_string(j) +
                                " are closer than 0.5 m");
            }
        }
    }
    const Vec3 front_mid = 0.5 * (pts[0] + pts[1]);
    const Vec3 rear_mid = 0.5 * (pts[2] + pts[3]);
    const Vec3 forward_raw = front_mid - rear_mid;
    if (forward_raw.norm() <= kMinTyreSpacing) {
        throw Error(Errc::DegenerateFootprint, "front and rear axle midpoints coincide");
    }
    const Vec3 x_axis = forward_raw.normalized();

    // diagonals FR-RL and FL-RR: their cross product points up for an ISO 8855 layout
    const Vec3 diag_a = pts[1] - pts[2];
    const Vec3 diag_b = pts[0] - pts[3];
    const Vec3 normal = diag_a.cross(diag_b);
    if (normal.norm() <= kMinSineOfFootprint * diag_a.norm() * diag_b.norm()) {
        throw Error(Errc::DegenerateFootprint, "tyre points are collinear");
    }
    Vec3 z_axis = normal - normal.dot(x_axis) * x_axis;
    if (z_axis.norm() <= kMinSineOfFootprint * normal.norm()) {
        throw Error(Errc::DegenerateFootprint, "footprint normal parallel to the centerline");
    }
    z_axis.normalize();
    const Vec3 y_axis = z_axis.cross(x_axis);

    RigidTransform t;
    t.rotation.row(0) = x_axis.transpose();
    t.rotation.row(1) = y_axis.transpose();
    t.rotation.row(2) = z_axis.transpose();
    t.pivot = front_mid;
    return t;
}

RigidTransform car_pose_transform(const TyreFootprint<GeodeticPoint>& tyres, const Ellipsoid& ell) {
    return car_pose_transform(TyreFootprint<EcefPoint>{
        wgs84_to_ecef(tyres.front_left, ell),
        wgs84_to_ecef(tyres.front_right, ell),
        wgs84_to_ecef(tyres.rear_left, ell),
        wgs84_to_ecef(tyres.rear_right, ell),
    });
}

CarVector ecef_to_car(const EcefPoint& p, const RigidTransform& t) {
    return CarVector::from(t.apply(p.vec()));
}

CarVector ground_truth_vector(std::span<const EcefPoint> target, const RigidTransform& t,
                              RefType ref_type) {
    Vec3 aim = Vec3::Zero();
    if (ref_type == RefType::Point) {
        if (target.size() != 1) {
            throw Error(Errc::InvalidArgument, "point target needs exactly one point");
        }
        aim = t.apply(target.front().vec());
    } else {
        if (target.size() < 3) {
            throw Error(Errc::InvalidArgument, "volume target needs at least 3 vertices");
        }
        for (const auto& v : target) aim += t.apply(v.vec());
        aim /= static_cast<double>(target.size());
    }
    const double dist = aim.norm();
    if (!(dist >= 1e-3)) {
        throw Error(Errc::OriginTarget, "target lies within 1 mm of the car origin");
    }
    return CarVector::from(aim / dist, true);
}

}  // namespace refpoint
