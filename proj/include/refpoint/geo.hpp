#pragma once

#include <Eigen/Dense>
#include <Eigen/Geometry>

#include <numbers>
#include <span>

namespace refpoint {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

constexpr double deg_to_rad(double deg) { return deg * std::numbers::pi / 180.0; }
constexpr double rad_to_deg(double rad) { return rad * 180.0 / std::numbers::pi; }

/// Angle between two nonzero vectors in radians, in [0, pi].
double angle_between(const Vec3& a, const Vec3& b);

/// Geodetic position. Angles in radians, altitude in meters above the ellipsoid.
struct GeodeticPoint {
    double lat = 0.0;
    double lon = 0.0;
    double alt = 0.0;

    static GeodeticPoint from_degrees(double lat_deg, double lon_deg, double alt_m) {
        return {deg_to_rad(lat_deg), deg_to_rad(lon_deg), alt_m};
    }
    bool is_valid() const;
};

/// Reference ellipsoid. The squared eccentricity is always derived from the axes.
struct Ellipsoid {
    double semi_major = 6378137.0;
    double semi_minor = 6356752.3142;

    double ecc_sq() const { return 1.0 - (semi_minor * semi_minor) / (semi_major * semi_major); }
    bool is_valid() const { return semi_minor > 0.0 && semi_minor <= semi_major; }

    static Ellipsoid wgs84() { return {}; }
};

struct EcefPoint {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;

    Vec3 vec() const { return {x, y, z}; }
    static EcefPoint from(const Vec3& v) { return {v.x(), v.y(), v.z()}; }
};

/// A position or direction in the ISO 8855 vehicle frame (x forward, y left, z up),
/// origin at the front-axle center.
struct CarVector {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;
    bool normalized = false;

    Vec3 vec() const { return {x, y, z}; }
    static CarVector from(const Vec3& v, bool normalized = false) {
        return {v.x(), v.y(), v.z(), normalized};
    }
};

/// p' = rotation * (p - pivot) + translation. The pivot keeps ECEF-sized
/// coordinates out of the rotation: subtracting a nearby origin first is exact,
/// so a car-frame round trip loses only the final rounding of the ECEF result.
struct RigidTransform {
    Mat3 rotation = Mat3::Identity();
    Vec3 translation = Vec3::Zero();
    Vec3 pivot = Vec3::Zero();

    Vec3 apply(const Vec3& p) const { return rotation * (p - pivot) + translation; }
    Vec3 rotate(const Vec3& d) const { return rotation * d; }
    RigidTransform inverse() const;
    /// (this ∘ inner)(p) = this(inner(p))
    RigidTransform compose(const RigidTransform& inner) const;
    bool is_valid(double tol = 1e-9) const;

    static RigidTransform identity() { return {}; }
};

/// Tyre ground-contact points, labeled explicitly.
template <typename Point>
struct TyreFootprint {
    Point front_left;
    Point front_right;
    Point rear_left;
    Point rear_right;
};

enum class RefType { Volume, Point };

/// N(lat) = a / sqrt(1 - e^2 sin^2 lat)
double prime_vertical_radius(double lat, const Ellipsoid& ell = Ellipsoid::wgs84());

EcefPoint wgs84_to_ecef(const GeodeticPoint& p, const Ellipsoid& ell = Ellipsoid::wgs84());

/// Fit the ECEF -> car transform from four tyre contact points. Origin at the
/// front-axle midpoint, x from rear-axle midpoint to front-axle midpoint, z along
/// the footprint normal (up), y completing the right-handed frame.
/// Throws Errc::DegenerateFootprint for collinear or coincident points.
RigidTransform car_pose_transform(const TyreFootprint<EcefPoint>& tyres);
RigidTransform car_pose_transform(const TyreFootprint<GeodeticPoint>& tyres,
                                  const Ellipsoid& ell = Ellipsoid::wgs84());

CarVector ecef_to_car(const EcefPoint& p, const RigidTransform& t);

/// Unit vector from the car origin to the target: the point itself for
/// RefType::Point, the mean of all vertices for RefType::Volume.
/// Throws Errc::OriginTarget when the target lies within 1 mm of the origin.
CarVector ground_truth_vector(std::span<const EcefPoint> target, const RigidTransform& t,
                              RefType ref_type);

}  // namespace refpoint
