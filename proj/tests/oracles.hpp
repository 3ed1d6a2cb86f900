#pragma once

// Independent re-derivations used only by the tests. None of these call into the
// library routines they are compared against.

#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <utility>
#include <vector>

namespace oracle {

using V3 = std::array<double, 3>;

inline double dot(const V3& a, const V3& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }
inline double norm(const V3& a) { return std::sqrt(dot(a, a)); }
inline V3 unit(const V3& a) {
    const double n = norm(a);
    return {a[0] / n, a[1] / n, a[2] / n};
}

/// Angle between two vectors via atan2 of cross and dot, which is accurate near 0 and pi.
inline double angle(const V3& a, const V3& b) {
    const V3 c{a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
    return std::atan2(norm(c), dot(a, b));
}

/// Inverse of the ECEF mapping used by the library, where the z row carries
/// (1 - e^2)(N + h) rather than (N (1 - e^2) + h). With that form
/// tan(lat) = z / ((1 - e^2) p) holds exactly, so the inverse is closed form.
struct Geodetic {
    double lat, lon, h;
};
inline Geodetic ecef_to_geodetic(double x, double y, double z, double a = 6378137.0, double b = 6356752.3142) {
    const double e2 = 1.0 - (b * b) / (a * a);
    const double p = std::hypot(x, y);
    const double lat = std::atan2(z, (1.0 - e2) * p);
    const double s = std::sin(lat);
    const double n = a / std::sqrt(1.0 - e2 * s * s);
    // (N + h) is the length of (p, z / (1 - e^2))
    const double h = std::hypot(p, z / (1.0 - e2)) - n;
    return {lat, std::atan2(y, x), h};
}

/// Mean angle computed row by row with plain acos on clamped cosines.
inline double mad(const std::vector<V3>& pred, const std::vector<V3>& truth) {
    double sum = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        double c = dot(pred[i], truth[i]) / (norm(pred[i]) * norm(truth[i]));
        c = std::fmax(-1.0, std::fmin(1.0, c));
        sum += std::acos(c);
    }
    return sum / static_cast<double>(pred.size());
}

/// Indices of the 36 timestamps nearest to the trigger, found by full sort on
/// (|t - trigger|, t). Returned in time order.
inline std::vector<std::size_t> nearest_window(const std::vector<double>& ts, double trigger, std::size_t count = 36) {
    std::vector<std::size_t> idx(ts.size());
    std::iota(idx.begin(), idx.end(), 0);
    for (std::size_t i = 0; i < idx.size(); ++i) {
        for (std::size_t j = i + 1; j < idx.size(); ++j) {
            const double di = std::fabs(ts[idx[i]] - trigger);
            const double dj = std::fabs(ts[idx[j]] - trigger);
            if (dj < di || (dj == di && ts[idx[j]] < ts[idx[i]])) std::swap(idx[i], idx[j]);
        }
    }
    idx.resize(count);
    for (std::size_t i = 0; i < idx.size(); ++i) {
        for (std::size_t j = i + 1; j < idx.size(); ++j) {
            if (idx[j] < idx[i]) std::swap(idx[i], idx[j]);
        }
    }
    return idx;
}

/// Distance from point q to the box [lo, hi] by grid search with repeated
/// zooming around the best sample. The distance is convex over the box, so the
/// search converges to the true minimum.
inline double box_distance_by_sampling(const V3& q, const V3& lo, const V3& hi) {
    constexpr int kGrid = 9;
    V3 a = lo, b = hi;
    double best = std::numeric_limits<double>::infinity();
    V3 best_p = lo;
    for (int round = 0; round < 40; ++round) {
        for (int i = 0; i < kGrid; ++i) {
            for (int j = 0; j < kGrid; ++j) {
                for (int k = 0; k < kGrid; ++k) {
                    const V3 p{a[0] + (b[0] - a[0]) * i / (kGrid - 1), a[1] + (b[1] - a[1]) * j / (kGrid - 1),
                               a[2] + (b[2] - a[2]) * k / (kGrid - 1)};
                    const V3 d{q[0] - p[0], q[1] - p[1], q[2] - p[2]};
                    const double dist = norm(d);
                    if (dist < best) {
                        best = dist;
                        best_p = p;
                    }
                }
            }
        }
        for (int c = 0; c < 3; ++c) {
            const double half = (b[c] - a[c]) / 4.0;
            a[c] = std::fmax(lo[c], best_p[c] - half);
            b[c] = std::fmin(hi[c], best_p[c] + half);
        }
    }
    return best;
}

struct RoiChoice {
    int id = 0;
    std::vector<double> distances;
    std::vector<double> centroid_angles;
};

/// Nearest ROI for a fused vector by sampling: each ROI is the set of directions
/// spanned by the componentwise range of its normalized vertices; ties on distance
/// (within `tie_tol`) fall back to the centroid angle, then the lowest id.
inline RoiChoice choose_roi(const V3& fused, const std::vector<int>& ids,
                            const std::vector<std::array<V3, 8>>& vertices, double tie_tol = 1e-9) {
    const V3 f = unit(fused);
    RoiChoice r;
    for (const auto& box : vertices) {
        V3 lo{1e300, 1e300, 1e300}, hi{-1e300, -1e300, -1e300};
        V3 mean{0, 0, 0};
        for (const auto& v : box) {
            const V3 u = unit(v);
            for (int c = 0; c < 3; ++c) {
                lo[c] = std::fmin(lo[c], u[c]);
                hi[c] = std::fmax(hi[c], u[c]);
                mean[c] += v[c] / 8.0;
            }
        }
        r.distances.push_back(box_distance_by_sampling(f, lo, hi));
        r.centroid_angles.push_back(angle(f, mean));
    }
    std::size_t best = 0;
    for (std::size_t i = 1; i < ids.size(); ++i) {
        const double dd = r.distances[i] - r.distances[best];
        if (dd < -tie_tol) {
            best = i;
        } else if (std::fabs(dd) <= tie_tol) {
            if (r.centroid_angles[i] < r.centroid_angles[best] ||
                (r.centroid_angles[i] == r.centroid_angles[best] && ids[i] < ids[best])) {
                best = i;
            }
        }
    }
    r.id = ids[best];
    return r;
}

/// Least squares line through (x, y) by solving the 2x2 normal equations with
/// Cramer's rule.
struct Line {
    double slope, intercept, r2;
};
inline Line normal_equations(const std::vector<double>& x, const std::vector<double>& y) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const double n = static_cast<double>(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        sx += x[i];
        sy += y[i];
        sxx += x[i] * x[i];
        sxy += x[i] * y[i];
    }
    const double det = n * sxx - sx * sx;
    const double slope = (n * sxy - sx * sy) / det;
    const double intercept = (sxx * sy - sx * sxy) / det;
    double ss_res = 0, ss_tot = 0;
    const double my = sy / n;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double e = y[i] - (slope * x[i] + intercept);
        ss_res += e * e;
        ss_tot += (y[i] - my) * (y[i] - my);
    }
    return {slope, intercept, 1.0 - ss_res / ss_tot};
}

}  // namespace oracle
