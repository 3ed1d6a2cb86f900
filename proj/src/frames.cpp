#include "refpoint/frames.hpp"

#include "refpoint/error.hpp"

#include <algorithm>
#include <cmath>
#include <optional>

namespace refpoint {

std::string_view to_string(Modality m) noexcept {
    switch (m) {
        case Modality::Finger: return "finger";
        case Modality::Eye: return "eye";
        case Modality::Head: return "head";
    }
    return "unknown";
}

void FrameStream::validate() const {
    if (!(rate > 0.0) || !std::isfinite(rate)) {
        throw Error(Errc::FormatError, "stream rate must be positive");
    }
    for (std::size_t i = 1; i < frames.size(); ++i) {
        if (!(frames[i].timestamp > frames[i - 1].timestamp)) {
            throw Error(Errc::FormatError,
                        "timestamps not strictly increasing at frame " + std::to_string(i));
        }
    }
}

Mat3 euler_to_rotation(const EulerAngles& e) {
    return (Eigen::AngleAxisd(e.yaw, Vec3::UnitZ()) * Eigen::AngleAxisd(e.pitch, Vec3::UnitY()) *
            Eigen::AngleAxisd(e.roll, Vec3::UnitX()))
        .toRotationMatrix();
}

EulerAngles rotation_to_euler(const Mat3& r) {
    EulerAngles e;
    e.pitch = std::asin(std::clamp(-r(2, 0), -1.0, 1.0));
    e.yaw = std::atan2(r(1, 0), r(0, 0));
    e.roll = std::atan2(r(2, 1), r(2, 2));
    return e;
}

Vec3 euler_to_direction(const EulerAngles& e) {
    const double cp = std::cos(e.pitch);
    return {std::cos(e.yaw) * cp, std::sin(e.yaw) * cp, -std::sin(e.pitch)};
}

ModalityFrame transform_frame(const ModalityFrame& frame, const SensorExtrinsics& ext) {
    ModalityFrame out = frame;
    out.finger_pos = ext.gcs.apply(frame.finger_pos);
    out.finger_dir = ext.gcs.rotate(frame.finger_dir);
    out.eye_pos = ext.vcs.apply(frame.eye_pos);
    out.eye_dir = ext.vcs.rotate(frame.eye_dir);
    out.head_pos = ext.vcs.apply(frame.head_pos);
    out.head_euler = rotation_to_euler(ext.vcs.rotation * euler_to_rotation(frame.head_euler));
    return out;
}

namespace {

double wrap_angle(double a) {
    return std::remainder(a, 2.0 * std::numbers::pi);
}

Vec3 lerp(const Vec3& a, const Vec3& b, double w) { return a + w * (b - a); }

Vec3 lerp_direction(const Vec3& a, const Vec3& b, double w) {
    const Vec3 v = lerp(a, b, w);
    const double n = v.norm();
    return n > 1e-12 ? Vec3(v / n) : a;
}

// Copies modality m's fields from `src` into `dst`.
void copy_modality(ModalityFrame& dst, const ModalityFrame& src, Modality m) {
    switch (m) {
        case Modality::Finger:
            dst.finger_pos = src.finger_pos;
            dst.finger_dir = src.finger_dir;
            break;
        case Modality::Eye:
            dst.eye_pos = src.eye_pos;
            dst.eye_dir = src.eye_dir;
            break;
        case Modality::Head:
            dst.head_pos = src.head_pos;
            dst.head_euler = src.head_euler;
            break;
    }
}

void blend_modality(ModalityFrame& dst, const ModalityFrame& a, const ModalityFrame& b, double w,
                    Modality m) {
    switch (m) {
        case Modality::Finger:
            dst.finger_pos = lerp(a.finger_pos, b.finger_pos, w);
            dst.finger_dir = lerp_direction(a.finger_dir, b.finger_dir, w);
            break;
        case Modality::Eye:
            dst.eye_pos = lerp(a.eye_pos, b.eye_pos, w);
            dst.eye_dir = lerp_direction(a.eye_dir, b.eye_dir, w);
            break;
        case Modality::Head:
            dst.head_pos = lerp(a.head_pos, b.head_pos, w);
            dst.head_euler.roll = a.head_euler.roll + w * wrap_angle(b.head_euler.roll - a.head_euler.roll);
            dst.head_euler.pitch = a.head_euler.pitch + w * (b.head_euler.pitch - a.head_euler.pitch);
            dst.head_euler.yaw = a.head_euler.yaw + w * wrap_angle(b.head_euler.yaw - a.head_euler.yaw);
            break;
    }
}

void zero_modality(ModalityFrame& f, Modality m) {
    switch (m) {
        case Modality::Finger:
            f.finger_pos.setZero();
            f.finger_dir.setZero();
            break;
        case Modality::Eye:
            f.eye_pos.setZero();
            f.eye_dir.setZero();
            break;
        case Modality::Head:
            f.head_pos.setZero();
            f.head_euler = {};
            break;
    }
}

}  // namespace

FrameStream interpolate_gaps(const FrameStream& stream, AbsentPolicy policy) {
    FrameStream out = stream;
    auto& frames = out.frames;
    const std::size_t n = frames.size();

    for (Modality m : kAllModalities) {
        std::vector<std::size_t> known;
        bool any_absent = false;
        for (std::size_t i = 0; i < n; ++i) {
            const Validity v = frames[i].valid(m);
            if (is_known(v)) known.push_back(i);
            any_absent = any_absent || v == Validity::Absent;
        }
        if (known.empty()) {
            if (n > 0 && policy == AbsentPolicy::Throw && !any_absent) {
                throw Error(Errc::EmptyModality,
                            std::string(to_string(m)) + " has no valid frame in the stream");
            }
            for (auto& f : frames) {
                zero_modality(f, m);
                f.valid(m) = Validity::Absent;
            }
            continue;
        }

        std::size_t next = 0;  // index into `known` of the first known frame >= i
        for (std::size_t i = 0; i < n; ++i) {
            while (next < known.size() && known[next] < i) ++next;
            if (frames[i].valid(m) != Validity::Missing) continue;

            const std::optional<std::size_t> before =
                next > 0 ? std::optional<std::size_t>(known[next - 1]) : std::nullopt;
            const std::optional<std::size_t> after =
                next < known.size() ? std::optional<std::size_t>(known[next]) : std::nullopt;

            if (before && after) {
                const double t0 = frames[*before].timestamp;
                const double t1 = frames[*after].timestamp;
                const double w = (frames[i].timestamp - t0) / (t1 - t0);
                blend_modality(frames[i], frames[*before], frames[*after], w, m);
            } else {
                copy_modality(frames[i], frames[before ? *before : *after], m);
            }
            frames[i].valid(m) = Validity::Interpolated;
        }
    }
    return out;
}

std::size_t window_start(const FrameStream& stream, double trigger_ts) {
    const auto& frames = stream.frames;
    constexpr std::size_t kT = SampleTensor::kFrames;
    if (frames.size() < kT) {
        throw Error(Errc::InsufficientCoverage,
                    "stream has " + std::to_string(frames.size()) + " frames, window needs 36");
    }
    const double tol = 1.0 / stream.rate;
    if (trigger_ts - kHalfWindowSeconds < frames.front().timestamp - tol ||
        trigger_ts + kHalfWindowSeconds > frames.back().timestamp + tol) {
        throw Error(Errc::InsufficientCoverage,
                    "window around trigger " + std::to_string(trigger_ts) + " s exceeds the stream");
    }

    constexpr double kTieEps = 1e-9;
    auto dist = [&](std::size_t i) { return std::abs(frames[i].timestamp - trigger_ts); };

    // nearest frame; timestamps are sorted so the first minimum is the earliest tie
    auto it = std::lower_bound(frames.begin(), frames.end(), trigger_ts,
                               [](const ModalityFrame& f, double t) { return f.timestamp < t; });
    std::size_t k = static_cast<std::size_t>(it - frames.begin());
    if (k == frames.size() || (k > 0 && dist(k - 1) <= dist(k) + kTieEps)) --k;

    std::size_t lo = k;
    std::size_t hi = k;  // inclusive
    while (hi - lo + 1 < kT) {
        const bool can_left = lo > 0;
        const bool can_right = hi + 1 < frames.size();
        if (can_left && (!can_right || dist(lo - 1) <= dist(hi + 1) + kTieEps)) {
            --lo;
        } else {
            ++hi;
        }
    }
    return lo;
}

SampleTensor extract_window(const FrameStream& stream, double trigger_ts) {
    const std::size_t start = window_start(stream, trigger_ts);
    SampleTensor sample;
    for (int t = 0; t < SampleTensor::kFrames; ++t) {
        const ModalityFrame& f = stream.frames[start + static_cast<std::size_t>(t)];
        for (Modality m : kAllModalities) {
            const Validity v = f.valid(m);
            if (v == Validity::Missing) {
                throw Error(Errc::FormatError, "uninterpolated gap in " + std::string(to_string(m)) +
                                                   " at t=" + std::to_string(f.timestamp));
            }
            if (v == Validity::Absent) sample.present[static_cast<int>(m)] = false;
        }
        const std::array<Vec3, 6> feats{f.finger_pos, f.finger_dir, f.eye_pos, f.eye_dir, f.head_pos,
                                        euler_to_direction(f.head_euler)};
        for (int feat = 0; feat < SampleTensor::kFeatures; ++feat) {
            const Modality m = static_cast<Modality>(feat / 2);
            const bool absent = f.valid(m) == Validity::Absent;
            for (int d = 0; d < SampleTensor::kDims; ++d) {
                sample.at(t, feat, d) = absent ? 0.0 : feats[static_cast<std::size_t>(feat)][d];
            }
        }
    }
    return sample;
}

}  // namespace refpoint
