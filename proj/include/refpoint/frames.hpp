#pragma once

#include "refpoint/geo.hpp"

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace refpoint {

enum class Modality : int { Finger = 0, Eye = 1, Head = 2 };
inline constexpr int kModalityCount = 3;
inline constexpr std::array<Modality, 3> kAllModalities{Modality::Finger, Modality::Eye, Modality::Head};

std::string_view to_string(Modality m) noexcept;

/// Per-modality state of a frame. `Absent` marks a modality that had no valid
/// frame anywhere in its stream and was zero-filled.
enum class Validity : std::uint8_t { Valid, Missing, Interpolated, Absent };

inline bool is_known(Validity v) { return v == Validity::Valid || v == Validity::Interpolated; }

/// Head orientation, radians. Rotation = Rz(yaw) * Ry(pitch) * Rx(roll).
struct EulerAngles {
    double roll = 0.0;
    double pitch = 0.0;
    double yaw = 0.0;
};

struct ModalityFrame {
    double timestamp = 0.0;
    Vec3 finger_pos = Vec3::Zero();
    Vec3 finger_dir = Vec3::UnitX();
    Vec3 eye_pos = Vec3::Zero();
    Vec3 eye_dir = Vec3::UnitX();
    Vec3 head_pos = Vec3::Zero();
    EulerAngles head_euler{};
    std::array<Validity, 3> validity{Validity::Valid, Validity::Valid, Validity::Valid};

    Validity& valid(Modality m) { return validity[static_cast<int>(m)]; }
    Validity valid(Modality m) const { return validity[static_cast<int>(m)]; }
};

/// Ordered frames at a nominal rate. Timestamps must be strictly increasing.
struct FrameStream {
    std::vector<ModalityFrame> frames;
    double rate = 45.0;

    /// Throws Errc::FormatError when the stream invariants do not hold.
    void validate() const;
};

/// Sensor -> car transforms for the gesture camera (finger) and the visual
/// camera (eye and head).
struct SensorExtrinsics {
    RigidTransform gcs;
    RigidTransform vcs;
};

struct SampleMeta {
    std::string user_id;
    int pose_id = 0;
    int target_id = 0;  // ROI id for volume events, POI id for point events
    int roi_id = 0;     // ROI that the target belongs to
    RefType ref_type = RefType::Volume;
    bool left_hand = false;
};

/// Network input: t x f x d with features ordered
/// finger pos, finger dir, eye pos, eye dir, head pos, head dir.
struct SampleTensor {
    static constexpr int kFrames = 36;
    static constexpr int kFeatures = 6;
    static constexpr int kDims = 3;
    static constexpr int kSize = kFrames * kFeatures * kDims;

    std::array<double, kSize> values{};
    CarVector label{};
    SampleMeta meta{};
    /// false when the modality was absent for the whole event and zero-filled
    std::array<bool, 3> present{true, true, true};

    static constexpr int index(int t, int f, int d) { return (t * kFeatures + f) * kDims + d; }
    double& at(int t, int f, int d) { return values[index(t, f, d)]; }
    double at(int t, int f, int d) const { return values[index(t, f, d)]; }
};

Mat3 euler_to_rotation(const EulerAngles& e);
EulerAngles rotation_to_euler(const Mat3& r);

/// Forward axis after yaw about z then pitch about y; roll leaves it unchanged.
Vec3 euler_to_direction(const EulerAngles& e);

/// Sensor-frame features into the car frame. Positions are rotated and
/// translated, directions and head orientation only rotated.
ModalityFrame transform_frame(const ModalityFrame& frame, const SensorExtrinsics& ext);

enum class AbsentPolicy {
    Throw,     // Errc::EmptyModality
    ZeroFill,  // mark the modality Absent and zero its fields
};

/// Fill Missing frames per modality by linear interpolation between the nearest
/// known frames on either side; edge gaps hold the nearest known value.
FrameStream interpolate_gaps(const FrameStream& stream, AbsentPolicy policy = AbsentPolicy::Throw);

inline constexpr double kHalfWindowSeconds = 0.4;

/// The 36 frames nearest to the trigger (ties resolved toward the earlier frame),
/// assembled into the network layout. Label and metadata are left default.
SampleTensor extract_window(const FrameStream& stream, double trigger_ts);

/// Index of the first frame of the window chosen by extract_window.
std::size_t window_start(const FrameStream& stream, double trigger_ts);

}  // namespace refpoint
