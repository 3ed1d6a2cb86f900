#pragma once

#include "refpoint/event_io.hpp"
#include "refpoint/scenario.hpp"
#include "refpoint/seed.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <random>
#include <string>
#include <vector>

namespace refpoint {

/// Mean and SD of the absolute angular deviation from ground truth (radians).
struct AngularNoise {
    double yaw_mean = 0.0;
    double yaw_sd = 0.0;
    double pitch_mean = 0.0;
    double pitch_sd = 0.0;
};

struct DriverProfile {
    std::array<AngularNoise, 3> noise{};  // indexed by Modality
    double jitter_sd = deg_to_rad(0.5);   // per-frame angular jitter
    double finger_lag = 0.15;             // seconds behind gaze onset
    double left_hand_prob = 0.08;
    double occlusion_susceptibility = 1.0;  // multiplies OcclusionModel dropout

    AngularNoise& of(Modality m) { return noise[static_cast<int>(m)]; }
    const AngularNoise& of(Modality m) const { return noise[static_cast<int>(m)]; }
    void validate() const;

    /// No deviation, no jitter, no left hand.
    static DriverProfile noiseless();
};

/// Per (side category, modality) stationary dropout fraction and mean burst
/// length in frames.
struct OcclusionModel {
    std::array<std::array<double, 3>, 4> dropout{};
    std::array<std::array<double, 3>, 4> burst_mean{};
    /// extra finger dropout when the left hand points, per side category
    std::array<double, 4> left_hand_finger_dropout{};

    void validate() const;
    static OcclusionModel none();
    static OcclusionModel paper_default();
};

/// Absolute deviation distribution with a prescribed mean and SD: a folded
/// normal where that is attainable, otherwise a gamma distribution.
class DeviationSampler {
public:
    enum class Kind { Constant, FoldedNormal, Gamma };

    static DeviationSampler fit(double mean, double sd);

    double sample(std::mt19937_64& rng) const;
    Kind kind() const { return kind_; }
    double mu() const { return a_; }
    double sigma() const { return b_; }

private:
    Kind kind_ = Kind::Constant;
    double a_ = 0.0;
    double b_ = 0.0;
};

struct EventTiming {
    double rate = 45.0;
    double onset_min = 0.3;       // gaze onset, seconds from stream start
    double onset_spread = 0.1;
    double gaze_sweep = 0.5;      // head and eye travel time (smoothstep)
    double trigger_jitter = 0.4;  // uniform delay of the trigger after dwell onset
    double min_duration = 2.0;
};

SensorExtrinsics default_extrinsics();

/// Four car poses and five ROIs around a fixed site; pose 4 views the landmarks
/// from beyond 100 m.
Scenario build_default_scenario();

/// One profile per car pose id, calibrated to the published per-pose yaw/pitch
/// deviation statistics.
std::map<int, DriverProfile> calibrate_profile_from_table2();

/// Noisy, occluded 45 fps stream for one referencing event. Frames are in
/// sensor coordinates; ground truth is not stored in the stream.
/// Throws Errc::UnknownTarget / Errc::UnknownPose.
SensorEvent generate_event(const Scenario& scenario, int pose_id, const TargetRef& target,
                           const DriverProfile& profile, const OcclusionModel& occ, std::uint64_t seed,
                           const EventTiming& timing = {});

struct CorpusConfig {
    int n_users = 8;
    int events_per_user = 40;
    std::vector<RefType> ref_types{RefType::Volume};
    std::uint64_t seed = 2021;
    /// per-user noise scale drawn from U(1 - v, 1 + v)
    double user_variation = 0.25;
    EventTiming timing{};
};

struct UserEvents {
    std::string user_id;
    std::vector<SensorEvent> events;
};

std::string user_id_for(int index);

std::vector<UserEvents> generate_corpus(const Scenario& scenario, const CorpusConfig& cfg,
                                        const std::map<int, DriverProfile>& profiles,
                                        const OcclusionModel& occ);

/// Writes scenario.json, one user_XX.jsonl per user and manifest.json.
void write_corpus(const std::filesystem::path& out_dir, const Scenario& scenario,
                  const std::vector<UserEvents>& corpus, std::uint64_t seed);

}  // namespace refpoint
