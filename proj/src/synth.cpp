#include "refpoint/synth.hpp"

#include "refpoint/error.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

namespace refpoint {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Profiles and occlusion
// ---------------------------------------------------------------------------

void DriverProfile::validate() const {
    for (const auto& n : noise) {
        if (n.yaw_mean < 0 || n.yaw_sd < 0 || n.pitch_mean < 0 || n.pitch_sd < 0) {
            throw Error(Errc::InvalidArgument, "angular noise parameters must be non-negative");
        }
    }
    if (jitter_sd < 0 || finger_lag < 0) throw Error(Errc::InvalidArgument, "negative jitter or lag");
    if (left_hand_prob < 0 || left_hand_prob > 1) throw Error(Errc::InvalidArgument, "left_hand_prob outside [0,1]");
    if (occlusion_susceptibility < 0) throw Error(Errc::InvalidArgument, "negative occlusion susceptibility");
}

DriverProfile DriverProfile::noiseless() {
    DriverProfile p;
    p.jitter_sd = 0.0;
    p.left_hand_prob = 0.0;
    return p;
}

void OcclusionModel::validate() const {
    for (int c = 0; c < kSideCategoryCount; ++c) {
        for (int m = 0; m < kModalityCount; ++m) {
            const double p = dropout[c][m];
            if (p < 0 || p > 1) throw Error(Errc::InvalidArgument, "dropout probability outside [0,1]");
            if (burst_mean[c][m] < 1) throw Error(Errc::InvalidArgument, "burst length must be >= 1");
        }
        if (left_hand_finger_dropout[c] < 0 || left_hand_finger_dropout[c] > 1) {
            throw Error(Errc::InvalidArgument, "left-hand dropout outside [0,1]");
        }
    }
}

OcclusionModel OcclusionModel::none() {
    OcclusionModel o;
    for (auto& row : o.burst_mean) row.fill(1.0);
    return o;
}

OcclusionModel OcclusionModel::paper_default() {
    OcclusionModel o;
    //                     finger eye   head
    o.dropout[0] = {0.15, 0.30, 0.15};  // far-left: right arm crosses the face
    o.dropout[1] = {0.05, 0.10, 0.05};
    o.dropout[2] = {0.05, 0.10, 0.03};
    o.dropout[3] = {0.05, 0.60, 0.10};  // far-right: eyes leave the visual camera FoV
    for (auto& row : o.burst_mean) row = {10.0, 8.0, 8.0};
    o.left_hand_finger_dropout = {0.60, 0.40, 0.10, 0.10};
    return o;
}

// ---------------------------------------------------------------------------
// Deviation sampler
// ---------------------------------------------------------------------------

namespace {

constexpr double kSqrt2OverPi = 0.7978845608028654;

// mean of |N(r, 1)|
double folded_mean(double r) { return kSqrt2OverPi * std::exp(-0.5 * r * r) + r * std::erf(r / std::sqrt(2.0)); }

double folded_ratio(double r) {
    const double m = folded_mean(r);
    return m / std::sqrt(std::max(r * r + 1.0 - m * m, 1e-300));
}

}  // namespace

DeviationSampler DeviationSampler::fit(double mean, double sd) {
    if (mean < 0 || sd < 0) throw Error(Errc::InvalidArgument, "deviation mean and SD must be non-negative");
    DeviationSampler s;
    if (sd == 0.0 || mean == 0.0) {
        s.kind_ = Kind::Constant;
        s.a_ = mean;
        return s;
    }
    const double target = mean / sd;
    if (target < folded_ratio(0.0)) {
        s.kind_ = Kind::Gamma;
        s.a_ = target * target;   // shape
        s.b_ = sd * sd / mean;    // scale
        return s;
    }
    double lo = 0.0;
    double hi = 1.0;
    while (folded_ratio(hi) < target && hi < 1e3) hi *= 2.0;
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        (folded_ratio(mid) < target ? lo : hi) = mid;
    }
    const double r = 0.5 * (lo + hi);
    s.kind_ = Kind::FoldedNormal;
    s.b_ = std::sqrt((mean * mean + sd * sd) / (r * r + 1.0));
    s.a_ = r * s.b_;
    return s;
}

double DeviationSampler::sample(std::mt19937_64& rng) const {
    switch (kind_) {
        case Kind::Constant: return a_;
        case Kind::FoldedNormal: return std::abs(std::normal_distribution<double>(a_, b_)(rng));
        case Kind::Gamma: return std::gamma_distribution<double>(a_, b_)(rng);
    }
    return 0.0;
}

// ---------------------------------------------------------------------------
// Default scenario
// ---------------------------------------------------------------------------

namespace {

struct Site {
    GeodeticPoint origin;
    Ellipsoid ell;

    // small-offset local tangent mapping (east, north, up) -> geodetic
    GeodeticPoint at(double east, double north, double up) const {
        const double s = std::sin(origin.lat);
        const double w = 1.0 - ell.ecc_sq() * s * s;
        const double meridian = ell.semi_major * (1.0 - ell.ecc_sq()) / (w * std::sqrt(w));
        const double normal = ell.semi_major / std::sqrt(w);
        return {origin.lat + north / (meridian + origin.alt),
                origin.lon + east / ((normal + origin.alt) * std::cos(origin.lat)), origin.alt + up};
    }
};

struct BoxSpec {
    int id;
    double east, north, half_e, half_n, height;
};

struct PoseSpec {
    int id;
    double east, north, heading_deg;  // heading measured from east, counter-clockwise
    std::vector<int> visible;
    bool point_referencing;
};

constexpr double kWheelbase = 2.85;
constexpr double kTrack = 1.6;

}  // namespace

Scenario build_default_scenario() {
    const Site site{GeodeticPoint::from_degrees(48.220418, 11.724965, 480.0), Ellipsoid::wgs84()};

    const std::array<BoxSpec, 5> boxes{{
        {1, -9.0, 17.0, 3.0, 2.5, 5.0},
        {2, -1.0, 24.0, 1.0, 1.0, 14.0},
        {3, 8.0, 19.0, 3.0, 3.0, 6.0},
        {4, -6.0, 27.0, 2.5, 2.0, 9.0},
        {5, 4.0, 29.0, 2.5, 2.0, 8.0},
    }};
    const std::array<PoseSpec, 4> poses{{
        {1, 0.0, 0.0, 90.0, {1, 2, 3, 4, 5}, true},
        {2, 0.0, 39.0, 330.0, {1, 2, 3, 4, 5}, true},
        {3, -3.0, 38.0, 215.0, {1, 2, 3, 4, 5}, true},
        {4, 12.0, -112.0, 95.0, {2, 4, 5}, false},
    }};

    Scenario s;
    s.ellipsoid = site.ell;
    s.comment =
        "Synthetic site. Side convention ISO 8855 (y left, positive yaw left). Pose 2 places every ROI on "
        "the right and pose 3 on the left, following the written pose descriptions where the pose table's "
        "side columns disagree. Pose 4 views three ROIs from beyond 100 m and has no point referencing.";

    for (const auto& b : boxes) {
        Roi r;
        r.id = b.id;
        for (int i = 0; i < 8; ++i) {
            const double e = b.east + ((i & 1) ? b.half_e : -b.half_e);
            const double n = b.north + ((i & 2) ? b.half_n : -b.half_n);
            const double u = (i & 4) ? b.height : 0.0;
            r.vertices[static_cast<std::size_t>(i)] = site.at(e, n, u);
        }
        s.rois.push_back(r);
        // one POI on the roof, one on the south face
        s.pois.push_back({2 * b.id - 1, b.id, site.at(b.east, b.north, b.height), {}});
        s.pois.push_back({2 * b.id, b.id, site.at(b.east - 0.5 * b.half_e, b.north - b.half_n, 0.6 * b.height), {}});
    }

    for (const auto& p : poses) {
        const double h = deg_to_rad(p.heading_deg);
        const double fe = std::cos(h), fn = std::sin(h);   // forward
        const double le = -std::sin(h), ln = std::cos(h);  // left
        auto tyre = [&](double back, double side) {
            return site.at(p.east - back * fe + side * le, p.north - back * fn + side * ln, 0.0);
        };
        CarPose cp;
        cp.id = p.id;
        cp.tyres = {tyre(0.0, kTrack / 2), tyre(0.0, -kTrack / 2), tyre(kWheelbase, kTrack / 2),
                    tyre(kWheelbase, -kTrack / 2)};
        cp.visible_rois = p.visible;
        cp.point_referencing = p.point_referencing;
        s.poses.push_back(cp);
    }
    s.finalize();
    s.validate();
    return s;
}

// ---------------------------------------------------------------------------
// Calibration
// ---------------------------------------------------------------------------

std::map<int, DriverProfile> calibrate_profile_from_table2() {
    // degrees: head yaw M, SD, head pitch M, SD, eye yaw..., finger yaw...
    struct Row {
        int pose;
        std::array<double, 12> v;
        double left_hand;
    };
    const std::array<Row, 4> rows{{
        {1, {18, 13, 20, 15, 8, 10, 15, 11, 28, 24, 27, 17}, 0.08},
        {2, {31, 21, 21, 18, 25, 25, 18, 11, 49, 42, 19, 14}, 0.08},
        {3, {25, 16, 16, 13, 14, 17, 16, 12, 31, 32, 25, 16}, 0.30},
        {4, {9, 9, 9, 7, 6, 7, 12, 9, 24, 19, 25, 16}, 0.08},
    }};
    auto noise = [](const std::array<double, 12>& v, int off) {
        return AngularNoise{deg_to_rad(v[off]), deg_to_rad(v[off + 1]), deg_to_rad(v[off + 2]),
                            deg_to_rad(v[off + 3])};
    };
    std::map<int, DriverProfile> out;
    for (const auto& r : rows) {
        DriverProfile p;
        p.of(Modality::Head) = noise(r.v, 0);
        p.of(Modality::Eye) = noise(r.v, 4);
        p.of(Modality::Finger) = noise(r.v, 8);
        p.left_hand_prob = r.left_hand;
        out.emplace(r.pose, p);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Event generation
// ---------------------------------------------------------------------------

SensorExtrinsics default_extrinsics() {
    SensorExtrinsics ext;
    // gesture camera on the roof next to the mirror, looking down at the driver side
    ext.gcs.rotation = euler_to_rotation({0.0, deg_to_rad(65.0), deg_to_rad(160.0)});
    ext.gcs.translation = Vec3(-0.55, 0.05, 1.30);
    // visual camera behind the steering wheel, facing the driver
    ext.vcs.rotation = euler_to_rotation({deg_to_rad(2.0), deg_to_rad(-12.0), deg_to_rad(180.0)});
    ext.vcs.translation = Vec3(-0.80, 0.37, 0.88);
    return ext;
}

namespace {

constexpr double kMaxElevation = deg_to_rad(85.0);

double smoothstep(double u) {
    u = std::clamp(u, 0.0, 1.0);
    return u * u * (3.0 - 2.0 * u);
}

Vec3 direction_from(double azimuth, double elevation) {
    return {std::cos(elevation) * std::cos(azimuth), std::cos(elevation) * std::sin(azimuth), std::sin(elevation)};
}

struct Aim {
    double az = 0.0;
    double el = 0.0;
};

Aim biased_aim(const Aim& truth, const AngularNoise& n, std::mt19937_64& rng) {
    std::bernoulli_distribution coin(0.5);
    const double dy = DeviationSampler::fit(n.yaw_mean, n.yaw_sd).sample(rng) * (coin(rng) ? 1.0 : -1.0);
    const double dp = DeviationSampler::fit(n.pitch_mean, n.pitch_sd).sample(rng) * (coin(rng) ? 1.0 : -1.0);
    return {truth.az + dy, std::clamp(truth.el + dp, -kMaxElevation, kMaxElevation)};
}

// two-state dropout chain with stationary invalid fraction p and mean burst length
std::vector<bool> dropout_mask(std::size_t n, double p, double burst, std::mt19937_64& rng) {
    std::vector<bool> invalid(n, false);
    if (p <= 0.0) return invalid;
    if (p >= 1.0) {
        invalid.assign(n, true);
        return invalid;
    }
    const double leave = 1.0 / burst;
    const double enter = std::min(1.0, p / ((1.0 - p) * burst));
    std::uniform_real_distribution<double> u(0.0, 1.0);
    bool state = u(rng) < p;
    for (std::size_t i = 0; i < n; ++i) {
        invalid[i] = state;
        state = state ? !(u(rng) < leave) : (u(rng) < enter);
    }
    return invalid;
}

}  // namespace

SensorEvent generate_event(const Scenario& scenario, int pose_id, const TargetRef& target,
                           const DriverProfile& profile, const OcclusionModel& occ, std::uint64_t seed,
                           const EventTiming& timing) {
    profile.validate();
    occ.validate();
    const CarVector truth_vec = scenario.ground_truth(pose_id, target);
    const SideCategory cat = scenario.category(pose_id, target);
    const int c = static_cast<int>(cat);

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> gauss(0.0, 1.0);

    const bool left_hand = unit(rng) < profile.left_hand_prob;
    const Aim truth{std::atan2(truth_vec.y, truth_vec.x), std::asin(std::clamp(truth_vec.z, -1.0, 1.0))};

    std::array<Aim, 3> final_aim{};
    for (Modality m : kAllModalities) final_aim[static_cast<int>(m)] = biased_aim(truth, profile.of(m), rng);

    const double rate = timing.rate;
    const double onset = timing.onset_min + timing.onset_spread * unit(rng);
    // dwell starts on the first frame at which head and eyes have settled
    const double dwell = std::ceil((onset + timing.gaze_sweep) * rate - 1e-9) / rate;
    const double finger_onset = onset + profile.finger_lag;
    const double finger_sweep = std::max(timing.gaze_sweep - profile.finger_lag, 0.1);
    const double trigger = dwell + timing.trigger_jitter * unit(rng);

    const auto n_frames = static_cast<std::size_t>(
        std::max(std::ceil(timing.min_duration * rate), std::ceil((trigger + kHalfWindowSeconds + 0.2) * rate)));

    // posture
    Vec3 posture;
    for (int i = 0; i < 3; ++i) posture[i] = 0.02 * gauss(rng);
    const Vec3 head_center = Vec3(-1.45, 0.37, 1.17) + posture;
    const Vec3 hand_rest = Vec3(-0.95, left_hand ? 0.54 : 0.20, 0.78) + posture;
    const Vec3 shoulder = Vec3(-1.50, left_hand ? 0.57 : 0.17, 0.98) + posture;
    constexpr double kReach = 0.62;
    const Aim eye_rest{0.0, deg_to_rad(-2.0)};
    const Aim finger_rest{0.0, deg_to_rad(-30.0)};

    const Aim& eye_aim = final_aim[static_cast<int>(Modality::Eye)];
    const Aim& head_aim = final_aim[static_cast<int>(Modality::Head)];
    const Aim& finger_aim = final_aim[static_cast<int>(Modality::Finger)];
    const Vec3 pointing_pos = shoulder + kReach * direction_from(finger_aim.az, finger_aim.el);

    std::array<std::vector<bool>, 3> invalid;
    for (Modality m : kAllModalities) {
        const int mi = static_cast<int>(m);
        double p = std::clamp(occ.dropout[c][mi] * profile.occlusion_susceptibility, 0.0, 1.0);
        if (m == Modality::Finger && left_hand) {
            p = 1.0 - (1.0 - p) * (1.0 - occ.left_hand_finger_dropout[c]);
        }
        invalid[mi] = dropout_mask(n_frames, p, occ.burst_mean[c][mi], rng);
    }

    const SensorExtrinsics ext = default_extrinsics();
    const RigidTransform car_to_gcs = ext.gcs.inverse();
    const RigidTransform car_to_vcs = ext.vcs.inverse();
    const double jitter = profile.jitter_sd;

    SensorEvent ev;
    ev.header.pose_id = pose_id;
    ev.header.target = target;
    ev.header.roi_id = scenario.roi_of(target);
    ev.header.trigger = trigger;
    ev.header.left_hand = left_hand;
    ev.header.extrinsics = ext;
    ev.stream.rate = rate;
    ev.stream.frames.resize(n_frames);

    auto blend = [](const Aim& a, const Aim& b, double w) { return Aim{a.az + w * (b.az - a.az), a.el + w * (b.el - a.el)}; };
    auto jittered = [&](Aim a) {
        if (jitter > 0.0) {
            a.az += jitter * gauss(rng);
            a.el += jitter * gauss(rng);
        }
        return a;
    };

    for (std::size_t i = 0; i < n_frames; ++i) {
        const double ts = static_cast<double>(i) / rate;
        const double wg = smoothstep((ts - onset) / timing.gaze_sweep);
        const double wf = smoothstep((ts - finger_onset) / finger_sweep);

        const Aim eye = jittered(blend(eye_rest, eye_aim, wg));
        const Aim head = jittered(blend(eye_rest, head_aim, wg));
        const Aim finger = jittered(blend(finger_rest, finger_aim, wf));
        const double roll = jitter > 0.0 ? jitter * gauss(rng) : 0.0;
        Vec3 head_noise = Vec3::Zero();
        if (jitter > 0.0) {
            for (int k = 0; k < 3; ++k) head_noise[k] = 0.002 * gauss(rng);
        }

        const EulerAngles head_car{roll, -head.el, head.az};
        const Vec3 head_pos = head_center + head_noise;
        const Vec3 eye_pos = head_pos + euler_to_rotation(head_car) * Vec3(0.09, 0.0, 0.03);
        const Vec3 finger_pos = hand_rest + wf * (pointing_pos - hand_rest);

        ModalityFrame& f = ev.stream.frames[i];
        f.timestamp = ts;
        f.finger_pos = car_to_gcs.apply(finger_pos);
        f.finger_dir = car_to_gcs.rotate(direction_from(finger.az, finger.el));
        f.eye_pos = car_to_vcs.apply(eye_pos);
        f.eye_dir = car_to_vcs.rotate(direction_from(eye.az, eye.el));
        f.head_pos = car_to_vcs.apply(head_pos);
        f.head_euler = rotation_to_euler(car_to_vcs.rotation * euler_to_rotation(head_car));

        if (invalid[0][i]) {
            f.valid(Modality::Finger) = Validity::Missing;
            f.finger_pos.setZero();
            f.finger_dir.setZero();
        }
        if (invalid[1][i]) {
            f.valid(Modality::Eye) = Validity::Missing;
            f.eye_pos.setZero();
            f.eye_dir.setZero();
        }
        if (invalid[2][i]) {
            f.valid(Modality::Head) = Validity::Missing;
            f.head_pos.setZero();
            f.head_euler = {};
        }
    }
    return ev;
}

// ---------------------------------------------------------------------------
// Corpus
// ---------------------------------------------------------------------------

std::string user_id_for(int index) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "u%02d", index + 1);
    return buf;
}

namespace {

struct PlanEntry {
    int pose_id;
    TargetRef target;
};

std::vector<PlanEntry> event_plan(const Scenario& s, const std::vector<RefType>& types) {
    std::vector<PlanEntry> plan;
    for (RefType t : types) {
        for (const auto& pose : s.poses) {
            if (t == RefType::Volume) {
                for (int rid : pose.visible_rois) plan.push_back({pose.id, {RefType::Volume, rid}});
            } else if (pose.point_referencing) {
                for (const auto& poi : s.pois) plan.push_back({pose.id, {RefType::Point, poi.id}});
            }
        }
    }
    return plan;
}

DriverProfile scaled(DriverProfile p, double k) {
    for (auto& n : p.noise) {
        n.yaw_mean *= k;
        n.yaw_sd *= k;
        n.pitch_mean *= k;
        n.pitch_sd *= k;
    }
    return p;
}

}  // namespace

std::vector<UserEvents> generate_corpus(const Scenario& scenario, const CorpusConfig& cfg,
                                        const std::map<int, DriverProfile>& profiles,
                                        const OcclusionModel& occ) {
    if (cfg.n_users < 2) throw Error(Errc::TooFewUsers, "corpus needs at least 2 users");
    if (cfg.events_per_user < 1) throw Error(Errc::InvalidArgument, "events_per_user must be >= 1");
    if (cfg.user_variation < 0 || cfg.user_variation >= 1) {
        throw Error(Errc::InvalidArgument, "user_variation must lie in [0, 1)");
    }
    const std::vector<PlanEntry> plan = event_plan(scenario, cfg.ref_types);
    if (plan.empty()) throw Error(Errc::InvalidArgument, "scenario offers no targets for the requested types");
    for (const auto& e : plan) {
        if (!profiles.contains(e.pose_id)) {
            throw Error(Errc::InvalidArgument, "no driver profile for pose " + std::to_string(e.pose_id));
        }
    }

    const auto n_users = static_cast<std::size_t>(cfg.n_users);
    const auto per_user = static_cast<std::size_t>(cfg.events_per_user);
    std::vector<UserEvents> corpus(n_users);
    std::vector<std::vector<PlanEntry>> schedules(n_users);
    std::vector<double> scales(n_users);

    for (std::size_t u = 0; u < n_users; ++u) {
        corpus[u].user_id = user_id_for(static_cast<int>(u));
        corpus[u].events.resize(per_user);
        std::mt19937_64 rng(derive_seed(cfg.seed, u + 1, 0));
        scales[u] = 1.0 + cfg.user_variation * std::uniform_real_distribution<double>(-1.0, 1.0)(rng);
        auto& sched = schedules[u];
        while (sched.size() < per_user) {
            std::vector<PlanEntry> block = plan;
            std::shuffle(block.begin(), block.end(), rng);
            sched.insert(sched.end(), block.begin(), block.end());
        }
        sched.resize(per_user);
    }

    const auto total = static_cast<long>(n_users * per_user);
#pragma omp parallel for schedule(dynamic, 4)
    for (long k = 0; k < total; ++k) {
        const std::size_t u = static_cast<std::size_t>(k) / per_user;
        const std::size_t i = static_cast<std::size_t>(k) % per_user;
        const PlanEntry& e = schedules[u][i];
        const DriverProfile profile = scaled(profiles.at(e.pose_id), scales[u]);
        SensorEvent ev = generate_event(scenario, e.pose_id, e.target, profile, occ,
                                        derive_seed(cfg.seed, u + 1, i + 1), cfg.timing);
        ev.header.user_id = corpus[u].user_id;
        ev.header.event_index = static_cast<int>(i);
        corpus[u].events[i] = std::move(ev);
    }
    return corpus;
}

void write_corpus(const std::filesystem::path& out_dir, const Scenario& scenario,
                  const std::vector<UserEvents>& corpus, std::uint64_t seed) {
    namespace fs = std::filesystem;
    std::error_code ec;
    if (!fs::is_directory(out_dir)) {
        fs::create_directory(out_dir, ec);
        if (ec) throw Error(Errc::IoError, "cannot create output directory " + out_dir.string() + ": " + ec.message());
    }
    save_scenario(scenario, out_dir / "scenario.json");

    json manifest;
    manifest["scenario_file"] = "scenario.json";
    manifest["seed"] = seed;
    manifest["users"] = json::array();
    for (const auto& user : corpus) {
        const std::string name = "user_" + user.user_id + ".jsonl";
        std::ofstream out(out_dir / name);
        if (!out) throw Error(Errc::IoError, "cannot write " + (out_dir / name).string());
        write_events(out, user.events);
        manifest["users"].push_back({{"id", user.user_id}, {"files", json::array({name})}, {"n_events", user.events.size()}});
    }
    std::ofstream mout(out_dir / "manifest.json");
    if (!mout) throw Error(Errc::IoError, "cannot write " + (out_dir / "manifest.json").string());
    mout << manifest.dump(2) << '\n';
}

}  // namespace refpoint
