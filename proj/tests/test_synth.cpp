#include "refpoint/corpus.hpp"
#include "refpoint/error.hpp"
#include "refpoint/synth.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

using namespace refpoint;
namespace fs = std::filesystem;

namespace {

const Scenario& scenario() {
    static const Scenario s = build_default_scenario();
    return s;
}

std::size_t trigger_frame(const SensorEvent& ev) {
    return static_cast<std::size_t>(std::lround(ev.header.trigger * ev.stream.rate));
}

struct Aim {
    double az, el;
};
Aim aim_of(const Vec3& d) { return {std::atan2(d.y(), d.x()), std::asin(std::clamp(d.normalized().z(), -1.0, 1.0))}; }

double wrap(double a) { return std::remainder(a, 2.0 * std::numbers::pi); }

struct Moments {
    double mean = 0, sd = 0;
};
Moments moments(const std::vector<double>& v) {
    Moments m;
    for (double x : v) m.mean += x;
    m.mean /= static_cast<double>(v.size());
    for (double x : v) m.sd += (x - m.mean) * (x - m.mean);
    m.sd = std::sqrt(m.sd / static_cast<double>(v.size()));
    return m;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

fs::path scratch_dir(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("refpoint_test_" + name);
    fs::remove_all(p);
    return p;
}

}  // namespace

TEST_SUITE("synth") {

TEST_CASE("default scenario layout") {
    const Scenario& s = scenario();
    CHECK_NOTHROW(s.validate());
    CHECK(s.poses.size() == 4);
    CHECK(s.rois.size() == 5);
    CHECK(s.pois.size() == 10);

    auto categories = [&](int pose) {
        std::set<SideCategory> out;
        for (int r : s.pose(pose).visible_rois) out.insert(s.category(pose, {RefType::Volume, r}));
        return out;
    };
    CHECK(categories(1) == std::set<SideCategory>{SideCategory::NearLeft, SideCategory::NearRight});
    // pose 2 follows the prose (every ROI on the right), pose 3 the left
    for (auto c : categories(2)) CHECK((c == SideCategory::NearRight || c == SideCategory::FarRight));
    for (auto c : categories(3)) CHECK((c == SideCategory::NearLeft || c == SideCategory::FarLeft));
    CHECK(categories(4) == std::set<SideCategory>{SideCategory::NearLeft, SideCategory::NearRight});
    CHECK(s.pose(1).point_referencing);
    CHECK_FALSE(s.pose(4).point_referencing);
    CHECK_FALSE(s.comment.empty());

    for (const auto& pose : s.poses) {
        for (int r : pose.visible_rois) {
            Vec3 mean = Vec3::Zero();
            for (const auto& v : s.roi(r).ecef) mean += ecef_to_car(v, pose.ecef_to_car).vec() / 8.0;
            const double dist = mean.norm();
            if (pose.id == 4) {
                CHECK(dist > 100.0);
            } else {
                CHECK(dist >= 10.0);
                CHECK(dist <= 30.0);
            }
        }
    }
}

TEST_CASE("categories follow the 45 degree rule") {
    const Scenario& s = scenario();
    const double q = std::numbers::pi / 4;
    for (const auto& pose : s.poses) {
        for (const auto& roi : s.rois) {
            const TargetRef t{RefType::Volume, roi.id};
            const auto g = s.ground_truth(pose.id, t);
            const double b = std::atan2(g.y, g.x);
            CHECK(s.bearing(pose.id, t) == doctest::Approx(b).epsilon(1e-12));
            const SideCategory expect = b > q ? SideCategory::FarLeft
                                        : b >= 0 ? SideCategory::NearLeft
                                        : b >= -q ? SideCategory::NearRight
                                                  : SideCategory::FarRight;
            CHECK(s.category(pose.id, t) == expect);
        }
    }
    CHECK(categorize_bearing(0.1) == SideCategory::NearLeft);
    CHECK(categorize_bearing(1.0) == SideCategory::FarLeft);
    CHECK(categorize_bearing(-0.1) == SideCategory::NearRight);
    CHECK(categorize_bearing(-1.0) == SideCategory::FarRight);
}

TEST_CASE("every POI lies on its ROI surface") {
    const Scenario& s = scenario();
    const RigidTransform& t = s.pose(1).ecef_to_car;
    for (const auto& poi : s.pois) {
        const Roi& roi = s.roi(poi.roi_id);
        std::array<Vec3, 8> v;
        for (int i = 0; i < 8; ++i) v[i] = ecef_to_car(roi.ecef[i], t).vec();
        Mat3 edges;
        edges.col(0) = v[1] - v[0];
        edges.col(1) = v[2] - v[0];
        edges.col(2) = v[4] - v[0];
        const Vec3 p = ecef_to_car(poi.ecef, t).vec();
        const Vec3 c = edges.colPivHouseholderQr().solve(p - v[0]);
        double face = 1e9;
        for (int k = 0; k < 3; ++k) {
            CHECK(c[k] >= -1e-3);
            CHECK(c[k] <= 1.0 + 1e-3);
            const double len = edges.col(k).norm();
            face = std::min({face, std::fabs(c[k]) * len, std::fabs(1.0 - c[k]) * len});
        }
        CHECK(face < 0.01);
    }
}

TEST_CASE("scenario file round trip") {
    const fs::path dir = scratch_dir("scenario");
    fs::create_directories(dir);
    save_scenario(scenario(), dir / "s.json");
    const Scenario back = load_scenario(dir / "s.json");
    for (const auto& pose : scenario().poses) {
        for (const auto& poi : scenario().pois) {
            const TargetRef t{RefType::Point, poi.id};
            CHECK((back.ground_truth(pose.id, t).vec() - scenario().ground_truth(pose.id, t).vec()).norm() < 1e-9);
        }
        CHECK(back.pose(pose.id).visible_rois == pose.visible_rois);
        CHECK(back.pose(pose.id).point_referencing == pose.point_referencing);
    }
    CHECK_THROWS_AS(load_scenario(dir / "missing.json"), Error);
    fs::remove_all(dir);
}

TEST_CASE("calibrated profiles carry the published deviation table") {
    const auto p = calibrate_profile_from_table2();
    REQUIRE(p.size() == 4);
    auto deg = [](double r) { return r * 180.0 / std::numbers::pi; };
    CHECK(deg(p.at(1).of(Modality::Eye).yaw_mean) == doctest::Approx(8));
    CHECK(deg(p.at(1).of(Modality::Eye).yaw_sd) == doctest::Approx(10));
    CHECK(deg(p.at(2).of(Modality::Finger).yaw_mean) == doctest::Approx(49));
    CHECK(deg(p.at(2).of(Modality::Finger).yaw_sd) == doctest::Approx(42));
    CHECK(deg(p.at(3).of(Modality::Head).pitch_mean) == doctest::Approx(16));
    CHECK(deg(p.at(4).of(Modality::Eye).pitch_sd) == doctest::Approx(9));
    for (const auto& [id, prof] : p) CHECK_NOTHROW(prof.validate());
}

TEST_CASE("deviation sampler reproduces mean and SD") {
    struct Case {
        double m, s;
        DeviationSampler::Kind kind;
    };
    for (const Case c : {Case{18, 13, DeviationSampler::Kind::FoldedNormal}, Case{8, 10, DeviationSampler::Kind::Gamma},
                         Case{49, 42, DeviationSampler::Kind::Gamma}, Case{12, 9, DeviationSampler::Kind::FoldedNormal}}) {
        const auto d = DeviationSampler::fit(c.m, c.s);
        CHECK(d.kind() == c.kind);
        std::mt19937_64 rng(42);
        std::vector<double> xs(200000);
        for (auto& x : xs) {
            x = d.sample(rng);
            REQUIRE(x >= 0.0);
        }
        const auto mo = moments(xs);
        CHECK(mo.mean == doctest::Approx(c.m).epsilon(0.02));
        CHECK(mo.sd == doctest::Approx(c.s).epsilon(0.02));
    }
    CHECK(DeviationSampler::fit(5, 0).kind() == DeviationSampler::Kind::Constant);
    std::mt19937_64 rng(1);
    CHECK(DeviationSampler::fit(5, 0).sample(rng) == 5.0);
}

TEST_CASE("noiseless generation hits ground truth at the trigger") {
    const Scenario& s = scenario();
    const auto ext = default_extrinsics();
    int checked = 0;
    for (const auto& pose : s.poses) {
        for (int r : pose.visible_rois) {
            const TargetRef t{RefType::Volume, r};
            const SensorEvent ev = generate_event(s, pose.id, t, DriverProfile::noiseless(), OcclusionModel::none(),
                                                  1000 + r);
            const Vec3 g = s.ground_truth(pose.id, t).vec();
            const ModalityFrame f = transform_frame(ev.stream.frames[trigger_frame(ev)], ext);
            auto ang = [&](const Vec3& d) { return std::acos(std::clamp(d.normalized().dot(g), -1.0, 1.0)); };
            CHECK(ang(f.finger_dir) < 1e-6);
            CHECK(ang(f.eye_dir) < 1e-6);
            CHECK(ang(euler_to_direction(f.head_euler)) < 1e-6);
            ++checked;
        }
    }
    CHECK(checked > 10);
}

TEST_CASE("eye yaw deviation statistics over 1000 events") {
    const Scenario& s = scenario();
    DriverProfile p = DriverProfile::noiseless();
    p.of(Modality::Eye) = {deg_to_rad(8.0), deg_to_rad(10.0), 0.0, 0.0};
    const auto ext = default_extrinsics();
    std::vector<double> dev;
    for (int i = 0; i < 1000; ++i) {
        const TargetRef t{RefType::Volume, s.pose(1).visible_rois[static_cast<std::size_t>(i) % s.pose(1).visible_rois.size()]};
        const SensorEvent ev = generate_event(s, 1, t, p, OcclusionModel::none(), derive_seed(77, i));
        const ModalityFrame f = transform_frame(ev.stream.frames[trigger_frame(ev)], ext);
        const auto g = s.ground_truth(1, t);
        dev.push_back(rad_to_deg(std::fabs(wrap(aim_of(f.eye_dir).az - std::atan2(g.y, g.x)))));
    }
    const auto m = moments(dev);
    CHECK(std::fabs(m.sd - 10.0) < 1.5);
    CHECK(std::fabs(m.mean - 8.0) < 1.5);
}

TEST_CASE("calibrated pose profile converges at n = 2000") {
    const Scenario& s = scenario();
    DriverProfile p = calibrate_profile_from_table2().at(1);
    p.jitter_sd = 0.0;
    const auto ext = default_extrinsics();
    std::array<std::vector<double>, 6> dev;
    const auto& rois = s.pose(1).visible_rois;
    for (int i = 0; i < 2000; ++i) {
        const TargetRef t{RefType::Volume, rois[static_cast<std::size_t>(i) % rois.size()]};
        const SensorEvent ev = generate_event(s, 1, t, p, OcclusionModel::none(), derive_seed(78, i));
        const ModalityFrame f = transform_frame(ev.stream.frames[trigger_frame(ev)], ext);
        const auto g = s.ground_truth(1, t);
        const Aim truth{std::atan2(g.y, g.x), std::asin(g.z)};
        const std::array<Vec3, 3> dirs{f.finger_dir, f.eye_dir, euler_to_direction(f.head_euler)};
        for (int m = 0; m < 3; ++m) {
            const Aim a = aim_of(dirs[static_cast<std::size_t>(m)]);
            dev[static_cast<std::size_t>(2 * m)].push_back(std::fabs(wrap(a.az - truth.az)));
            dev[static_cast<std::size_t>(2 * m + 1)].push_back(std::fabs(a.el - truth.el));
        }
    }
    for (int m = 0; m < 3; ++m) {
        const AngularNoise& n = p.of(static_cast<Modality>(m));
        const auto yaw = moments(dev[static_cast<std::size_t>(2 * m)]);
        const auto pitch = moments(dev[static_cast<std::size_t>(2 * m + 1)]);
        CHECK(yaw.mean == doctest::Approx(n.yaw_mean).epsilon(0.15));
        CHECK(yaw.sd == doctest::Approx(n.yaw_sd).epsilon(0.15));
        CHECK(pitch.mean == doctest::Approx(n.pitch_mean).epsilon(0.15));
        CHECK(pitch.sd == doctest::Approx(n.pitch_sd).epsilon(0.15));
    }
}

TEST_CASE("certain occlusion removes sensor data but never the label") {
    const Scenario& s = scenario();
    int far_right = 0;
    for (int r : s.pose(2).visible_rois) {
        if (s.category(2, {RefType::Volume, r}) == SideCategory::FarRight) far_right = r;
    }
    REQUIRE(far_right != 0);
    OcclusionModel occ = OcclusionModel::none();
    occ.dropout[static_cast<int>(SideCategory::FarRight)][static_cast<int>(Modality::Eye)] = 1.0;
    const TargetRef t{RefType::Volume, far_right};
    const SensorEvent ev = generate_event(s, 2, t, calibrate_profile_from_table2().at(2), occ, 5);
    for (const auto& f : ev.stream.frames) {
        CHECK(f.valid(Modality::Eye) == Validity::Missing);
        CHECK(f.valid(Modality::Head) == Validity::Valid);
    }
    const SampleTensor x = preprocess_event(ev, s);
    CHECK_FALSE(x.present[static_cast<int>(Modality::Eye)]);
    CHECK((x.label.vec() - s.ground_truth(2, t).vec()).norm() == 0.0);
}

TEST_CASE("paper occlusion model drops frames more often on the far sides") {
    const Scenario& s = scenario();
    const auto occ = OcclusionModel::paper_default();
    CHECK_NOTHROW(occ.validate());
    const auto eye = static_cast<int>(Modality::Eye);
    CHECK(occ.dropout[static_cast<int>(SideCategory::FarRight)][eye] >
          occ.dropout[static_cast<int>(SideCategory::NearRight)][eye]);
    (void)s;
}

TEST_CASE("generation is a pure function of its inputs") {
    const Scenario& s = scenario();
    const auto prof = calibrate_profile_from_table2().at(3);
    const TargetRef t{RefType::Point, s.pois.front().id};
    std::ostringstream a, b, c;
    write_events(a, {generate_event(s, 3, t, prof, OcclusionModel::paper_default(), 99)});
    write_events(b, {generate_event(s, 3, t, prof, OcclusionModel::paper_default(), 99)});
    write_events(c, {generate_event(s, 3, t, prof, OcclusionModel::paper_default(), 100)});
    CHECK(a.str() == b.str());
    CHECK(a.str() != c.str());
}

TEST_CASE("event file round trip") {
    const Scenario& s = scenario();
    const auto ev = generate_event(s, 1, {RefType::Volume, s.pose(1).visible_rois[0]},
                                   calibrate_profile_from_table2().at(1), OcclusionModel::paper_default(), 3);
    std::ostringstream out;
    write_events(out, {ev});
    std::istringstream in(out.str());
    const auto back = read_events(in);
    REQUIRE(back.size() == 1);
    std::ostringstream again;
    write_events(again, back);
    CHECK(again.str() == out.str());
    std::istringstream truncated(out.str().substr(0, out.str().size() / 2));
    CHECK_THROWS_AS(read_events(truncated), Error);
}

TEST_CASE("corpus files and manifest are byte-identical for a fixed seed") {
    const Scenario& s = scenario();
    CorpusConfig cfg;
    cfg.n_users = 4;
    cfg.events_per_user = 6;
    cfg.ref_types = {RefType::Volume, RefType::Point};
    const auto prof = calibrate_profile_from_table2();
    const fs::path a = scratch_dir("corpus_a"), b = scratch_dir("corpus_b");
    write_corpus(a, s, generate_corpus(s, cfg, prof, OcclusionModel::paper_default()), cfg.seed);
    write_corpus(b, s, generate_corpus(s, cfg, prof, OcclusionModel::paper_default()), cfg.seed);
    std::size_t files = 0;
    for (const auto& e : fs::directory_iterator(a)) {
        CHECK(slurp(e.path()) == slurp(b / e.path().filename()));
        ++files;
    }
    CHECK(files == 4 + 2);  // 4 event files, scenario, manifest
    const Dataset d = load_corpus(a);
    CHECK(d.samples.size() + d.dropped == 24);
    CHECK(d.users().size() == 4);
    fs::remove_all(a);
    fs::remove_all(b);
}

TEST_CASE("corpus at paper scale") {
    CorpusConfig cfg;
    cfg.n_users = 28;
    cfg.events_per_user = 363;
    const auto corpus = generate_corpus(scenario(), cfg, calibrate_profile_from_table2(), OcclusionModel::paper_default());
    std::size_t total = 0;
    for (const auto& u : corpus) total += u.events.size();
    CHECK(total == 10164);
}

TEST_CASE("corpus writer refuses a missing parent directory") {
    CorpusConfig cfg;
    cfg.n_users = 2;
    cfg.events_per_user = 1;
    const auto corpus = generate_corpus(scenario(), cfg, calibrate_profile_from_table2(), OcclusionModel::none());
    const fs::path bad = scratch_dir("noparent") / "child";
    try {
        write_corpus(bad, scenario(), corpus, cfg.seed);
        FAIL("expected IoError");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::IoError);
        CHECK(std::string(e.what()).find("noparent") != std::string::npos);
    }
}

TEST_CASE("corpus configuration errors") {
    CorpusConfig cfg;
    cfg.n_users = 1;
    CHECK_THROWS_AS(generate_corpus(scenario(), cfg, calibrate_profile_from_table2(), OcclusionModel::none()), Error);
    DriverProfile p;
    p.left_hand_prob = 1.5;
    CHECK_THROWS_AS(p.validate(), Error);
}

}
