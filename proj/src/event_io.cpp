#include "refpoint/event_io.hpp"

#include "refpoint/error.hpp"

#include <json.hpp>

#include <fstream>
#include <istream>
#include <ostream>

namespace refpoint {

using nlohmann::json;

std::string_view to_string(RefType t) noexcept { return t == RefType::Volume ? "volume" : "point"; }

RefType ref_type_from_string(std::string_view s) {
    if (s == "volume") return RefType::Volume;
    if (s == "point") return RefType::Point;
    throw Error(Errc::FormatError, "unknown reference type '" + std::string(s) + "'");
}

namespace {

json vec_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

Vec3 vec_from(const json& j) {
    if (!j.is_array() || j.size() != 3) throw Error(Errc::FormatError, "expected a 3-vector");
    return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

json transform_json(const RigidTransform& t) {
    json rot = json::array();
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) rot.push_back(t.rotation(r, c));
    json out = {{"rotation", rot}, {"translation", vec_json(t.translation)}};
    if (!t.pivot.isZero(0.0)) out["pivot"] = vec_json(t.pivot);
    return out;
}

RigidTransform transform_from(const json& j) {
    RigidTransform t;
    const auto& rot = j.at("rotation");
    if (rot.size() != 9) throw Error(Errc::FormatError, "rotation needs 9 entries");
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) t.rotation(r, c) = rot[static_cast<std::size_t>(r * 3 + c)].get<double>();
    t.translation = vec_from(j.at("translation"));
    if (j.contains("pivot")) t.pivot = vec_from(j.at("pivot"));
    if (!t.is_valid(1e-6)) throw Error(Errc::FormatError, "extrinsic rotation is not orthonormal");
    return t;
}

json frame_json(const ModalityFrame& f) {
    json j;
    j["t"] = f.timestamp;
    if (f.valid(Modality::Finger) == Validity::Valid) {
        j["finger"] = {{"pos", vec_json(f.finger_pos)}, {"dir", vec_json(f.finger_dir)}};
    } else {
        j["finger"] = nullptr;
    }
    if (f.valid(Modality::Eye) == Validity::Valid) {
        j["eye"] = {{"pos", vec_json(f.eye_pos)}, {"dir", vec_json(f.eye_dir)}};
    } else {
        j["eye"] = nullptr;
    }
    if (f.valid(Modality::Head) == Validity::Valid) {
        j["head"] = {{"pos", vec_json(f.head_pos)},
                     {"euler", json::array({f.head_euler.roll, f.head_euler.pitch, f.head_euler.yaw})}};
    } else {
        j["head"] = nullptr;
    }
    return j;
}

ModalityFrame frame_from(const json& j) {
    ModalityFrame f;
    f.timestamp = j.at("t").get<double>();
    const auto& finger = j.at("finger");
    if (finger.is_null()) {
        f.valid(Modality::Finger) = Validity::Missing;
        f.finger_pos.setZero();
        f.finger_dir.setZero();
    } else {
        f.finger_pos = vec_from(finger.at("pos"));
        f.finger_dir = vec_from(finger.at("dir"));
    }
    const auto& eye = j.at("eye");
    if (eye.is_null()) {
        f.valid(Modality::Eye) = Validity::Missing;
        f.eye_pos.setZero();
        f.eye_dir.setZero();
    } else {
        f.eye_pos = vec_from(eye.at("pos"));
        f.eye_dir = vec_from(eye.at("dir"));
    }
    const auto& head = j.at("head");
    if (head.is_null()) {
        f.valid(Modality::Head) = Validity::Missing;
        f.head_pos.setZero();
    } else {
        f.head_pos = vec_from(head.at("pos"));
        const Vec3 e = vec_from(head.at("euler"));
        f.head_euler = {e[0], e[1], e[2]};
    }
    return f;
}

}  // namespace

void write_events(std::ostream& out, const std::vector<SensorEvent>& events) {
    for (const auto& ev : events) {
        const EventHeader& h = ev.header;
        json header = {
            {"type", "event"},
            {"user_id", h.user_id},
            {"event_index", h.event_index},
            {"pose_id", h.pose_id},
            {"ref_type", to_string(h.target.type)},
            {"target_id", h.target.id},
            {"roi_id", h.roi_id},
            {"trigger", h.trigger},
            {"rate", ev.stream.rate},
            {"hand", h.left_hand ? "left" : "right"},
            {"n_frames", ev.stream.frames.size()},
            {"extrinsics", {{"gcs", transform_json(h.extrinsics.gcs)}, {"vcs", transform_json(h.extrinsics.vcs)}}},
        };
        out << header.dump() << '\n';
        for (const auto& f : ev.stream.frames) out << frame_json(f).dump() << '\n';
    }
}

std::vector<SensorEvent> read_events(std::istream& in, const std::string& source_name) {
    std::vector<SensorEvent> events;
    std::string line;
    std::size_t line_no = 0;
    auto fail = [&](const std::string& msg) {
        throw Error(Errc::FormatError, source_name + ":" + std::to_string(line_no) + ": " + msg);
    };
    try {
        while (std::getline(in, line)) {
            ++line_no;
            if (line.empty()) continue;
            const json j = json::parse(line);
            if (j.value("type", "") != "event") fail("expected an event header line");
            SensorEvent ev;
            EventHeader& h = ev.header;
            h.user_id = j.at("user_id").get<std::string>();
            h.event_index = j.value("event_index", static_cast<int>(events.size()));
            h.pose_id = j.at("pose_id").get<int>();
            h.target.type = ref_type_from_string(j.at("ref_type").get<std::string>());
            h.target.id = j.at("target_id").get<int>();
            h.roi_id = j.value("roi_id", 0);
            h.trigger = j.at("trigger").get<double>();
            h.left_hand = j.value("hand", "right") == "left";
            h.extrinsics.gcs = transform_from(j.at("extrinsics").at("gcs"));
            h.extrinsics.vcs = transform_from(j.at("extrinsics").at("vcs"));
            ev.stream.rate = j.at("rate").get<double>();
            const auto n = j.at("n_frames").get<std::size_t>();
            ev.stream.frames.reserve(n);
            for (std::size_t i = 0; i < n; ++i) {
                if (!std::getline(in, line)) fail("truncated event: expected " + std::to_string(n) + " frames");
                ++line_no;
                ev.stream.frames.push_back(frame_from(json::parse(line)));
            }
            ev.stream.validate();
            events.push_back(std::move(ev));
        }
    } catch (const json::exception& e) {
        fail(e.what());
    }
    return events;
}

std::vector<SensorEvent> read_event_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(Errc::IoError, "cannot open event file " + path.string());
    return read_events(in, path.string());
}

SampleTensor preprocess_event(const SensorEvent& event, const Scenario& scenario) {
    FrameStream car = event.stream;
    for (auto& f : car.frames) f = transform_frame(f, event.header.extrinsics);
    const FrameStream filled = interpolate_gaps(car, AbsentPolicy::ZeroFill);
    SampleTensor s = extract_window(filled, event.header.trigger);
    s.label = scenario.ground_truth(event.header.pose_id, event.header.target);
    s.meta.user_id = event.header.user_id;
    s.meta.pose_id = event.header.pose_id;
    s.meta.target_id = event.header.target.id;
    s.meta.roi_id = scenario.roi_of(event.header.target);
    s.meta.ref_type = event.header.target.type;
    s.meta.left_hand = event.header.left_hand;
    return s;
}

}  // namespace refpoint
