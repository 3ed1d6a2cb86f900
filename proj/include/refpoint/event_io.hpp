#pragma once

#include "refpoint/frames.hpp"
#include "refpoint/scenario.hpp"

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace refpoint {

struct EventHeader {
    std::string user_id;
    int event_index = 0;
    int pose_id = 0;
    TargetRef target{};
    int roi_id = 0;
    double trigger = 0.0;
    bool left_hand = false;
    SensorExtrinsics extrinsics{};
};

/// One referencing event as recorded: frames in sensor coordinates.
struct SensorEvent {
    EventHeader header;
    FrameStream stream;
};

std::string_view to_string(RefType t) noexcept;
RefType ref_type_from_string(std::string_view s);  // Errc::FormatError

/// Sensor event file: JSON Lines. Each event is a header line
/// {"type":"event", ..., "n_frames":N} followed by N frame lines; missing
/// modalities are written as null.
void write_events(std::ostream& out, const std::vector<SensorEvent>& events);
std::vector<SensorEvent> read_events(std::istream& in, const std::string& source_name = "<stream>");
std::vector<SensorEvent> read_event_file(const std::filesystem::path& path);

/// Car-frame window with ground-truth label: transform, interpolate (absent
/// modalities are zero-filled) and extract the 36-frame window.
SampleTensor preprocess_event(const SensorEvent& event, const Scenario& scenario);

}  // namespace refpoint
