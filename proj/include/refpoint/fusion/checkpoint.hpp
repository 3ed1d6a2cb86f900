#pragma once

#include "refpoint/fusion/trainer.hpp"

#include <json.hpp>

#include <filesystem>
#include <optional>

namespace refpoint::fusion {

/// File layout: the line "REFPOINT-CKPT 1", one line of JSON header, then
/// little-endian float32 blobs. Blob order: best parameters in layout order,
/// then (when training state is stored) last parameters, Adam m, Adam v.
/// `checksum` in the header is the CRC32 of all blob bytes.
struct Checkpoint {
    FusionModel model;
    TrainConfig train;
    TrainHistory history;
    std::optional<TrainState> state;
    nlohmann::json metrics = nlohmann::json::object();

    /// TrainResult for resuming; throws Errc::FormatError without stored state.
    TrainResult as_resume() const;
};

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);

/// Throws Errc::IoError, Errc::FormatError (including checksum mismatch).
Checkpoint load_checkpoint(const std::filesystem::path& path);

nlohmann::json network_config_to_json(const NetworkConfig& c);
NetworkConfig network_config_from_json(const nlohmann::json& j);
nlohmann::json train_config_to_json(const TrainConfig& c);
TrainConfig train_config_from_json(const nlohmann::json& j);

}  // namespace refpoint::fusion
