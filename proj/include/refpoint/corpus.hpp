#pragma once

#include "refpoint/event_io.hpp"
#include "refpoint/scenario.hpp"
#include "refpoint/synth.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace refpoint {

/// Preprocessed, labeled samples of a corpus together with its scenario.
struct Dataset {
    Scenario scenario;
    std::vector<SampleTensor> samples;
    std::size_t dropped = 0;  // events whose window did not fit in the stream

    /// Sorted, unique user ids.
    std::vector<std::string> users() const;
};

/// Reads manifest.json, the scenario and every event file. Throws Errc::CorpusError.
Dataset load_corpus(const std::filesystem::path& dir);

/// Same preprocessing for an in-memory corpus.
Dataset make_dataset(const Scenario& scenario, const std::vector<UserEvents>& corpus);

}  // namespace refpoint
