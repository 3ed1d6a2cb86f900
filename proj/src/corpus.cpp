#include "refpoint/corpus.hpp"

#include "refpoint/error.hpp"

#include <json.hpp>

#include <algorithm>
#include <exception>
#include <fstream>
#include <optional>
#include <set>

namespace refpoint {

using nlohmann::json;

std::vector<std::string> Dataset::users() const {
    std::set<std::string> ids;
    for (const auto& s : samples) ids.insert(s.meta.user_id);
    return {ids.begin(), ids.end()};
}

namespace {

Dataset preprocess_all(const Scenario& scenario, const std::vector<const SensorEvent*>& events) {
    const auto n = static_cast<long>(events.size());
    std::vector<std::optional<SampleTensor>> out(events.size());
    std::vector<std::string> errors(events.size());
#pragma omp parallel for schedule(dynamic, 8)
    for (long i = 0; i < n; ++i) {
        const auto idx = static_cast<std::size_t>(i);
        try {
            out[idx] = preprocess_event(*events[idx], scenario);
        } catch (const Error& e) {
            if (e.code() != Errc::InsufficientCoverage) errors[idx] = e.what();
        } catch (const std::exception& e) {
            errors[idx] = e.what();
        }
    }
    Dataset d;
    d.scenario = scenario;
    for (std::size_t i = 0; i < out.size(); ++i) {
        if (!errors[i].empty()) {
            const auto& h = events[i]->header;
            throw Error(Errc::CorpusError,
                        "event " + h.user_id + "#" + std::to_string(h.event_index) + ": " + errors[i]);
        }
        if (out[i]) {
            d.samples.push_back(std::move(*out[i]));
        } else {
            ++d.dropped;
        }
    }
    return d;
}

}  // namespace

Dataset make_dataset(const Scenario& scenario, const std::vector<UserEvents>& corpus) {
    std::vector<const SensorEvent*> events;
    for (const auto& u : corpus)
        for (const auto& e : u.events) events.push_back(&e);
    return preprocess_all(scenario, events);
}

Dataset load_corpus(const std::filesystem::path& dir) {
    const auto manifest_path = dir / "manifest.json";
    std::ifstream in(manifest_path);
    if (!in) throw Error(Errc::CorpusError, "cannot open " + manifest_path.string());
    json manifest;
    try {
        manifest = json::parse(in);
    } catch (const json::exception& e) {
        throw Error(Errc::CorpusError, manifest_path.string() + ": " + e.what());
    }

    Scenario scenario;
    std::vector<SensorEvent> events;
    try {
        scenario = load_scenario(dir / manifest.at("scenario_file").get<std::string>());
        for (const auto& user : manifest.at("users")) {
            const auto id = user.at("id").get<std::string>();
            std::size_t count = 0;
            for (const auto& f : user.at("files")) {
                auto evs = read_event_file(dir / f.get<std::string>());
                for (auto& e : evs) {
                    if (e.header.user_id != id) {
                        throw Error(Errc::CorpusError, f.get<std::string>() + " contains events of user " +
                                                           e.header.user_id + ", manifest says " + id);
                    }
                    events.push_back(std::move(e));
                    ++count;
                }
            }
            if (count != user.at("n_events").get<std::size_t>()) {
                throw Error(Errc::CorpusError, "user " + id + ": manifest lists " +
                                                   std::to_string(user.at("n_events").get<std::size_t>()) +
                                                   " events, files hold " + std::to_string(count));
            }
        }
    } catch (const json::exception& e) {
        throw Error(Errc::CorpusError, manifest_path.string() + ": " + e.what());
    } catch (const Error& e) {
        if (e.code() == Errc::CorpusError) throw;
        throw Error(Errc::CorpusError, e.what());
    }
    std::vector<const SensorEvent*> ptrs;
    ptrs.reserve(events.size());
    for (const auto& e : events) ptrs.push_back(&e);
    return preprocess_all(scenario, ptrs);
}

}  // namespace refpoint
