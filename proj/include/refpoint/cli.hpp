#pragma once

#include "refpoint/error.hpp"

#include <json.hpp>

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace refpoint::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kDataError = 2, kNumericalFailure = 3 };

int exit_code_for(Errc code) noexcept;

/// Layered settings: built-in defaults, then a JSON config file, then
/// `--set key=value` overrides. Keys are "section.name".
class RunConfig {
public:
    RunConfig();

    /// Throws Errc::InvalidArgument for unknown keys or malformed pairs.
    void merge_file(const std::string& path);
    void set(const std::string& assignment);

    const nlohmann::json& values() const { return values_; }
    const nlohmann::json& at(const std::string& key) const;

private:
    void assign(const std::string& key, const nlohmann::json& value);

    nlohmann::json values_;
};

/// Seed from --seed, else REFPOINT_SEED, else 2021.
std::uint64_t resolve_seed(const std::string& flag_value);

/// Full command line including the program name. Output goes to `out`,
/// diagnostics to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace refpoint::cli
