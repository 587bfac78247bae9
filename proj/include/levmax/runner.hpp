#pragma once

#include <optional>
#include <string>

#include <json.hpp>

#include "levmax/config.hpp"

namespace levmax {

/// Results payload for one subcommand; throws ConfigError / NumericError.
nlohmann::json run_to_json(const std::string& subcommand, const RunConfig& cfg);

/// Full CLI behavior: load config, run, write artifacts under the output
/// directory. Returns the process exit code (0 ok, 2 validation,
/// 3 numeric divergence).
int run_command(const std::string& subcommand, const std::string& config_path,
                std::optional<std::uint64_t> seed_override,
                const std::optional<std::string>& out_dir_override,
                std::string* error_out = nullptr, bool echo_path = true);

}  // namespace levmax
