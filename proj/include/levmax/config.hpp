#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "levmax/levy.hpp"
#include "levmax/market.hpp"
#include "levmax/measure.hpp"
#include "levmax/oracle.hpp"
#include "levmax/penalty.hpp"
#include "levmax/solver.hpp"
#include "levmax/utility.hpp"

namespace levmax {

/// Configuration problem: carries the offending key path; maps to exit 2.
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Numeric divergence diagnostics surfaced by a run; maps to exit 3.
struct NumericError : std::runtime_error {
    explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Parse the supported TOML subset (tables, scalars, homogeneous or nested
/// arrays, comments) into JSON. Full JSON configs are accepted as-is by the
/// loader, so this only needs to cover the config schema.
nlohmann::json toml_subset_to_json(const std::string& text);

std::string fnv1a_hex(const std::string& bytes);

struct OracleConfig {
    FiniteMarket market;
    int resolution = 40;
    std::vector<double> x_values = {0.5, 1.0, 2.0};
};

struct RunConfig {
    int version = 1;
    std::string config_hash;

    TimeGrid grid{1.0, 64};
    LevyModel model;
    MarketSpec market;
    bool has_market = false;
    StepFunction market_pi = StepFunction::constant(0.0);

    UtilitySpec utility;
    bool has_utility = false;
    PenaltySpec penalty;
    bool has_penalty = false;

    ControlPair control;
    bool has_control = false;
    bool control_complete_elmm = false;

    ControlFamily family;
    McConfig mc;
    SolverOptions solver_options;
    PrimalOptions primal_options;
    double solver_y = 1.0;
    double solver_x = 1.0;
    std::size_t audit_probes = 10;

    std::optional<OracleConfig> oracle;

    std::string out_dir = "out";
    bool write_csv = false;
};

/// Load and strictly validate a config file (.toml canonical, .json accepted).
/// Unknown keys are rejected with their full path.
RunConfig load_config(const std::string& path);

/// Same, from already-parsed JSON (the hash should be of the source bytes).
RunConfig config_from_json(const nlohmann::json& j, const std::string& config_hash);

}  // namespace levmax
