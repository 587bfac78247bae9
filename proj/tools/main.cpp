#include <CLI11.hpp>

#include "levmax/runner.hpp"

int main(int argc, char** argv) {
    CLI::App app{"levmax: robust utility maximization engine for Levy-driven markets"};
    app.require_subcommand(1);

    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out_dir;

    const std::vector<std::string> commands = {"simulate", "check-elmm", "penalty", "entropy",
                                               "dual",     "primal",     "audit",   "oracle"};
    for (const auto& name : commands) {
        auto* sub = app.add_subcommand(name);
        sub->add_option("--config", config_path, "config file (.toml or .json)")->required();
        sub->add_option("--seed", seed, "override the Monte Carlo seed");
        sub->add_option("--out", out_dir, "override the output directory");
    }

    CLI11_PARSE(app, argc, argv);
    const std::string chosen = app.get_subcommands().front()->get_name();
    return levmax::run_command(chosen, config_path, seed, out_dir);
}
