#include "levmax/runner.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "levmax/rng.hpp"

namespace levmax {

namespace {

using nlohmann::json;

json control_to_json(const ControlPair& ctrl) {
    json out;
    out["theta0_breaks"] = ctrl.theta0.breaks();
    out["theta0_values"] = ctrl.theta0.values();
    out["theta1_breaks"] = ctrl.theta1.breaks();
    json rows = json::array();
    for (std::size_t r = 0; r < ctrl.theta1.n_cells(); ++r) {
        json row = json::array();
        for (std::size_t c = 0; c < ctrl.theta1.n_atoms(); ++c)
            row.push_back(ctrl.theta1.values().at(r, c));
        rows.push_back(row);
    }
    out["theta1_values"] = rows;
    return out;
}

void require_market(const RunConfig& cfg, const char* cmd) {
    if (!cfg.has_market) throw ConfigError(std::string(cmd) + " needs a [market] block");
    const auto report = validate_assumptions(cfg.market, cfg.model, cfg.grid);
    if (!report.all())
        throw ConfigError(std::string("market assumptions failed:\n") + report.summary());
}

json cmd_simulate(const RunConfig& cfg) {
    const PathBundle bundle = simulate_paths(cfg.model, cfg.grid, cfg.mc.n_paths, cfg.mc.seed);
    std::vector<double> lt(bundle.n_paths), jumps(bundle.n_paths);
    for (std::size_t p = 0; p < bundle.n_paths; ++p) {
        lt[p] = bundle.levy.at(p, cfg.grid.n_steps);
        jumps[p] = static_cast<double>(bundle.events_of(p).size());
    }
    const auto lt_mc = mc_mean(lt);
    const auto j_mc = mc_mean(jumps);
    json out;
    out["n_paths"] = bundle.n_paths;
    out["n_steps"] = cfg.grid.n_steps;
    out["L_T_mean"] = lt_mc.value;
    out["L_T_se"] = lt_mc.std_error;
    out["jumps_per_path_mean"] = j_mc.value;
    out["jumps_per_path_se"] = j_mc.std_error;
    return out;
}

json cmd_check_elmm(const RunConfig& cfg) {
    require_market(cfg, "check-elmm");
    if (!cfg.has_control) throw ConfigError("check-elmm needs a [control] block");
    const auto residual = elmm_residual(cfg.market, cfg.control, cfg.grid, cfg.model);
    const PathBundle q_paths =
        tilt_sample(cfg.control, cfg.model, cfg.grid, cfg.mc.n_paths, cfg.mc.seed);
    const Matrix y = build_y_paths(cfg.market, cfg.model, q_paths);
    const PricePaths price = price_paths(cfg.market, q_paths, y);
    std::vector<double> st(q_paths.n_paths);
    for (std::size_t p = 0; p < q_paths.n_paths; ++p) st[p] = price.s.at(p, cfg.grid.n_steps);
    const auto st_mc = mc_mean(st);
    json out;
    out["residual_sup"] = residual.sup_abs;
    out["s0"] = cfg.market.s0;
    out["E_Q_S_T"] = st_mc.value;
    out["E_Q_S_T_se"] = st_mc.std_error;
    out["martingale_ok"] =
        std::fabs(st_mc.value - cfg.market.s0) <= 3.0 * st_mc.std_error;
    out["control"] = control_to_json(cfg.control);
    return out;
}

json cmd_penalty(const RunConfig& cfg) {
    if (!cfg.has_penalty) throw ConfigError("penalty needs a [penalty] block");
    if (!cfg.has_control) throw ConfigError("penalty needs a [control] block");
    const auto value =
        evaluate_penalty(cfg.penalty, cfg.control, cfg.market, cfg.model, cfg.grid);
    if (!value.finite) throw NumericError("penalty diverged: " + value.diagnostic);
    json out;
    out["label"] = cfg.penalty.label;
    out["value"] = value.value;
    return out;
}

json cmd_entropy(const RunConfig& cfg) {
    if (!cfg.has_control) throw ConfigError("entropy needs a [control] block");
    const PathBundle paths = simulate_paths(cfg.model, cfg.grid, cfg.mc.n_paths, cfg.mc.seed);
    const auto h = relative_entropy(cfg.control, cfg.model, paths);
    json out;
    out["H_estimate"] = h.value;
    out["H_se"] = h.std_error;
    out["H_exact"] = relative_entropy_exact(cfg.control, cfg.model, cfg.grid);
    if (cfg.has_penalty) {
        const auto pv =
            evaluate_penalty(cfg.penalty, cfg.control, cfg.market, cfg.model, cfg.grid);
        out["penalty"] = pv.finite ? json(pv.value) : json("inf");
    }
    return out;
}

json dual_to_json(const DualSolution& sol) {
    json out;
    out["y"] = sol.y;
    out["v_value"] = sol.value;
    out["se"] = sol.se;
    out["iterations"] = sol.iterations;
    out["converged"] = sol.converged;
    out["infeasible"] = sol.infeasible;
    if (!sol.infeasible) {
        out["q_star"] = control_to_json(sol.q_star);
        out["xi_star"] = control_to_json(sol.xi_star);
    }
    return out;
}

json cmd_dual(const RunConfig& cfg) {
    require_market(cfg, "dual");
    if (!cfg.has_utility || !cfg.has_penalty)
        throw ConfigError("dual needs [utility] and [penalty] blocks");
    const auto sol = solve_dual(cfg.solver_y, cfg.family, cfg.utility, cfg.penalty, cfg.market,
                                cfg.model, cfg.grid, cfg.mc, cfg.solver_options);
    if (sol.infeasible) throw NumericError("dual infeasible within the control family");
    return dual_to_json(sol);
}

json cmd_primal(const RunConfig& cfg) {
    require_market(cfg, "primal");
    if (!cfg.has_utility || !cfg.has_penalty)
        throw ConfigError("primal needs [utility] and [penalty] blocks");
    const auto sol =
        solve_primal(cfg.solver_x, cfg.family, cfg.utility, cfg.penalty, cfg.market, cfg.model,
                     cfg.grid, cfg.mc, cfg.solver_options, cfg.primal_options);
    json out;
    out["x"] = sol.x;
    out["u_value"] = sol.value;
    out["se"] = sol.se;
    out["y_star"] = sol.y_star;
    out["y_boundary"] = sol.y_boundary;
    out["admissible"] = sol.admissible;
    out["crosscheck_value"] = sol.crosscheck_value;
    out["crosscheck_se"] = sol.crosscheck_se;
    out["budget_mean"] = sol.budget_mean;
    out["budget_se"] = sol.budget_se;
    out["dual"] = dual_to_json(sol.dual_at_y_star);
    return out;
}

json cmd_audit(const RunConfig& cfg) {
    require_market(cfg, "audit");
    if (!cfg.has_utility || !cfg.has_penalty)
        throw ConfigError("audit needs [utility] and [penalty] blocks");
    std::vector<double> y_grid(cfg.primal_options.y_points);
    for (std::size_t k = 0; k < y_grid.size(); ++k)
        y_grid[k] = std::exp(std::log(cfg.primal_options.y_lo) +
                             (std::log(cfg.primal_options.y_hi) - std::log(cfg.primal_options.y_lo)) *
                                 k / (y_grid.size() - 1.0));
    std::vector<double> probes(cfg.audit_probes);
    Rng rng(cfg.solver_options.start_seed, 99, 5);
    for (auto& pi : probes) pi = -1.0 + 3.0 * rng.uniform01();
    const auto report =
        weak_duality_audit(cfg.solver_x, y_grid, probes, cfg.family, cfg.utility, cfg.penalty,
                           cfg.market, cfg.model, cfg.grid, cfg.mc, cfg.solver_options);
    json out;
    out["violations"] = report.violations;
    out["checks"] = report.rows.size();
    double worst = -1e300;
    for (const auto& row : report.rows) worst = std::max(worst, row.lhs - row.rhs);
    out["max_lhs_minus_rhs"] = worst;
    return out;
}

json cmd_oracle(const RunConfig& cfg) {
    if (!cfg.oracle) throw ConfigError("oracle needs an [oracle] block");
    const auto& oc = *cfg.oracle;
    const UtilitySpec util = cfg.has_utility ? cfg.utility : make_log_utility();
    const SimplexGrid grid{oc.resolution, oc.market.n()};
    const auto strategies = make_strategy_grid(oc.market, 2001);
    std::vector<double> y_grid(201);
    for (std::size_t k = 0; k < y_grid.size(); ++k)
        y_grid[k] = std::exp(std::log(1e-2) + (std::log(1e2) - std::log(1e-2)) * k / 200.0);

    json out;
    if (oc.market.n() == 2) out["q_up"] = two_state_elmm_up(oc.market);
    json primal = json::array();
    for (double x : oc.x_values) {
        const auto res = exact_primal(oc.market, util, x, strategies, grid);
        const auto mm = exact_dual_and_minimax(oc.market, util, x, y_grid, grid, strategies);
        json row;
        row["x"] = x;
        row["u"] = res.value;
        row["best_pi"] = res.best_pi;
        row["minimax_gap"] = mm.minimax_gap;
        row["conjugacy_gap"] = mm.conjugacy_gap;
        row["saddle_max_diff"] = mm.saddle_max_diff;
        row["y_star"] = mm.y_star;
        primal.push_back(row);
    }
    out["per_x"] = primal;
    const std::vector<int> resolutions = {10, 20, 40};
    out["biduality_gaps"] = biduality_gap(oc.market, resolutions);
    return out;
}

}  // namespace

json run_to_json(const std::string& subcommand, const RunConfig& cfg) {
    if (subcommand == "simulate") return cmd_simulate(cfg);
    if (subcommand == "check-elmm") return cmd_check_elmm(cfg);
    if (subcommand == "penalty") return cmd_penalty(cfg);
    if (subcommand == "entropy") return cmd_entropy(cfg);
    if (subcommand == "dual") return cmd_dual(cfg);
    if (subcommand == "primal") return cmd_primal(cfg);
    if (subcommand == "audit") return cmd_audit(cfg);
    if (subcommand == "oracle") return cmd_oracle(cfg);
    throw ConfigError("unknown subcommand '" + subcommand + "'");
}

int run_command(const std::string& subcommand, const std::string& config_path,
                std::optional<std::uint64_t> seed_override,
                const std::optional<std::string>& out_dir_override, std::string* error_out,
                bool echo_path) {
    try {
        RunConfig cfg = load_config(config_path);
        if (seed_override) cfg.mc.seed = *seed_override;
        if (out_dir_override) cfg.out_dir = *out_dir_override;

        json envelope;
        envelope["format_version"] = 1;
        envelope["command"] = subcommand;
        envelope["config_hash"] = cfg.config_hash;
        envelope["seed"] = cfg.mc.seed;
        const auto now = std::chrono::system_clock::now();
        envelope["timestamp_utc"] =
            static_cast<std::int64_t>(std::chrono::duration_cast<std::chrono::seconds>(
                                          now.time_since_epoch())
                                          .count());
        envelope["results"] = run_to_json(subcommand, cfg);

        std::filesystem::create_directories(cfg.out_dir);
        const std::string out_path = cfg.out_dir + "/" + subcommand + ".json";
        std::ofstream out(out_path, std::ios::binary);
        out << envelope.dump(2) << "\n";
        out.close();

        if (cfg.write_csv && subcommand == "simulate") {
            const PathBundle bundle =
                simulate_paths(cfg.model, cfg.grid, std::min<std::size_t>(cfg.mc.n_paths, 64),
                               cfg.mc.seed);
            std::ofstream csv(cfg.out_dir + "/paths.csv", std::ios::binary);
            write_paths_csv(csv, bundle);
            if (cfg.has_market) {
                const Matrix y = build_y_paths(cfg.market, cfg.model, bundle);
                const PricePaths price = price_paths(cfg.market, bundle, y);
                const WealthPaths wealth = wealth_paths(price, 1.0, cfg.market_pi);
                std::ofstream pcsv(cfg.out_dir + "/price.csv", std::ios::binary);
                write_price_csv(pcsv, price, &wealth);
            }
        }
        if (echo_path) std::cout << out_path << "\n";
        return 0;
    } catch (const ConfigError& e) {
        if (error_out) *error_out = e.what();
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::invalid_argument& e) {
        if (error_out) *error_out = e.what();
        std::cerr << "validation error: " << e.what() << "\n";
        return 2;
    } catch (const NumericError& e) {
        if (error_out) *error_out = e.what();
        std::cerr << "numeric divergence: " << e.what() << "\n";
        return 3;
    }
}

}  // namespace levmax
