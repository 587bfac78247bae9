// Acceptance suite: end-to-end checks of the duality engine on fixed
// fixtures, one pass/fail line per criterion. Exit code is the number of
// failed criteria.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <vector>

#include <json.hpp>

#include "levmax/oracle.hpp"
#include "levmax/penalty.hpp"
#include "levmax/rng.hpp"
#include "levmax/runner.hpp"
#include "levmax/solver.hpp"

using namespace levmax;
namespace fs = std::filesystem;

namespace {

int g_failures = 0;

void report(int number, const std::string& name, bool pass, const std::string& detail) {
    std::printf("[%s] criterion %2d: %s  (%s)\n", pass ? "PASS" : "FAIL", number, name.c_str(),
                detail.c_str());
    std::fflush(stdout);
    if (!pass) ++g_failures;
}

double seconds_since(const std::chrono::steady_clock::time_point& t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

struct JumpFixture {
    LevyModel model;
    MarketSpec market;
    TimeGrid grid;
};

JumpFixture jump_fixture() {
    const std::pair<double, double> atoms[] = {{1.0, 0.5}, {-1.0, 0.5}};
    JumpFixture fx;
    fx.model = build_levy_model(0.0, 2.0, atoms);
    fx.market.alpha = StepFunction::constant(0.05);
    fx.market.beta = StepFunction::constant(0.2);
    fx.market.gamma = JumpCoefficient::constant(0.1, 2);
    fx.market.beta_floor_c = 0.1;
    fx.market.s0 = 1.0;
    fx.market.horizon_T = 1.0;
    fx.grid = TimeGrid{1.0, 64};
    return fx;
}

MarketSpec bs_market() {
    MarketSpec spec;
    spec.alpha = StepFunction::constant(0.1);
    spec.beta = StepFunction::constant(0.2);
    spec.gamma = JumpCoefficient::zero(0);
    spec.beta_floor_c = 0.1;
    spec.s0 = 1.0;
    spec.horizon_T = 1.0;
    return spec;
}

// 1. E[D_T] = 1 for randomly sampled bounded controls.
void criterion_density_normalization() {
    const auto t0 = std::chrono::steady_clock::now();
    const auto fx = jump_fixture();
    const auto bundle = simulate_paths(fx.model, fx.grid, 100000, 1001);
    const ControlFamily box{4, 2.0, 3.0, 0.1};  // theta0 in [-2,2], theta1 in [-0.9,3]
    int ok = 0;
    for (int k = 0; k < 20; ++k) {
        const auto ctrl = sample_control(box, fx.model.n_atoms(), fx.grid, 555, k);
        const auto dens = density_paths(ctrl, fx.model, bundle);
        const auto m = mc_mean(dens.terminal_d);
        if (std::fabs(m.value - 1.0) <= 3.0 * m.std_error) ++ok;
    }
    const double elapsed = seconds_since(t0);
    std::ostringstream detail;
    detail << ok << "/20 within 3 s.e., " << elapsed << " s";
    report(1, "density normalization E[D_T] = 1", ok >= 19 && elapsed <= 60.0, detail.str());
}

// 2. Completed controls have an exactly zero drift defect and a flat price
//    expectation under the tilted measure.
void criterion_elmm_martingale() {
    const auto t0 = std::chrono::steady_clock::now();
    const auto fx = jump_fixture();
    const ControlFamily box{4, 2.0, 3.0, 0.1};
    bool all_zero = true;
    bool all_flat = true;
    for (int k = 0; k < 10; ++k) {
        const auto seed_ctrl = sample_control(box, fx.model.n_atoms(), fx.grid, 777, k);
        const auto ctrl = complete_to_elmm(fx.market, seed_ctrl.theta1, fx.grid, fx.model);
        const auto residual = elmm_residual(fx.market, ctrl, fx.grid, fx.model);
        if (residual.sup_abs != 0.0) all_zero = false;
        const auto q_bundle = tilt_sample(ctrl, fx.model, fx.grid, 100000, 2000 + k);
        const auto y = build_y_paths(fx.market, fx.model, q_bundle);
        const auto price = price_paths(fx.market, q_bundle, y);
        std::vector<double> st(q_bundle.n_paths);
        for (std::size_t p = 0; p < q_bundle.n_paths; ++p)
            st[p] = price.s.at(p, fx.grid.n_steps);
        const auto m = mc_mean(st);
        if (std::fabs(m.value - fx.market.s0) > 3.0 * m.std_error) all_flat = false;
    }
    const double elapsed = seconds_since(t0);
    std::ostringstream detail;
    detail << "residual sup exactly 0: " << (all_zero ? "yes" : "no") << ", E_Q[S_T] flat: "
           << (all_flat ? "10/10" : "miss") << ", " << elapsed << " s";
    report(2, "martingale completion and tilted price expectation",
           all_zero && all_flat && elapsed <= 60.0, detail.str());
}

// 3. Relative entropy is dominated by the log threshold penalty.
void criterion_entropy_bound() {
    const auto fx = jump_fixture();
    const auto bundle = simulate_paths(fx.model, fx.grid, 100000, 3001);
    const auto penalty = make_log_penalty(1.0);
    const ControlFamily box{4, 2.0, 3.0, 0.1};
    int ok = 0;
    for (int k = 0; k < 20; ++k) {
        const auto ctrl = sample_control(box, fx.model.n_atoms(), fx.grid, 999, k);
        const auto h = relative_entropy(ctrl, fx.model, bundle);
        const auto pen = evaluate_penalty(penalty, ctrl, fx.market, fx.model, fx.grid);
        if (pen.finite && h.value <= pen.value + 3.0 * h.std_error) ++ok;
    }
    ControlPair gauss;
    gauss.theta0 = StepFunction::constant(0.5);
    gauss.theta1 = JumpCoefficient::zero(fx.model.n_atoms());
    const auto hg = relative_entropy(gauss, fx.model, bundle);
    const bool gauss_ok = std::fabs(hg.value - 0.125) <= 3.0 * hg.std_error;
    std::ostringstream detail;
    detail << ok << "/20 bounded, Gaussian case H = " << hg.value << " (target 0.125 +- "
           << 3.0 * hg.std_error << ")";
    report(3, "relative entropy below the log threshold penalty", ok == 20 && gauss_ok,
           detail.str());
}

// 4. Classic lognormal limit under a crushing penalty.
void criterion_merton_recovery() {
    const auto t0 = std::chrono::steady_clock::now();
    const auto market = bs_market();
    const auto model = build_levy_model(0.0, 0.0, {});
    const TimeGrid grid{1.0, 64};
    const auto util = make_log_utility();
    const auto penalty = scale_penalty(make_log_penalty(1.0), 1e6);
    const McConfig mc{100000, 4001};
    SolverOptions options;
    options.multi_starts = 3;
    options.max_sweeps = 20;
    ControlFamily family{2, 3.0, 3.0, 1e-6};

    const auto dual = solve_dual(1.0, family, util, penalty, market, model, grid, mc, options);
    const bool dual_ok = !dual.infeasible &&
                         std::fabs(dual.value - (-0.875)) <= 3.0 * dual.se + 1e-3;

    PrimalOptions popt;
    popt.y_lo = 0.2;
    popt.y_hi = 5.0;
    popt.y_points = 9;
    const auto primal =
        solve_primal(1.0, family, util, penalty, market, model, grid, mc, options, popt);
    const bool primal_ok = std::fabs(primal.value - 0.125) <= 3.0 * primal.se + 1e-3 &&
                           primal.y_star >= 0.95 && primal.y_star <= 1.05;
    const double elapsed = seconds_since(t0);
    std::ostringstream detail;
    detail << "v(1) = " << dual.value << " (target -0.875), u(1) = " << primal.value
           << " (target 0.125), y* = " << primal.y_star << ", " << elapsed << " s";
    report(4, "classic lognormal recovery under a crushing penalty",
           dual_ok && primal_ok && elapsed <= 600.0, detail.str());
}

// 5. Power threshold curvature constant.
void criterion_kappa_arithmetic() {
    const bool ok = PowerPenaltyParams::from(-1.0, 1.0, 0.1).kappa1 == 1.0 &&
                    PowerPenaltyParams::from(0.5, 1.0, 0.1).kappa1 == 6.0 &&
                    PowerPenaltyParams::from(0.5, 0.1, 0.1).kappa1 == 1.0;
    report(5, "power threshold curvature constant", ok,
           "kappa1(q=-1,T=1) = 1, kappa1(q=1/2,T=1) = 6, kappa1(q=1/2,T=0.1) = 1");
}

// 6. Strong duality on the two-state scenario market.
void criterion_oracle_strong_duality() {
    const auto t0 = std::chrono::steady_clock::now();
    FiniteMarket market;
    market.p_ref = {0.5, 0.5};
    market.s0 = 1.0;
    market.s_T = {1.2, 0.9};
    market.penalty = quadratic_penalty_table(market.p_ref, 5.0);
    const auto util = make_log_utility();
    const SimplexGrid grid{40, 2};
    const auto strategies = make_strategy_grid(market, 2001);
    std::vector<double> ys(201);
    for (std::size_t k = 0; k < ys.size(); ++k)
        ys[k] = std::exp(std::log(1e-2) + (std::log(1e2) - std::log(1e-2)) * k / 200.0);

    const double resolution = 1.0 / 40.0;
    bool ok = true;
    std::ostringstream detail;
    for (double x : {0.5, 1.0, 2.0}) {
        const auto rep = exact_dual_and_minimax(market, util, x, ys, grid, strategies);
        const bool here = rep.minimax_gap <= 2.0 * resolution &&
                          rep.conjugacy_gap <= 2.0 * resolution &&
                          rep.saddle_max_diff <= 2.0 * resolution * std::max(1.0, x);
        ok = ok && here;
        detail << "x=" << x << ": gaps " << rep.minimax_gap << "/" << rep.conjugacy_gap
               << "/" << rep.saddle_max_diff << "; ";
    }
    const double elapsed = seconds_since(t0);
    detail << elapsed << " s";
    report(6, "scenario-market strong duality and saddle recovery", ok && elapsed <= 60.0,
           detail.str());
}

// 7. Risk measure axioms and penalty reconstruction.
void criterion_risk_measure() {
    FiniteMarket market;
    market.p_ref = {0.5, 0.5};
    market.s0 = 1.0;
    market.s_T = {1.2, 0.9};
    market.penalty = quadratic_penalty_table(market.p_ref, 5.0);
    const SimplexGrid grid{40, 2};

    Rng rng(6001, 0, 0);
    bool ti_ok = true, mono_ok = true;
    for (int k = 0; k < 100; ++k) {
        std::vector<double> x = {2.0 * rng.uniform01() - 1.0, 2.0 * rng.uniform01() - 1.0};
        const double a = 2.0 * rng.uniform01() - 1.0;
        std::vector<double> shifted = {x[0] + a, x[1] + a};
        std::vector<double> dominated = {x[0] - rng.uniform01(), x[1] - rng.uniform01()};
        std::vector<std::vector<double>> batch = {x, shifted, dominated};
        const auto rep = exact_risk_measure(market, batch, grid);
        if (std::fabs(rep.rho[1] - (rep.rho[0] - a)) > 1e-12) ti_ok = false;
        if (rep.rho[2] < rep.rho[0]) mono_ok = false;
    }

    auto entropic = market;
    entropic.penalty = entropic_penalty_table(market.p_ref);
    bool entropic_ok = true;
    for (int k = 0; k < 20; ++k) {
        std::vector<std::vector<double>> payoff = {
            {3.0 * rng.uniform01() - 1.5, 3.0 * rng.uniform01() - 1.5}};
        const auto rep = exact_risk_measure(entropic, payoff, grid);
        const double closed =
            std::log(0.5 * std::exp(-payoff[0][0]) + 0.5 * std::exp(-payoff[0][1]));
        if (std::fabs(rep.rho[0] - closed) > 1.0 / 40.0) entropic_ok = false;
    }

    const std::vector<int> resolutions = {10, 20, 40};
    const auto gaps = biduality_gap(market, resolutions);
    const bool gaps_ok = gaps[0] > gaps[1] && gaps[1] > gaps[2] && gaps[2] >= 0.0;

    std::ostringstream detail;
    detail << "translation/monotonicity on 100 pairs, entropic closed form, gaps " << gaps[0]
           << " > " << gaps[1] << " > " << gaps[2];
    report(7, "risk-measure axioms and penalty reconstruction",
           ti_ok && mono_ok && entropic_ok && gaps_ok, detail.str());
}

// 8. Weak duality audit across probe strategies and the y grid.
void criterion_weak_duality_audit() {
    const auto t0 = std::chrono::steady_clock::now();
    const auto fx = jump_fixture();
    const auto util = make_log_utility();
    const auto penalty = make_log_penalty(1.0);
    const McConfig mc{100000, 8001};
    SolverOptions options;
    options.multi_starts = 2;
    options.max_sweeps = 12;
    ControlFamily family{2, 2.0, 2.0, 1e-6};

    std::vector<double> ys(33);
    for (std::size_t k = 0; k < ys.size(); ++k)
        ys[k] = std::exp(std::log(1e-3) + (std::log(1e3) - std::log(1e-3)) * k / 32.0);
    std::vector<double> probes(10);
    Rng rng(8101, 0, 0);
    for (auto& pi : probes) pi = -1.0 + 3.5 * rng.uniform01();

    const auto rep = weak_duality_audit(1.0, ys, probes, family, util, penalty, fx.market,
                                        fx.model, fx.grid, mc, options);
    const double elapsed = seconds_since(t0);
    std::ostringstream detail;
    detail << rep.rows.size() << " checks, " << rep.violations << " violations, " << elapsed
           << " s";
    report(8, "weak duality audit (10 strategies x 33 y-points)",
           rep.violations == 0 && rep.rows.size() == 330, detail.str());
}

// 9. Enlarging the control family cannot raise the dual value beyond noise.
void criterion_family_monotonicity() {
    const auto t0 = std::chrono::steady_clock::now();
    const auto fx = jump_fixture();
    const auto util = make_log_utility();
    const auto penalty = make_log_penalty(1.0);
    const McConfig mc{20000, 9001};
    SolverOptions options;
    options.multi_starts = 2;
    options.max_sweeps = 15;

    ControlFamily coarse{1, 1.5, 1.5, 1e-6};
    const auto sol_coarse =
        solve_dual(1.0, coarse, util, penalty, fx.market, fx.model, fx.grid, mc, options);

    ControlFamily fine{4, 3.0, 3.0, 1e-6};
    DualSolution warm;
    warm.y = 1.0;
    warm.q_params.assign(4, sol_coarse.q_params[0]);
    for (int c = 0; c < 4; ++c) {
        warm.q_params.push_back(sol_coarse.q_params[1]);
        warm.q_params.push_back(sol_coarse.q_params[2]);
    }
    for (int c = 0; c < 4; ++c) {
        warm.xi_params.push_back(sol_coarse.xi_params[0]);
        warm.xi_params.push_back(sol_coarse.xi_params[1]);
    }
    SolverOptions fine_options = options;
    fine_options.warm_start = &warm;
    const auto sol_fine =
        solve_dual(1.0, fine, util, penalty, fx.market, fx.model, fx.grid, mc, fine_options);

    const double combined =
        std::sqrt(sol_coarse.se * sol_coarse.se + sol_fine.se * sol_fine.se);
    const bool ok = !sol_coarse.infeasible && !sol_fine.infeasible &&
                    sol_fine.value <= sol_coarse.value + 3.0 * combined;
    std::ostringstream detail;
    detail << "coarse v = " << sol_coarse.value << ", fine v = " << sol_fine.value << ", "
           << seconds_since(t0) << " s";
    report(9, "control-family refinement is monotone", ok, detail.str());
}

// 10. Byte-identical JSON artifacts on reruns with fixed seeds.
void criterion_determinism() {
    const auto t0 = std::chrono::steady_clock::now();
    const fs::path base = fs::temp_directory_path() / "levmax_acceptance";
    fs::remove_all(base);
    struct Run {
        const char* command;
        const char* config;
    };
    const Run runs[] = {
        {"simulate", "configs/jump_diffusion.toml"},
        {"check-elmm", "configs/jump_diffusion.toml"},
        {"entropy", "configs/jump_diffusion.toml"},
        {"dual", "configs/bs_merton.toml"},
    };
    bool ok = true;
    std::ostringstream detail;
    for (const auto& run : runs) {
        std::string repeat[2];
        for (int rep = 0; rep < 2; ++rep) {
            const fs::path dir = base / (std::string(run.command) + std::to_string(rep));
            if (run_command(run.command, run.config, 31415, dir.string(), nullptr, false) !=
                0) {
                ok = false;
                detail << run.command << ": nonzero exit; ";
                break;
            }
            std::ifstream in(dir / (std::string(run.command) + ".json"), std::ios::binary);
            std::ostringstream buf;
            buf << in.rdbuf();
            auto j = nlohmann::json::parse(buf.str());
            j.erase("timestamp_utc");
            repeat[rep] = j.dump();
        }
        if (!repeat[0].empty() && repeat[0] != repeat[1]) {
            ok = false;
            detail << run.command << ": differs; ";
        }
    }
    detail << seconds_since(t0) << " s";
    report(10, "rerun determinism of JSON artifacts (timestamp isolated)", ok, detail.str());
}

}  // namespace

int main() {
    criterion_density_normalization();
    criterion_elmm_martingale();
    criterion_entropy_bound();
    criterion_merton_recovery();
    criterion_kappa_arithmetic();
    criterion_oracle_strong_duality();
    criterion_risk_measure();
    criterion_weak_duality_audit();
    criterion_family_monotonicity();
    criterion_determinism();
    if (g_failures == 0)
        std::printf("all criteria passed\n");
    else
        std::printf("%d criteria FAILED\n", g_failures);
    return g_failures;
}
