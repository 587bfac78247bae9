#include "levmax/solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "levmax/rng.hpp"
#include "levmax/simd_kernels.hpp"

namespace levmax {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::vector<double> block_breaks(const TimeGrid& grid, std::size_t k_t) {
    if (k_t == 0 || grid.n_steps % k_t != 0)
        throw std::invalid_argument("family k_t must divide n_steps");
    std::vector<double> breaks(k_t);
    for (std::size_t c = 0; c < k_t; ++c) breaks[c] = grid.node(c * (grid.n_steps / k_t));
    return breaks;
}

std::size_t cell_of_left(const std::vector<double>& breaks, double t) {
    auto it = std::upper_bound(breaks.begin(), breaks.end(), t);
    std::size_t k = (it == breaks.begin()) ? 0 : static_cast<std::size_t>(it - breaks.begin() - 1);
    if (k > 0 && breaks[k] == t) --k;
    return k;
}

// Per-measure evaluation state: the tilted path sample, terminal log
// densities, and jump counts bucketed by the xi control cells.
struct DualContext {
    PathBundle bundle;
    std::vector<double> log_d;      // per path
    std::vector<double> counts;     // n_paths * (n_cells * n_atoms)
    std::vector<double> cell_breaks;
    std::size_t n_cells = 1;
    std::size_t n_atoms = 0;
    double penalty_value = 0.0;
    bool penalty_finite = true;
    // column means of dw, counts and log_d: for log utility the objective is
    // linear in these statistics, which makes descent evaluations cheap
    std::vector<double> mean_dw;
    std::vector<double> mean_counts;
    double mean_log_d = 0.0;
    bool log_d_finite = true;
};

DualContext build_dual_context(const ControlPair& q_ctrl, const std::vector<double>& xi_breaks,
                               const PenaltySpec& penalty, const MarketSpec& market,
                               const LevyModel& model, const TimeGrid& grid,
                               const McConfig& mc) {
    DualContext cx;
    cx.bundle = tilt_sample(q_ctrl, model, grid, mc.n_paths, mc.seed, /*with_levy_nodes=*/false);
    cx.cell_breaks = xi_breaks;
    cx.n_cells = xi_breaks.size();
    cx.n_atoms = model.n_atoms();

    const std::size_t n = grid.n_steps;
    const double dt = grid.dt();
    std::vector<double> theta0_nodes(n);
    double det = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double t = grid.node(i);
        theta0_nodes[i] = q_ctrl.theta0.at(t);
        det -= 0.5 * theta0_nodes[i] * theta0_nodes[i] * dt;
        for (std::size_t j = 0; j < cx.n_atoms; ++j)
            det -= q_ctrl.theta1.at(t, j) * model.atom_mass(j) * dt;
    }

    const auto& kern = simd::active_kernels();
    const std::size_t np = cx.bundle.n_paths;
    cx.log_d.assign(np, 0.0);
    cx.counts.assign(np * cx.n_cells * cx.n_atoms, 0.0);
    parallel_for(np, [&](std::size_t lo, std::size_t hi) {
        for (std::size_t p = lo; p < hi; ++p) {
            const auto dw = cx.bundle.dw.row(p);
            double ld = kern.dot(theta0_nodes.data(), dw.data(), n) + det;
            double* cnt = cx.counts.data() + p * cx.n_cells * cx.n_atoms;
            for (const auto& e : cx.bundle.events_of(p)) {
                ld += std::log1p(q_ctrl.theta1.at_left(e.time, e.atom));
                cnt[cell_of_left(cx.cell_breaks, e.time) * cx.n_atoms + e.atom] += 1.0;
            }
            cx.log_d[p] = ld;
        }
    });

    cx.mean_dw.assign(n, 0.0);
    for (std::size_t p = 0; p < np; ++p)
        kern.add(cx.mean_dw.data(), cx.mean_dw.data(), cx.bundle.dw.row(p).data(), n);
    for (double& v : cx.mean_dw) v /= static_cast<double>(np);
    cx.mean_counts.assign(cx.n_cells * cx.n_atoms, 0.0);
    for (std::size_t p = 0; p < np; ++p) {
        const double* cnt = cx.counts.data() + p * cx.n_cells * cx.n_atoms;
        for (std::size_t k = 0; k < cx.mean_counts.size(); ++k) cx.mean_counts[k] += cnt[k];
    }
    for (double& v : cx.mean_counts) v /= static_cast<double>(np);
    cx.mean_log_d = kern.sum(cx.log_d.data(), np) / static_cast<double>(np);
    cx.log_d_finite = std::isfinite(cx.mean_log_d);

    const auto pv = evaluate_penalty(penalty, q_ctrl, market, model, grid);
    cx.penalty_value = pv.value;
    cx.penalty_finite = pv.finite;
    return cx;
}

// Objective for a fixed measure context and xi1 cell values; xi0 is
// eliminated through the martingale constraint node by node.
Objective eval_dual_at(const DualContext& cx, std::span<const double> xi1, double y,
                       const UtilitySpec& util, const MarketSpec& market,
                       const LevyModel& model, const TimeGrid& grid,
                       std::vector<double>& scratch_vals, bool want_sample_stats) {
    Objective obj;
    if (!cx.penalty_finite) {
        obj.value = kInf;
        obj.diverged = true;
        return obj;
    }
    const std::size_t n = grid.n_steps;
    const double dt = grid.dt();
    const std::size_t n_atoms = cx.n_atoms;

    std::vector<double> xi0(n);
    double det = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double t = grid.node(i);
        const std::size_t c = cell_of_left(cx.cell_breaks, t);
        const double beta = market.beta.at(t);
        double u = market.alpha.at(t);
        for (std::size_t j = 0; j < n_atoms; ++j)
            u += market.gamma.at(t, j) * xi1[c * n_atoms + j] * model.atom_mass(j);
        xi0[i] = -(u / beta);
        det -= 0.5 * xi0[i] * xi0[i] * dt;
        for (std::size_t j = 0; j < n_atoms; ++j)
            det -= xi1[c * n_atoms + j] * model.atom_mass(j) * dt;
    }
    std::vector<double> log_jump(cx.n_cells * n_atoms);
    for (std::size_t k = 0; k < log_jump.size(); ++k) log_jump[k] = std::log1p(xi1[k]);

    const auto& kern = simd::active_kernels();

    if (!want_sample_stats && util.kind == UtilitySpec::Kind::log && cx.log_d_finite) {
        // V(y e^{le - ld}) = -log y - le + ld - 1 pathwise; the mean is linear
        // in the cached statistics
        double mean_le = kern.dot(xi0.data(), cx.mean_dw.data(), n) + det;
        for (std::size_t k = 0; k < log_jump.size(); ++k)
            mean_le += cx.mean_counts[k] * log_jump[k];
        obj.value = cx.penalty_value + (-std::log(y) - mean_le + cx.mean_log_d - 1.0);
        return obj;
    }
    const std::size_t np = cx.bundle.n_paths;
    scratch_vals.resize(np);
    parallel_for(np, [&](std::size_t lo, std::size_t hi) {
        for (std::size_t p = lo; p < hi; ++p) {
            const auto dw = cx.bundle.dw.row(p);
            double le = kern.dot(xi0.data(), dw.data(), n) + det;
            const double* cnt = cx.counts.data() + p * cx.n_cells * n_atoms;
            for (std::size_t k = 0; k < cx.n_cells * n_atoms; ++k)
                if (cnt[k] != 0.0) le += cnt[k] * log_jump[k];
            const double ratio = y * std::exp(le - cx.log_d[p]);
            scratch_vals[p] = util.v(ratio);
        }
    });

    const auto ext = extended_expectation(scratch_vals);
    if (ext.diverged) {
        obj.value = kInf;
        obj.diverged = true;
        return obj;
    }
    obj.value = ext.value + cx.penalty_value;
    obj.se = mc_mean(scratch_vals).std_error;
    return obj;
}

struct Box {
    double lo, hi;
};

// Derivative-free coordinate descent with per-coordinate adaptive steps.
// The objective is deterministic for a fixed seed, so accept/reject is
// well-defined; convergence is a relative objective change below tol over a
// full sweep.
template <typename Eval>
Objective coordinate_descent(std::vector<double>& x, const std::vector<Box>& boxes, Eval&& eval,
                             std::size_t max_sweeps, double tol, std::size_t& eval_count,
                             bool* converged_out = nullptr,
                             const std::function<void(std::size_t, double)>& on_sweep = {}) {
    Objective best = eval(x);
    ++eval_count;
    if (converged_out) *converged_out = true;
    if (x.empty()) return best;
    std::vector<double> step(x.size());
    for (std::size_t j = 0; j < x.size(); ++j) step[j] = 0.25 * (boxes[j].hi - boxes[j].lo);
    if (converged_out) *converged_out = false;

    for (std::size_t sweep = 0; sweep < max_sweeps; ++sweep) {
        const double before = best.value;
        bool any_move = false;
        for (std::size_t j = 0; j < x.size(); ++j) {
            bool moved = false;
            for (const double dir : {+1.0, -1.0}) {
                const double cand = std::clamp(x[j] + dir * step[j], boxes[j].lo, boxes[j].hi);
                if (cand == x[j]) continue;
                const double keep = x[j];
                x[j] = cand;
                Objective trial = eval(x);
                ++eval_count;
                if (trial.value < best.value) {
                    best = trial;
                    moved = true;
                    // greedy expansion along the improving direction
                    for (int rep = 0; rep < 6; ++rep) {
                        const double next =
                            std::clamp(x[j] + dir * step[j] * 2.0, boxes[j].lo, boxes[j].hi);
                        if (next == x[j]) break;
                        const double prev = x[j];
                        x[j] = next;
                        Objective t2 = eval(x);
                        ++eval_count;
                        if (t2.value < best.value) {
                            best = t2;
                            step[j] = std::min(step[j] * 2.0, 0.5 * (boxes[j].hi - boxes[j].lo));
                        } else {
                            x[j] = prev;
                            break;
                        }
                    }
                    break;
                }
                x[j] = keep;
            }
            if (!moved) step[j] = std::max(step[j] * 0.5, 1e-9 * (boxes[j].hi - boxes[j].lo));
            any_move |= moved;
        }
        if (on_sweep) on_sweep(sweep, best.value);
        // a sweep with no accepted move only shrinks steps; convergence is a
        // small relative change after an improving sweep, or exhausted steps
        double max_step = 0.0;
        for (std::size_t j = 0; j < x.size(); ++j)
            max_step = std::max(max_step, step[j] / (boxes[j].hi - boxes[j].lo));
        const double rel = (before - best.value) / std::max(1.0, std::fabs(best.value));
        if ((any_move && std::isfinite(before) && rel < tol) || max_step < 1e-4) {
            if (converged_out) *converged_out = true;
            break;
        }
    }
    return best;
}

void check_certificate(const UtilitySpec& util, const PenaltySpec& penalty,
                       const MarketSpec& market, const TimeGrid& grid,
                       const ControlFamily& family) {
    PenaltySpec reference;
    if (util.kind == UtilitySpec::Kind::power) {
        reference = make_power_penalty(util.q, grid.horizon_T, market.beta_floor_c, market.gamma);
    } else if (util.kind == UtilitySpec::Kind::log) {
        reference = make_log_penalty(grid.horizon_T);
    } else {
        if (std::isnan(util.certificate_q))
            throw std::invalid_argument(
                "custom utility needs certificate_q (a dominating power exponent)");
        reference = make_power_penalty(util.certificate_q, grid.horizon_T, market.beta_floor_c,
                                       market.gamma);
    }
    const double hi = std::max({family.theta0_box, family.theta1_box_hi, 4.0});
    const auto rep = check_dominates_threshold(penalty, reference, -1.0 + family.theta1_floor, hi);
    if (!rep.dominates)
        throw std::invalid_argument("penalty is below the solvability threshold (" + rep.which +
                                    ")");
}

std::vector<Box> q_boxes(const ControlFamily& family, std::size_t n_atoms) {
    std::vector<Box> boxes;
    for (std::size_t c = 0; c < family.k_t; ++c)
        boxes.push_back({-family.theta0_box, family.theta0_box});
    for (std::size_t k = 0; k < family.k_t * n_atoms; ++k)
        boxes.push_back({-1.0 + family.theta1_floor, family.theta1_box_hi});
    return boxes;
}

std::vector<Box> xi_boxes(const ControlFamily& family, std::size_t n_atoms) {
    return std::vector<Box>(family.k_t * n_atoms, {-1.0 + family.theta1_floor, family.theta1_box_hi});
}

}  // namespace

ControlPair control_from_params(std::span<const double> params, const ControlFamily& family,
                                std::size_t n_atoms, const TimeGrid& grid) {
    const auto breaks = block_breaks(grid, family.k_t);
    if (params.size() != family.k_t * (1 + n_atoms))
        throw std::invalid_argument("control parameter vector has the wrong size");
    ControlPair ctrl;
    ctrl.theta1_floor = family.theta1_floor;
    std::vector<double> theta0(params.begin(), params.begin() + family.k_t);
    ctrl.theta0 = StepFunction(breaks, std::move(theta0));
    Matrix th1(family.k_t, n_atoms);
    std::copy(params.begin() + family.k_t, params.end(), th1.data.begin());
    ctrl.theta1 = JumpCoefficient(breaks, std::move(th1));
    return ctrl;
}

ControlPair sample_control(const ControlFamily& family, std::size_t n_atoms,
                           const TimeGrid& grid, std::uint64_t seed, std::uint64_t index) {
    Rng rng(seed, index, 7);
    std::vector<double> params(family.k_t * (1 + n_atoms));
    for (std::size_t c = 0; c < family.k_t; ++c)
        params[c] = family.theta0_box * (2.0 * rng.uniform01() - 1.0);
    for (std::size_t k = 0; k < family.k_t * n_atoms; ++k)
        params[family.k_t + k] =
            -1.0 + family.theta1_floor +
            (family.theta1_box_hi + 1.0 - family.theta1_floor) * rng.uniform01();
    return control_from_params(params, family, n_atoms, grid);
}

Objective dual_objective(double y, const ControlPair& q_ctrl, const ControlPair& xi_ctrl,
                         const UtilitySpec& util, const PenaltySpec& penalty,
                         const MarketSpec& market, const LevyModel& model, const TimeGrid& grid,
                         const McConfig& mc) {
    if (!(y > 0.0)) throw std::invalid_argument("dual_objective needs y > 0");
    q_ctrl.validate();
    const auto residual = elmm_residual(market, xi_ctrl, grid, model);
    if (residual.sup_abs > 1e-10)
        throw std::invalid_argument("xi control is not in the martingale class (residual != 0)");

    std::vector<double> xi_breaks = xi_ctrl.theta1.breaks();
    if (xi_breaks.empty()) xi_breaks = {0.0};
    DualContext cx = build_dual_context(q_ctrl, xi_breaks, penalty, market, model, grid, mc);
    std::vector<double> xi1(cx.n_cells * cx.n_atoms, 0.0);
    for (std::size_t c = 0; c < cx.n_cells; ++c)
        for (std::size_t j = 0; j < cx.n_atoms; ++j)
            xi1[c * cx.n_atoms + j] = xi_ctrl.theta1.values().at(
                std::min(c, xi_ctrl.theta1.n_cells() - 1), j);
    std::vector<double> scratch;
    return eval_dual_at(cx, xi1, y, util, market, model, grid, scratch, true);
}

DualSolution solve_dual(double y, const ControlFamily& family, const UtilitySpec& util,
                        const PenaltySpec& penalty, const MarketSpec& market,
                        const LevyModel& model, const TimeGrid& grid, const McConfig& mc,
                        const SolverOptions& options) {
    if (!(y > 0.0)) throw std::invalid_argument("solve_dual needs y > 0");
    if (options.check_certificate) check_certificate(util, penalty, market, grid, family);
    const std::size_t n_atoms = model.n_atoms();
    const auto xi_breaks = block_breaks(grid, family.k_t);
    const auto qb = q_boxes(family, n_atoms);
    const auto xb = xi_boxes(family, n_atoms);

    DualSolution sol;
    sol.y = y;
    sol.value = kInf;

    const bool have_warm =
        options.warm_start && options.warm_start->q_params.size() == family.k_t * (1 + n_atoms);
    std::vector<std::vector<double>> starts;
    // a warm chain with a single-start budget continues from the warm point
    if (!(have_warm && options.multi_starts <= 1)) {
        starts.emplace_back(family.k_t * (1 + n_atoms), 0.0);
        for (std::size_t s = 1; s < std::max<std::size_t>(options.multi_starts, 1); ++s) {
            Rng rng(options.start_seed, s, 11);
            std::vector<double> params(family.k_t * (1 + n_atoms));
            for (std::size_t j = 0; j < params.size(); ++j)
                params[j] = qb[j].lo + (qb[j].hi - qb[j].lo) * rng.uniform01();
            starts.push_back(std::move(params));
        }
    }
    if (have_warm) starts.push_back(options.warm_start->q_params);

    std::size_t evals = 0;
    for (std::size_t s = 0; s < starts.size(); ++s) {
        std::vector<double> params = starts[s];
        std::vector<double> xi_warm(family.k_t * n_atoms, 0.0);
        if (options.warm_start && s + 1 == starts.size() &&
            options.warm_start->xi_params.size() == xi_warm.size())
            xi_warm = options.warm_start->xi_params;
        std::vector<double> scratch;
        std::vector<double> best_xi = xi_warm;

        bool want_sample_stats = false;
        auto outer_eval = [&](const std::vector<double>& qp) -> Objective {
            ControlPair q_ctrl = control_from_params(qp, family, n_atoms, grid);
            DualContext cx =
                build_dual_context(q_ctrl, xi_breaks, penalty, market, model, grid, mc);
            if (!cx.penalty_finite) return {kInf, 0.0, true};
            if (xi_warm.empty()) {
                std::vector<double> none;
                return eval_dual_at(cx, none, y, util, market, model, grid, scratch,
                                    want_sample_stats);
            }
            std::size_t inner_evals = 0;
            Objective inner = coordinate_descent(
                xi_warm, xb,
                [&](const std::vector<double>& xp) {
                    return eval_dual_at(cx, xp, y, util, market, model, grid, scratch, false);
                },
                options.inner_max_sweeps, options.tol, inner_evals);
            evals += inner_evals;
            if (want_sample_stats)
                inner = eval_dual_at(cx, xi_warm, y, util, market, model, grid, scratch, true);
            return inner;
        };

        bool converged = false;
        Objective run = coordinate_descent(
            params, qb, outer_eval, options.max_sweeps, options.tol, evals, &converged,
            [&](std::size_t sweep, double value) { sol.trace.push_back({s, sweep, value}); });
        // re-evaluate at the accepted parameters so the inner solution
        // matches them (the last probe may have been rejected) and carry the
        // full sample statistics for the reported value
        want_sample_stats = true;
        run = outer_eval(params);
        ++evals;
        best_xi = xi_warm;
        if (run.value < sol.value) {
            sol.value = run.value;
            sol.se = run.se;
            sol.q_params = params;
            sol.xi_params = best_xi;
            sol.converged = converged && !run.diverged;
        }
    }
    sol.iterations = evals;
    sol.infeasible = !std::isfinite(sol.value);
    if (!sol.infeasible) {
        sol.q_star = control_from_params(sol.q_params, family, n_atoms, grid);
        Matrix xi1(family.k_t, n_atoms);
        std::copy(sol.xi_params.begin(), sol.xi_params.end(), xi1.data.begin());
        sol.xi_star =
            complete_to_elmm(market, JumpCoefficient(xi_breaks, std::move(xi1)), grid, model);
        sol.xi_star.theta1_floor = family.theta1_floor;
    }
    return sol;
}

namespace {

// Rebuild the context at a solved point and return the per-path dual-variable
// terminal values y * E(Z^xi)_T / D_T.
std::vector<double> dual_variable_terminal(const DualSolution& sol, const ControlFamily& family,
                                           const MarketSpec& market, const LevyModel& model,
                                           const TimeGrid& grid, const McConfig& mc,
                                           const PenaltySpec& penalty, DualContext* cx_out) {
    const auto xi_breaks = block_breaks(grid, family.k_t);
    DualContext cx =
        build_dual_context(sol.q_star, xi_breaks, penalty, market, model, grid, mc);
    const std::size_t n = grid.n_steps;
    const double dt = grid.dt();
    const std::size_t n_atoms = model.n_atoms();
    std::vector<double> xi0(n);
    double det = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double t = grid.node(i);
        const std::size_t c = cell_of_left(xi_breaks, t);
        double u = market.alpha.at(t);
        for (std::size_t j = 0; j < n_atoms; ++j)
            u += market.gamma.at(t, j) * sol.xi_params[c * n_atoms + j] * model.atom_mass(j);
        xi0[i] = -(u / market.beta.at(t));
        det -= 0.5 * xi0[i] * xi0[i] * dt;
        for (std::size_t j = 0; j < n_atoms; ++j)
            det -= sol.xi_params[c * n_atoms + j] * model.atom_mass(j) * dt;
    }
    std::vector<double> log_jump(family.k_t * n_atoms);
    for (std::size_t k = 0; k < log_jump.size(); ++k) log_jump[k] = std::log1p(sol.xi_params[k]);
    const auto& kern = simd::active_kernels();
    std::vector<double> out(cx.bundle.n_paths);
    for (std::size_t p = 0; p < cx.bundle.n_paths; ++p) {
        const auto dw = cx.bundle.dw.row(p);
        double le = kern.dot(xi0.data(), dw.data(), n) + det;
        const double* cnt = cx.counts.data() + p * family.k_t * n_atoms;
        for (std::size_t k = 0; k < family.k_t * n_atoms; ++k)
            if (cnt[k] != 0.0) le += cnt[k] * log_jump[k];
        out[p] = sol.y * std::exp(le - cx.log_d[p]);
    }
    if (cx_out) *cx_out = std::move(cx);
    return out;
}

}  // namespace

PrimalSolution solve_primal(double x, const ControlFamily& family, const UtilitySpec& util,
                            const PenaltySpec& penalty, const MarketSpec& market,
                            const LevyModel& model, const TimeGrid& grid, const McConfig& mc,
                            const SolverOptions& options, const PrimalOptions& primal_options) {
    if (!(x > 0.0)) throw std::invalid_argument("solve_primal needs x > 0");
    PrimalSolution out;
    out.x = x;

    double y_lo = primal_options.y_lo;
    double y_hi = primal_options.y_hi;
    const std::size_t ny = std::max<std::size_t>(primal_options.y_points, 5);

    auto solve_grid = [&](double lo, double hi, std::vector<DualSolution>& sols,
                          std::vector<double>& ys) {
        sols.clear();
        ys.clear();
        SolverOptions opt = options;
        for (std::size_t k = 0; k < ny; ++k) {
            const double y =
                std::exp(std::log(lo) + (std::log(hi) - std::log(lo)) * k / (ny - 1.0));
            if (!sols.empty()) {
                opt.warm_start = &sols.back();
                opt.multi_starts = 1;
                opt.max_sweeps = std::max<std::size_t>(options.max_sweeps / 4, 4);
            }
            sols.push_back(solve_dual(y, family, util, penalty, market, model, grid, mc, opt));
            ys.push_back(y);
        }
    };

    std::vector<DualSolution> sols;
    std::vector<double> ys;
    solve_grid(y_lo, y_hi, sols, ys);
    auto score = [&](const DualSolution& s) { return s.value + x * s.y; };
    std::size_t kbest = 0;
    for (std::size_t k = 1; k < sols.size(); ++k)
        if (score(sols[k]) < score(sols[kbest])) kbest = k;
    if (kbest == 0 || kbest + 1 == sols.size()) {
        // boundary minimum: widen once, then flag if it persists
        y_lo /= 100.0;
        y_hi *= 100.0;
        solve_grid(y_lo, y_hi, sols, ys);
        kbest = 0;
        for (std::size_t k = 1; k < sols.size(); ++k)
            if (score(sols[k]) < score(sols[kbest])) kbest = k;
        out.y_boundary = (kbest == 0 || kbest + 1 == sols.size());
    }

    // golden-section refinement between the neighbors of the grid argmin
    double a = ys[kbest > 0 ? kbest - 1 : kbest];
    double b = ys[kbest + 1 < ys.size() ? kbest + 1 : kbest];
    DualSolution best = sols[kbest];
    double best_score = score(best);
    SolverOptions refine_opt = options;
    refine_opt.multi_starts = 1;
    refine_opt.max_sweeps = 3;
    auto eval_y = [&](double yy) {
        refine_opt.warm_start = &best;
        DualSolution s =
            solve_dual(yy, family, util, penalty, market, model, grid, mc, refine_opt);
        const double sc = score(s);
        if (sc < best_score) {
            best = s;
            best_score = sc;
        }
        return sc;
    };
    if (a < b) {
        const double invphi = 0.6180339887498949;
        double la = std::log(a), lb = std::log(b);
        double c = lb - invphi * (lb - la);
        double d = la + invphi * (lb - la);
        double fc = eval_y(std::exp(c));
        double fd = eval_y(std::exp(d));
        for (std::size_t it = 0; it < primal_options.refine_iters; ++it) {
            if (fc < fd) {
                lb = d;
                d = c;
                fd = fc;
                c = lb - invphi * (lb - la);
                fc = eval_y(std::exp(c));
            } else {
                la = c;
                c = d;
                fc = fd;
                d = la + invphi * (lb - la);
                fd = eval_y(std::exp(d));
            }
        }
    }

    out.dual_at_y_star = best;
    out.y_star = best.y;
    out.value = best.value + x * best.y;
    out.se = best.se;

    // saddle recovery on the Q* sample
    DualContext cx;
    const auto y_term =
        dual_variable_terminal(best, family, market, model, grid, mc, penalty, &cx);
    out.terminal_wealth.resize(y_term.size());
    std::vector<double> u_vals(y_term.size()), budget(y_term.size());
    bool admissible = true;
    for (std::size_t p = 0; p < y_term.size(); ++p) {
        const double xt = -util.v_prime(y_term[p]);
        out.terminal_wealth[p] = xt;
        if (!(xt > 0.0)) admissible = false;
        u_vals[p] = util.u(xt);
        budget[p] = y_term[p] * xt;
    }
    out.admissible = admissible;
    const auto u_mc = mc_mean(u_vals);
    out.crosscheck_value = u_mc.value + cx.penalty_value;
    out.crosscheck_se = u_mc.std_error;
    const auto b_mc = mc_mean(budget);
    out.budget_mean = b_mc.value;
    out.budget_se = b_mc.std_error;
    return out;
}

AuditReport weak_duality_audit(double x, std::span<const double> y_grid,
                               std::span<const double> probe_pis, const ControlFamily& family,
                               const UtilitySpec& util, const PenaltySpec& penalty,
                               const MarketSpec& market, const LevyModel& model,
                               const TimeGrid& grid, const McConfig& mc,
                               const SolverOptions& options) {
    AuditReport report;
    const std::size_t n_atoms = model.n_atoms();

    // rhs: dual values along the y grid (warm-chained)
    std::vector<DualSolution> sols;
    SolverOptions opt = options;
    for (double y : y_grid) {
        if (!sols.empty()) {
            opt.warm_start = &sols.back();
            opt.multi_starts = 1;
            opt.max_sweeps = std::max<std::size_t>(options.max_sweeps / 4, 4);
        }
        sols.push_back(solve_dual(y, family, util, penalty, market, model, grid, mc, opt));
    }

    // lhs candidates: P, the dual minimizers, and a few random controls
    std::vector<ControlPair> candidates;
    candidates.push_back(ControlPair::zero(n_atoms));
    candidates.back().theta1 =
        JumpCoefficient(block_breaks(grid, family.k_t), Matrix(family.k_t, n_atoms));
    auto push_unique = [&](const ControlPair& c) {
        for (const auto& have : candidates) {
            const auto& a = have.theta1.values().data;
            const auto& b = c.theta1.values().data;
            const auto& a0 = have.theta0.values();
            const auto& b0 = c.theta0.values();
            if (a.size() == b.size() && a0.size() == b0.size()) {
                double diff = 0.0;
                for (std::size_t i = 0; i < a.size(); ++i) diff = std::max(diff, std::fabs(a[i] - b[i]));
                for (std::size_t i = 0; i < a0.size(); ++i)
                    diff = std::max(diff, std::fabs(a0[i] - b0[i]));
                if (diff < 1e-9) return;
            }
        }
        candidates.push_back(c);
    };
    for (const auto& s : sols)
        if (!s.infeasible) push_unique(s.q_star);
    for (std::uint64_t k = 0; k < 3; ++k)
        push_unique(sample_control(family, n_atoms, grid, options.start_seed + 17, k));

    // per candidate: tilted sample, price paths, penalty; then wealth per probe
    struct CandidateState {
        PathBundle bundle;
        PricePaths price;
        double penalty_value;
        bool penalty_finite;
    };
    std::vector<CandidateState> states;
    for (const auto& q : candidates) {
        CandidateState st;
        st.bundle = tilt_sample(q, model, grid, mc.n_paths, mc.seed);
        const Matrix y_paths = build_y_paths(market, model, st.bundle);
        st.price = price_paths(market, st.bundle, y_paths);
        const auto pv = evaluate_penalty(penalty, q, market, model, grid);
        st.penalty_value = pv.value;
        st.penalty_finite = pv.finite;
        states.push_back(std::move(st));
    }

    for (double pi : probe_pis) {
        double lhs = kInf;
        double lhs_se = 0.0;
        for (const auto& st : states) {
            if (!st.penalty_finite) continue;
            const auto wealth = wealth_paths(st.price, x, StepFunction::constant(pi));
            std::vector<double> u_vals(st.bundle.n_paths);
            for (std::size_t p = 0; p < st.bundle.n_paths; ++p)
                u_vals[p] = util.u(wealth.x.at(p, grid.n_steps));
            const auto m = mc_mean(u_vals);
            const double value = m.value + st.penalty_value;
            if (value < lhs) {
                lhs = value;
                lhs_se = m.std_error;
            }
        }
        for (std::size_t k = 0; k < sols.size(); ++k) {
            AuditRow row;
            row.pi = pi;
            row.y = sols[k].y;
            row.lhs = lhs;
            row.lhs_se = lhs_se;
            row.rhs = sols[k].value + x * sols[k].y;
            row.rhs_se = sols[k].se;
            const double combined = std::sqrt(lhs_se * lhs_se + row.rhs_se * row.rhs_se);
            row.violated = std::isfinite(lhs) && lhs > row.rhs + 3.0 * combined;
            if (row.violated) ++report.violations;
            report.rows.push_back(row);
        }
    }
    return report;
}

}  // namespace levmax
