#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "levmax/levy.hpp"
#include "levmax/market.hpp"
#include "levmax/measure.hpp"
#include "levmax/penalty.hpp"
#include "levmax/utility.hpp"

namespace levmax {

/// Piecewise-constant control family on k_t equal time blocks x nu atoms.
/// theta0 lives in [-theta0_box, theta0_box], theta1 and xi1 in
/// [-1 + theta1_floor, theta1_box_hi]; xi0 is eliminated by the martingale
/// constraint, so it carries no box.
struct ControlFamily {
    std::size_t k_t = 4;
    double theta0_box = 3.0;
    double theta1_box_hi = 3.0;
    double theta1_floor = 1e-6;
};

struct McConfig {
    std::size_t n_paths = 100000;
    std::uint64_t seed = 1;
};

struct SolverOptions {
    std::size_t multi_starts = 8;
    std::size_t max_sweeps = 30;
    std::size_t inner_max_sweeps = 12;
    double tol = 1e-6;
    bool check_certificate = true;
    std::uint64_t start_seed = 0x5eed;
    /// Optional warm start appended to the multi-start list.
    const struct DualSolution* warm_start = nullptr;
};

struct Objective {
    double value = 0.0;
    double se = 0.0;
    bool diverged = false;
};

/// E_Q[V(y * E(Z^xi)_T / D_T^Q)] + theta(Q) under tilt sampling with common
/// random numbers; the positive tail of V goes through the truncation ladder.
Objective dual_objective(double y, const ControlPair& q_ctrl, const ControlPair& xi_ctrl,
                         const UtilitySpec& util, const PenaltySpec& penalty,
                         const MarketSpec& market, const LevyModel& model, const TimeGrid& grid,
                         const McConfig& mc);

struct IterRecord {
    std::size_t start = 0;
    std::size_t sweep = 0;
    double value = 0.0;
};

struct DualSolution {
    double y = 1.0;
    double value = 0.0;
    double se = 0.0;
    bool converged = false;
    bool infeasible = false;
    std::size_t iterations = 0;  // objective evaluations
    ControlPair q_star;
    ControlPair xi_star;
    std::vector<double> q_params;   // internal parameter vector of q_star
    std::vector<double> xi_params;  // internal parameter vector of xi_star
    std::vector<IterRecord> trace;
};

/// Nested minimization of the dual objective: coordinate descent over the
/// measure controls, inner descent over xi1 with xi0 eliminated.
DualSolution solve_dual(double y, const ControlFamily& family, const UtilitySpec& util,
                        const PenaltySpec& penalty, const MarketSpec& market,
                        const LevyModel& model, const TimeGrid& grid, const McConfig& mc,
                        const SolverOptions& options = {});

struct PrimalSolution {
    double x = 1.0;
    double value = 0.0;
    double se = 0.0;
    double y_star = 1.0;
    bool y_boundary = false;
    bool admissible = true;
    DualSolution dual_at_y_star;
    std::vector<double> terminal_wealth;
    double crosscheck_value = 0.0;  // E_Q*[U(X*_T)] + theta(Q*)
    double crosscheck_se = 0.0;
    double budget_mean = 0.0;  // E_Q*[Y*_T X*_T]
    double budget_se = 0.0;
};

struct PrimalOptions {
    double y_lo = 1e-3;
    double y_hi = 1e3;
    std::size_t y_points = 33;
    std::size_t refine_iters = 24;
};

/// u(x) by conjugation over a log-spaced y grid with golden-section
/// refinement; recovers the terminal wealth X*_T = -V'(Y*_T).
PrimalSolution solve_primal(double x, const ControlFamily& family, const UtilitySpec& util,
                            const PenaltySpec& penalty, const MarketSpec& market,
                            const LevyModel& model, const TimeGrid& grid, const McConfig& mc,
                            const SolverOptions& options = {},
                            const PrimalOptions& primal_options = {});

struct AuditRow {
    double pi = 0.0;
    double y = 0.0;
    double lhs = 0.0;
    double lhs_se = 0.0;
    double rhs = 0.0;
    double rhs_se = 0.0;
    bool violated = false;
};

struct AuditReport {
    std::size_t violations = 0;
    std::vector<AuditRow> rows;
};

/// Checks inf_Q { E_Q[U(X_T^{x,pi})] + theta(Q) } <= v(y) + x y for every
/// probe strategy and y-grid point; any violation is a correctness bug.
AuditReport weak_duality_audit(double x, std::span<const double> y_grid,
                               std::span<const double> probe_pis, const ControlFamily& family,
                               const UtilitySpec& util, const PenaltySpec& penalty,
                               const MarketSpec& market, const LevyModel& model,
                               const TimeGrid& grid, const McConfig& mc,
                               const SolverOptions& options = {});

/// Uniform random control in the family box (used by tests and the audit).
ControlPair sample_control(const ControlFamily& family, std::size_t n_atoms,
                           const TimeGrid& grid, std::uint64_t seed, std::uint64_t index);

/// Family parameter helpers shared with the CLI and tests.
ControlPair control_from_params(std::span<const double> params, const ControlFamily& family,
                                std::size_t n_atoms, const TimeGrid& grid);

}  // namespace levmax
