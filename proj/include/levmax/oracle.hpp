#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "levmax/utility.hpp"

namespace levmax {

/// One-period scenario market with m outcomes (m <= 6) and a penalty table on
/// the probability simplex. Everything in this module is an exhaustive loop
/// over grids; it is the trust anchor for the duality theory.
struct FiniteMarket {
    std::vector<double> p_ref;
    double s0 = 1.0;
    std::vector<double> s_T;
    std::function<double(std::span<const double>)> penalty;

    std::size_t n() const { return p_ref.size(); }
    void validate() const;
};

/// All probability vectors with coordinates k/r.
struct SimplexGrid {
    int resolution = 40;
    std::size_t dim = 2;

    std::size_t size() const;
    void for_each(const std::function<void(std::span<const double>)>& fn) const;
};

// Standard penalty tables for fixtures.
std::function<double(std::span<const double>)> quadratic_penalty_table(
    std::vector<double> p_ref, double a);
std::function<double(std::span<const double>)> entropic_penalty_table(std::vector<double> p_ref);
std::function<double(std::span<const double>)> affine_penalty_table(std::vector<double> p_ref,
                                                                    std::vector<double> c);

/// Strategy grid covering the admissible region (X_T > 0 at every outcome);
/// always contains pi = 0.
std::vector<double> make_strategy_grid(const FiniteMarket& market, std::size_t n_points);

/// Unique martingale probability of the up state for a 2-outcome market.
double two_state_elmm_up(const FiniteMarket& market);

struct ExactPrimal {
    double value = 0.0;
    double best_pi = 0.0;
    std::vector<double> worst_q;
};

/// max over strategies of min over the simplex grid of penalized expected
/// utility of terminal wealth.
ExactPrimal exact_primal(const FiniteMarket& market, const UtilitySpec& util, double x,
                         std::span<const double> strategy_grid, const SimplexGrid& grid);

struct MinimaxReport {
    double u_supinf = 0.0;
    double u_infsup = 0.0;
    double minimax_gap = 0.0;
    double u_conjugate = 0.0;
    double conjugacy_gap = 0.0;
    double y_star = 0.0;
    double saddle_max_diff = 0.0;  // max_i |X*_dual(i) - X*_primal(i)|
    std::vector<double> v_values;
};

/// Both iteration orders of the sup-inf, the dual value on a y grid, the
/// conjugacy gap, and the saddle recovery X* = -V'(y* dQ~/dQ).
MinimaxReport exact_dual_and_minimax(const FiniteMarket& market, const UtilitySpec& util,
                                     double x, std::span<const double> y_grid,
                                     const SimplexGrid& grid,
                                     std::span<const double> strategy_grid);

struct RiskReport {
    std::vector<double> rho;            // per payoff
    double biduality_gap = 0.0;         // sup over grid of penalty - psi*
    double max_psi_excess = 0.0;        // sup over grid of psi* - penalty (<= 0 expected)
    std::vector<double> psi_star;       // minimal penalty on the simplex grid
    std::vector<std::vector<double>> grid_points;
};

/// rho(X) = max_q E_q[-X] - penalty(q) over the grid, then the biduality
/// reconstruction psi*(q) = max_X E_q[-X] - rho(X) over the payoff grid.
RiskReport exact_risk_measure(const FiniteMarket& market,
                              std::span<const std::vector<double>> payoff_grid,
                              const SimplexGrid& grid);

/// Payoff family for biduality runs: penalty-gradient payoffs on a coarse
/// sub-lattice, an affine basis, and seeded random payoffs; nested along
/// refining resolutions.
std::vector<std::vector<double>> make_payoff_grid(const FiniteMarket& market, int resolution,
                                                  std::uint64_t seed);

/// Biduality gap along a ladder of refining resolutions.
std::vector<double> biduality_gap(const FiniteMarket& market, std::span<const int> resolutions,
                                  std::uint64_t seed = 2024);

}  // namespace levmax
