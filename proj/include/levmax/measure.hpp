#pragma once

#include <vector>

#include "levmax/common.hpp"
#include "levmax/levy.hpp"
#include "levmax/market.hpp"

namespace levmax {

/// Two-coefficient parameterization (theta0, theta1) of an absolutely
/// continuous measure change: Brownian drift control plus jump-intensity
/// tilt, both deterministic step functions.
struct ControlPair {
    StepFunction theta0 = StepFunction::constant(0.0);
    JumpCoefficient theta1;
    double theta1_floor = 1e-6;

    static ControlPair zero(std::size_t n_atoms);

    /// theta1 >= -1 everywhere (density nonnegativity); throws otherwise.
    void validate() const;
    /// theta1 >= -1 + floor everywhere, i.e. Q equivalent to P.
    bool equivalence_class() const;
};

struct DensityPaths {
    Matrix d;      // n_paths x (n_steps+1)
    Matrix log_d;  // -inf once the path density hits zero
    std::vector<double> terminal_d;
    std::vector<std::uint8_t> hit_zero;  // absolutely continuous but not equivalent
};

/// Density process along each path, accumulated in the form
/// log D = sum theta0 dW - 1/2 sum theta0^2 dt + sum log(1+theta1) - int theta1 dnu dt.
DensityPaths density_paths(const ControlPair& ctrl, const LevyModel& model,
                           const PathBundle& paths);

/// Terminal density by the product-of-exponentials representation (the
/// stochastic-exponential form); used to cross-check density_paths.
std::vector<double> density_terminal_explicit(const ControlPair& ctrl, const LevyModel& model,
                                              const PathBundle& paths);

struct ElmmResidual {
    std::vector<double> eps;  // per grid node
    double sup_abs = 0.0;
};

/// Local-martingale defect alpha + beta*theta0 + int gamma*theta1 dnu at each
/// node, evaluated as beta*(theta0 + (alpha + jump_drift)/beta) so controls
/// built by complete_to_elmm report an exact zero.
ElmmResidual elmm_residual(const MarketSpec& spec, const ControlPair& ctrl,
                           const TimeGrid& grid, const LevyModel& model);

/// Eliminate the Brownian control through the martingale constraint:
/// xi0 = -(alpha + int gamma*theta1 dnu)/beta, xi1 = theta1.
ControlPair complete_to_elmm(const MarketSpec& spec, const JumpCoefficient& theta1,
                             const TimeGrid& grid, const LevyModel& model);

/// Monte Carlo estimate of E[D_T log D_T] on paths sampled under P.
McEstimate relative_entropy(const ControlPair& ctrl, const LevyModel& model,
                            const PathBundle& paths_under_p);

/// Closed form of the relative entropy for deterministic controls.
double relative_entropy_exact(const ControlPair& ctrl, const LevyModel& model,
                              const TimeGrid& grid);

/// Sample directly under Q: Brownian drift shifted by theta0, atom masses
/// scaled by (1 + theta1). Plain averages over the result estimate E_Q.
PathBundle tilt_sample(const ControlPair& ctrl, const LevyModel& model, const TimeGrid& grid,
                       std::size_t n_paths, std::uint64_t seed, bool with_levy_nodes = true);

}  // namespace levmax
