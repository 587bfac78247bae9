#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "levmax/levy.hpp"
#include "levmax/market.hpp"
#include "levmax/measure.hpp"

namespace levmax {

/// Penalty functional built from the (h, h0, h1, delta) quadruple:
/// theta(Q) = E_Q[ int_0^T h( h0(theta0) + int delta * h1(theta1) dnu ) dt ].
struct PenaltySpec {
    std::function<double(double)> h;
    std::function<double(double)> h0;
    std::function<double(double)> h1;
    /// delta(t, atom index, atom size); defaults to 1.
    std::function<double(double, std::size_t, double)> delta;
    std::string label = "custom";

    struct ValidationReport {
        bool zero_at_zero = true;
        bool convex = true;
        bool h_monotone = true;
        std::string detail;
        bool ok() const { return zero_at_zero && convex && h_monotone; }
    };
    /// Spot-checks h(0)=h0(0)=h1(0)=0, midpoint convexity on a 64-point grid
    /// and monotonicity of h over [0, range_hi].
    ValidationReport validate(double range_lo = -0.9, double range_hi = 4.0) const;
};

struct PowerPenaltyParams {
    double q = 0.0;
    double p = 0.0;
    double kappa1 = 1.0;
    double c = 0.0;

    static PowerPenaltyParams from(double q, double T, double c);
};

/// Threshold penalty for power utility: h = exp(kappa1 x^2)-1, h0 = |x|,
/// h1 = |x|/c, delta = |gamma|.
PenaltySpec make_power_penalty(double q, double T, double c, const JumpCoefficient& gamma);

/// Threshold penalty for log utility: h = x, h0 = x^2/2,
/// h1 = max(|x|, x ln(1+x)) on (-1,0) and x(1+x) on [0,inf), delta = 1.
PenaltySpec make_log_penalty(double T);

/// Same penalty with h multiplied by lam >= 0.
PenaltySpec scale_penalty(const PenaltySpec& spec, double lam);

struct PenaltyValue {
    double value = 0.0;
    bool finite = true;
    std::string diagnostic;
};

/// Exact evaluation for deterministic controls (the time integrand is
/// deterministic, so no Monte Carlo error); paths_under_q is reserved for
/// random-control extensions.
PenaltyValue evaluate_penalty(const PenaltySpec& spec, const ControlPair& ctrl,
                              const MarketSpec& market, const LevyModel& model,
                              const TimeGrid& grid, const PathBundle* paths_under_q = nullptr);

struct DominanceReport {
    bool dominates = false;
    bool h_ok = false, h0_ok = false, h1_ok = false;
    std::optional<double> witness_x;
    std::string which;
};

/// Pointwise h >= ref.h, h0 >= ref.h0, h1 >= ref.h1 on a 256-point grid over
/// [range_lo, range_hi] (h compared on the nonnegative part of the range).
DominanceReport check_dominates_threshold(const PenaltySpec& spec, const PenaltySpec& reference,
                                          double range_lo, double range_hi);

struct IntegrabilityReport {
    bool i_finite = false, ii_finite = false, iii_finite = false, iv_holds = false,
         v_finite = false;
    double i_value = 0.0;          // int theta1 dnu dt (deterministic)
    double ii_value = 0.0;         // int (1+theta1) ln(1+theta1) dnu dt (deterministic)
    McEstimate iii_abs;            // E_Q |sum of log(1+theta1) over jumps|
    McEstimate iv_lhs;             // E_Q sum of log(1+theta1) over jumps
    double iv_rhs = 0.0;           // int ln(1+theta1)(1+theta1) dnu dt
    double v_max_abs = 0.0;        // max over paths of |sum theta1 over jumps|
    double max_abs_log1p_theta1 = 0.0;
    bool flagged_large = false;
};

/// Monte Carlo verification of the finite-penalty integrability properties at
/// grid scale, on paths sampled under Q.
IntegrabilityReport integrability_report(const ControlPair& ctrl, const LevyModel& model,
                                         const TimeGrid& grid, const PathBundle& paths_under_q);

}  // namespace levmax
