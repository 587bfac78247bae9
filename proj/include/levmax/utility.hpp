#pragma once

#include <array>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

namespace levmax {

/// Utility on (0, inf) together with its convex conjugate
/// v(y) = sup_x { u(x) - x y }. Closed forms for power and log; custom
/// utilities get a cached numeric conjugate.
struct UtilitySpec {
    enum class Kind { power, log, custom };
    Kind kind = Kind::log;
    double q = 0.0;  // power exponent when kind == power
    /// For custom utilities: the power exponent q whose threshold penalty
    /// certifies solvability (the user asserts u <= x^q/q). NaN when unset.
    double certificate_q = std::numeric_limits<double>::quiet_NaN();
    double domain_floor = 1e-12;

    std::function<double(double)> u;
    std::function<double(double)> u_prime;
    std::function<double(double)> v;
    std::function<double(double)> v_prime;

    struct ValidationReport {
        bool increasing = true;
        bool concave = true;
        bool inada = true;
        bool conjugate_consistent = true;
        std::string detail;
        bool ok() const { return increasing && concave && inada && conjugate_consistent; }
    };
    /// Finite-difference spot checks on a sampled grid.
    ValidationReport validate(double x_lo = 1e-6, double x_hi = 1e6) const;
};

UtilitySpec make_power_utility(double q);
UtilitySpec make_log_utility();

/// Custom utility from u and u'; the conjugate is built by golden-section
/// maximization cached on a 1024-point log-spaced grid with monotone cubic
/// interpolation.
UtilitySpec make_custom_utility(std::function<double(double)> u,
                                std::function<double(double)> u_prime, double x_lo = 1e-8,
                                double x_hi = 1e8);

/// Custom utility from a (x, u) table, interpolated monotone-cubic in log x.
UtilitySpec make_table_utility(std::vector<double> xs, std::vector<double> us);

struct AeReport {
    bool applicable = false;
    double tail_sup = 0.0;     // sup of x u'(x)/u(x) over the last three decades
    double ratio_at_max = 0.0;
    std::array<double, 3> decade_sup = {0.0, 0.0, 0.0};
};

/// Asymptotic elasticity probe on a geometric grid up to x_max; diagnostic
/// only, not applicable when u <= 0 on the whole tail.
AeReport asymptotic_elasticity(const UtilitySpec& util, double x_max = 1e8);

struct ExtendedExpectation {
    double value = 0.0;
    bool diverged = false;
    int levels_used = 0;
};

/// sup_n E[X /\ n] over the doubling ladder n = 2^k, k <= 60, declared
/// converged when the relative increment drops below 1e-10. Weights default
/// to uniform; they are normalized internally.
ExtendedExpectation extended_expectation(std::span<const double> payoff,
                                         std::span<const double> weights = {});

}  // namespace levmax
