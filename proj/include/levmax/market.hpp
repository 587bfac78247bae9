#pragma once

#include <optional>
#include <string>
#include <vector>

#include "levmax/common.hpp"
#include "levmax/levy.hpp"

namespace levmax {

/// Deterministic step function of time, constant on [b_k, b_{k+1}).
class StepFunction {
  public:
    StepFunction() : breaks_{0.0}, values_{0.0} {}
    StepFunction(std::vector<double> breaks, std::vector<double> values);

    static StepFunction constant(double v) { return StepFunction({0.0}, {v}); }

    /// Value on the piece containing t (left limit at breakpoints).
    double at_left(double t) const;
    /// Value on the piece [b_k, b_{k+1}) containing t.
    double at(double t) const;

    const std::vector<double>& breaks() const { return breaks_; }
    const std::vector<double>& values() const { return values_; }

  private:
    std::vector<double> breaks_;
    std::vector<double> values_;
};

/// Step function of time crossed with the jump atoms: value(t, atom j).
class JumpCoefficient {
  public:
    JumpCoefficient() = default;
    JumpCoefficient(std::vector<double> breaks, Matrix values);

    static JumpCoefficient constant(double g, std::size_t n_atoms);
    static JumpCoefficient zero(std::size_t n_atoms) { return constant(0.0, n_atoms); }

    double at(double t, std::size_t atom) const;
    double at_left(double t, std::size_t atom) const;

    std::size_t n_atoms() const { return values_.cols; }
    std::size_t n_cells() const { return values_.rows; }
    const std::vector<double>& breaks() const { return breaks_; }
    const Matrix& values() const { return values_; }

  private:
    std::vector<double> breaks_{0.0};
    Matrix values_{1, 0};

    std::size_t cell_of(double t, bool left_limit) const;
};

struct MarketSpec {
    StepFunction alpha = StepFunction::constant(0.0);
    StepFunction beta = StepFunction::constant(1.0);
    JumpCoefficient gamma;
    double beta_floor_c = 1e-8;
    double s0 = 1.0;
    double horizon_T = 1.0;
    double a3_bound = 1e6;  // declared bound for the (alpha/beta)^2 time integral
};

struct AssumptionWitness {
    double t = 0.0;
    double x = 0.0;
    double value = 0.0;
};

struct AssumptionReport {
    bool a1 = false, a2 = false, a3 = false, a4 = false, a5 = false;
    std::optional<AssumptionWitness> a1_witness, a2_witness, a3_witness, a4_witness, a5_witness;
    double a3_value = 0.0;
    double a5_bound = 0.0;

    bool all() const { return a1 && a2 && a3 && a4 && a5; }
    std::string summary() const;
};

AssumptionReport validate_assumptions(const MarketSpec& spec, const LevyModel& model,
                                      const TimeGrid& grid);

/// Y = time integral of alpha + Brownian integral of beta + compensated jump
/// integral of gamma, left-point rule, values at grid nodes.
Matrix build_y_paths(const MarketSpec& spec, const LevyModel& model, const PathBundle& paths);

struct PricePaths {
    TimeGrid grid;
    Matrix s;                            // n_paths x (n_steps+1)
    std::vector<double> absorption_tau;  // +inf when never absorbed
};

/// Price by the closed-form exponential of Y's stochastic exponential; a jump
/// with gamma = -1 absorbs the path at zero.
PricePaths price_paths(const MarketSpec& spec, const PathBundle& paths, const Matrix& y);

struct WealthPaths {
    double x0 = 1.0;
    Matrix x;  // n_paths x (n_steps+1)
    bool admissible = false;
};

/// Self-financing wealth via the multiplicative grid recursion
/// X_{k+1} = X_k (1 + pi(t_k) dS/S_k), investment killed after absorption.
WealthPaths wealth_paths(const PricePaths& price, double x0, const StepFunction& pi);

void write_price_csv(std::ostream& os, const PricePaths& price, const WealthPaths* wealth);

}  // namespace levmax
