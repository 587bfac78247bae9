#include "levmax/market.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace levmax {

namespace {

std::size_t piece_of(const std::vector<double>& breaks, double t, bool left_limit) {
    // First piece whose start is <= t; left limits step back at exact breaks.
    auto it = std::upper_bound(breaks.begin(), breaks.end(), t);
    std::size_t k = (it == breaks.begin()) ? 0 : static_cast<std::size_t>(it - breaks.begin() - 1);
    if (left_limit && k > 0 && breaks[k] == t) --k;
    return k;
}

}  // namespace

StepFunction::StepFunction(std::vector<double> breaks, std::vector<double> values)
    : breaks_(std::move(breaks)), values_(std::move(values)) {
    if (breaks_.empty() || breaks_.size() != values_.size())
        throw std::invalid_argument("step function needs matching breaks and values");
    if (!std::is_sorted(breaks_.begin(), breaks_.end()))
        throw std::invalid_argument("step function breaks must be ascending");
}

double StepFunction::at(double t) const { return values_[piece_of(breaks_, t, false)]; }

double StepFunction::at_left(double t) const { return values_[piece_of(breaks_, t, true)]; }

JumpCoefficient::JumpCoefficient(std::vector<double> breaks, Matrix values)
    : breaks_(std::move(breaks)), values_(std::move(values)) {
    if (breaks_.empty() || breaks_.size() != values_.rows)
        throw std::invalid_argument("jump coefficient needs one row per time cell");
    if (!std::is_sorted(breaks_.begin(), breaks_.end()))
        throw std::invalid_argument("jump coefficient breaks must be ascending");
}

JumpCoefficient JumpCoefficient::constant(double g, std::size_t n_atoms) {
    Matrix m(1, n_atoms);
    std::fill(m.data.begin(), m.data.end(), g);
    return JumpCoefficient({0.0}, std::move(m));
}

std::size_t JumpCoefficient::cell_of(double t, bool left_limit) const {
    return piece_of(breaks_, t, left_limit);
}

double JumpCoefficient::at(double t, std::size_t atom) const {
    return values_.at(cell_of(t, false), atom);
}

double JumpCoefficient::at_left(double t, std::size_t atom) const {
    return values_.at(cell_of(t, true), atom);
}

std::string AssumptionReport::summary() const {
    std::ostringstream os;
    auto line = [&os](const char* name, bool ok, const std::optional<AssumptionWitness>& w) {
        os << name << ": " << (ok ? "pass" : "FAIL");
        if (!ok && w) os << " at t=" << w->t << " x=" << w->x << " value=" << w->value;
        os << "\n";
    };
    line("A1", a1, a1_witness);
    line("A2", a2, a2_witness);
    line("A3", a3, a3_witness);
    line("A4", a4, a4_witness);
    line("A5", a5, a5_witness);
    return os.str();
}

AssumptionReport validate_assumptions(const MarketSpec& spec, const LevyModel& model,
                                      const TimeGrid& grid) {
    AssumptionReport rep;
    const double dt = grid.dt();
    rep.a1 = rep.a2 = rep.a4 = rep.a5 = true;
    double a3_sum = 0.0;
    for (std::size_t i = 0; i < grid.n_steps; ++i) {
        const double t = grid.node(i);
        const double a = spec.alpha.at(t);
        const double b = spec.beta.at(t);
        if (!std::isfinite(a) && rep.a1) {
            rep.a1 = false;
            rep.a1_witness = {t, 0.0, a};
        }
        if (!(std::fabs(b) >= spec.beta_floor_c) && rep.a2) {
            rep.a2 = false;
            rep.a2_witness = {t, 0.0, b};
        }
        if (b != 0.0) a3_sum += (a / b) * (a / b) * dt;
        for (std::size_t j = 0; j < model.n_atoms(); ++j) {
            const double g = spec.gamma.at(t, j);
            if (!(g >= -1.0) && rep.a4) {
                rep.a4 = false;
                rep.a4_witness = {t, model.jump_sizes[j], g};
            }
            if (!std::isfinite(g) && rep.a5) {
                rep.a5 = false;
                rep.a5_witness = {t, model.jump_sizes[j], g};
            }
            rep.a5_bound = std::max(rep.a5_bound, std::fabs(g));
        }
    }
    rep.a3_value = a3_sum;
    rep.a3 = std::isfinite(a3_sum) && a3_sum <= spec.a3_bound;
    if (!rep.a3) rep.a3_witness = {grid.horizon_T, 0.0, a3_sum};
    return rep;
}

Matrix build_y_paths(const MarketSpec& spec, const LevyModel& model, const PathBundle& paths) {
    const TimeGrid& grid = paths.grid;
    const std::size_t n = grid.n_steps;
    const double dt = grid.dt();
    const std::size_t n_atoms = model.n_atoms();

    // Deterministic per-step pieces: alpha dt, beta, and the gamma compensator.
    std::vector<double> alpha_dt(n), beta_v(n), comp_dt(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double t = grid.node(i);
        alpha_dt[i] = spec.alpha.at(t) * dt;
        beta_v[i] = spec.beta.at(t);
        double comp = 0.0;
        for (std::size_t j = 0; j < n_atoms; ++j)
            comp += spec.gamma.at(t, j) * model.atom_mass(j);
        comp_dt[i] = comp * dt;
    }

    Matrix y(paths.n_paths, n + 1);
    parallel_for(paths.n_paths, [&](std::size_t lo, std::size_t hi) {
        for (std::size_t p = lo; p < hi; ++p) {
            const auto dw = paths.dw.row(p);
            const auto events = paths.events_of(p);
            auto out = y.row(p);
            double acc = 0.0;
            std::size_t e = 0;
            out[0] = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                acc += alpha_dt[i] + beta_v[i] * dw[i] - comp_dt[i];
                while (e < events.size() && events[e].interval <= i) {
                    acc += spec.gamma.at_left(events[e].time, events[e].atom);
                    ++e;
                }
                out[i + 1] = acc;
            }
        }
    });
    return y;
}

PricePaths price_paths(const MarketSpec& spec, const PathBundle& paths, const Matrix& y) {
    const TimeGrid& grid = paths.grid;
    const std::size_t n = grid.n_steps;
    const double dt = grid.dt();
    const double inf = std::numeric_limits<double>::infinity();

    std::vector<double> half_beta_sq(n + 1, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const double b = spec.beta.at(grid.node(i));
        half_beta_sq[i + 1] = half_beta_sq[i] + 0.5 * b * b * dt;
    }

    PricePaths price;
    price.grid = grid;
    price.s = Matrix(paths.n_paths, n + 1);
    price.absorption_tau.assign(paths.n_paths, inf);
    parallel_for(paths.n_paths, [&](std::size_t lo, std::size_t hi) {
        for (std::size_t p = lo; p < hi; ++p) {
            const auto yv = y.row(p);
            const auto events = paths.events_of(p);
            auto s = price.s.row(p);
            double jump_log = 0.0;  // sum of ln(1+gamma) - gamma over realized jumps
            double tau = inf;
            std::size_t e = 0;
            s[0] = spec.s0;
            for (std::size_t k = 1; k <= n; ++k) {
                while (e < events.size() && events[e].interval < k) {
                    const double g = spec.gamma.at_left(events[e].time, events[e].atom);
                    if (!(g > -1.0)) {
                        if (g < -1.0)
                            throw std::invalid_argument(
                                "gamma < -1 at a realized jump violates (A4)");
                        if (tau == inf) tau = events[e].time;
                    } else {
                        jump_log += std::log1p(g) - g;
                    }
                    ++e;
                }
                s[k] = (tau < inf) ? 0.0 : spec.s0 * std::exp(yv[k] - half_beta_sq[k] + jump_log);
            }
            price.absorption_tau[p] = tau;
        }
    });
    return price;
}

WealthPaths wealth_paths(const PricePaths& price, double x0, const StepFunction& pi) {
    if (!(x0 > 0.0)) throw std::invalid_argument("initial wealth must be > 0");
    const TimeGrid& grid = price.grid;
    const std::size_t n = grid.n_steps;
    WealthPaths wealth;
    wealth.x0 = x0;
    wealth.x = Matrix(price.s.rows, n + 1);
    std::vector<char> ok(price.s.rows, 1);
    parallel_for(price.s.rows, [&](std::size_t lo, std::size_t hi) {
        for (std::size_t p = lo; p < hi; ++p) {
            const auto s = price.s.row(p);
            auto x = wealth.x.row(p);
            double factor = 1.0;
            x[0] = x0;
            for (std::size_t k = 0; k < n; ++k) {
                if (s[k] != 0.0) factor *= 1.0 + pi.at(grid.node(k)) * ((s[k + 1] - s[k]) / s[k]);
                x[k + 1] = x0 * factor;
                if (!(x[k + 1] > 0.0)) ok[p] = 0;
            }
        }
    });
    wealth.admissible = std::all_of(ok.begin(), ok.end(), [](char c) { return c != 0; });
    return wealth;
}

void write_price_csv(std::ostream& os, const PricePaths& price, const WealthPaths* wealth) {
    os << (wealth ? "path_id,t,S,X\n" : "path_id,t,S\n");
    char buf[128];
    for (std::size_t p = 0; p < price.s.rows; ++p) {
        for (std::size_t k = 0; k <= price.grid.n_steps; ++k) {
            if (wealth)
                std::snprintf(buf, sizeof(buf), "%zu,%.17g,%.17g,%.17g\n", p,
                              price.grid.node(k), price.s.at(p, k), wealth->x.at(p, k));
            else
                std::snprintf(buf, sizeof(buf), "%zu,%.17g,%.17g\n", p, price.grid.node(k),
                              price.s.at(p, k));
            os << buf;
        }
    }
}

}  // namespace levmax
