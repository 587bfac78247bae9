#include "levmax/measure.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace levmax {

namespace {

// int gamma(t,x) theta1(t,x) nu(dx) at a fixed time, in atom order. Shared by
// complete_to_elmm and elmm_residual so the cancellation is bit-exact.
double jump_drift_at(const MarketSpec& spec, const ControlPair& ctrl, const LevyModel& model,
                     double t) {
    double acc = 0.0;
    for (std::size_t j = 0; j < model.n_atoms(); ++j)
        acc += spec.gamma.at(t, j) * ctrl.theta1.at(t, j) * model.atom_mass(j);
    return acc;
}

}  // namespace

ControlPair ControlPair::zero(std::size_t n_atoms) {
    ControlPair ctrl;
    ctrl.theta1 = JumpCoefficient::zero(n_atoms);
    return ctrl;
}

void ControlPair::validate() const {
    for (double v : theta1.values().data)
        if (!(v >= -1.0)) throw std::invalid_argument("theta1 must be >= -1 everywhere");
    if (!theta1.breaks().empty() && theta1.breaks().front() != 0.0)
        throw std::invalid_argument("theta1 cells must start at t = 0");
    for (double v : theta0.values())
        if (!std::isfinite(v)) throw std::invalid_argument("theta0 must be finite");
}

bool ControlPair::equivalence_class() const {
    for (double v : theta1.values().data)
        if (v < -1.0 + theta1_floor) return false;
    return true;
}

DensityPaths density_paths(const ControlPair& ctrl, const LevyModel& model,
                           const PathBundle& paths) {
    ctrl.validate();
    const TimeGrid& grid = paths.grid;
    const std::size_t n = grid.n_steps;
    const double dt = grid.dt();

    std::vector<double> theta0_v(n), det_dt(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double t = grid.node(i);
        const double th0 = ctrl.theta0.at(t);
        theta0_v[i] = th0;
        double comp = 0.0;
        for (std::size_t j = 0; j < model.n_atoms(); ++j)
            comp += ctrl.theta1.at(t, j) * model.atom_mass(j);
        det_dt[i] = -0.5 * th0 * th0 * dt - comp * dt;
    }

    DensityPaths out;
    out.d = Matrix(paths.n_paths, n + 1);
    out.log_d = Matrix(paths.n_paths, n + 1);
    out.terminal_d.assign(paths.n_paths, 0.0);
    out.hit_zero.assign(paths.n_paths, 0);
    parallel_for(paths.n_paths, [&](std::size_t lo, std::size_t hi) {
        for (std::size_t p = lo; p < hi; ++p) {
            const auto dw = paths.dw.row(p);
            const auto events = paths.events_of(p);
            auto d = out.d.row(p);
            auto ld = out.log_d.row(p);
            double acc = 0.0;
            std::size_t e = 0;
            d[0] = 1.0;
            ld[0] = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                acc += theta0_v[i] * dw[i] + det_dt[i];
                while (e < events.size() && events[e].interval <= i) {
                    const double th1 = ctrl.theta1.at_left(events[e].time, events[e].atom);
                    acc += std::log1p(th1);  // -inf at th1 == -1: D absorbed at zero
                    ++e;
                }
                ld[i + 1] = acc;
                d[i + 1] = std::exp(acc);
            }
            out.terminal_d[p] = d[n];
            if (d[n] == 0.0) out.hit_zero[p] = 1;
        }
    });
    return out;
}

std::vector<double> density_terminal_explicit(const ControlPair& ctrl, const LevyModel& model,
                                              const PathBundle& paths) {
    ctrl.validate();
    const TimeGrid& grid = paths.grid;
    const std::size_t n = grid.n_steps;
    const double dt = grid.dt();

    std::vector<double> theta0_v(n), comp_dt(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double t = grid.node(i);
        theta0_v[i] = ctrl.theta0.at(t);
        double comp = 0.0;
        for (std::size_t j = 0; j < model.n_atoms(); ++j)
            comp += ctrl.theta1.at(t, j) * model.atom_mass(j);
        comp_dt[i] = comp * dt;
    }

    std::vector<double> terminal(paths.n_paths);
    parallel_for(paths.n_paths, [&](std::size_t lo, std::size_t hi) {
        for (std::size_t p = lo; p < hi; ++p) {
            const auto dw = paths.dw.row(p);
            double z = 0.0;  // continuous part and compensated jump integral
            for (std::size_t i = 0; i < n; ++i)
                z += theta0_v[i] * dw[i] - 0.5 * theta0_v[i] * theta0_v[i] * dt - comp_dt[i];
            double corr = 0.0;  // sum of log(1+theta1) - theta1 at realized jumps
            for (const auto& e : paths.events_of(p)) {
                const double th1 = ctrl.theta1.at_left(e.time, e.atom);
                z += th1;
                corr += std::log1p(th1) - th1;
            }
            terminal[p] = std::exp(z) * std::exp(corr);
        }
    });
    return terminal;
}

ElmmResidual elmm_residual(const MarketSpec& spec, const ControlPair& ctrl,
                           const TimeGrid& grid, const LevyModel& model) {
    ElmmResidual res;
    res.eps.resize(grid.n_steps);
    for (std::size_t i = 0; i < grid.n_steps; ++i) {
        const double t = grid.node(i);
        const double beta = spec.beta.at(t);
        const double u = spec.alpha.at(t) + jump_drift_at(spec, ctrl, model, t);
        res.eps[i] = beta * (ctrl.theta0.at(t) + u / beta);
        res.sup_abs = std::max(res.sup_abs, std::fabs(res.eps[i]));
    }
    return res;
}

ControlPair complete_to_elmm(const MarketSpec& spec, const JumpCoefficient& theta1,
                             const TimeGrid& grid, const LevyModel& model) {
    ControlPair ctrl;
    ctrl.theta1 = theta1;
    ctrl.validate();
    std::vector<double> breaks(grid.n_steps), values(grid.n_steps);
    for (std::size_t i = 0; i < grid.n_steps; ++i) {
        const double t = grid.node(i);
        const double beta = spec.beta.at(t);
        if (!(std::fabs(beta) >= spec.beta_floor_c))
            throw std::invalid_argument("beta below its floor: cannot eliminate theta0");
        const double u = spec.alpha.at(t) + jump_drift_at(spec, ctrl, model, t);
        breaks[i] = t;
        values[i] = -(u / beta);
    }
    ctrl.theta0 = StepFunction(std::move(breaks), std::move(values));
    return ctrl;
}

McEstimate relative_entropy(const ControlPair& ctrl, const LevyModel& model,
                            const PathBundle& paths_under_p) {
    const auto dens = density_paths(ctrl, model, paths_under_p);
    std::vector<double> v(paths_under_p.n_paths);
    for (std::size_t p = 0; p < v.size(); ++p) {
        const double d = dens.terminal_d[p];
        v[p] = d > 0.0 ? d * std::log(d) : 0.0;
    }
    return mc_mean(v);
}

double relative_entropy_exact(const ControlPair& ctrl, const LevyModel& model,
                              const TimeGrid& grid) {
    const double dt = grid.dt();
    double h = 0.0;
    for (std::size_t i = 0; i < grid.n_steps; ++i) {
        const double t = grid.node(i);
        const double th0 = ctrl.theta0.at(t);
        double jump = 0.0;
        for (std::size_t j = 0; j < model.n_atoms(); ++j) {
            const double th1 = ctrl.theta1.at(t, j);
            const double m = model.atom_mass(j);
            jump += ((1.0 + th1) == 0.0 ? 0.0 : (1.0 + th1) * std::log1p(th1)) * m - th1 * m;
        }
        h += (0.5 * th0 * th0 + jump) * dt;
    }
    return h;
}

PathBundle tilt_sample(const ControlPair& ctrl, const LevyModel& model, const TimeGrid& grid,
                       std::size_t n_paths, std::uint64_t seed, bool with_levy_nodes) {
    ctrl.validate();
    SampleTilt tilt;
    const auto& breaks = ctrl.theta1.breaks();
    const std::size_t n_cells = std::max<std::size_t>(ctrl.theta1.n_cells(), 1);
    tilt.cell_bounds.resize(n_cells + 1);
    tilt.cell_bounds[0] = 0.0;
    for (std::size_t c = 1; c < n_cells; ++c) tilt.cell_bounds[c] = breaks[c];
    tilt.cell_bounds[n_cells] = grid.horizon_T;
    if (!std::is_sorted(tilt.cell_bounds.begin(), tilt.cell_bounds.end()))
        throw std::invalid_argument("theta1 cells must lie inside [0, T]");
    if (model.n_atoms() > 0 && ctrl.theta1.n_atoms() != model.n_atoms())
        throw std::invalid_argument("theta1 atom count does not match the jump measure");
    tilt.atom_scale = Matrix(n_cells, model.n_atoms());
    for (std::size_t c = 0; c < n_cells; ++c)
        for (std::size_t j = 0; j < model.n_atoms(); ++j)
            tilt.atom_scale.at(c, j) = std::max(0.0, 1.0 + ctrl.theta1.values().at(c, j));
    tilt.drift_per_step.resize(grid.n_steps);
    for (std::size_t i = 0; i < grid.n_steps; ++i)
        tilt.drift_per_step[i] = ctrl.theta0.at(grid.node(i));
    PathBundle bundle = simulate_paths_tilted(model, grid, n_paths, seed, tilt, 0, with_levy_nodes);
    bundle.measure_tag = "Q-tilt";
    return bundle;
}

}  // namespace levmax
