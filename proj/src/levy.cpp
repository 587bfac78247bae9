#include "levmax/levy.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>
#include <mutex>
#include <ostream>
#include <stdexcept>

#include "levmax/rng.hpp"
#include "levmax/simd_kernels.hpp"

namespace levmax {

double LevyModel::small_jump_linear_mass() const {
    double c1 = 0.0;
    for (std::size_t j = 0; j < n_atoms(); ++j)
        if (std::fabs(jump_sizes[j]) <= 1.0) c1 += jump_sizes[j] * atom_mass(j);
    return c1;
}

LevyModel build_levy_model(double b, double lambda,
                           std::span<const std::pair<double, double>> atoms) {
    if (!(lambda >= 0.0) || !std::isfinite(lambda))
        throw std::invalid_argument("jump intensity lambda must be finite and >= 0");
    double psum = 0.0;
    for (const auto& [size, prob] : atoms) {
        if (size == 0.0) throw std::invalid_argument("nu must charge R\\{0} only");
        if (!std::isfinite(size)) throw std::invalid_argument("jump size must be finite");
        if (prob < 0.0) throw std::invalid_argument("atom probability must be >= 0");
        psum += prob;
    }
    if (!atoms.empty() && std::fabs(psum - 1.0) > 1e-9)
        throw std::invalid_argument("atom probabilities must sum to 1");
    LevyModel model;
    model.drift_b = b;
    model.jump_intensity_lambda = atoms.empty() ? 0.0 : lambda;
    for (const auto& [size, prob] : atoms) {
        model.jump_sizes.push_back(size);
        model.jump_probs.push_back(psum > 0.0 ? prob / psum : 0.0);
    }
    return model;
}

TimeGrid make_time_grid(double horizon_T, std::size_t n_steps) {
    if (!(horizon_T > 0.0) || !std::isfinite(horizon_T))
        throw std::invalid_argument("horizon T must be finite and > 0");
    if (n_steps == 0) throw std::invalid_argument("n_steps must be >= 1");
    return {horizon_T, n_steps};
}

std::size_t TimeGrid::interval_of(double t) const {
    if (t <= 0.0) return 0;
    const double r = std::ceil(t / dt()) - 1.0;
    if (r <= 0.0) return 0;
    const auto i = static_cast<std::size_t>(r);
    return std::min(i, n_steps - 1);
}

std::vector<double> reconstruct_levy_nodes(const LevyModel& model, const TimeGrid& grid,
                                           std::span<const double> dw_row,
                                           std::span<const JumpEvent> events) {
    const std::size_t n = grid.n_steps;
    const double c1 = model.small_jump_linear_mass();
    std::vector<double> nodes(n + 1);
    double w = 0.0;
    double small = 0.0;
    double large = 0.0;
    std::size_t e = 0;
    nodes[0] = 0.0;
    for (std::size_t k = 1; k <= n; ++k) {
        w += dw_row[k - 1];
        while (e < events.size() && events[e].interval < k) {
            if (std::fabs(events[e].size) <= 1.0)
                small += events[e].size;
            else
                large += events[e].size;
            ++e;
        }
        const double t = grid.node(k);
        nodes[k] = ((model.drift_b * t + w) + (small - c1 * t)) + large;
    }
    return nodes;
}

namespace {

void check_tilt(const LevyModel& model, const TimeGrid& grid, const SampleTilt& tilt) {
    if (tilt.cell_bounds.size() < 2 || tilt.cell_bounds.front() != 0.0 ||
        tilt.cell_bounds.back() != grid.horizon_T)
        throw std::invalid_argument("tilt cells must cover [0, T]");
    if (tilt.atom_scale.rows != tilt.cell_bounds.size() - 1 ||
        tilt.atom_scale.cols != model.n_atoms())
        throw std::invalid_argument("tilt atom_scale shape mismatch");
    for (double s : tilt.atom_scale.data)
        if (!(s >= 0.0)) throw std::invalid_argument("tilt atom scale must be >= 0");
    if (!tilt.drift_per_step.empty() && tilt.drift_per_step.size() != grid.n_steps)
        throw std::invalid_argument("tilt drift size mismatch");
}

}  // namespace

namespace {

// Base Brownian increments (no drift) cached per (seed, base, shape): the
// inverse-CDF transform dominates resampling cost and every measure tilt
// reuses the same underlying normals.
struct BaseNormalCache {
    struct Entry {
        std::uint64_t seed, base;
        std::size_t n_paths, n_steps;
        double horizon;
        std::shared_ptr<const Matrix> data;
    };
    std::mutex mutex;
    std::vector<Entry> entries;

    std::shared_ptr<const Matrix> get(std::uint64_t seed, std::uint64_t base,
                                      std::size_t n_paths, const TimeGrid& grid) {
        {
            std::lock_guard<std::mutex> lock(mutex);
            for (const auto& e : entries)
                if (e.seed == seed && e.base == base && e.n_paths == n_paths &&
                    e.n_steps == grid.n_steps && e.horizon == grid.horizon_T)
                    return e.data;
        }
        auto fresh = std::make_shared<Matrix>(n_paths, grid.n_steps);
        const double sqrt_dt = std::sqrt(grid.dt());
        parallel_for(n_paths, [&](std::size_t lo, std::size_t hi) {
            for (std::size_t p = lo; p < hi; ++p) {
                Rng rng_w(seed, base + p, 0);
                auto row = fresh->row(p);
                for (std::size_t i = 0; i < grid.n_steps; ++i)
                    row[i] = rng_w.normal() * sqrt_dt;
            }
        });
        std::lock_guard<std::mutex> lock(mutex);
        if (entries.size() >= 4) entries.erase(entries.begin());
        entries.push_back({seed, base, n_paths, grid.n_steps, grid.horizon_T, fresh});
        return fresh;
    }
};

BaseNormalCache g_base_normals;

}  // namespace

PathBundle simulate_paths_tilted(const LevyModel& model, const TimeGrid& grid,
                                 std::size_t n_paths, std::uint64_t seed,
                                 const SampleTilt& tilt, std::uint64_t path_index_base,
                                 bool with_levy_nodes) {
    if (n_paths == 0) throw std::invalid_argument("n_paths must be >= 1");
    check_tilt(model, grid, tilt);

    const std::size_t n = grid.n_steps;
    const double dt = grid.dt();
    const std::size_t n_cells = tilt.cell_bounds.size() - 1;
    const std::size_t n_atoms = model.n_atoms();

    PathBundle bundle;
    bundle.grid = grid;
    bundle.n_paths = n_paths;
    bundle.dw = Matrix(n_paths, n);
    if (with_levy_nodes) bundle.levy = Matrix(n_paths, n + 1);
    bundle.seed = seed;
    bundle.path_index_base = path_index_base;

    const auto base = g_base_normals.get(seed, path_index_base, n_paths, grid);
    std::vector<double> drift_dt(n, 0.0);
    for (std::size_t i = 0; i < n && !tilt.drift_per_step.empty(); ++i)
        drift_dt[i] = tilt.drift_per_step[i] * dt;
    const auto& kern = simd::active_kernels();

    std::vector<std::vector<JumpEvent>> per_path(n_paths);
    parallel_for(n_paths, [&](std::size_t lo, std::size_t hi) {
        for (std::size_t p = lo; p < hi; ++p) {
            const std::uint64_t gidx = path_index_base + p;
            auto dw = bundle.dw.row(p);
            kern.add(dw.data(), base->row(p).data(), drift_dt.data(), n);

            if (n_atoms > 0 && model.jump_intensity_lambda > 0.0) {
                Rng rng_j(seed, gidx, 1);
                auto& ev = per_path[p];
                for (std::size_t c = 0; c < n_cells; ++c) {
                    const double lo_t = tilt.cell_bounds[c];
                    const double hi_t = tilt.cell_bounds[c + 1];
                    const double len = hi_t - lo_t;
                    for (std::size_t j = 0; j < n_atoms; ++j) {
                        const double mean = model.atom_mass(j) * tilt.atom_scale.at(c, j) * len;
                        const int count = Rng::poisson_quantile(rng_j.uniform01(), mean);
                        for (int k = 0; k < count; ++k) {
                            JumpEvent e;
                            e.time = hi_t - rng_j.uniform01() * len;  // in (lo_t, hi_t]
                            e.size = model.jump_sizes[j];
                            e.atom = static_cast<std::uint32_t>(j);
                            e.interval = static_cast<std::uint32_t>(grid.interval_of(e.time));
                            ev.push_back(e);
                        }
                    }
                }
                std::stable_sort(ev.begin(), ev.end(), [](const JumpEvent& a, const JumpEvent& b) {
                    return a.time < b.time || (a.time == b.time && a.atom < b.atom);
                });
            }
        }
    });

    bundle.offsets.resize(n_paths + 1, 0);
    for (std::size_t p = 0; p < n_paths; ++p)
        bundle.offsets[p + 1] = bundle.offsets[p] + per_path[p].size();
    bundle.events.resize(bundle.offsets.back());
    parallel_for(n_paths, [&](std::size_t lo, std::size_t hi) {
        for (std::size_t p = lo; p < hi; ++p) {
            std::copy(per_path[p].begin(), per_path[p].end(),
                      bundle.events.begin() + static_cast<std::ptrdiff_t>(bundle.offsets[p]));
            if (!with_levy_nodes) continue;
            const auto nodes = reconstruct_levy_nodes(model, grid, bundle.dw.row(p),
                                                      bundle.events_of(p));
            std::copy(nodes.begin(), nodes.end(), bundle.levy.row(p).begin());
        }
    });
    return bundle;
}

PathBundle simulate_paths(const LevyModel& model, const TimeGrid& grid, std::size_t n_paths,
                          std::uint64_t seed, std::uint64_t path_index_base) {
    SampleTilt identity;
    identity.cell_bounds = {0.0, grid.horizon_T};
    identity.atom_scale = Matrix(1, model.n_atoms());
    std::fill(identity.atom_scale.data.begin(), identity.atom_scale.data.end(), 1.0);
    return simulate_paths_tilted(model, grid, n_paths, seed, identity, path_index_base);
}

namespace {

double adaptive_simpson(const std::function<double(double)>& f, double a, double b, double fa,
                        double fm, double fb, double whole, double tol, int depth) {
    const double m = 0.5 * (a + b);
    const double lm = 0.5 * (a + m);
    const double rm = 0.5 * (m + b);
    const double flm = f(lm);
    const double frm = f(rm);
    const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    const double delta = left + right - whole;
    if (!std::isfinite(delta))
        throw std::invalid_argument("jump density not integrable on the requested bin");
    if (depth <= 0) {
        if (std::fabs(delta) > 64.0 * tol)
            throw std::invalid_argument("jump density quadrature failed to converge");
        return left + right + delta / 15.0;
    }
    if (std::fabs(delta) <= 15.0 * tol) return left + right + delta / 15.0;
    return adaptive_simpson(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
           adaptive_simpson(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

double integrate(const std::function<double(double)>& f, double a, double b, double tol) {
    const double fa = f(a);
    const double fb = f(b);
    const double fm = f(0.5 * (a + b));
    if (!std::isfinite(fa) || !std::isfinite(fb) || !std::isfinite(fm))
        throw std::invalid_argument("jump density not integrable on the requested bin");
    const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    return adaptive_simpson(f, a, b, fa, fm, fb, whole, tol, 28);
}

}  // namespace

LevyModel truncate_levy_measure(const std::function<double(double)>& nu_density, double eps,
                                int n_bins, double support_lo, double support_hi,
                                double drift_b) {
    if (!(eps > 0.0)) throw std::invalid_argument("truncation eps must be > 0");
    if (n_bins < 1) throw std::invalid_argument("n_bins must be >= 1");
    if (!std::isfinite(support_lo) || !std::isfinite(support_hi) || support_lo >= support_hi)
        throw std::invalid_argument("jump density support must be a finite interval");

    struct Segment {
        double lo, hi;
    };
    std::vector<Segment> segments;
    if (support_lo < -eps) segments.push_back({support_lo, std::min(support_hi, -eps)});
    if (support_hi > eps) segments.push_back({std::max(support_lo, eps), support_hi});
    std::vector<std::pair<double, double>> atoms;
    if (!segments.empty()) {
        double total_len = 0.0;
        for (const auto& s : segments) total_len += s.hi - s.lo;
        int used = 0;
        for (std::size_t si = 0; si < segments.size(); ++si) {
            const auto& s = segments[si];
            int bins = (si + 1 == segments.size())
                           ? n_bins - used
                           : std::max(1, static_cast<int>(std::lround(n_bins * (s.hi - s.lo) /
                                                                      total_len)));
            bins = std::max(1, bins);
            used += bins;
            const double width = (s.hi - s.lo) / bins;
            for (int k = 0; k < bins; ++k) {
                const double a = s.lo + k * width;
                const double b = (k + 1 == bins) ? s.hi : a + width;
                const double mass = integrate(nu_density, a, b, 1e-12);
                if (mass < -1e-12) throw std::invalid_argument("jump density must be >= 0");
                atoms.emplace_back(0.5 * (a + b), std::max(mass, 0.0));
            }
        }
    }
    double lambda = 0.0;
    for (auto& [x, m] : atoms) lambda += m;
    LevyModel model;
    model.drift_b = drift_b;
    model.jump_intensity_lambda = lambda;
    for (auto& [x, m] : atoms) {
        model.jump_sizes.push_back(x);
        model.jump_probs.push_back(lambda > 0.0 ? m / lambda : 0.0);
    }
    model.small_jump_truncation_eps = eps;
    return model;
}

LevyModel truncate_levy_measure(const LevyModel& model, double eps) {
    if (!(eps >= 0.0)) throw std::invalid_argument("truncation eps must be >= 0");
    LevyModel out;
    out.drift_b = model.drift_b;
    out.small_jump_truncation_eps = eps;
    double kept_mass = 0.0;
    for (std::size_t j = 0; j < model.n_atoms(); ++j)
        if (std::fabs(model.jump_sizes[j]) >= eps) {
            out.jump_sizes.push_back(model.jump_sizes[j]);
            out.jump_probs.push_back(model.atom_mass(j));
            kept_mass += model.atom_mass(j);
        }
    out.jump_intensity_lambda = kept_mass;
    for (double& p : out.jump_probs) p = kept_mass > 0.0 ? p / kept_mass : 0.0;
    return out;
}

void write_paths_csv(std::ostream& os, const PathBundle& bundle) {
    os << "path_id,t,W,L,n_jumps\n";
    char buf[128];
    for (std::size_t p = 0; p < bundle.n_paths; ++p) {
        const auto dw = bundle.dw.row(p);
        const auto levy = bundle.levy.row(p);
        const auto events = bundle.events_of(p);
        double w = 0.0;
        std::size_t e = 0;
        for (std::size_t k = 0; k <= bundle.grid.n_steps; ++k) {
            if (k > 0) w += dw[k - 1];
            while (e < events.size() && events[e].interval < k) ++e;
            std::snprintf(buf, sizeof(buf), "%zu,%.17g,%.17g,%.17g,%zu\n", p,
                          bundle.grid.node(k), w, levy[k], e);
            os << buf;
        }
    }
}

}  // namespace levmax
