#include "levmax/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "levmax/rng.hpp"

namespace levmax {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void compositions(std::size_t dim, int total, std::vector<int>& parts, std::size_t at,
                  const std::function<void(const std::vector<int>&)>& fn) {
    if (at + 1 == dim) {
        parts[at] = total;
        fn(parts);
        return;
    }
    for (int k = 0; k <= total; ++k) {
        parts[at] = k;
        compositions(dim, total - k, parts, at + 1, fn);
    }
}

}  // namespace

void FiniteMarket::validate() const {
    if (p_ref.empty() || p_ref.size() > 6)
        throw std::invalid_argument("finite market needs 1..6 outcomes");
    if (p_ref.size() != s_T.size())
        throw std::invalid_argument("p_ref and s_T must have the same length");
    double sum = 0.0;
    for (double p : p_ref) {
        if (!(p > 0.0)) throw std::invalid_argument("reference probabilities must be > 0");
        sum += p;
    }
    if (std::fabs(sum - 1.0) > 1e-12)
        throw std::invalid_argument("reference probabilities must sum to 1");
    for (double s : s_T)
        if (!(s >= 0.0)) throw std::invalid_argument("terminal prices must be >= 0");
    if (!(s0 > 0.0)) throw std::invalid_argument("s0 must be > 0");
    if (!penalty) throw std::invalid_argument("penalty table is required");
}

std::size_t SimplexGrid::size() const {
    // C(resolution + dim - 1, dim - 1)
    std::size_t num = 1, den = 1;
    for (std::size_t k = 1; k < dim; ++k) {
        num *= static_cast<std::size_t>(resolution) + k;
        den *= k;
    }
    return num / den;
}

void SimplexGrid::for_each(const std::function<void(std::span<const double>)>& fn) const {
    std::vector<int> parts(dim, 0);
    std::vector<double> q(dim, 0.0);
    compositions(dim, resolution, parts, 0, [&](const std::vector<int>& k) {
        for (std::size_t i = 0; i < dim; ++i)
            q[i] = static_cast<double>(k[i]) / static_cast<double>(resolution);
        fn(q);
    });
}

std::function<double(std::span<const double>)> quadratic_penalty_table(
    std::vector<double> p_ref, double a) {
    return [p_ref = std::move(p_ref), a](std::span<const double> q) {
        double acc = 0.0;
        for (std::size_t i = 0; i < q.size(); ++i)
            acc += (q[i] - p_ref[i]) * (q[i] - p_ref[i]);
        return a * acc;
    };
}

std::function<double(std::span<const double>)> entropic_penalty_table(
    std::vector<double> p_ref) {
    return [p_ref = std::move(p_ref)](std::span<const double> q) {
        double acc = 0.0;
        for (std::size_t i = 0; i < q.size(); ++i)
            if (q[i] > 0.0) acc += q[i] * std::log(q[i] / p_ref[i]);
        return acc;
    };
}

std::function<double(std::span<const double>)> affine_penalty_table(std::vector<double> p_ref,
                                                                    std::vector<double> c) {
    double at_ref = 0.0;
    for (std::size_t i = 0; i < p_ref.size(); ++i) at_ref += c[i] * p_ref[i];
    return [c = std::move(c), at_ref](std::span<const double> q) {
        double acc = 0.0;
        for (std::size_t i = 0; i < q.size(); ++i) acc += c[i] * q[i];
        return acc - at_ref;
    };
}

std::vector<double> make_strategy_grid(const FiniteMarket& market, std::size_t n_points) {
    market.validate();
    double lo = -50.0, hi = 50.0;
    for (std::size_t i = 0; i < market.n(); ++i) {
        const double r = market.s_T[i] / market.s0 - 1.0;
        if (r > 0.0) lo = std::max(lo, -1.0 / r);
        if (r < 0.0) hi = std::min(hi, -1.0 / r);
    }
    if (!(lo < hi)) throw std::invalid_argument("empty admissible strategy region");
    const double margin = 1e-6 * (hi - lo);
    lo += margin;
    hi -= margin;
    std::vector<double> grid(n_points);
    for (std::size_t k = 0; k < n_points; ++k)
        grid[k] = lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(n_points - 1);
    if (std::find(grid.begin(), grid.end(), 0.0) == grid.end()) {
        grid.push_back(0.0);
        std::sort(grid.begin(), grid.end());
    }
    return grid;
}

double two_state_elmm_up(const FiniteMarket& market) {
    if (market.n() != 2) throw std::invalid_argument("two_state_elmm_up needs 2 outcomes");
    const double up = std::max(market.s_T[0], market.s_T[1]);
    const double dn = std::min(market.s_T[0], market.s_T[1]);
    if (!(dn < market.s0 && market.s0 < up))
        throw std::invalid_argument("two-state market admits no interior martingale measure");
    return (market.s0 - dn) / (up - dn);
}

namespace {

// Penalized expected utility of the one-period wealth for strategy pi under q.
double penalized_utility(const FiniteMarket& market, const UtilitySpec& util, double x,
                         double pi, std::span<const double> q, double penalty_q) {
    double acc = 0.0;
    for (std::size_t i = 0; i < market.n(); ++i) {
        if (q[i] == 0.0) continue;
        const double xt = x * (1.0 + pi * (market.s_T[i] / market.s0 - 1.0));
        acc += q[i] * util.u(xt);
    }
    return acc + penalty_q;
}

struct GridCache {
    std::vector<std::vector<double>> points;
    std::vector<double> penalty;
};

GridCache cache_grid(const FiniteMarket& market, const SimplexGrid& grid) {
    GridCache cache;
    grid.for_each([&](std::span<const double> q) {
        cache.points.emplace_back(q.begin(), q.end());
        cache.penalty.push_back(market.penalty(q));
    });
    return cache;
}

}  // namespace

ExactPrimal exact_primal(const FiniteMarket& market, const UtilitySpec& util, double x,
                         std::span<const double> strategy_grid, const SimplexGrid& grid) {
    market.validate();
    if (strategy_grid.empty()) throw std::invalid_argument("strategy grid is empty");
    const GridCache cache = cache_grid(market, grid);
    ExactPrimal out;
    out.value = -kInf;
    bool any_admissible = false;
    for (double pi : strategy_grid) {
        bool admissible = true;
        for (std::size_t i = 0; i < market.n(); ++i)
            if (!(x * (1.0 + pi * (market.s_T[i] / market.s0 - 1.0)) > 0.0)) admissible = false;
        if (!admissible) continue;
        any_admissible = true;
        double worst = kInf;
        std::size_t worst_idx = 0;
        for (std::size_t g = 0; g < cache.points.size(); ++g) {
            if (!std::isfinite(cache.penalty[g])) continue;
            const double val =
                penalized_utility(market, util, x, pi, cache.points[g], cache.penalty[g]);
            if (val < worst) {
                worst = val;
                worst_idx = g;
            }
        }
        if (worst > out.value) {
            out.value = worst;
            out.best_pi = pi;
            out.worst_q = cache.points[worst_idx];
        }
    }
    if (!any_admissible) throw std::invalid_argument("no admissible strategy on the grid");
    return out;
}

MinimaxReport exact_dual_and_minimax(const FiniteMarket& market, const UtilitySpec& util,
                                     double x, std::span<const double> y_grid,
                                     const SimplexGrid& grid,
                                     std::span<const double> strategy_grid) {
    market.validate();
    const GridCache cache = cache_grid(market, grid);
    MinimaxReport rep;

    const auto primal = exact_primal(market, util, x, strategy_grid, grid);
    rep.u_supinf = primal.value;

    // inf over q of sup over pi
    rep.u_infsup = kInf;
    for (std::size_t g = 0; g < cache.points.size(); ++g) {
        if (!std::isfinite(cache.penalty[g])) continue;
        double best = -kInf;
        for (double pi : strategy_grid) {
            bool admissible = true;
            for (std::size_t i = 0; i < market.n(); ++i)
                if (!(x * (1.0 + pi * (market.s_T[i] / market.s0 - 1.0)) > 0.0))
                    admissible = false;
            if (!admissible) continue;
            best = std::max(best, penalized_utility(market, util, x, pi, cache.points[g],
                                                    cache.penalty[g]));
        }
        rep.u_infsup = std::min(rep.u_infsup, best);
    }
    rep.minimax_gap = std::fabs(rep.u_infsup - rep.u_supinf);

    // martingale measures on the grid
    double spread = 0.0;
    for (double s : market.s_T) spread = std::max(spread, std::fabs(s - market.s0));
    const double mart_tol = spread / static_cast<double>(grid.resolution);
    std::vector<std::size_t> mart_idx;
    for (std::size_t g = 0; g < cache.points.size(); ++g) {
        double es = 0.0;
        for (std::size_t i = 0; i < market.n(); ++i) es += cache.points[g][i] * market.s_T[i];
        if (std::fabs(es - market.s0) <= mart_tol) mart_idx.push_back(g);
    }
    if (mart_idx.empty()) throw std::invalid_argument("no martingale measure at this resolution");

    // dual value on the y grid, keeping the argmin pair at each y
    rep.v_values.resize(y_grid.size());
    std::vector<std::size_t> arg_q(y_grid.size()), arg_m(y_grid.size());
    for (std::size_t yi = 0; yi < y_grid.size(); ++yi) {
        const double y = y_grid[yi];
        double best = kInf;
        for (std::size_t g = 0; g < cache.points.size(); ++g) {
            if (!std::isfinite(cache.penalty[g])) continue;
            const auto& q = cache.points[g];
            for (std::size_t mi : mart_idx) {
                const auto& qm = cache.points[mi];
                bool feasible = true;
                double acc = 0.0;
                for (std::size_t i = 0; i < market.n(); ++i) {
                    if (q[i] == 0.0) {
                        if (qm[i] != 0.0) feasible = false;
                        continue;
                    }
                    acc += q[i] * util.v(y * qm[i] / q[i]);
                    if (!std::isfinite(acc)) break;
                }
                if (!feasible || std::isnan(acc)) continue;
                const double val = acc + cache.penalty[g];
                if (val < best) {
                    best = val;
                    arg_q[yi] = g;
                    arg_m[yi] = mi;
                }
            }
        }
        rep.v_values[yi] = best;
    }

    // conjugacy: u(x) vs min_y v(y) + x y
    rep.u_conjugate = kInf;
    std::size_t y_best = 0;
    for (std::size_t yi = 0; yi < y_grid.size(); ++yi) {
        const double val = rep.v_values[yi] + x * y_grid[yi];
        if (val < rep.u_conjugate) {
            rep.u_conjugate = val;
            y_best = yi;
        }
    }
    rep.conjugacy_gap = std::fabs(rep.u_supinf - rep.u_conjugate);
    rep.y_star = y_grid[y_best];

    // saddle recovery against the primal argmax
    const auto& qs = cache.points[arg_q[y_best]];
    const auto& qm = cache.points[arg_m[y_best]];
    rep.saddle_max_diff = 0.0;
    for (std::size_t i = 0; i < market.n(); ++i) {
        if (qs[i] == 0.0) continue;
        const double x_dual = -util.v_prime(rep.y_star * qm[i] / qs[i]);
        const double x_primal =
            x * (1.0 + primal.best_pi * (market.s_T[i] / market.s0 - 1.0));
        rep.saddle_max_diff = std::max(rep.saddle_max_diff, std::fabs(x_dual - x_primal));
    }
    return rep;
}

RiskReport exact_risk_measure(const FiniteMarket& market,
                              std::span<const std::vector<double>> payoff_grid,
                              const SimplexGrid& grid) {
    market.validate();
    const GridCache cache = cache_grid(market, grid);
    RiskReport rep;
    rep.grid_points = cache.points;

    auto rho_of = [&](const std::vector<double>& payoff) {
        double best = -kInf;
        for (std::size_t g = 0; g < cache.points.size(); ++g) {
            if (!std::isfinite(cache.penalty[g])) continue;
            double eq = 0.0;
            for (std::size_t i = 0; i < market.n(); ++i) eq += cache.points[g][i] * (-payoff[i]);
            best = std::max(best, eq - cache.penalty[g]);
        }
        return best;
    };

    rep.rho.reserve(payoff_grid.size());
    for (const auto& payoff : payoff_grid) rep.rho.push_back(rho_of(payoff));

    rep.psi_star.assign(cache.points.size(), -kInf);
    for (std::size_t g = 0; g < cache.points.size(); ++g) {
        for (std::size_t k = 0; k < payoff_grid.size(); ++k) {
            double eq = 0.0;
            for (std::size_t i = 0; i < market.n(); ++i)
                eq += cache.points[g][i] * (-payoff_grid[k][i]);
            rep.psi_star[g] = std::max(rep.psi_star[g], eq - rep.rho[k]);
        }
        const double pen = cache.penalty[g];
        if (std::isfinite(pen)) {
            rep.biduality_gap = std::max(rep.biduality_gap, pen - rep.psi_star[g]);
            rep.max_psi_excess = std::max(rep.max_psi_excess, rep.psi_star[g] - pen);
        }
    }
    return rep;
}

std::vector<std::vector<double>> make_payoff_grid(const FiniteMarket& market, int resolution,
                                                  std::uint64_t seed) {
    market.validate();
    const std::size_t m = market.n();
    std::vector<std::vector<double>> payoffs;

    // penalty-gradient payoffs on a coarse sub-lattice (finite differences)
    SimplexGrid sub{std::max(2, resolution / 2), m};
    const double h = 1e-6;
    sub.for_each([&](std::span<const double> q) {
        std::vector<double> grad(m);
        std::vector<double> qe(q.begin(), q.end());
        for (std::size_t i = 0; i < m; ++i) {
            qe[i] = q[i] + h;
            const double up = market.penalty(qe);
            qe[i] = q[i] - h;
            const double dn = market.penalty(qe);
            qe[i] = q[i];
            grad[i] = (up - dn) / (2.0 * h);
        }
        if (std::all_of(grad.begin(), grad.end(), [](double g) { return std::isfinite(g); })) {
            for (double& g : grad) g = -g;  // payoff X with -X = gradient
            payoffs.push_back(std::move(grad));
        }
    });

    // affine basis: constants and single-outcome indicators
    payoffs.push_back(std::vector<double>(m, 1.0));
    for (std::size_t i = 0; i < m; ++i) {
        std::vector<double> e(m, 0.0);
        e[i] = 1.0;
        payoffs.push_back(e);
    }

    // seeded random payoffs, prefix-nested across resolutions
    Rng rng(seed, 0, 3);
    const int n_random = 16 * resolution;
    for (int k = 0; k < n_random; ++k) {
        std::vector<double> payoff(m);
        for (std::size_t i = 0; i < m; ++i) payoff[i] = 2.0 * rng.uniform01() - 1.0;
        payoffs.push_back(std::move(payoff));
    }
    return payoffs;
}

std::vector<double> biduality_gap(const FiniteMarket& market, std::span<const int> resolutions,
                                  std::uint64_t seed) {
    std::vector<double> gaps;
    for (int r : resolutions) {
        const auto payoffs = make_payoff_grid(market, r, seed);
        SimplexGrid grid{r, market.n()};
        const auto rep = exact_risk_measure(market, payoffs, grid);
        gaps.push_back(rep.biduality_gap);
    }
    return gaps;
}

}  // namespace levmax
