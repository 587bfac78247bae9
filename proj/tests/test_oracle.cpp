#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "levmax/measure.hpp"
#include "levmax/oracle.hpp"
#include "levmax/rng.hpp"

using namespace levmax;

namespace {

FiniteMarket two_state(double up = 1.2, double dn = 0.9) {
    FiniteMarket market;
    market.p_ref = {0.5, 0.5};
    market.s0 = 1.0;
    market.s_T = {up, dn};
    market.penalty = quadratic_penalty_table(market.p_ref, 5.0);
    return market;
}

std::vector<double> log_y_grid(double lo, double hi, std::size_t n) {
    std::vector<double> ys(n);
    for (std::size_t k = 0; k < n; ++k)
        ys[k] = std::exp(std::log(lo) + (std::log(hi) - std::log(lo)) * k / (n - 1.0));
    return ys;
}

}  // namespace

TEST_CASE("two-state martingale probability solves the linear equation") {
    const auto market = two_state();
    CHECK(two_state_elmm_up(market) == doctest::Approx(1.0 / 3.0).epsilon(1e-14));
}

TEST_CASE("simplex grid enumerates all compositions") {
    SimplexGrid grid{4, 3};
    std::size_t count = 0;
    double worst = 0.0;
    grid.for_each([&](std::span<const double> q) {
        ++count;
        double sum = 0.0;
        for (double v : q) sum += v;
        worst = std::max(worst, std::fabs(sum - 1.0));
    });
    CHECK(count == grid.size());
    CHECK(count == 15);
    CHECK(worst < 1e-14);
}

TEST_CASE("huge penalty reduces the primal to the classic complete-market optimum") {
    auto market = two_state();
    market.penalty = quadratic_penalty_table(market.p_ref, 1e9);
    const auto util = make_log_utility();
    const auto strategies = make_strategy_grid(market, 100001);
    const SimplexGrid grid{40, 2};
    const auto res = exact_primal(market, util, 1.0, strategies, grid);

    // classic oracle: maximize 0.5 log(1+0.2 pi) + 0.5 log(1-0.1 pi) by scan
    double best = -1e300, best_pi = 0.0;
    for (int k = 0; k <= 100000; ++k) {
        const double pi = -4.99 + 9.98 * k / 100000.0;
        const double x_up = 1.0 + 0.2 * pi, x_dn = 1.0 - 0.1 * pi;
        if (x_up <= 0.0 || x_dn <= 0.0) continue;
        const double v = 0.5 * std::log(x_up) + 0.5 * std::log(x_dn);
        if (v > best) {
            best = v;
            best_pi = pi;
        }
    }
    CHECK(res.value == doctest::Approx(best).epsilon(1e-4));
    CHECK(res.best_pi == doctest::Approx(best_pi).epsilon(0.05));
}

TEST_CASE("zero penalty forces the worst-case vertex and pi = 0") {
    auto market = two_state();
    market.penalty = [](std::span<const double>) { return 0.0; };
    const auto util = make_log_utility();
    const auto strategies = make_strategy_grid(market, 4001);
    const SimplexGrid grid{40, 2};
    const auto res = exact_primal(market, util, 1.0, strategies, grid);
    CHECK(res.value == doctest::Approx(0.0).epsilon(1e-10));
    CHECK(res.best_pi == 0.0);
}

TEST_CASE("minimax and conjugacy gaps close at grid resolution") {
    const auto market = two_state();
    const auto util = make_log_utility();
    const auto strategies = make_strategy_grid(market, 2001);
    const SimplexGrid grid{40, 2};
    const auto ys = log_y_grid(1e-2, 1e2, 201);
    for (double x : {0.5, 1.0, 2.0}) {
        const auto rep = exact_dual_and_minimax(market, util, x, ys, grid, strategies);
        CAPTURE(x);
        CHECK(rep.minimax_gap <= 2.0 / 40.0);
        CHECK(rep.conjugacy_gap <= 2.0 / 40.0);
        CHECK(rep.saddle_max_diff <= 2.0 * x / 40.0 + 0.05 * x);
        CHECK(rep.u_infsup >= rep.u_supinf - 1e-12);
    }
}

TEST_CASE("risk measure axioms hold exactly on the grid") {
    const auto market = two_state();
    const SimplexGrid grid{40, 2};
    Rng rng(3, 1, 4);
    std::vector<std::vector<double>> payoffs;
    for (int k = 0; k < 100; ++k)
        payoffs.push_back({2.0 * rng.uniform01() - 1.0, 2.0 * rng.uniform01() - 1.0});

    const auto rep = exact_risk_measure(market, payoffs, grid);

    SUBCASE("translation invariance within floating point dust") {
        for (int k = 0; k < 20; ++k) {
            const double a = 2.0 * rng.uniform01() - 1.0;
            std::vector<std::vector<double>> shifted = {payoffs[k]};
            shifted[0][0] += a;
            shifted[0][1] += a;
            const auto rep2 = exact_risk_measure(market, shifted, grid);
            CHECK(rep2.rho[0] == doctest::Approx(rep.rho[k] - a).epsilon(1e-12));
        }
    }
    SUBCASE("constants: rho(c) = -c") {
        std::vector<std::vector<double>> consts = {{0.7, 0.7}, {-1.3, -1.3}};
        const auto rep2 = exact_risk_measure(market, consts, grid);
        CHECK(rep2.rho[0] == doctest::Approx(-0.7).epsilon(1e-12));
        CHECK(rep2.rho[1] == doctest::Approx(1.3).epsilon(1e-12));
    }
    SUBCASE("monotonicity is exact") {
        for (int k = 0; k + 1 < 100; k += 2) {
            std::vector<double> lo = payoffs[k];
            std::vector<double> hi = {std::max(payoffs[k][0], payoffs[k + 1][0]),
                                      std::max(payoffs[k][1], payoffs[k + 1][1])};
            std::vector<std::vector<double>> pair = {lo, hi};
            const auto rep2 = exact_risk_measure(market, pair, grid);
            CHECK(rep2.rho[0] >= rep2.rho[1]);
        }
    }
    SUBCASE("convexity midpoint inequality") {
        for (int k = 0; k + 1 < 100; k += 2) {
            std::vector<std::vector<double>> tri = {
                payoffs[k],
                payoffs[k + 1],
                {0.5 * (payoffs[k][0] + payoffs[k + 1][0]),
                 0.5 * (payoffs[k][1] + payoffs[k + 1][1])}};
            const auto rep2 = exact_risk_measure(market, tri, grid);
            CHECK(rep2.rho[2] <= 0.5 * (rep2.rho[0] + rep2.rho[1]) + 1e-12);
        }
    }
    SUBCASE("minimal penalty never exceeds the penalty table") {
        CHECK(rep.max_psi_excess <= 1e-12);
    }
}

TEST_CASE("entropic penalty reproduces the log-sum-exp risk measure") {
    auto market = two_state();
    market.penalty = entropic_penalty_table(market.p_ref);
    const SimplexGrid grid{40, 2};
    Rng rng(5, 2, 6);
    for (int k = 0; k < 25; ++k) {
        std::vector<std::vector<double>> payoff = {
            {3.0 * rng.uniform01() - 1.5, 3.0 * rng.uniform01() - 1.5}};
        const auto rep = exact_risk_measure(market, payoff, grid);
        const double dv =
            std::log(0.5 * std::exp(-payoff[0][0]) + 0.5 * std::exp(-payoff[0][1]));
        CHECK(rep.rho[0] == doctest::Approx(dv).epsilon(1.0 / 40.0));
        CHECK(rep.rho[0] <= dv + 1e-12);
    }
}

TEST_CASE("biduality gap ladder") {
    const std::vector<int> resolutions = {10, 20, 40};
    SUBCASE("affine penalty is matched exactly by affine payoffs") {
        auto market = two_state();
        market.penalty = affine_penalty_table(market.p_ref, {0.4, 0.1});
        const auto gaps = biduality_gap(market, resolutions);
        for (double g : gaps) CHECK(std::fabs(g) < 1e-8);
    }
    SUBCASE("quadratic penalty gap decreases strictly to zero") {
        const auto market = two_state();
        const auto gaps = biduality_gap(market, resolutions);
        CHECK(gaps[0] > gaps[1]);
        CHECK(gaps[1] > gaps[2]);
        CHECK(gaps[2] < 0.05);
        CHECK(gaps[2] >= 0.0);
    }
    SUBCASE("non-convex penalty stalls at the convexification distance") {
        auto market = two_state();
        // two-well penalty in the up-probability, zero at p_ref
        market.penalty = [](std::span<const double> q) {
            const double u = q[0];
            const double a = 8.0 * (u - 0.5) * (u - 0.5);
            const double b = 0.3 + 8.0 * (u - 0.1) * (u - 0.1);
            return std::min(a, b);
        };
        const std::vector<int> fine = {10, 20, 40, 80};
        const auto gaps = biduality_gap(market, fine);

        // brute-force lower convex envelope on a dense 1-D grid
        const int n = 4001;
        std::vector<double> us(n), f(n);
        for (int i = 0; i < n; ++i) {
            us[i] = static_cast<double>(i) / (n - 1);
            const double a = 8.0 * (us[i] - 0.5) * (us[i] - 0.5);
            const double b = 0.3 + 8.0 * (us[i] - 0.1) * (us[i] - 0.1);
            f[i] = std::min(a, b);
        }
        std::vector<int> hull;  // indices of the lower envelope
        for (int i = 0; i < n; ++i) {
            while (hull.size() >= 2) {
                const int a = hull[hull.size() - 2], b = hull.back();
                const double cross = (us[b] - us[a]) * (f[i] - f[a]) -
                                     (us[i] - us[a]) * (f[b] - f[a]);
                if (cross >= 0.0) break;
                hull.pop_back();
            }
            hull.push_back(i);
        }
        double conv_dist = 0.0;
        std::size_t seg = 0;
        for (int i = 0; i < n; ++i) {
            while (seg + 1 < hull.size() && us[hull[seg + 1]] < us[i]) ++seg;
            const int a = hull[seg], b = hull[std::min(seg + 1, hull.size() - 1)];
            const double env =
                (a == b) ? f[a]
                         : f[a] + (f[b] - f[a]) * (us[i] - us[a]) / (us[b] - us[a]);
            conv_dist = std::max(conv_dist, f[i] - env);
        }
        CHECK(conv_dist > 0.05);
        CHECK(gaps.back() == doctest::Approx(conv_dist).epsilon(0.15));
        CHECK(gaps.back() > 0.5 * conv_dist);
    }
}

TEST_CASE("refining the simplex grid never lowers the risk measure") {
    const auto market = two_state();
    std::vector<std::vector<double>> payoff = {{0.3, -0.4}};
    double prev = -1e300;
    for (int r : {10, 20, 40}) {
        const auto rep = exact_risk_measure(market, payoff, SimplexGrid{r, 2});
        CHECK(rep.rho[0] >= prev - 1e-14);
        prev = rep.rho[0];
    }
}

TEST_CASE("market validation rejects malformed fixtures") {
    FiniteMarket bad;
    bad.p_ref = {0.5, 0.6};
    bad.s_T = {1.0, 1.0};
    bad.s0 = 1.0;
    bad.penalty = quadratic_penalty_table({0.5, 0.6}, 1.0);
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad.p_ref = {0.5, 0.5};
    CHECK_NOTHROW(bad.validate());
    bad.p_ref = {0.0, 1.0};
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("single-atom tilt bridges to the scenario simplex entropy") {
    // one period, one atom: a jump-intensity tilt maps to the truncated
    // Poisson count distribution, and three routes to the relative entropy
    // must agree: the deterministic control-space form, the simplex-table KL
    // on count outcomes, and the Monte Carlo estimate
    const std::pair<double, double> atoms[] = {{1.0, 1.0}};
    const auto model = build_levy_model(0.0, 0.5, atoms);
    const TimeGrid grid{1.0, 16};
    const double theta1 = 1.0;

    ControlPair ctrl;
    ctrl.theta0 = StepFunction::constant(0.0);
    ctrl.theta1 = JumpCoefficient::constant(theta1, 1);

    const double route_control = relative_entropy_exact(ctrl, model, grid);

    const double m_p = 0.5, m_q = (1.0 + theta1) * 0.5;
    std::vector<double> p(14), q(14);
    double fact = 1.0;
    for (int k = 0; k < 14; ++k) {
        if (k > 0) fact *= k;
        p[k] = std::exp(-m_p) * std::pow(m_p, k) / fact;
        q[k] = std::exp(-m_q) * std::pow(m_q, k) / fact;
    }
    const auto table = entropic_penalty_table(p);
    const double route_simplex = table(q);

    const auto bundle = simulate_paths(model, grid, 200000, 404);
    const auto route_mc = relative_entropy(ctrl, model, bundle);

    CHECK(route_control == doctest::Approx(m_p * ((1.0 + theta1) * std::log1p(theta1) - theta1))
                               .epsilon(1e-12));
    CHECK(route_simplex == doctest::Approx(route_control).epsilon(1e-6));
    CHECK(std::fabs(route_mc.value - route_control) <= 3.0 * route_mc.std_error);
}
