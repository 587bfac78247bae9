#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "levmax/rng.hpp"
#include "levmax/utility.hpp"

using namespace levmax;

namespace {

// Independent conjugate evaluation: coarse scan + ternary refinement of
// U(x) - x y over a wide bracket.
double conjugate_by_search(const UtilitySpec& util, double y) {
    double best = -1e300, best_x = 1.0;
    for (int k = 0; k <= 4000; ++k) {
        const double x = std::exp(-12.0 + 24.0 * k / 4000.0);
        const double v = util.u(x) - x * y;
        if (v > best) {
            best = v;
            best_x = x;
        }
    }
    double lo = best_x / 2.0, hi = best_x * 2.0;
    for (int it = 0; it < 200; ++it) {
        const double m1 = lo + (hi - lo) / 3.0, m2 = hi - (hi - lo) / 3.0;
        if (util.u(m1) - m1 * y < util.u(m2) - m2 * y)
            lo = m1;
        else
            hi = m2;
    }
    const double x = 0.5 * (lo + hi);
    return util.u(x) - x * y;
}

}  // namespace

TEST_CASE("power conjugates in closed form") {
    const auto u_neg = make_power_utility(-1.0);
    // p = -1/2: V(y) = -2 sqrt(y) <= 0
    CHECK(u_neg.v(1.0) == doctest::Approx(-2.0));
    CHECK(u_neg.v(4.0) == doctest::Approx(-4.0));
    CHECK(u_neg.v(0.25) <= 0.0);

    const auto u_half = make_power_utility(0.5);
    CHECK(u_half.v(1.0) == doctest::Approx(1.0));
    CHECK(u_half.v(2.0) == doctest::Approx(0.5));
    CHECK(u_half.v(1.0) == doctest::Approx(conjugate_by_search(u_half, 1.0)).epsilon(1e-8));

    CHECK_THROWS_AS(make_power_utility(0.0), std::invalid_argument);
    CHECK_THROWS_AS(make_power_utility(1.5), std::invalid_argument);
}

TEST_CASE("log conjugate and saddle inversion") {
    const auto util = make_log_utility();
    CHECK(util.v(1.0) == doctest::Approx(-1.0));
    CHECK(-util.v_prime(4.0) == doctest::Approx(0.25));
    // bidual at x = 2: min_y { -log y - 1 + 2y } = log 2 at y = 1/2
    double best = 1e300;
    for (int k = 0; k <= 200000; ++k) {
        const double y = 1e-3 + (4.0 - 1e-3) * k / 200000.0;
        best = std::min(best, util.v(y) + 2.0 * y);
    }
    CHECK(best == doctest::Approx(std::log(2.0)).epsilon(1e-8));
    // X* = -V'(y) inverts U'
    for (double y : {0.5, 1.0, 3.0})
        CHECK(util.u_prime(-util.v_prime(y)) == doctest::Approx(y).epsilon(1e-12));
}

TEST_CASE("bidual recovery for the power family") {
    const auto util = make_power_utility(0.5);
    for (double x : {0.5, 1.0, 2.0}) {
        double best = 1e300;
        for (int k = 0; k <= 400000; ++k) {
            const double y = std::exp(-6.0 + 12.0 * k / 400000.0);
            best = std::min(best, util.v(y) + x * y);
        }
        CHECK(best == doctest::Approx(util.u(x)).epsilon(1e-8));
    }
}

TEST_CASE("Fenchel-Young on sampled pairs with equality at y = u'(x)") {
    Rng rng(5, 0, 0);
    for (const auto& util : {make_log_utility(), make_power_utility(-1.0),
                             make_power_utility(0.5)}) {
        for (int k = 0; k < 200; ++k) {
            const double x = std::exp(6.0 * rng.uniform01() - 3.0);
            const double y = std::exp(6.0 * rng.uniform01() - 3.0);
            CHECK(util.u(x) <= util.v(y) + x * y + 1e-12);
            const double ys = util.u_prime(x);
            CHECK(util.u(x) == doctest::Approx(util.v(ys) + x * ys).epsilon(1e-8));
        }
    }
}

TEST_CASE("conjugate is decreasing and convex; endpoint slopes match theory") {
    for (const auto& util : {make_log_utility(), make_power_utility(0.5)}) {
        std::vector<double> ys, vs;
        for (int k = 0; k <= 64; ++k) ys.push_back(std::exp(-4.0 + 8.0 * k / 64.0));
        for (double y : ys) vs.push_back(util.v(y));
        for (std::size_t i = 0; i + 1 < ys.size(); ++i) CHECK(vs[i + 1] < vs[i]);
        for (std::size_t i = 1; i + 1 < ys.size(); ++i) {
            const double left = (vs[i] - vs[i - 1]) / (ys[i] - ys[i - 1]);
            const double right = (vs[i + 1] - vs[i]) / (ys[i + 1] - ys[i]);
            CHECK(left <= right + 1e-10);
        }
        CHECK(util.v_prime(1e-10) < -1e4);
        CHECK(std::fabs(util.v_prime(1e10)) < 1e-9);
    }
}

TEST_CASE("utility validation accepts the stock utilities") {
    CHECK(make_log_utility().validate().ok());
    CHECK(make_power_utility(0.5).validate().ok());
    CHECK(make_power_utility(-2.0).validate().ok());
}

TEST_CASE("custom utility via numeric conjugation approximates log") {
    const auto util = make_custom_utility([](double x) { return std::log(x); },
                                          [](double x) { return 1.0 / x; }, 1e-6, 1e6);
    for (double y : {0.05, 0.3, 1.0, 4.0, 20.0}) {
        CHECK(util.v(y) == doctest::Approx(-std::log(y) - 1.0).epsilon(1e-5));
        CHECK(util.v_prime(y) == doctest::Approx(-1.0 / y).epsilon(1e-4));
    }
}

TEST_CASE("table utility reproduces its source") {
    std::vector<double> xs, us;
    for (int k = 0; k <= 64; ++k) {
        const double x = std::exp(-4.0 + 8.0 * k / 64.0);
        xs.push_back(x);
        us.push_back(2.0 * std::sqrt(x));  // power q = 1/2
    }
    const auto util = make_table_utility(xs, us);
    CHECK(util.u(1.0) == doctest::Approx(2.0).epsilon(1e-6));
    CHECK(util.u_prime(1.0) == doctest::Approx(1.0).epsilon(1e-3));
}

TEST_CASE("asymptotic elasticity estimates") {
    const auto ae_half = asymptotic_elasticity(make_power_utility(0.5));
    CHECK(ae_half.applicable);
    CHECK(ae_half.tail_sup == doctest::Approx(0.5).epsilon(1e-6));

    const auto ae_log = asymptotic_elasticity(make_log_utility());
    CHECK(ae_log.applicable);
    CHECK(ae_log.ratio_at_max == doctest::Approx(1.0 / std::log(1e8)).epsilon(1e-10));
    CHECK(ae_log.decade_sup[0] > ae_log.decade_sup[1]);
    CHECK(ae_log.decade_sup[1] > ae_log.decade_sup[2]);
    CHECK(ae_log.tail_sup < 0.09);

    const auto ae_neg = asymptotic_elasticity(make_power_utility(-1.0));
    CHECK_FALSE(ae_neg.applicable);
}

TEST_CASE("extended expectation: bounded payoffs, monotone ladder, divergence") {
    SUBCASE("bounded payoff equals the plain mean") {
        std::vector<double> payoff = {1.0, 2.0, 3.0, 4.0};
        const auto e = extended_expectation(payoff);
        CHECK_FALSE(e.diverged);
        CHECK(e.value == doctest::Approx(2.5));
    }
    SUBCASE("negative-infinite payoff short-circuits to -inf") {
        std::vector<double> payoff = {1.0, -std::numeric_limits<double>::infinity()};
        const auto e = extended_expectation(payoff);
        CHECK(std::isinf(e.value));
        CHECK(e.value < 0.0);
        CHECK_FALSE(e.diverged);
    }
    SUBCASE("weights select the support") {
        std::vector<double> payoff = {1.0, 100.0};
        std::vector<double> weights = {1.0, 0.0};
        CHECK(extended_expectation(payoff, weights).value == doctest::Approx(1.0));
    }
    SUBCASE("Gaussian-tail fixture with divergent mean never stabilizes") {
        // payoff exp(z^2/2) against the normal density: the integrand is
        // constant 1/sqrt(2 pi) per unit z, so truncated means grow without
        // bound; a stratified z grid up to 60 keeps mass at every ladder level
        std::vector<double> payoff, weights;
        const int n = 20000;
        const double z_max = 60.0;
        for (int k = 0; k < n; ++k) {
            const double z = z_max * (k + 0.5) / n;
            payoff.push_back(std::exp(0.5 * z * z));
            weights.push_back(std::exp(-0.5 * z * z));
        }
        const auto e = extended_expectation(payoff, weights);
        CHECK(e.diverged);
        CHECK(std::isinf(e.value));
        CHECK(e.levels_used == 61);
    }
    SUBCASE("ladder values are nondecreasing for a heavy but finite tail") {
        std::vector<double> payoff, weights;
        for (int k = 0; k < 2000; ++k) {
            const double u = (k + 0.5) / 2000.0;
            payoff.push_back(1.0 / ((1.0 - u) * (1.0 - u)));
            weights.push_back(1.0);
        }
        const auto e = extended_expectation(payoff, weights);
        CHECK_FALSE(e.diverged);
        CHECK(e.value > 0.0);
    }
}
