#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "levmax/rng.hpp"

using namespace levmax;

TEST_CASE("streams are pure functions of (seed, stream, lane)") {
    Rng a(42, 7, 0), b(42, 7, 0), c(42, 8, 0), d(42, 7, 1);
    bool all_equal = true, stream_differs = false, lane_differs = false;
    for (int i = 0; i < 64; ++i) {
        const auto va = a.next_u64();
        all_equal &= (va == b.next_u64());
        stream_differs |= (va != c.next_u64());
        lane_differs |= (va != d.next_u64());
    }
    CHECK(all_equal);
    CHECK(stream_differs);
    CHECK(lane_differs);
}

TEST_CASE("inverse normal CDF hits tabled quantiles") {
    CHECK(inverse_normal_cdf(0.5) == doctest::Approx(0.0).epsilon(1e-15));
    CHECK(inverse_normal_cdf(0.975) == doctest::Approx(1.959963984540054).epsilon(1e-12));
    CHECK(inverse_normal_cdf(1e-10) == doctest::Approx(-6.361340902404056).epsilon(1e-9));
    CHECK_THROWS_AS(inverse_normal_cdf(0.0), std::invalid_argument);
}

TEST_CASE("normal moments") {
    Rng rng(123, 0, 0);
    const std::size_t n = 200000;
    double sum = 0.0, sum2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double z = rng.normal();
        sum += z;
        sum2 += z * z;
    }
    const double mean = sum / n;
    const double var = sum2 / n - mean * mean;
    CHECK(std::fabs(mean) < 3.0 / std::sqrt(static_cast<double>(n)));
    CHECK(var == doctest::Approx(1.0).epsilon(0.02));
}

TEST_CASE("poisson quantile inversion") {
    CHECK(Rng::poisson_quantile(0.0, 3.0) == 0);
    // CDF(0; mean=1) = e^-1 ~ 0.3679
    CHECK(Rng::poisson_quantile(0.36, 1.0) == 0);
    CHECK(Rng::poisson_quantile(0.37, 1.0) == 1);
    CHECK(Rng::poisson_quantile(0.5, 0.0) == 0);

    Rng rng(9, 1, 1);
    const std::size_t n = 100000;
    const double mean = 2.0;
    double sum = 0.0, sum2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const int k = rng.poisson(mean);
        sum += k;
        sum2 += static_cast<double>(k) * k;
    }
    const double m = sum / n;
    const double var = sum2 / n - m * m;
    CHECK(m == doctest::Approx(mean).epsilon(0.02));
    CHECK(var == doctest::Approx(mean).epsilon(0.05));
}
