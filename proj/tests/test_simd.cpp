#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstring>
#include <random>
#include <vector>

#include "levmax/simd_kernels.hpp"

using namespace levmax;

namespace {

std::vector<double> random_vec(std::size_t n, unsigned seed) {
    std::mt19937_64 gen(seed);
    std::normal_distribution<double> dist(0.0, 1.0);
    std::vector<double> v(n);
    for (auto& x : v) x = dist(gen);
    return v;
}

bool bits_equal(double a, double b) {
    std::uint64_t ua, ub;
    std::memcpy(&ua, &a, 8);
    std::memcpy(&ub, &b, 8);
    return ua == ub;
}

}  // namespace

TEST_CASE("scalar reference kernels compute exact small cases") {
    const auto& k = simd::scalar_kernels();
    const double a[5] = {1.0, 2.0, 3.0, 4.0, 5.0};
    const double b[5] = {2.0, 2.0, 2.0, 2.0, 2.0};
    CHECK(k.sum(a, 5) == 15.0);
    CHECK(k.dot(a, b, 5) == 30.0);
    CHECK(k.sum_sq_dev(a, 5, 3.0) == 10.0);
    double out[5];
    k.add(out, a, b, 5);
    CHECK(out[4] == 7.0);
    k.add_scaled(out, a, -1.0, b, 5);
    CHECK(out[0] == -1.0);
}

TEST_CASE("vector kernels agree with the scalar reference bit for bit") {
    const auto* vec = simd::vector_kernels();
    if (vec == nullptr) {
        MESSAGE("no vector kernel variant on this CPU; skipping equivalence checks");
        return;
    }
    const auto& ref = simd::scalar_kernels();
    for (std::size_t n : {1u, 2u, 3u, 4u, 5u, 7u, 8u, 63u, 64u, 65u, 1000u, 4097u}) {
        const auto a = random_vec(n, 11 + static_cast<unsigned>(n));
        const auto b = random_vec(n, 77 + static_cast<unsigned>(n));
        CAPTURE(n);
        CHECK(bits_equal(ref.sum(a.data(), n), vec->sum(a.data(), n)));
        CHECK(bits_equal(ref.dot(a.data(), b.data(), n), vec->dot(a.data(), b.data(), n)));
        CHECK(bits_equal(ref.sum_sq_dev(a.data(), n, 0.125),
                         vec->sum_sq_dev(a.data(), n, 0.125)));
        std::vector<double> o1(n), o2(n);
        ref.add(o1.data(), a.data(), b.data(), n);
        vec->add(o2.data(), a.data(), b.data(), n);
        for (std::size_t i = 0; i < n; ++i) CHECK(bits_equal(o1[i], o2[i]));
        ref.add_scaled(o1.data(), a.data(), 0.37, b.data(), n);
        vec->add_scaled(o2.data(), a.data(), 0.37, b.data(), n);
        for (std::size_t i = 0; i < n; ++i) CHECK(bits_equal(o1[i], o2[i]));
    }
}

TEST_CASE("active kernels honor the LEVMAX_KERNELS override") {
    const auto& k = simd::active_kernels();
    CHECK((std::strcmp(k.name, "scalar") == 0 || std::strcmp(k.name, "avx2") == 0));
}
