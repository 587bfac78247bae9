#include "levmax/simd_kernels.hpp"

#include <immintrin.h>

#include <cmath>

// AVX2 variants. The vector accumulator holds the four reduction lanes, so
// lane l sees exactly the elements i mod 4 == l in index order; scalar tails
// are folded into the matching lane before the final combine. This keeps the
// results bit-identical to the scalar reference.

namespace levmax::simd {

namespace {

inline double combine(__m256d acc, const double* a, std::size_t i, std::size_t n) {
    alignas(32) double lanes[4];
    _mm256_store_pd(lanes, acc);
    for (; i < n; ++i) lanes[i & 3u] += a[i];
    return (lanes[0] + lanes[1]) + (lanes[2] + lanes[3]);
}

double sum_avx2(const double* a, std::size_t n) {
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) acc = _mm256_add_pd(acc, _mm256_loadu_pd(a + i));
    return combine(acc, a, i, n);
}

double dot_avx2(const double* a, const double* b, std::size_t n) {
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        acc = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc);
    alignas(32) double lanes[4];
    _mm256_store_pd(lanes, acc);
    for (; i < n; ++i) lanes[i & 3u] = std::fma(a[i], b[i], lanes[i & 3u]);
    return (lanes[0] + lanes[1]) + (lanes[2] + lanes[3]);
}

double sum_sq_dev_avx2(const double* a, std::size_t n, double mu) {
    const __m256d vmu = _mm256_set1_pd(mu);
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d d = _mm256_sub_pd(_mm256_loadu_pd(a + i), vmu);
        acc = _mm256_fmadd_pd(d, d, acc);
    }
    alignas(32) double lanes[4];
    _mm256_store_pd(lanes, acc);
    for (; i < n; ++i) {
        const double d = a[i] - mu;
        lanes[i & 3u] = std::fma(d, d, lanes[i & 3u]);
    }
    return (lanes[0] + lanes[1]) + (lanes[2] + lanes[3]);
}

void add_avx2(double* out, const double* a, const double* b, std::size_t n) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(out + i, _mm256_add_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
    for (; i < n; ++i) out[i] = a[i] + b[i];
}

void add_scaled_avx2(double* out, const double* a, double s, const double* b, std::size_t n) {
    const __m256d vs = _mm256_set1_pd(s);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(out + i,
                         _mm256_fmadd_pd(vs, _mm256_loadu_pd(b + i), _mm256_loadu_pd(a + i)));
    for (; i < n; ++i) out[i] = std::fma(s, b[i], a[i]);
}

const Kernels kAvx2 = {"avx2", sum_avx2, dot_avx2, sum_sq_dev_avx2, add_avx2, add_scaled_avx2};

}  // namespace

const Kernels* vector_kernels() {
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma") ? &kAvx2 : nullptr;
}

}  // namespace levmax::simd
