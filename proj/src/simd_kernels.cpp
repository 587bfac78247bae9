#include "levmax/simd_kernels.hpp"

#include <cmath>
#include <cstdlib>
#include <cstring>

namespace levmax::simd {

namespace {

double sum_ref(const double* a, std::size_t n) {
    double acc[4] = {0.0, 0.0, 0.0, 0.0};
    for (std::size_t i = 0; i < n; ++i) acc[i & 3u] += a[i];
    return (acc[0] + acc[1]) + (acc[2] + acc[3]);
}

double dot_ref(const double* a, const double* b, std::size_t n) {
    double acc[4] = {0.0, 0.0, 0.0, 0.0};
    for (std::size_t i = 0; i < n; ++i) acc[i & 3u] = std::fma(a[i], b[i], acc[i & 3u]);
    return (acc[0] + acc[1]) + (acc[2] + acc[3]);
}

double sum_sq_dev_ref(const double* a, std::size_t n, double mu) {
    double acc[4] = {0.0, 0.0, 0.0, 0.0};
    for (std::size_t i = 0; i < n; ++i) {
        const double d = a[i] - mu;
        acc[i & 3u] = std::fma(d, d, acc[i & 3u]);
    }
    return (acc[0] + acc[1]) + (acc[2] + acc[3]);
}

void add_ref(double* out, const double* a, const double* b, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = a[i] + b[i];
}

void add_scaled_ref(double* out, const double* a, double s, const double* b, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = std::fma(s, b[i], a[i]);
}

const Kernels kScalar = {"scalar", sum_ref, dot_ref, sum_sq_dev_ref, add_ref, add_scaled_ref};

}  // namespace

const Kernels& scalar_kernels() { return kScalar; }

#if !defined(LEVMAX_BUILD_AVX2)
const Kernels* vector_kernels() { return nullptr; }
#endif

const Kernels& active_kernels() {
    static const Kernels* chosen = [] {
        if (const char* env = std::getenv("LEVMAX_KERNELS")) {
            if (std::strcmp(env, "scalar") == 0) return &kScalar;
        }
        const Kernels* v = vector_kernels();
        return v ? v : &kScalar;
    }();
    return *chosen;
}

}  // namespace levmax::simd
