#pragma once

#include <cstddef>

// Data-parallel arithmetic kernels for the Monte Carlo inner loops.
//
// Every reduction uses a fixed 4-lane tree: lane l accumulates the elements
// with index i mod 4 == l in index order, and the final combine is
// (acc0 + acc1) + (acc2 + acc3). Multiply-accumulate is always fused
// (std::fma / vfmadd). Because the scalar reference and the vector variants
// implement the identical tree, their results agree bit for bit; the
// equivalence tests assert exactly that.

namespace levmax::simd {

struct Kernels {
    const char* name;
    // sum of a[0..n)
    double (*sum)(const double* a, std::size_t n);
    // dot product of a and b
    double (*dot)(const double* a, const double* b, std::size_t n);
    // sum of squared deviations from mu
    double (*sum_sq_dev)(const double* a, std::size_t n, double mu);
    // out[i] = a[i] + b[i]
    void (*add)(double* out, const double* a, const double* b, std::size_t n);
    // out[i] = a[i] + s * b[i]
    void (*add_scaled)(double* out, const double* a, double s, const double* b, std::size_t n);
};

const Kernels& scalar_kernels();

// Widest variant this build supports on the running CPU, or nullptr.
const Kernels* vector_kernels();

// Runtime-selected kernels. LEVMAX_KERNELS=scalar forces the reference path.
const Kernels& active_kernels();

}  // namespace levmax::simd
