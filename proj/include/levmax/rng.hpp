#pragma once

#include <cstdint>

namespace levmax {

/// Counter-derived per-path random stream (xoshiro256++ seeded by splitmix64).
///
/// The state is a pure function of (seed, stream, lane), so a path's draws do
/// not depend on how work is scheduled across threads. Lane 0 is used for
/// Brownian increments and lane 1 for jump sampling; separate lanes keep the
/// Brownian draws aligned across measure tilts that alter jump counts.
class Rng {
  public:
    Rng(std::uint64_t seed, std::uint64_t stream, std::uint64_t lane);

    std::uint64_t next_u64();
    /// Uniform on [0, 1), 53 random bits.
    double uniform01();
    /// Uniform on (0, 1), strictly interior.
    double uniform_open();
    /// Standard normal via the inverse-CDF transform.
    double normal();
    /// Poisson draw by single-uniform quantile inversion (correlates draws
    /// across nearby intensities).
    int poisson(double mean);

    static int poisson_quantile(double u, double mean);

  private:
    std::uint64_t s_[4];
};

/// High-accuracy inverse of the standard normal CDF (Wichura's algorithm).
double inverse_normal_cdf(double p);

}  // namespace levmax
