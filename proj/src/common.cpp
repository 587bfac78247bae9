#include "levmax/common.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>

#include "levmax/simd_kernels.hpp"

namespace levmax {

McEstimate mc_mean(std::span<const double> sample) {
    const auto& k = simd::active_kernels();
    const std::size_t n = sample.size();
    if (n == 0) return {};
    const double mean = k.sum(sample.data(), n) / static_cast<double>(n);
    if (n == 1) return {mean, 0.0, 1};
    const double m2 = k.sum_sq_dev(sample.data(), n, mean);
    const double var = m2 / static_cast<double>(n - 1);
    return {mean, std::sqrt(var / static_cast<double>(n)), n};
}

unsigned worker_count() {
    if (const char* env = std::getenv("LEVMAX_WORKERS")) {
        const long v = std::strtol(env, nullptr, 10);
        if (v >= 1) return static_cast<unsigned>(v);
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw > 0 ? hw : 1;
}

void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& body) {
    const unsigned workers = std::min<std::size_t>(worker_count(), std::max<std::size_t>(n, 1));
    if (workers <= 1 || n < 1024) {
        body(0, n);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(workers);
    const std::size_t chunk = (n + workers - 1) / workers;
    for (unsigned w = 0; w < workers; ++w) {
        const std::size_t lo = std::min(n, static_cast<std::size_t>(w) * chunk);
        const std::size_t hi = std::min(n, lo + chunk);
        if (lo >= hi) break;
        pool.emplace_back([&body, lo, hi] { body(lo, hi); });
    }
    for (auto& t : pool) t.join();
}

}  // namespace levmax
