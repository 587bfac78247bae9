#include "levmax/utility.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>
#include <stdexcept>

namespace levmax {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Golden-section maximization of a concave function on [lo, hi].
double golden_max(const std::function<double(double)>& f, double lo, double hi, double tol,
                  double* arg = nullptr) {
    const double invphi = 0.6180339887498949;
    double a = lo, b = hi;
    double c = b - invphi * (b - a);
    double d = a + invphi * (b - a);
    double fc = f(c), fd = f(d);
    while (b - a > tol * (1.0 + std::fabs(a) + std::fabs(b))) {
        if (fc > fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - invphi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + invphi * (b - a);
            fd = f(d);
        }
    }
    const double x = 0.5 * (a + b);
    if (arg) *arg = x;
    return f(x);
}

// Fritsch-Carlson monotone cubic through (x_i, y_i), x ascending.
class MonotoneCubic {
  public:
    MonotoneCubic() = default;
    MonotoneCubic(std::vector<double> x, std::vector<double> y)
        : x_(std::move(x)), y_(std::move(y)) {
        const std::size_t n = x_.size();
        slopes_.assign(n, 0.0);
        if (n < 2) return;
        std::vector<double> d(n - 1);
        for (std::size_t i = 0; i + 1 < n; ++i) d[i] = (y_[i + 1] - y_[i]) / (x_[i + 1] - x_[i]);
        slopes_[0] = d[0];
        slopes_[n - 1] = d[n - 2];
        for (std::size_t i = 1; i + 1 < n; ++i)
            slopes_[i] = (d[i - 1] * d[i] <= 0.0) ? 0.0 : 0.5 * (d[i - 1] + d[i]);
        for (std::size_t i = 0; i + 1 < n; ++i) {
            if (d[i] == 0.0) {
                slopes_[i] = slopes_[i + 1] = 0.0;
                continue;
            }
            const double a = slopes_[i] / d[i];
            const double b = slopes_[i + 1] / d[i];
            const double s = a * a + b * b;
            if (s > 9.0) {
                const double t = 3.0 / std::sqrt(s);
                slopes_[i] = t * a * d[i];
                slopes_[i + 1] = t * b * d[i];
            }
        }
    }

    double operator()(double x) const {
        const std::size_t n = x_.size();
        if (n == 0) return 0.0;
        if (x <= x_.front()) return y_.front() + slopes_.front() * (x - x_.front());
        if (x >= x_.back()) return y_.back() + slopes_.back() * (x - x_.back());
        auto it = std::upper_bound(x_.begin(), x_.end(), x);
        const std::size_t i = static_cast<std::size_t>(it - x_.begin()) - 1;
        const double h = x_[i + 1] - x_[i];
        const double t = (x - x_[i]) / h;
        const double t2 = t * t, t3 = t2 * t;
        return y_[i] * (2 * t3 - 3 * t2 + 1) + h * slopes_[i] * (t3 - 2 * t2 + t) +
               y_[i + 1] * (-2 * t3 + 3 * t2) + h * slopes_[i + 1] * (t3 - t2);
    }

    double derivative(double x) const {
        const std::size_t n = x_.size();
        if (n == 0) return 0.0;
        if (x <= x_.front()) return slopes_.front();
        if (x >= x_.back()) return slopes_.back();
        auto it = std::upper_bound(x_.begin(), x_.end(), x);
        const std::size_t i = static_cast<std::size_t>(it - x_.begin()) - 1;
        const double h = x_[i + 1] - x_[i];
        const double t = (x - x_[i]) / h;
        const double t2 = t * t;
        return (y_[i] * (6 * t2 - 6 * t) + h * slopes_[i] * (3 * t2 - 4 * t + 1) +
                y_[i + 1] * (-6 * t2 + 6 * t) + h * slopes_[i + 1] * (3 * t2 - 2 * t)) /
               h;
    }

  private:
    std::vector<double> x_, y_;
    std::vector<double> slopes_;
};

}  // namespace

UtilitySpec make_power_utility(double q) {
    if (q == 0.0 || q >= 1.0)
        throw std::invalid_argument("power utility needs q in (-inf,1)\\{0}");
    UtilitySpec spec;
    spec.kind = UtilitySpec::Kind::power;
    spec.q = q;
    const double p = q / (1.0 - q);
    const double floor = spec.domain_floor;
    spec.u = [q, floor](double x) { return x < floor ? -kInf : std::pow(x, q) / q; };
    spec.u_prime = [q, floor](double x) {
        return x < floor ? kInf : std::pow(x, q - 1.0);
    };
    spec.v = [p](double y) { return std::pow(y, -p) / p; };
    spec.v_prime = [p](double y) { return -std::pow(y, -p - 1.0); };
    return spec;
}

UtilitySpec make_log_utility() {
    UtilitySpec spec;
    spec.kind = UtilitySpec::Kind::log;
    const double floor = spec.domain_floor;
    spec.u = [floor](double x) { return x < floor ? -kInf : std::log(x); };
    spec.u_prime = [floor](double x) { return x < floor ? kInf : 1.0 / x; };
    spec.v = [](double y) { return -std::log(y) - 1.0; };
    spec.v_prime = [](double y) { return -1.0 / y; };
    return spec;
}

UtilitySpec make_custom_utility(std::function<double(double)> u,
                                std::function<double(double)> u_prime, double x_lo,
                                double x_hi) {
    if (!(x_lo > 0.0) || !(x_hi > x_lo)) throw std::invalid_argument("bad custom utility range");
    UtilitySpec spec;
    spec.kind = UtilitySpec::Kind::custom;
    const double floor = spec.domain_floor;
    auto raw_u = u;
    spec.u = [raw_u, floor](double x) { return x < floor ? -kInf : raw_u(x); };
    spec.u_prime = std::move(u_prime);

    // Conjugate cache: y grid spanning u'(x_hi) .. u'(x_lo).
    const double y_lo = std::max(1e-300, spec.u_prime(x_hi));
    const double y_hi = std::max(y_lo * 2.0, spec.u_prime(x_lo));
    const std::size_t n = 1024;
    std::vector<double> ly(n), vv(n), xstar(n);
    const double l0 = std::log(y_lo), l1 = std::log(y_hi);
    for (std::size_t k = 0; k < n; ++k) {
        const double y = std::exp(l0 + (l1 - l0) * static_cast<double>(k) / (n - 1));
        double arg = 0.0;
        const double val = golden_max([&](double x) { return raw_u(x) - x * y; }, x_lo, x_hi,
                                      1e-12, &arg);
        ly[k] = std::log(y);
        vv[k] = val;
        xstar[k] = arg;
    }
    auto v_interp = std::make_shared<MonotoneCubic>(ly, vv);
    auto x_interp = std::make_shared<MonotoneCubic>(ly, xstar);
    spec.v = [v_interp](double y) { return (*v_interp)(std::log(y)); };
    spec.v_prime = [x_interp](double y) { return -(*x_interp)(std::log(y)); };
    return spec;
}

UtilitySpec make_table_utility(std::vector<double> xs, std::vector<double> us) {
    if (xs.size() < 4 || xs.size() != us.size())
        throw std::invalid_argument("utility table needs >= 4 (x, u) pairs");
    if (!std::is_sorted(xs.begin(), xs.end()) || xs.front() <= 0.0)
        throw std::invalid_argument("utility table x values must be positive ascending");
    std::vector<double> lx(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) lx[i] = std::log(xs[i]);
    auto interp = std::make_shared<MonotoneCubic>(std::move(lx), std::move(us));
    auto u = [interp](double x) { return (*interp)(std::log(x)); };
    auto up = [interp](double x) { return interp->derivative(std::log(x)) / x; };
    return make_custom_utility(u, up, xs.front(), xs.back());
}

UtilitySpec::ValidationReport UtilitySpec::validate(double x_lo, double x_hi) const {
    ValidationReport rep;
    const int n = 64;
    std::vector<double> xs(n);
    for (int k = 0; k < n; ++k)
        xs[k] = std::exp(std::log(x_lo) + (std::log(x_hi) - std::log(x_lo)) * k / (n - 1));
    for (int k = 0; k + 1 < n && (rep.increasing || rep.concave); ++k) {
        if (u(xs[k + 1]) <= u(xs[k])) {
            rep.increasing = false;
            rep.detail = "u not strictly increasing";
        }
        if (u_prime(xs[k + 1]) >= u_prime(xs[k])) {
            rep.concave = false;
            rep.detail = "u' not strictly decreasing";
        }
    }
    // Inada probes at the range endpoints: u' blows up near 0, dies at infinity.
    rep.inada = u_prime(x_lo) > 1e2 * u_prime(1.0) && u_prime(x_hi) < 1e-2 * u_prime(1.0);
    if (!rep.inada) rep.detail = "Inada endpoint probes failed";
    for (int k = 0; k < n && rep.conjugate_consistent; k += 7) {
        const double x = xs[k];
        const double y = u_prime(x);
        if (!(y > 0.0) || !std::isfinite(y)) continue;
        const double gap = v(y) - (u(x) - x * y);
        if (gap < -1e-8 * (1.0 + std::fabs(v(y)))) {
            rep.conjugate_consistent = false;
            rep.detail = "Fenchel-Young violated at sampled (x, u'(x))";
        }
    }
    return rep;
}

AeReport asymptotic_elasticity(const UtilitySpec& util, double x_max) {
    AeReport rep;
    const double tail_lo = x_max / 1e3;
    const int per_decade = 16;
    bool any_positive = false;
    double sup = -kInf;
    for (int d = 0; d < 3; ++d) {
        const double lo = tail_lo * std::pow(10.0, d);
        double dsup = -kInf;
        for (int k = 0; k < per_decade; ++k) {
            const double x = lo * std::pow(10.0, static_cast<double>(k) / per_decade);
            const double ux = util.u(x);
            if (!(ux > 0.0)) continue;
            any_positive = true;
            dsup = std::max(dsup, x * util.u_prime(x) / ux);
        }
        rep.decade_sup[d] = dsup;
        sup = std::max(sup, dsup);
    }
    const double u_max = util.u(x_max);
    rep.applicable = any_positive;
    rep.tail_sup = any_positive ? sup : 0.0;
    rep.ratio_at_max = (u_max > 0.0) ? x_max * util.u_prime(x_max) / u_max : 0.0;
    return rep;
}

ExtendedExpectation extended_expectation(std::span<const double> payoff,
                                         std::span<const double> weights) {
    const std::size_t n = payoff.size();
    if (n == 0) throw std::invalid_argument("extended_expectation needs a nonempty sample");
    if (!weights.empty() && weights.size() != n)
        throw std::invalid_argument("weights size mismatch");

    double wsum = 0.0;
    bool has_inf = false;
    double max_v = -kInf;
    for (std::size_t i = 0; i < n; ++i) {
        const double x = payoff[i];
        if (std::isnan(x)) throw std::invalid_argument("payoff contains NaN");
        const double w = weights.empty() ? 1.0 : weights[i];
        if (!(w >= 0.0)) throw std::invalid_argument("weights must be >= 0");
        if (w == 0.0) continue;
        wsum += w;
        if (x == kInf) has_inf = true;
        if (x == -kInf) {
            ExtendedExpectation out;
            out.value = -kInf;
            return out;
        }
        max_v = std::max(max_v, x);
    }
    if (wsum <= 0.0) throw std::invalid_argument("weights must not all vanish");

    ExtendedExpectation out;
    constexpr double kCap = 1152921504606846976.0;  // 2^60
    if (!has_inf && max_v < kCap) {
        // The ladder is exactly flat once 2^k exceeds the sample maximum, so
        // its supremum is the plain weighted mean.
        double acc = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            acc += (weights.empty() ? 1.0 : weights[i]) * payoff[i];
        out.value = acc / wsum;
        out.levels_used = std::max(1, static_cast<int>(std::ceil(std::log2(std::max(
                                       2.0, max_v)))));
        return out;
    }

    // Heavy upper tail: walk the doubling ladder on the sorted sample.
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&payoff](std::size_t a, std::size_t b) { return payoff[a] < payoff[b]; });
    // prefix sums of w*x and suffix sums of w; the suffix avoids the
    // catastrophic cancellation of (total - prefix) for tiny tails
    std::vector<double> cwx(n + 1, 0.0), tail_w(n + 1, 0.0);
    for (std::size_t k = 0; k < n; ++k) {
        const double w = weights.empty() ? 1.0 : weights[order[k]];
        cwx[k + 1] = cwx[k] + (std::isfinite(payoff[order[k]]) ? w * payoff[order[k]] : 0.0);
    }
    for (std::size_t k = n; k-- > 0;) {
        const double w = weights.empty() ? 1.0 : weights[order[k]];
        tail_w[k] = tail_w[k + 1] + w;
    }
    double prev = -kInf;
    for (int level = 0; level <= 60; ++level) {
        const double cap = std::ldexp(1.0, level);
        // last sorted index with value <= cap
        std::size_t idx = static_cast<std::size_t>(
            std::upper_bound(order.begin(), order.end(), cap,
                             [&payoff](double c, std::size_t i) { return c < payoff[i]; }) -
            order.begin());
        const double val = (cwx[idx] + cap * tail_w[idx]) / wsum;
        out.levels_used = level + 1;
        if (level > 0) {
            const double inc = val - prev;
            if (inc <= 1e-10 * std::max(1.0, std::fabs(val))) {
                out.value = std::max(val, prev);
                return out;
            }
        }
        prev = std::max(val, prev);
    }
    out.value = kInf;
    out.diverged = true;
    return out;
}

}  // namespace levmax
