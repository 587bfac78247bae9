#include "levmax/penalty.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace levmax {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

bool midpoint_convex(const std::function<double(double)>& f, double lo, double hi, int n,
                     std::string& detail, const char* name) {
    for (int k = 0; k < n; ++k) {
        const double a = lo + (hi - lo) * k / n;
        const double b = lo + (hi - lo) * (k + 2.0) / (n + 2.0);
        const double fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
        if (!std::isfinite(fa) || !std::isfinite(fb) || !std::isfinite(fm)) continue;
        if (fm > 0.5 * (fa + fb) + 1e-9 * (1.0 + std::fabs(fa) + std::fabs(fb))) {
            std::ostringstream os;
            os << name << " fails midpoint convexity near x=" << 0.5 * (a + b);
            detail = os.str();
            return false;
        }
    }
    return true;
}

}  // namespace

PenaltySpec::ValidationReport PenaltySpec::validate(double range_lo, double range_hi) const {
    ValidationReport rep;
    const double tol = 1e-12;
    if (std::fabs(h(0.0)) > tol || std::fabs(h0(0.0)) > tol || std::fabs(h1(0.0)) > tol) {
        rep.zero_at_zero = false;
        rep.detail = "h, h0, h1 must vanish at 0";
    }
    rep.convex = midpoint_convex(h, 0.0, std::max(range_hi, 0.5), 64, rep.detail, "h") &&
                 midpoint_convex(h0, range_lo, range_hi, 64, rep.detail, "h0") &&
                 midpoint_convex(h1, range_lo, range_hi, 64, rep.detail, "h1");
    for (int k = 0; k + 1 < 64 && rep.h_monotone; ++k) {
        const double a = range_hi * k / 64.0;
        const double b = range_hi * (k + 1) / 64.0;
        if (std::isfinite(h(a)) && std::isfinite(h(b)) && h(b) < h(a) - 1e-12) {
            rep.h_monotone = false;
            rep.detail = "h must be nondecreasing on R+";
        }
    }
    return rep;
}

PowerPenaltyParams PowerPenaltyParams::from(double q, double T, double c) {
    if (q == 0.0 || q >= 1.0)
        throw std::invalid_argument("power exponent must satisfy q in (-inf,1)\\{0}");
    if (!(T > 0.0) || !(c > 0.0)) throw std::invalid_argument("T and c must be > 0");
    PowerPenaltyParams params;
    params.q = q;
    params.p = q / (1.0 - q);
    params.kappa1 = std::max(1.0, 2.0 * (2.0 * params.p * params.p + params.p) * T);
    params.c = c;
    return params;
}

PenaltySpec make_power_penalty(double q, double T, double c, const JumpCoefficient& gamma) {
    const auto params = PowerPenaltyParams::from(q, T, c);
    PenaltySpec spec;
    const double kappa1 = params.kappa1;
    spec.h = [kappa1](double x) { return std::expm1(kappa1 * x * x); };
    spec.h0 = [](double x) { return std::fabs(x); };
    spec.h1 = [c](double x) { return std::fabs(x) / c; };
    spec.delta = [gamma](double t, std::size_t atom, double) {
        return std::fabs(gamma.at(t, atom));
    };
    spec.label = "power";
    return spec;
}

PenaltySpec make_log_penalty(double T) {
    if (!(T > 0.0)) throw std::invalid_argument("T must be > 0");
    PenaltySpec spec;
    spec.h = [](double x) { return x; };
    spec.h0 = [](double x) { return 0.5 * x * x; };
    spec.h1 = [](double x) {
        if (x > -1.0 && x < 0.0) return std::max(std::fabs(x), x * std::log1p(x));
        if (x >= 0.0) return x * (1.0 + x);
        return 0.0;
    };
    spec.delta = [](double, std::size_t, double) { return 1.0; };
    spec.label = "log";
    return spec;
}

PenaltySpec scale_penalty(const PenaltySpec& spec, double lam) {
    if (!(lam >= 0.0)) throw std::invalid_argument("penalty scale must be >= 0");
    PenaltySpec out = spec;
    auto h = spec.h;
    out.h = [h, lam](double x) { return lam * h(x); };
    return out;
}

PenaltyValue evaluate_penalty(const PenaltySpec& spec, const ControlPair& ctrl,
                              const MarketSpec& market, const LevyModel& model,
                              const TimeGrid& grid, const PathBundle*) {
    (void)market;
    ctrl.validate();
    const double dt = grid.dt();
    PenaltyValue out;
    double acc = 0.0;
    for (std::size_t i = 0; i < grid.n_steps; ++i) {
        const double t = grid.node(i);
        double inner = spec.h0(ctrl.theta0.at(t));
        for (std::size_t j = 0; j < model.n_atoms(); ++j)
            inner += spec.delta(t, j, model.jump_sizes[j]) * spec.h1(ctrl.theta1.at(t, j)) *
                     model.atom_mass(j);
        const double hv = spec.h(inner);
        if (!std::isfinite(hv)) {
            out.value = kInf;
            out.finite = false;
            std::ostringstream os;
            os << "penalty integrand not finite at t=" << t << " (inner=" << inner << ")";
            out.diagnostic = os.str();
            return out;
        }
        acc += hv * dt;
    }
    out.value = acc;
    out.finite = std::isfinite(acc);
    if (!out.finite) out.diagnostic = "penalty time integral overflowed";
    return out;
}

DominanceReport check_dominates_threshold(const PenaltySpec& spec, const PenaltySpec& reference,
                                          double range_lo, double range_hi) {
    DominanceReport rep;
    rep.h_ok = rep.h0_ok = rep.h1_ok = true;
    const int n = 256;
    const double tol = 1e-12;
    for (int k = 0; k <= n; ++k) {
        const double x = range_lo + (range_hi - range_lo) * k / n;
        if (x >= 0.0 && spec.h(x) < reference.h(x) - tol * (1.0 + std::fabs(reference.h(x)))) {
            if (rep.h_ok) {
                rep.h_ok = false;
                rep.witness_x = x;
                rep.which = "h";
            }
        }
        if (spec.h0(x) < reference.h0(x) - tol) {
            if (rep.h0_ok) {
                rep.h0_ok = false;
                if (!rep.witness_x) rep.witness_x = x;
                rep.which += rep.which.empty() ? "h0" : ",h0";
            }
        }
        if (x > -1.0 && spec.h1(x) < reference.h1(x) - tol) {
            if (rep.h1_ok) {
                rep.h1_ok = false;
                if (!rep.witness_x) rep.witness_x = x;
                rep.which += rep.which.empty() ? "h1" : ",h1";
            }
        }
    }
    rep.dominates = rep.h_ok && rep.h0_ok && rep.h1_ok;
    return rep;
}

IntegrabilityReport integrability_report(const ControlPair& ctrl, const LevyModel& model,
                                         const TimeGrid& grid, const PathBundle& paths_under_q) {
    ctrl.validate();
    IntegrabilityReport rep;
    const double dt = grid.dt();

    for (std::size_t i = 0; i < grid.n_steps; ++i) {
        const double t = grid.node(i);
        for (std::size_t j = 0; j < model.n_atoms(); ++j) {
            const double th1 = ctrl.theta1.at(t, j);
            const double m = model.atom_mass(j);
            rep.i_value += th1 * m * dt;
            const double one_plus = 1.0 + th1;
            rep.ii_value += (one_plus == 0.0 ? 0.0 : one_plus * std::log1p(th1)) * m * dt;
            rep.iv_rhs += (one_plus == 0.0 ? 0.0 : std::log1p(th1) * one_plus) * m * dt;
            rep.max_abs_log1p_theta1 =
                std::max(rep.max_abs_log1p_theta1, std::fabs(std::log1p(th1)));
        }
    }
    rep.i_finite = std::isfinite(rep.i_value);
    rep.ii_finite = std::isfinite(rep.ii_value);
    rep.flagged_large = rep.max_abs_log1p_theta1 > 10.0;

    const std::size_t np = paths_under_q.n_paths;
    std::vector<double> log_sum(np, 0.0), abs_log_sum(np, 0.0);
    for (std::size_t p = 0; p < np; ++p) {
        double ls = 0.0, ts = 0.0;
        for (const auto& e : paths_under_q.events_of(p)) {
            const double th1 = ctrl.theta1.at_left(e.time, e.atom);
            ls += std::log1p(th1);
            ts += th1;
        }
        log_sum[p] = ls;
        abs_log_sum[p] = std::fabs(ls);
        rep.v_max_abs = std::max(rep.v_max_abs, std::fabs(ts));
    }
    rep.iii_abs = mc_mean(abs_log_sum);
    rep.iv_lhs = mc_mean(log_sum);
    rep.iii_finite = std::isfinite(rep.iii_abs.value);
    rep.v_finite = std::isfinite(rep.v_max_abs);
    rep.iv_holds =
        std::fabs(rep.iv_lhs.value - rep.iv_rhs) <= 3.0 * rep.iv_lhs.std_error + 1e-12;
    return rep;
}

}  // namespace levmax
