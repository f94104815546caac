#include "quadpost/rho_integral.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "quadpost/errors.hpp"
#include "quadpost/quadrature.hpp"

namespace quadpost {

namespace {

// Bisects log psi(rho) = target on [a, b] with f(a) > target >= f(b) or the
// reverse; returns the endpoint on the <= target side.
double bisect_to_target(double a, double b, double c, double n, double target,
                        bool decreasing_right) {
    for (int iter = 0; iter < 200; ++iter) {
        double mid = 0.5 * (a + b);
        if (mid <= a || mid >= b) break;
        double v = log_rho_integrand(mid, c, n);
        if (decreasing_right) {
            // f decreasing on [a, b]; root where f crosses target from above.
            if (v > target) {
                a = mid;
            } else {
                b = mid;
            }
        } else {
            // f increasing on [a, b].
            if (v < target) {
                a = mid;
            } else {
                b = mid;
            }
        }
    }
    return decreasing_right ? b : a;
}

}  // namespace

double log_rho_integrand(double rho, double c, double n) {
    return (2.0 - n) * std::log(rho) - 0.5 * rho * rho - 0.5 * c / (rho * rho);
}

double rho_peak(double c, double n) {
    // rho^2 solves x^2 + (n-2) x - c = 0. For n >= 2 use the conjugate form
    // to avoid cancellation when c << (n-2)^2.
    const double nm2 = n - 2.0;
    const double disc = std::sqrt(4.0 * c + nm2 * nm2);
    double x;
    if (nm2 >= 0.0) {
        x = (c == 0.0) ? 0.0 : 2.0 * c / (disc + nm2);
    } else {
        x = 0.5 * (disc - nm2);
    }
    return std::sqrt(x);
}

RhoBounds rho_bounds(double c, double n, double drop_factor) {
    if (c < 0.0) {
        throw InvalidInterval("rho_bounds requires c >= 0");
    }
    if (!(drop_factor > 1.0)) {
        throw InvalidInterval("rho_bounds requires drop_factor > 1");
    }
    const double log_drop = std::log(drop_factor);
    RhoBounds out;
    const double rmax = rho_peak(c, n);

    double anchor;       // reference point for the peak value
    double log_peak;
    double seed_width;
    if (rmax > 0.0) {
        anchor = rmax;
        log_peak = log_rho_integrand(rmax, c, n);
        // Second derivative of log psi at the peak (Laplace curvature).
        const double r2 = rmax * rmax;
        const double s = -1.0 - 3.0 * c / (r2 * r2) + (n - 2.0) / r2;
        seed_width = (s < 0.0) ? 40.0 / std::sqrt(-s) : 40.0;
    } else {
        // c == 0 and n >= 2: psi decreases from the origin. For n == 2 the
        // peak value is the rho -> 0 limit (log psi -> 0); for n > 2 the
        // origin is an integrable-or-not power singularity and the drop is
        // anchored at rho = 1.
        anchor = (n == 2.0) ? 0.0 : 1.0;
        log_peak = (n == 2.0) ? 0.0 : log_rho_integrand(1.0, c, n);
        seed_width = 40.0;
    }
    const double target = log_peak - log_drop;

    // Upper bound: expand the seed offset until it brackets, then bisect.
    double offset = seed_width;
    double hi = anchor + offset;
    int doublings = 0;
    while (log_rho_integrand(hi, c, n) > target) {
        if (++doublings > 60) {
            throw BisectionFailure("rho upper bound: seed interval never brackets");
        }
        offset *= 2.0;
        hi = anchor + offset;
    }
    out.hi = bisect_to_target(std::max(anchor, rmax), hi, c, n, target, true);

    // Lower bound: whenever the integrand vanishes at the origin (c > 0, or
    // a positive rho power) the bracket (0, rmax) contains the crossing.
    if (rmax > 0.0 && (c > 0.0 || n < 2.0)) {
        out.lo = bisect_to_target(0.0, rmax, c, n, target, false);
    } else {
        out.lo = 0.0;
    }
    return out;
}

double integrate_rho_log(double c, double n, int extra_power, int rule_size,
                         double drop_factor) {
    const double n_eff = n - static_cast<double>(extra_power);

    // Substituting t = log rho maps the integrand to psi(e^t, c, n_eff - 1),
    // an entire bump in t, which keeps Gauss-Legendre accurate when the
    // rho-space bounds span several decades (small c leaves a power-law
    // shoulder that plain quadrature in rho cannot resolve). The
    // substitution is only well-localized while c > 0 walls off the left
    // tail; otherwise (degenerate c ~ 0 inputs) integrate in rho directly,
    // where the integrand is smooth down to the origin.
    RhoBounds tb = rho_bounds(c, n_eff - 1.0, drop_factor);
    const bool use_log_space = tb.lo > 0.0 && std::log(tb.hi / tb.lo) <= 25.0;

    double lo, hi;
    if (use_log_space) {
        lo = std::log(tb.lo);
        hi = std::log(tb.hi);
    } else {
        RhoBounds b = rho_bounds(c, n_eff, drop_factor);
        lo = b.lo;
        hi = b.hi;
    }
    QuadRule rule = gauss_legendre(rule_size, lo, hi);
    double m = -std::numeric_limits<double>::infinity();
    const std::size_t sz = rule.size();
    std::vector<double> logs(sz);
    for (std::size_t i = 0; i < sz; ++i) {
        logs[i] = use_log_space
                      ? log_rho_integrand(std::exp(rule.nodes[i]), c, n_eff - 1.0)
                      : log_rho_integrand(rule.nodes[i], c, n_eff);
        m = std::max(m, logs[i]);
    }
    if (!std::isfinite(m)) {
        return -std::numeric_limits<double>::infinity();
    }
    double s = 0.0;
    for (std::size_t i = 0; i < sz; ++i) {
        s += rule.weights[i] * std::exp(logs[i] - m);
    }
    return m + std::log(s);
}

}  // namespace quadpost
