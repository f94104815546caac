#include "quadpost/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <numbers>
#include <numeric>

#include "quadpost/errors.hpp"

namespace quadpost {

namespace {

constexpr double kPi = std::numbers::pi;

void check_interval(double a, double b) {
    if (!(a < b) || !std::isfinite(a) || !std::isfinite(b)) {
        throw InvalidInterval("quadrature interval must be finite with a < b");
    }
}

// Gauss-Legendre nodes/weights on (-1, 1) by Newton iteration on P_m.
// Cached per order; orders used in practice are few (80, 100, 160, ...).
struct RefRule {
    std::vector<double> x;
    std::vector<double> w;
};

RefRule compute_legendre(int m) {
    RefRule r;
    r.x.resize(m);
    r.w.resize(m);
    const int half = (m + 1) / 2;
    for (int i = 0; i < half; ++i) {
        // Tricomi-style initial guess.
        double x = std::cos(kPi * (i + 0.75) / (m + 0.5));
        double pp = 0.0;
        for (int iter = 0; iter < 100; ++iter) {
            double p0 = 1.0, p1 = x;
            if (m == 1) {
                p1 = x;
            }
            for (int j = 2; j <= m; ++j) {
                double p2 = ((2.0 * j - 1.0) * x * p1 - (j - 1.0) * p0) / j;
                p0 = p1;
                p1 = p2;
            }
            // p1 = P_m(x), p0 = P_{m-1}(x)
            pp = m * (x * p1 - p0) / (x * x - 1.0);
            double dx = p1 / pp;
            x -= dx;
            if (std::abs(dx) < 1e-16 * (1.0 + std::abs(x))) {
                // One polishing step after convergence.
                double q0 = 1.0, q1 = x;
                for (int j = 2; j <= m; ++j) {
                    double q2 = ((2.0 * j - 1.0) * x * q1 - (j - 1.0) * q0) / j;
                    q0 = q1;
                    q1 = q2;
                }
                pp = m * (x * q1 - q0) / (x * x - 1.0);
                x -= q1 / pp;
                break;
            }
        }
        r.x[i] = -x;
        r.x[m - 1 - i] = x;
        double w = 2.0 / ((1.0 - x * x) * pp * pp);
        r.w[i] = w;
        r.w[m - 1 - i] = w;
    }
    if (m % 2 == 1) {
        r.x[m / 2] = 0.0;
    }
    return r;
}

const RefRule& legendre_ref(int m) {
    static std::map<int, RefRule> cache;
    static std::mutex mu;
    std::lock_guard<std::mutex> lock(mu);
    auto it = cache.find(m);
    if (it == cache.end()) {
        it = cache.emplace(m, compute_legendre(m)).first;
    }
    return it->second;
}

// Angle of the j-th practical Chebyshev point of order m, computed from the
// reduced fraction j/m so that nested orders produce bitwise-equal nodes.
double chebyshev_angle(long long j, long long m) {
    long long g = std::gcd(j, m);
    return kPi * static_cast<double>(j / g) / static_cast<double>(m / g);
}

}  // namespace

void QuadratureConfig::check() const {
    if (rho_nodes < 1 || phi_nodes < 1 || phi_scan_nodes < 1 || theta_nodes < 1) {
        throw InvalidConfig("node counts must be >= 1");
    }
    if (!(drop_factor > 1.0)) {
        throw InvalidConfig("drop_factor must be > 1");
    }
    if (!(theta_tol > 0.0)) {
        throw InvalidConfig("theta_tol must be > 0");
    }
}

QuadRule gauss_legendre(int m, double a, double b) {
    if (m < 1) {
        throw InvalidInterval("gauss_legendre requires m >= 1");
    }
    check_interval(a, b);
    const RefRule& ref = legendre_ref(m);
    QuadRule rule;
    rule.a = a;
    rule.b = b;
    rule.nodes.resize(m);
    rule.weights.resize(m);
    const double mid = 0.5 * (a + b);
    const double half = 0.5 * (b - a);
    for (int i = 0; i < m; ++i) {
        rule.nodes[i] = mid + half * ref.x[i];
        rule.weights[i] = half * ref.w[i];
    }
    return rule;
}

QuadRule chebyshev_practical(int m, double a, double b) {
    if (m < 2) {
        throw InvalidInterval("chebyshev_practical requires order m >= 2");
    }
    check_interval(a, b);
    QuadRule rule;
    rule.a = a;
    rule.b = b;
    rule.nodes.resize(m - 1);
    rule.weights.resize(m - 1);
    const double half = 0.5 * (b - a);
    for (int j = 1; j < m; ++j) {
        const double angle = chebyshev_angle(j, m);
        // cos(angle) decreases in j; store nodes in increasing order.
        rule.nodes[m - 1 - j] = a + half * (1.0 - std::cos(angle));
        double s = 0.0;
        for (int l = 1; 2 * l - 1 < m; ++l) {
            s += std::sin((2.0 * l - 1.0) * angle) / (2.0 * l - 1.0);
        }
        rule.weights[m - 1 - j] = half * (4.0 / m) * std::sin(angle) * s;
    }
    return rule;
}

AdaptiveResult adaptive_theta(const std::function<double(double)>& f,
                              const QuadratureConfig& cfg) {
    cfg.check();
    AdaptiveResult res;
    const double a = 0.0;
    const double b = kPi / 2.0;

    if (!cfg.theta_doubling) {
        QuadRule r1 = gauss_legendre(cfg.theta_nodes, a, b);
        QuadRule r2 = gauss_legendre(2 * cfg.theta_nodes, a, b);
        double v1 = 0.0, v2 = 0.0;
        for (std::size_t i = 0; i < r1.size(); ++i) v1 += r1.weights[i] * f(r1.nodes[i]);
        for (std::size_t i = 0; i < r2.size(); ++i) v2 += r2.weights[i] * f(r2.nodes[i]);
        res.value = v1;
        res.error_estimate = std::abs(v2 - v1);
        res.nodes_used = cfg.theta_nodes;
        res.evaluations = static_cast<int>(r1.size() + r2.size());
        res.converged = res.error_estimate <= cfg.theta_tol * std::max(std::abs(v1), 1e-300);
        return res;
    }

    // Nested Chebyshev doubling: node values are cached by abscissa, which is
    // bitwise-stable across levels by construction.
    std::map<double, double> values;
    int order = std::max(2, cfg.theta_nodes);
    double prev = 0.0;
    bool have_prev = false;
    while (true) {
        QuadRule rule = chebyshev_practical(order, a, b);
        double v = 0.0;
        for (std::size_t i = 0; i < rule.size(); ++i) {
            auto it = values.find(rule.nodes[i]);
            if (it == values.end()) {
                it = values.emplace(rule.nodes[i], f(rule.nodes[i])).first;
                ++res.evaluations;
            }
            v += rule.weights[i] * it->second;
        }
        res.value = v;
        res.nodes_used = static_cast<int>(rule.size());
        if (have_prev) {
            res.error_estimate = std::abs(v - prev);
            if (res.error_estimate <= cfg.theta_tol * std::max(std::abs(v), 1e-300)) {
                res.converged = true;
                return res;
            }
        }
        prev = v;
        have_prev = true;
        if (2 * order > cfg.theta_max_nodes) {
            res.converged = false;
            return res;
        }
        order *= 2;
    }
}

}  // namespace quadpost
