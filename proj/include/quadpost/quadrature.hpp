#pragma once

#include <functional>
#include <vector>

namespace quadpost {

/// A one-dimensional quadrature rule on an open interval (a, b).
/// Nodes are strictly increasing and interior to the interval; weights are
/// positive and sum to b - a.
struct QuadRule {
    std::vector<double> nodes;
    std::vector<double> weights;
    double a = 0.0;
    double b = 0.0;

    std::size_t size() const { return nodes.size(); }
};

/// Node counts, truncation and convergence policy for the marginal
/// integration. Defaults follow the reference implementation notes:
/// 80 nodes in rho and phi, a 100-node scan for the phi upper bound,
/// 10 nodes in theta, and a 1e20 peak-to-boundary drop-off.
struct QuadratureConfig {
    int rho_nodes = 80;
    int phi_nodes = 80;
    int phi_scan_nodes = 100;
    int theta_nodes = 10;
    double drop_factor = 1e20;
    double theta_tol = 1e-8;
    bool theta_doubling = false;
    int theta_max_nodes = 256;

    void check() const;
};

/// Gauss-Legendre rule with m nodes on (a, b); exact for polynomials of
/// degree <= 2m - 1.
QuadRule gauss_legendre(int m, double a, double b);

/// Nested Chebyshev-type (Fejer second) rule of order m on (a, b): the
/// m - 1 interior practical Chebyshev points. The order-m nodes are a
/// bitwise-equal subset of the order-2m nodes, so results at order m can be
/// refined to order 2m with only m new integrand evaluations.
/// m must be >= 2; for nesting use orders of the form base * 2^t.
QuadRule chebyshev_practical(int m, double a, double b);

struct AdaptiveResult {
    double value = 0.0;
    double error_estimate = 0.0;
    int nodes_used = 0;
    int evaluations = 0;
    bool converged = false;
};

/// Integrates f over (0, pi/2). With cfg.theta_doubling the nested Chebyshev
/// rules of order theta_nodes, 2*theta_nodes, ... are used, reusing previous
/// evaluations, until two successive levels agree to theta_tol (relative) or
/// theta_max_nodes is reached (converged = false; best value returned with
/// its error estimate). Otherwise a single Gauss rule with theta_nodes is
/// used and the error estimate comes from a rerun at twice the node count.
AdaptiveResult adaptive_theta(const std::function<double(double)>& f,
                              const QuadratureConfig& cfg);

}  // namespace quadpost
