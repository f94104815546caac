#include <cmath>
#include <numbers>
#include <random>

#include "doctest.h"
#include "quadpost/errors.hpp"
#include "quadpost/rho_integral.hpp"

using namespace quadpost;

TEST_CASE("rho_peak closed form") {
    CHECK(rho_peak(0.0, 5.0) == 0.0);
    CHECK(rho_peak(1.0, 2.0) == doctest::Approx(1.0).epsilon(1e-14));

    // Independent bisection oracle for the root of rho^4 + 2 rho^2 - 4 = 0
    // (c = 4, n = 4).
    auto f = [](double r) { return r * r * r * r + 2.0 * r * r - 4.0; };
    double a = 0.0, b = 2.0;
    for (int i = 0; i < 200; ++i) {
        double mid = 0.5 * (a + b);
        (f(mid) < 0.0 ? a : b) = mid;
    }
    const double oracle_root = 0.5 * (a + b);
    CHECK(rho_peak(4.0, 4.0) == doctest::Approx(oracle_root).epsilon(1e-12));
    CHECK(rho_peak(4.0, 4.0) == doctest::Approx(1.111786).epsilon(1e-6));
}

TEST_CASE("rho_peak stationarity by finite differences") {
    std::mt19937_64 gen(11);
    std::uniform_real_distribution<double> uc(-2.0, 3.0);  // log10 c
    std::uniform_real_distribution<double> un(3.0, 200.0);
    for (int rep = 0; rep < 200; ++rep) {
        const double c = std::pow(10.0, uc(gen));
        const double n = un(gen);
        const double r = rho_peak(c, n);
        REQUIRE(r > 0.0);
        // Step sized by the Laplace width so truncation and roundoff both
        // stay below the contract.
        const double s = -1.0 - 3.0 * c / (r * r * r * r) + (n - 2.0) / (r * r);
        const double h = 5e-5 / std::sqrt(-s);
        const double fd =
            (log_rho_integrand(r + h, c, n) - log_rho_integrand(r - h, c, n)) /
            (2.0 * h);
        const double scale = 1.0 + std::abs(log_rho_integrand(r, c, n));
        CHECK(std::abs(fd) < 1e-8 * scale);
    }
}

TEST_CASE("rho_bounds drop-factor contract at c=1, n=2") {
    RhoBounds b = rho_bounds(1.0, 2.0, 1e20);
    CHECK(b.lo < 1.0);
    CHECK(b.hi > 1.0);
    const double lp = log_rho_integrand(1.0, 1.0, 2.0);
    CHECK(log_rho_integrand(b.hi, 1.0, 2.0) <= lp - std::log(1e20) + 1e-6);
    CHECK(log_rho_integrand(b.lo, 1.0, 2.0) <= lp - std::log(1e20) + 1e-6);
}

TEST_CASE("rho_bounds widen with the drop factor") {
    RhoBounds tight = rho_bounds(5.0, 10.0, 1e10);
    RhoBounds wide = rho_bounds(5.0, 10.0, 1e24);
    CHECK(wide.lo < tight.lo);
    CHECK(wide.hi > tight.hi);
}

TEST_CASE("rho_bounds against a dense scan, c=10, n=50") {
    const double c = 10.0, n = 50.0, drop = 1e20;
    RhoBounds b = rho_bounds(c, n, drop);
    const double peak = log_rho_integrand(rho_peak(c, n), c, n);
    const double target = peak - std::log(drop);

    // Every point of a dense scan that lies above the drop level must be
    // inside [lo, hi].
    const double scan_hi = 2.0 * b.hi;
    const int npts = 1000000;
    for (int i = 1; i <= npts; ++i) {
        const double r = scan_hi * i / npts;
        if (log_rho_integrand(r, c, n) > target) {
            CHECK(r >= b.lo);
            CHECK(r <= b.hi);
        }
    }

    // Monotone increasing below the peak, decreasing above it.
    const double rmax = rho_peak(c, n);
    double prev = log_rho_integrand(b.lo + 1e-12, c, n);
    for (int i = 1; i <= 1000; ++i) {
        const double r = b.lo + (rmax - b.lo) * i / 1000.0;
        const double v = log_rho_integrand(r, c, n);
        CHECK(v >= prev - 1e-12);
        prev = v;
    }
    prev = log_rho_integrand(rmax, c, n);
    for (int i = 1; i <= 1000; ++i) {
        const double r = rmax + (b.hi - rmax) * i / 1000.0;
        const double v = log_rho_integrand(r, c, n);
        CHECK(v <= prev + 1e-12);
        prev = v;
    }
}

TEST_CASE("integrate_rho gaussian half-integrals") {
    const double expected = std::sqrt(std::numbers::pi / 2.0);
    CHECK(integrate_rho_log(0.0, 2.0, 0, 80) ==
          doctest::Approx(std::log(expected)).epsilon(1e-12));
    // Extra rho^2 power cancels against n = 4.
    CHECK(integrate_rho_log(0.0, 4.0, 2, 80) ==
          doctest::Approx(std::log(expected)).epsilon(1e-12));
}

TEST_CASE("integrate_rho against a dense trapezoid, c=3, n=7") {
    const double c = 3.0, n = 7.0;
    // Trapezoid oracle on a generously wide interval; the integrand vanishes
    // to far below double precision at both ends.
    const double a = 1e-3, b = 30.0;
    const int npts = 1000000;
    const double h = (b - a) / npts;
    double acc = 0.5 * (std::exp(log_rho_integrand(a, c, n)) +
                        std::exp(log_rho_integrand(b, c, n)));
    for (int i = 1; i < npts; ++i) {
        acc += std::exp(log_rho_integrand(a + h * i, c, n));
    }
    const double oracle = std::log(acc * h);
    CHECK(integrate_rho_log(c, n, 0, 80) == doctest::Approx(oracle).epsilon(1e-12));
}

TEST_CASE("integrate_rho node-count stability") {
    std::mt19937_64 gen(13);
    std::uniform_real_distribution<double> uc(-2.0, 6.0);  // log10 c
    std::uniform_real_distribution<double> un(std::log(3.0), std::log(1e5));
    for (int rep = 0; rep < 50; ++rep) {
        const double c = std::pow(10.0, uc(gen));
        const double n = std::exp(un(gen));
        const double v80 = integrate_rho_log(c, n, 0, 80);
        const double v160 = integrate_rho_log(c, n, 0, 160);
        CHECK(std::abs(v80 - v160) < 1e-12 * (1.0 + std::abs(v160)));
    }
}
