#include <cmath>
#include <numbers>
#include <random>
#include <set>

#include "doctest.h"
#include "quadpost/errors.hpp"
#include "quadpost/quadrature.hpp"

using namespace quadpost;

namespace {

double apply(const QuadRule& r, const std::function<double(double)>& f) {
    double s = 0.0;
    for (std::size_t i = 0; i < r.size(); ++i) s += r.weights[i] * f(r.nodes[i]);
    return s;
}

constexpr double kPi = std::numbers::pi;

}  // namespace

TEST_CASE("gauss_legendre small orders") {
    QuadRule r1 = gauss_legendre(1, -1.0, 1.0);
    REQUIRE(r1.size() == 1);
    CHECK(r1.nodes[0] == doctest::Approx(0.0).epsilon(1e-15));
    CHECK(r1.weights[0] == doctest::Approx(2.0).epsilon(1e-15));

    QuadRule r2 = gauss_legendre(2, -1.0, 1.0);
    CHECK(r2.nodes[0] == doctest::Approx(-1.0 / std::sqrt(3.0)).epsilon(1e-14));
    CHECK(r2.nodes[1] == doctest::Approx(1.0 / std::sqrt(3.0)).epsilon(1e-14));
    CHECK(r2.weights[0] == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(r2.weights[1] == doctest::Approx(1.0).epsilon(1e-14));

    QuadRule r = gauss_legendre(2, 0.0, 1.0);
    CHECK(apply(r, [](double x) { return x * x; }) ==
          doctest::Approx(1.0 / 3.0).epsilon(1e-14));
}

TEST_CASE("gauss_legendre degree 2m-1 exactness") {
    std::mt19937_64 gen(7);
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    for (int m = 1; m <= 10; ++m) {
        QuadRule r = gauss_legendre(m, -1.0, 1.0);
        // Random polynomial of degree 2m-1 with exact (analytic) integral.
        std::vector<double> coef(2 * m);
        for (auto& c : coef) c = unif(gen);
        double exact = 0.0;
        for (std::size_t d = 0; d < coef.size(); ++d) {
            if (d % 2 == 0) exact += coef[d] * 2.0 / (d + 1.0);
        }
        double got = apply(r, [&](double x) {
            double v = 0.0, p = 1.0;
            for (double c : coef) {
                v += c * p;
                p *= x;
            }
            return v;
        });
        CHECK(std::abs(got - exact) <= 1e-13 * (1.0 + std::abs(exact)));
    }
}

TEST_CASE("gauss_legendre rule invariants") {
    QuadRule r = gauss_legendre(37, 0.25, 2.5);
    double sum = 0.0;
    for (std::size_t i = 0; i < r.size(); ++i) {
        CHECK(r.weights[i] > 0.0);
        CHECK(r.nodes[i] > r.a);
        CHECK(r.nodes[i] < r.b);
        if (i > 0) CHECK(r.nodes[i] > r.nodes[i - 1]);
        sum += r.weights[i];
    }
    CHECK(sum == doctest::Approx(r.b - r.a).epsilon(1e-13));
    CHECK_THROWS_AS(gauss_legendre(3, 1.0, 1.0), InvalidInterval);
    CHECK_THROWS_AS(gauss_legendre(0, 0.0, 1.0), InvalidInterval);
}

TEST_CASE("chebyshev_practical nesting is bitwise") {
    for (int m : {2, 4, 8, 16, 32}) {
        QuadRule coarse = chebyshev_practical(m, 0.0, kPi / 2.0);
        QuadRule fine = chebyshev_practical(2 * m, 0.0, kPi / 2.0);
        REQUIRE(coarse.size() == static_cast<std::size_t>(m - 1));
        REQUIRE(fine.size() == static_cast<std::size_t>(2 * m - 1));
        std::set<double> fine_nodes(fine.nodes.begin(), fine.nodes.end());
        for (double x : coarse.nodes) {
            CHECK(fine_nodes.count(x) == 1);  // exact double equality
        }
    }
}

TEST_CASE("chebyshev_practical weights and accuracy") {
    QuadRule r = chebyshev_practical(8, 0.0, kPi / 2.0);
    double sum = 0.0;
    for (std::size_t i = 0; i < r.size(); ++i) {
        CHECK(r.weights[i] > 0.0);
        CHECK(r.nodes[i] > 0.0);
        CHECK(r.nodes[i] < kPi / 2.0);
        sum += r.weights[i];
    }
    CHECK(sum == doctest::Approx(kPi / 2.0).epsilon(1e-13));

    // cos integrates to 1 on (0, pi/2); order 8 is already close and order
    // 16 is at the 1e-10 contract.
    double v8 = apply(r, [](double x) { return std::cos(x); });
    CHECK(std::abs(v8 - 1.0) < 1e-5);
    double v16 = apply(chebyshev_practical(16, 0.0, kPi / 2.0),
                       [](double x) { return std::cos(x); });
    CHECK(std::abs(v16 - 1.0) < 1e-10);
}

TEST_CASE("adaptive_theta constant and sine") {
    QuadratureConfig cfg;
    cfg.theta_doubling = true;
    cfg.theta_nodes = 4;  // base order
    cfg.theta_tol = 1e-10;

    AdaptiveResult c = adaptive_theta([](double) { return 1.0; }, cfg);
    CHECK(c.converged);
    CHECK(c.value == doctest::Approx(kPi / 2.0).epsilon(1e-13));

    AdaptiveResult s = adaptive_theta([](double x) { return std::sin(x); }, cfg);
    CHECK(s.converged);
    CHECK(s.value == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("adaptive_theta reuses nested evaluations") {
    QuadratureConfig cfg;
    cfg.theta_doubling = true;
    cfg.theta_nodes = 8;
    cfg.theta_tol = 1e-30;   // force several levels
    cfg.theta_max_nodes = 64;
    int evals = 0;
    AdaptiveResult r = adaptive_theta(
        [&](double x) {
            ++evals;
            return std::exp(-x);
        },
        cfg);
    // Levels 8, 16, 32, 64 evaluate 7 + 8 + 16 + 32 points: each doubling of
    // the order m costs exactly m new evaluations.
    CHECK(evals == 63);
    CHECK(r.evaluations == evals);
    CHECK(!r.converged);
    CHECK(r.nodes_used == 63);
}

TEST_CASE("adaptive_theta gauss path error proxy") {
    QuadratureConfig cfg;
    cfg.theta_doubling = false;
    cfg.theta_nodes = 10;
    AdaptiveResult r = adaptive_theta([](double x) { return std::sin(x); }, cfg);
    CHECK(r.value == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(r.nodes_used == 10);
    CHECK(r.error_estimate < 1e-10);
}
