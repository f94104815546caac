#include <cmath>
#include <numbers>
#include <random>

#include "doctest.h"
#include "quadpost/errors.hpp"
#include "quadpost/model.hpp"
#include "quadpost/oracle.hpp"

using namespace quadpost;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

ModelInput random_two_group(std::mt19937_64& gen, int n, int k1, int k2) {
    std::normal_distribution<double> nd;
    MatrixXd X1(n, k1), X2(n, k2);
    VectorXd y(n);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < k1; ++j) X1(i, j) = nd(gen);
        for (int j = 0; j < k2; ++j) X2(i, j) = nd(gen);
        y[i] = nd(gen);
    }
    return validate(X1, X2, y);
}

}  // namespace

TEST_CASE("conditional_moments: unit ridge identity") {
    // X = I2 with k1 = k2 = 1 and all scales 1: A = 2 I, mean = y / 2.
    MatrixXd X1(2, 1), X2(2, 1);
    X1 << 1, 0;
    X2 << 0, 1;
    VectorXd y(2);
    y << 0.8, -0.4;
    ModelInput m = validate(X1, X2, y);
    VectorXd sigma(3);
    sigma << 1.0, 1.0, 1.0;
    auto cm = oracle::conditional_moments(m, sigma);
    CHECK(cm.mean[0] == doctest::Approx(0.4).epsilon(1e-14));
    CHECK(cm.mean[1] == doctest::Approx(-0.2).epsilon(1e-14));
    CHECK(cm.cov(0, 0) == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(cm.cov(1, 1) == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(cm.cov(0, 1) == doctest::Approx(0.0).epsilon(1e-14));
}

TEST_CASE("conditional_moments: flat-prior limit recovers least squares") {
    std::mt19937_64 gen(17);
    ModelInput m = random_two_group(gen, 12, 2, 2);
    VectorXd sigma(3);
    sigma << 1.0, 1e8, 1e8;
    auto cm = oracle::conditional_moments(m, sigma);
    MatrixXd X = m.stacked();
    VectorXd ls = (X.transpose() * X).ldlt().solve(X.transpose() * m.y);
    CHECK((cm.mean - ls).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("conditional_moments: log evidence against Monte Carlo") {
    std::mt19937_64 gen(19);
    ModelInput m = random_two_group(gen, 8, 2, 1);
    VectorXd sigma(3);
    sigma << 0.9, 1.1, 0.7;
    auto cm = oracle::conditional_moments(m, sigma);

    // Importance sampling of the beta integral with a wide Gaussian
    // proposal centered at the conditional mean.
    const int k = 3;
    const double prop_sd = 3.0 * std::sqrt(cm.cov.diagonal().maxCoeff()) + 0.5;
    MatrixXd X = m.stacked();
    std::normal_distribution<double> nd;
    const int draws = 2000000;
    double sw = 0.0, sw2 = 0.0;
    const double n = static_cast<double>(m.n());
    const double pref = -0.5 * sigma.squaredNorm() - n * std::log(sigma[0]) -
                        2.0 * std::log(sigma[1]) - 1.0 * std::log(sigma[2]);
    for (int i = 0; i < draws; ++i) {
        VectorXd beta(k);
        double logq = 0.0;
        for (int j = 0; j < k; ++j) {
            const double g = nd(gen);
            beta[j] = cm.mean[j] + prop_sd * g;
            logq += -0.5 * g * g - std::log(prop_sd) -
                    0.5 * std::log(2.0 * std::numbers::pi);
        }
        const double r2 = (m.y - X * beta).squaredNorm();
        double logf = pref - 0.5 * r2 / (sigma[0] * sigma[0]);
        logf += -0.5 * beta.head(2).squaredNorm() / (sigma[1] * sigma[1]);
        logf += -0.5 * beta.tail(1).squaredNorm() / (sigma[2] * sigma[2]);
        const double w = std::exp(logf - logq - cm.log_evidence);
        sw += w;
        sw2 += w * w;
    }
    const double mean_w = sw / draws;
    const double se = std::sqrt((sw2 / draws - mean_w * mean_w) / draws);
    CHECK(std::abs(mean_w - 1.0) <= 3.0 * se + 1e-4);
}

TEST_CASE("brute_force_summary invariants") {
    std::mt19937_64 gen(23);
    ModelInput m = random_two_group(gen, 10, 2, 1);
    oracle::SigmaGrid grid = oracle::make_sigma_grid(3, 24, 8.0, false);
    PosteriorSummary s = oracle::brute_force_summary(m, grid);

    // covariance is symmetric with nonnegative diagonal matching sd^2
    REQUIRE(s.beta_cov.has_value());
    const MatrixXd& cov = *s.beta_cov;
    CHECK((cov - cov.transpose()).cwiseAbs().maxCoeff() < 1e-12);
    for (int j = 0; j < 3; ++j) {
        CHECK(cov(j, j) >= 0.0);
        CHECK(std::sqrt(cov(j, j)) == doctest::Approx(s.beta_sd[j]).epsilon(1e-12));
    }
    CHECK((s.scale_mean.array() > 0.0).all());

    SUBCASE("zero outcome gives zero means") {
        ModelInput z = m;
        z.y.setZero();
        PosteriorSummary sz = oracle::brute_force_summary(z, grid);
        CHECK(sz.beta_mean.cwiseAbs().maxCoeff() < 1e-14);
    }

    SUBCASE("duplicated symmetric columns give equal means") {
        MatrixXd X1(10, 2);
        X1.col(0) = m.X1.col(0);
        X1.col(1) = m.X1.col(0);
        ModelInput dup = validate(X1, m.X2, m.y);
        PosteriorSummary sd = oracle::brute_force_summary(dup, grid);
        CHECK(sd.beta_mean[0] == doctest::Approx(sd.beta_mean[1]).epsilon(1e-10));
    }
}

TEST_CASE("brute_force_summary is invariant under loop reordering") {
    std::mt19937_64 gen(29);
    ModelInput m = random_two_group(gen, 9, 1, 2);
    // Reordering the tensor sweep must not change the sums beyond roundoff.
    // (exercised through the mixed 2-D grid and the 3-D grid)
    oracle::SigmaGrid g = oracle::make_sigma_grid(3, 20, 8.0, false);
    PosteriorSummary a = oracle::brute_force_summary(m, g);
    oracle::SigmaGrid g2 = g;
    std::swap(g2.dims[0], g2.dims[2]);  // same rules, so same node set
    PosteriorSummary b = oracle::brute_force_summary(m, g2);
    CHECK((a.beta_mean - b.beta_mean).cwiseAbs().maxCoeff() < 1e-9);
    CHECK(std::abs(a.log_norm_const - b.log_norm_const) < 1e-9);
}

TEST_CASE("law of total covariance: two assemblies agree") {
    std::mt19937_64 gen(31);
    ModelInput m = random_two_group(gen, 10, 2, 2);
    oracle::SigmaGrid grid = oracle::make_sigma_grid(3, 20, 8.0, false);
    PosteriorSummary s = oracle::brute_force_summary(m, grid);

    // Independent assembly: E[cov] + Cov[mean] accumulated separately.
    MatrixXd g = MatrixXd::Zero(m.k(), m.k());
    MatrixXd ecov = MatrixXd::Zero(m.k(), m.k());
    VectorXd emean = VectorXd::Zero(m.k());
    double z = 0.0, peak = -1e300;
    std::vector<Eigen::Vector3d> nodes;
    std::vector<double> logw;
    for (double a : grid.dims[0].nodes)
        for (double b : grid.dims[1].nodes)
            for (double c : grid.dims[2].nodes) nodes.push_back({a, b, c});
    std::size_t idx = 0;
    std::vector<oracle::ConditionalMoments> cms(nodes.size());
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        cms[i] = oracle::conditional_moments(m, nodes[i]);
        peak = std::max(peak, cms[i].log_evidence);
    }
    for (std::size_t ia = 0; ia < grid.dims[0].size(); ++ia)
        for (std::size_t ib = 0; ib < grid.dims[1].size(); ++ib)
            for (std::size_t ic = 0; ic < grid.dims[2].size(); ++ic) {
                const double w = grid.dims[0].weights[ia] * grid.dims[1].weights[ib] *
                                 grid.dims[2].weights[ic];
                const auto& cm = cms[idx];
                const double p = w * std::exp(cm.log_evidence - peak);
                z += p;
                emean += p * cm.mean;
                ecov += p * cm.cov;
                ++idx;
            }
    emean /= z;
    ecov /= z;
    idx = 0;
    for (std::size_t ia = 0; ia < grid.dims[0].size(); ++ia)
        for (std::size_t ib = 0; ib < grid.dims[1].size(); ++ib)
            for (std::size_t ic = 0; ic < grid.dims[2].size(); ++ic) {
                const double w = grid.dims[0].weights[ia] * grid.dims[1].weights[ib] *
                                 grid.dims[2].weights[ic];
                const auto& cm = cms[idx];
                const double p = w * std::exp(cm.log_evidence - peak);
                g += p * (cm.mean - emean) * (cm.mean - emean).transpose();
                ++idx;
            }
    MatrixXd total = ecov + g / z;
    CHECK((total - *s.beta_cov).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("gaussian lemma: identity and diagonal cases") {
    MatrixXd C = MatrixXd::Identity(2, 2);
    VectorXd t = VectorXd::Zero(2);
    auto rep = oracle::gaussian_lemma_check(C, t, 80, 200000, 7);
    // integral = pi, mean 0, second moment I/2 — quadrature route is exact
    // to tolerance, MC route within its noise.
    CHECK(rep.quad_norm_dev < 1e-12);
    CHECK(rep.quad_mean_dev < 1e-12);
    CHECK(rep.quad_second_dev < 1e-12);
    CHECK(rep.mc_norm_dev < 1e-2);

    MatrixXd D = VectorXd{{2.0, 3.0}}.asDiagonal();
    // integral pi / sqrt(6)
    auto rep2 = oracle::gaussian_lemma_check(D, t, 80, 100000, 7);
    CHECK(rep2.quad_norm_dev < 1e-12);
}

TEST_CASE("gaussian lemma: random SPD") {
    std::mt19937_64 gen(37);
    std::normal_distribution<double> nd;
    for (int rep = 0; rep < 3; ++rep) {
        const int k = 4;
        MatrixXd A(k, k);
        for (int i = 0; i < k; ++i)
            for (int j = 0; j < k; ++j) A(i, j) = nd(gen);
        MatrixXd C = A * A.transpose() + 0.5 * MatrixXd::Identity(k, k);
        VectorXd t(k);
        for (int i = 0; i < k; ++i) t[i] = nd(gen);
        auto r = oracle::gaussian_lemma_check(C, t, 80, 1000000, 100 + rep);
        CHECK(r.quad_norm_dev < 1e-10);
        CHECK(r.quad_mean_dev < 1e-10);
        CHECK(r.quad_second_dev < 1e-10);
        CHECK(r.mc_norm_dev < 1e-2);
        CHECK(r.mc_mean_dev < 1e-2);
        CHECK(r.mc_second_dev < 1e-2);
    }
}
