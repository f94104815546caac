#include <cmath>
#include <random>

#include "doctest.h"
#include "quadpost/errors.hpp"
#include "quadpost/model.hpp"

using namespace quadpost;
using Eigen::MatrixXd;
using Eigen::VectorXd;

TEST_CASE("validate accepts a small identity-style model") {
    MatrixXd X1 = MatrixXd::Ones(4, 1);
    MatrixXd X2(4, 1);
    X2 << 0.3, -1.2, 0.5, 2.0;
    VectorXd y(4);
    y << 1.0, 2.0, 3.0, 4.0;
    ModelInput m = validate(X1, X2, y);
    CHECK(m.n() == 4);
    CHECK(m.k1() == 1);
    CHECK(m.k2() == 1);
    CHECK(!m.rank_deficient);
}

TEST_CASE("validate rejects inconsistent or non-finite input") {
    MatrixXd X1 = MatrixXd::Ones(4, 1);
    MatrixXd X2 = MatrixXd::Random(4, 1);
    VectorXd y3 = VectorXd::Ones(3);
    CHECK_THROWS_AS(validate(X1, X2, y3), DimensionMismatch);

    VectorXd y4 = VectorXd::Ones(4);
    MatrixXd bad = X2;
    bad(2, 0) = std::nan("");
    CHECK_THROWS_AS(validate(X1, bad, y4), NonFinite);

    // two-group needs n >= k
    MatrixXd wide1 = MatrixXd::Random(2, 2), wide2 = MatrixXd::Random(2, 2);
    VectorXd y2 = VectorXd::Ones(2);
    CHECK_THROWS_AS(validate(wide1, wide2, y2), DimensionMismatch);

    // mixed prior scales must be positive and sized per group-2 column
    VectorXd scales(1);
    scales << -1.0;
    CHECK_THROWS_AS(validate(X1, X2, y4, ModelKind::mixed, scales),
                    NonPositiveScale);
    CHECK_THROWS_AS(validate(X1, X2, y4, ModelKind::mixed, VectorXd()),
                    DimensionMismatch);
}

TEST_CASE("validate flags rank deficiency without rejecting") {
    MatrixXd X1(4, 2);
    X1 << 1, 1, 2, 2, 3, 3, 4, 4;  // duplicated column
    MatrixXd X2 = MatrixXd::Identity(4, 1);
    VectorXd y = VectorXd::Ones(4);
    ModelInput m = validate(X1, X2, y);
    CHECK(m.rank_deficient);
}

TEST_CASE("validate is idempotent") {
    MatrixXd X1 = MatrixXd::Random(6, 2);
    MatrixXd X2 = MatrixXd::Random(6, 2);
    VectorXd y = VectorXd::Random(6);
    ModelInput a = validate(X1, X2, y);
    ModelInput b = validate(a.X1, a.X2, a.y, a.kind);
    CHECK(a.X1 == b.X1);
    CHECK(a.X2 == b.X2);
    CHECK(a.y == b.y);
}

TEST_CASE("standardize rescales to unit sd and records the transform") {
    const int n = 50;
    std::mt19937_64 gen(3);
    std::normal_distribution<double> nd;
    MatrixXd X1(n, 1), X2(n, 2);
    VectorXd y(n);
    for (int i = 0; i < n; ++i) {
        X1(i, 0) = 3.0 * nd(gen);
        X2(i, 0) = (i % 3 == 0) ? 1.0 : 0.0;  // indicator column
        X2(i, 1) = 0.25 * nd(gen) + 1.0;
        y[i] = 2.0 * nd(gen);
    }
    ModelInput m = validate(X1, X2, y);
    auto [sm, s] = standardize(m);

    auto sd = [](const VectorXd& v) {
        return std::sqrt((v.array() - v.mean()).square().sum() / (v.size() - 1));
    };
    CHECK(sd(sm.y) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(sd(sm.X1.col(0)) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(sd(sm.X2.col(1)) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(s.y_scale == doctest::Approx(sd(y)).epsilon(1e-14));
    // indicator column untouched
    CHECK(sm.X2.col(0) == m.X2.col(0));
    CHECK(s.column_scales[1] == 1.0);
    CHECK_FALSE(s.scaled[1]);
    CHECK(s.scaled[0]);
}

TEST_CASE("standardize on already-unit data is the identity") {
    MatrixXd X1(3, 1), X2(3, 1);
    X1 << 1, 0, 0;  // indicator
    X2 << 0, 1, 0;
    VectorXd y(3);
    y << -1.0, 0.0, 1.0;  // sd exactly 1
    ModelInput m = validate(X1, X2, y);
    auto [sm, s] = standardize(m);
    CHECK(s.y_scale == 1.0);
    CHECK(sm.y == m.y);
    CHECK(sm.X1 == m.X1);
    CHECK(sm.X2 == m.X2);
}

TEST_CASE("standardize round trip recovers the data") {
    std::mt19937_64 gen(5);
    std::normal_distribution<double> nd;
    for (int rep = 0; rep < 20; ++rep) {
        const int n = 12;
        MatrixXd X1(n, 2), X2(n, 2);
        VectorXd y(n);
        for (int i = 0; i < n; ++i) {
            X1(i, 0) = 5.0 * nd(gen) + 2.0;
            X1(i, 1) = (i % 2 == 0) ? 1.0 : 0.0;
            X2(i, 0) = 0.01 * nd(gen);
            X2(i, 1) = nd(gen);
            y[i] = 7.0 * nd(gen) - 3.0;
        }
        ModelInput m = validate(X1, X2, y);
        const bool center = (rep % 2 == 0);
        auto [sm, s] = standardize(m, center);
        ModelInput back = unstandardize_data(sm, s);
        CHECK((back.y - m.y).cwiseAbs().maxCoeff() <=
              1e-14 * m.y.cwiseAbs().maxCoeff());
        CHECK((back.X1 - m.X1).cwiseAbs().maxCoeff() <=
              1e-14 * (1.0 + m.X1.cwiseAbs().maxCoeff()));
        CHECK((back.X2 - m.X2).cwiseAbs().maxCoeff() <=
              1e-14 * (1.0 + m.X2.cwiseAbs().maxCoeff()));
    }
}

TEST_CASE("to_original_units rescales summaries") {
    Standardization s;
    s.y_scale = 2.0;
    s.column_scales = VectorXd(2);
    s.column_scales << 4.0, 1.0;
    s.column_centers = VectorXd::Zero(2);
    s.centered = {false, false};
    s.scaled = {true, false};

    PosteriorSummary sum;
    sum.beta_mean = VectorXd(2);
    sum.beta_mean << 1.0, -0.5;
    sum.beta_sd = VectorXd(2);
    sum.beta_sd << 0.1, 0.2;
    sum.scale_mean = VectorXd(3);
    sum.scale_mean << 1.0, 0.5, 0.25;
    sum.scale_sd = VectorXd(3);
    sum.scale_sd << 0.1, 0.1, 0.1;
    sum.log_norm_const = -1.0;

    PosteriorSummary orig = to_original_units(sum, s);
    CHECK(orig.beta_mean[0] == doctest::Approx(0.5));   // * 2 / 4
    CHECK(orig.beta_mean[1] == doctest::Approx(-1.0));  // * 2
    CHECK(orig.beta_sd[0] == doctest::Approx(0.05));
    CHECK(orig.scale_mean[0] == doctest::Approx(2.0));
}
