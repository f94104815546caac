#include "quadpost/model.hpp"

#include <cmath>

#include "quadpost/errors.hpp"

namespace quadpost {

namespace {

double sample_sd(const Eigen::VectorXd& v) {
    const Eigen::Index n = v.size();
    if (n < 2) return 0.0;
    const double mean = v.mean();
    const double ss = (v.array() - mean).square().sum();
    return std::sqrt(ss / static_cast<double>(n - 1));
}

bool is_indicator(const Eigen::VectorXd& v) {
    return ((v.array() == 0.0) || (v.array() == 1.0)).all();
}

}  // namespace

bool Standardization::any_centered() const {
    for (bool c : centered) {
        if (c) return true;
    }
    return false;
}

ModelInput validate(const Eigen::MatrixXd& X1, const Eigen::MatrixXd& X2,
                    const Eigen::VectorXd& y, ModelKind kind,
                    const Eigen::VectorXd& prior_scales) {
    const Eigen::Index n = y.size();
    if (n < 1 || X1.cols() < 1 || X2.cols() < 1) {
        throw DimensionMismatch("need n >= 1, k1 >= 1 and k2 >= 1");
    }
    if (X1.rows() != n || X2.rows() != n) {
        throw DimensionMismatch("X1, X2 and y must have the same number of rows");
    }
    if (!X1.allFinite() || !X2.allFinite() || !y.allFinite()) {
        throw NonFinite("design matrices and outcome must be finite");
    }
    const Eigen::Index k = X1.cols() + X2.cols();
    if (kind == ModelKind::two_group && n < k) {
        throw DimensionMismatch("two-group model requires n >= k1 + k2");
    }

    ModelInput m;
    m.X1 = X1;
    m.X2 = X2;
    m.y = y;
    m.kind = kind;
    if (kind == ModelKind::mixed) {
        if (prior_scales.size() != X2.cols()) {
            throw DimensionMismatch("mixed model needs one prior scale per group-2 column");
        }
        if (!prior_scales.allFinite() || (prior_scales.array() <= 0.0).any()) {
            throw NonPositiveScale("mixed prior scales must be positive and finite");
        }
        m.prior_scales = prior_scales;
    } else if (prior_scales.size() != 0) {
        throw InvalidConfig("prior scales are only meaningful for mixed models");
    }

    // Rank warning: zero eigenvalues of X^t X are handled analytically, but
    // flag near-singular designs for the caller.
    Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(k, k);
    Eigen::MatrixXd X = m.stacked();
    gram.selfadjointView<Eigen::Lower>().rankUpdate(X.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
    es.compute(gram.selfadjointView<Eigen::Lower>(), Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success) {
        throw EigenFailure("eigendecomposition of X^t X did not converge");
    }
    const double lmax = es.eigenvalues().maxCoeff();
    const double lmin = es.eigenvalues().minCoeff();
    m.rank_deficient = (lmin < 1e-12 * lmax);
    return m;
}

std::pair<ModelInput, Standardization> standardize(const ModelInput& input,
                                                   bool center_continuous) {
    const Eigen::Index k = input.k();
    Standardization s;
    s.column_scales = Eigen::VectorXd::Ones(k);
    s.column_centers = Eigen::VectorXd::Zero(k);
    s.centered.assign(static_cast<std::size_t>(k), false);
    s.scaled.assign(static_cast<std::size_t>(k), false);

    ModelInput out = input;
    const double ysd = sample_sd(input.y);
    if (ysd > 0.0) {
        s.y_scale = ysd;
        out.y /= ysd;
    }

    auto handle = [&](Eigen::MatrixXd& X, Eigen::Index offset) {
        for (Eigen::Index j = 0; j < X.cols(); ++j) {
            Eigen::VectorXd col = X.col(j);
            const double sd = sample_sd(col);
            if (sd == 0.0 || is_indicator(col)) {
                continue;  // constant or indicator column: pass through
            }
            if (center_continuous) {
                const double c = col.mean();
                X.col(j).array() -= c;
                s.column_centers[offset + j] = c;
                s.centered[static_cast<std::size_t>(offset + j)] = true;
            }
            X.col(j) /= sd;
            s.column_scales[offset + j] = sd;
            s.scaled[static_cast<std::size_t>(offset + j)] = true;
        }
    };
    handle(out.X1, 0);
    handle(out.X2, input.k1());
    return {out, s};
}

ModelInput unstandardize_data(const ModelInput& input, const Standardization& s) {
    ModelInput out = input;
    out.y *= s.y_scale;
    for (Eigen::Index j = 0; j < input.k(); ++j) {
        Eigen::MatrixXd& X = (j < input.k1()) ? out.X1 : out.X2;
        const Eigen::Index jj = (j < input.k1()) ? j : j - input.k1();
        X.col(jj) *= s.column_scales[j];
        X.col(jj).array() += s.column_centers[j];
    }
    return out;
}

PosteriorSummary to_original_units(const PosteriorSummary& summary,
                                   const Standardization& s,
                                   int intercept_index) {
    const Eigen::Index k = summary.beta_mean.size();
    if (s.column_scales.size() != k) {
        throw DimensionMismatch("standardization does not match summary size");
    }
    // b_original = L * b_standardized. Diagonal scaling, plus an intercept
    // row absorbing the shift when columns were centered.
    Eigen::MatrixXd L = Eigen::MatrixXd::Zero(k, k);
    for (Eigen::Index j = 0; j < k; ++j) {
        L(j, j) = s.y_scale / s.column_scales[j];
    }
    if (s.any_centered()) {
        if (intercept_index < 0 || intercept_index >= k) {
            throw InvalidConfig(
                "centered columns require an intercept column to absorb the shift");
        }
        for (Eigen::Index j = 0; j < k; ++j) {
            if (j != intercept_index && s.centered[static_cast<std::size_t>(j)]) {
                L(intercept_index, j) = -s.column_centers[j] * s.y_scale / s.column_scales[j];
            }
        }
    }

    PosteriorSummary out = summary;
    out.beta_mean = L * summary.beta_mean;
    if (summary.beta_cov.has_value()) {
        Eigen::MatrixXd cov = L * (*summary.beta_cov) * L.transpose();
        cov = 0.5 * (cov + cov.transpose()).eval();
        out.beta_sd = cov.diagonal().cwiseMax(0.0).cwiseSqrt();
        out.beta_cov = std::move(cov);
    } else {
        // Without cross-covariances only pure scalings are exact.
        if (s.any_centered()) {
            throw MissingCovariance(
                "back-mapping sds of centered fits requires the covariance");
        }
        out.beta_sd = summary.beta_sd;
        for (Eigen::Index j = 0; j < k; ++j) {
            out.beta_sd[j] *= s.y_scale / s.column_scales[j];
        }
    }
    out.scale_mean = summary.scale_mean * s.y_scale;
    out.scale_sd = summary.scale_sd * s.y_scale;
    return out;
}

}  // namespace quadpost
