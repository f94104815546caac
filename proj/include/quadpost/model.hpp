#pragma once

#include <Eigen/Dense>
#include <optional>
#include <vector>

namespace quadpost {

enum class ModelKind { two_group, mixed };

/// Validated model data. Immutable after construction; safe to share across
/// threads. Scale-parameter convention throughout the engine: sigma1 is the
/// likelihood (noise) scale, sigma2 the group-1 prior scale, sigma3 the
/// group-2 prior scale. For mixed models the group-2 prior scales are the
/// fixed per-coefficient values in prior_scales and sigma3 is not modeled.
struct ModelInput {
    Eigen::MatrixXd X1;
    Eigen::MatrixXd X2;
    Eigen::VectorXd y;
    ModelKind kind = ModelKind::two_group;
    Eigen::VectorXd prior_scales;  // mixed only, length k2, all > 0
    bool rank_deficient = false;   // warning flag from validate

    Eigen::Index n() const { return y.size(); }
    Eigen::Index k1() const { return X1.cols(); }
    Eigen::Index k2() const { return X2.cols(); }
    Eigen::Index k() const { return X1.cols() + X2.cols(); }

    Eigen::MatrixXd stacked() const {
        Eigen::MatrixXd X(n(), k());
        X.leftCols(k1()) = X1;
        X.rightCols(k2()) = X2;
        return X;
    }
};

/// Posterior means/sds for the k regression coefficients and the scale
/// parameters, plus the log normalizing constant of the unnormalized
/// density. scale_mean is (sigma1, sigma2, sigma3) for two-group models and
/// (sigma1, sigma2) for mixed models.
struct PosteriorSummary {
    Eigen::VectorXd beta_mean;
    Eigen::VectorXd beta_sd;
    std::optional<Eigen::MatrixXd> beta_cov;
    Eigen::VectorXd scale_mean;
    Eigen::VectorXd scale_sd;
    double log_norm_const = 0.0;

    // Diagnostics.
    int theta_nodes_used = 0;
    double theta_error_estimate = 0.0;
};

/// Record of the scaling applied by standardize(); sufficient to map data
/// and posterior summaries back to original units.
struct Standardization {
    double y_scale = 1.0;
    Eigen::VectorXd column_scales;   // length k, all > 0 (1 where untouched)
    Eigen::VectorXd column_centers;  // length k, 0 where not centered
    std::vector<bool> centered;      // per column
    std::vector<bool> scaled;        // per column (false for indicators)

    bool any_centered() const;
};

/// Validates raw inputs: consistent dimensions, finite entries, positive
/// prior scales, and (two-group) n >= k. Near-singular X^t X sets the
/// rank_deficient warning flag; zero eigenvalues are handled analytically
/// downstream, so rank deficiency is not fatal.
ModelInput validate(const Eigen::MatrixXd& X1, const Eigen::MatrixXd& X2,
                    const Eigen::VectorXd& y,
                    ModelKind kind = ModelKind::two_group,
                    const Eigen::VectorXd& prior_scales = Eigen::VectorXd());

/// Rescales y and the continuous columns of X to unit sample standard
/// deviation. Indicator (0/1) and constant columns pass through unscaled and
/// are flagged. Columns are centered only when center_continuous is set.
std::pair<ModelInput, Standardization> standardize(const ModelInput& input,
                                                   bool center_continuous = false);

/// Inverse of standardize() on the data (round-trip identity).
ModelInput unstandardize_data(const ModelInput& input, const Standardization& s);

/// Maps a summary computed on standardized data back to original units:
/// coefficients scale by y_scale / column_scale and scale parameters by
/// y_scale. When columns were centered an intercept column index must be
/// supplied so the shift can be absorbed.
PosteriorSummary to_original_units(const PosteriorSummary& summary,
                                   const Standardization& s,
                                   int intercept_index = -1);

}  // namespace quadpost
