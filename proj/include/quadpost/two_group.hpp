#pragma once

#include <Eigen/Dense>

#include "quadpost/model.hpp"
#include "quadpost/quadrature.hpp"

namespace quadpost {

/// Quantities shared across all quadrature nodes: the least-squares solution
/// of X beta = y (minimum-norm for rank-deficient X), the squared residual
/// norm, and the Gram blocks reused by every theta slice.
struct Precompute {
    Eigen::MatrixXd X;     // stacked n x k
    Eigen::MatrixXd gram;  // X^t X
    Eigen::VectorXd xty;   // X^t y
    double y_norm_sq = 0.0;
    Eigen::VectorXd beta_tilde;
    double d_norm_sq = 0.0;
    bool rank_deficient = false;
};

Precompute precompute(const ModelInput& model);

/// Per-theta work: eigendecomposition of X_theta^t X_theta with
/// X_theta = X (I1 cos + I2 sin), and the rotated least-squares solution,
/// all independent of phi and rho.
struct ThetaSlice {
    double theta = 0.0;
    Eigen::VectorXd lambda;  // eigenvalues, clamped at 0
    Eigen::MatrixXd V;       // orthogonal
    Eigen::VectorXd w_tilde;
};

ThetaSlice theta_slice(const Precompute& pre, Eigen::Index k1, double theta);

/// alpha = prod_i sqrt(2 pi / (lambda_i sin^2 phi + cos^2 phi)) in log form,
/// and beta = sum_i lambda_i w_tilde_i^2 / (lambda_i sin^2 phi + cos^2 phi).
struct AlphaBeta {
    double log_alpha = 0.0;
    double beta = 0.0;
};

AlphaBeta alpha_beta(const ThetaSlice& slice, double phi);

/// log of the normalizing constant I0 of the unnormalized two-group density.
double log_norm_constant(const ModelInput& model, const QuadratureConfig& cfg,
                         int threads = 1);

Eigen::VectorXd posterior_means(const ModelInput& model,
                                const QuadratureConfig& cfg, int threads = 1);

struct CovarianceResult {
    Eigen::VectorXd mean;
    Eigen::MatrixXd cov;
};

CovarianceResult posterior_covariance(const ModelInput& model,
                                      const QuadratureConfig& cfg,
                                      int threads = 1);

struct ScaleMomentsResult {
    Eigen::VectorXd mean;  // (sigma1, sigma2, sigma3)
    Eigen::VectorXd sd;
};

ScaleMomentsResult scale_moments(const ModelInput& model,
                                 const QuadratureConfig& cfg, int threads = 1);

/// Full posterior pass: normalizing constant, coefficient means/sds
/// (covariance optional) and scale-parameter moments in one sweep over the
/// (theta, phi, rho) grid.
PosteriorSummary fit_two_group(const ModelInput& model,
                               const QuadratureConfig& cfg,
                               bool want_covariance = false, int threads = 1);

}  // namespace quadpost
