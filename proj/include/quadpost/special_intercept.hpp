#pragma once

#include <Eigen/Dense>
#include <optional>
#include <vector>

#include "quadpost/model.hpp"
#include "quadpost/quadrature.hpp"

namespace quadpost {

/// Factored Gram blocks of a structured design: every row of X1 and of X2
/// has exactly one nonzero entry, so X^t X = [D1 B^t; B D2] with diagonal
/// D1, D2 and a k2 x k1 cross block B.
struct StructuredDesign {
    Eigen::VectorXd d1;   // diag of X1^t X1
    Eigen::VectorXd d2;   // diag of X2^t X2
    Eigen::MatrixXd b;    // X2^t X1
    Eigen::VectorXd xty;  // length k1 + k2
    double y_norm_sq = 0.0;

    Eigen::Index k1() const { return d1.size(); }
    Eigen::Index k2() const { return d2.size(); }
    Eigen::Index k() const { return d1.size() + d2.size(); }
};

/// Returns the factored blocks iff the model has the one-nonzero-per-row
/// structure in both groups; empty otherwise (caller falls back to the
/// general path).
std::optional<StructuredDesign> detect_structure(const ModelInput& model);

/// One node of the (nu2, theta) outer grid: (sigma1, sigma2, sigma3) =
/// rho (cos theta, nu2, sin theta).
struct NuThetaNode {
    double nu2 = 0.0;
    double theta = 0.0;
};

/// log det(X^t X + R~) with R~ = diag(cos^2(theta)/nu2^2 I_k1,
/// 1/tan^2(theta) I_k2), evaluated through the Schur complement in
/// O(k2 k1^2 + k1^3).
double schur_logdet(const StructuredDesign& sd, const NuThetaNode& node);

/// Solves (X^t X + R~) x = rhs using only diagonal scalings, products with
/// B/B^t, and a single dense k1 x k1 factorization.
Eigen::VectorXd smw_solve(const StructuredDesign& sd, const NuThetaNode& node,
                          const Eigen::VectorXd& rhs);

/// Posterior summary through the structured fast path. Coefficient sds are
/// always produced; off-diagonal covariance entries are computed only for
/// the requested index set (or all of them with cov_full), and entries
/// outside the requested block are left at zero.
PosteriorSummary special_moments(const ModelInput& model,
                                 const QuadratureConfig& cfg,
                                 bool cov_full = false,
                                 const std::vector<int>& cov_subset = {},
                                 int threads = 1);

}  // namespace quadpost
