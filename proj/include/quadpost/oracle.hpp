#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "quadpost/model.hpp"
#include "quadpost/quadrature.hpp"

namespace quadpost {
namespace oracle {

/// Slow reference implementations used by tests and acceptance criteria.
/// Deliberately independent of the quadrature-engine bound machinery: the
/// scale parameters are integrated on a fixed tensor grid and the
/// conditional Gaussian moments come from dense factorizations.

/// Tensor grid over the scale parameters: (sigma1, sigma2, sigma3) for
/// two-group models, (sigma1, sigma2) for mixed models.
struct SigmaGrid {
    std::vector<QuadRule> dims;
    bool self_check = true;
};

SigmaGrid make_sigma_grid(int ndims, int nodes_per_dim = 40, double hi = 8.0,
                          bool self_check = true);

struct ConditionalMoments {
    Eigen::VectorXd mean;
    Eigen::MatrixXd cov;
    double log_evidence = 0.0;
};

/// Exact conditional posterior of beta given the scale parameters, plus the
/// log of the beta-marginalized unnormalized density at that sigma.
ConditionalMoments conditional_moments(const ModelInput& model,
                                       const Eigen::VectorXd& sigma);

/// Dense-grid marginalization over sigma of the conditional moments,
/// combined by the laws of total expectation and covariance. Includes a
/// built-in self-check: the grid is doubled and GridTooCoarse is thrown if
/// any mean moves by more than 1e-7.
PosteriorSummary brute_force_summary(const ModelInput& model, const SigmaGrid& grid);

/// Draws from the brute-force posterior (sigma from the grid weights, then
/// beta from the conditional Gaussian). Rows are draws.
Eigen::MatrixXd sample_posterior(const ModelInput& model, const SigmaGrid& grid,
                                 int n_draws, std::uint64_t seed);

/// Verification report for the Gaussian moment identities
///   int exp(-(b-t)^t C (b-t)) db           = pi^(k/2) / sqrt(det C)
///   first moment                           = t
///   second moment                          = C^{-1}/2 + t t^t
/// checked by independent 1-D tensor quadrature on the diagonalized form and
/// by importance-sampling Monte Carlo.
struct GaussianLemmaReport {
    double quad_norm_dev = 0.0;
    double quad_mean_dev = 0.0;
    double quad_second_dev = 0.0;
    double mc_norm_dev = 0.0;
    double mc_mean_dev = 0.0;
    double mc_second_dev = 0.0;
};

GaussianLemmaReport gaussian_lemma_check(const Eigen::MatrixXd& C,
                                         const Eigen::VectorXd& beta_tilde,
                                         int quad_nodes = 80,
                                         int mc_draws = 1000000,
                                         std::uint64_t seed = 20240915);

}  // namespace oracle
}  // namespace quadpost
