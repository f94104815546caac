#pragma once

#include <Eigen/Dense>

#include "quadpost/model.hpp"
#include "quadpost/quadrature.hpp"

namespace quadpost {

/// Non-centered reparametrization of a mixed model: the group-2 columns are
/// multiplied by their fixed prior scales so the transformed coefficients
/// carry unit normal priors; predictions X_hat beta_hat = X beta are
/// unchanged, and reported group-2 moments are back-multiplied by back_map.
struct MixedReduction {
    ModelInput model_hat;      // prior_scales all 1 after the rescale
    Eigen::VectorXd back_map;  // length k2, = original prior scales
};

MixedReduction reduce(const ModelInput& mixed_model);

/// Posterior summary of the mixed model: the coefficients are marginalized
/// analytically as in the two-group engine, and the remaining 2-D density
/// over (sigma1, sigma2) is integrated on a (theta, phi) grid where
/// sigma2 = cot(theta) is fixed per theta node, sharing one
/// eigendecomposition across all phi. Group-2 moments are returned in the
/// original parametrization. scale_mean/sd are (sigma1, sigma2).
PosteriorSummary mixed_moments(const ModelInput& model, const QuadratureConfig& cfg,
                               bool want_covariance = false, int threads = 1);

}  // namespace quadpost
