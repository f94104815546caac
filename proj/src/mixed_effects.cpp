#include "quadpost/mixed_effects.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

#include "quadpost/errors.hpp"
#include "quadpost/parallel.hpp"
#include "quadpost/two_group.hpp"

namespace quadpost {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kNegInf = -std::numeric_limits<double>::infinity();

struct ThetaContrib {
    double S = kNegInf;
    double i0 = 0.0;
    Eigen::VectorXd mean_beta;
    Eigen::MatrixXd m2_beta;
    Eigen::Matrix<double, 2, 2> scale;  // sigma x power

    void scale_by(double w) {
        i0 *= w;
        mean_beta *= w;
        m2_beta *= w;
        scale *= w;
    }
};

void combine(ThetaContrib& a, ThetaContrib& b) {
    const double S = std::max(a.S, b.S);
    if (S == kNegInf) return;
    const double fa = (a.S == kNegInf) ? 0.0 : std::exp(a.S - S);
    const double fb = (b.S == kNegInf) ? 0.0 : std::exp(b.S - S);
    a.i0 = a.i0 * fa + b.i0 * fb;
    a.mean_beta = a.mean_beta * fa + b.mean_beta * fb;
    a.m2_beta = a.m2_beta * fa + b.m2_beta * fb;
    a.scale = a.scale * fa + b.scale * fb;
    a.S = S;
}

// One theta slice of the 2-D (theta, phi) integral. sigma2 = cot(theta) and
// sigma1 = cot(phi)/sin(theta); rho = sqrt(sigma1^2 + sigma2^2 + 1) is the
// deterministic function 1/(sin phi sin theta), and the measure carries
// |gamma|^{-1} = rho^2 sqrt(1 + sigma2^2) in place of a rho integral.
ThetaContrib eval_theta(const Precompute& pre, Eigen::Index k1, double n,
                        double theta, const QuadratureConfig& cfg) {
    const Eigen::Index k = pre.X.cols();
    ThetaSlice slice = theta_slice(pre, k1, theta);
    const double nk = n - static_cast<double>(k);
    const double st = std::sin(theta);
    const double log_drop = std::log(cfg.drop_factor);

    auto log_value = [&](double phi) {
        AlphaBeta ab = alpha_beta(slice, phi);
        const double sph = std::sin(phi), cph = std::cos(phi);
        const double rho = 1.0 / (sph * st);
        const double c = pre.d_norm_sq / (cph * cph) + ab.beta;
        // beta-marginalized kernel times |gamma|^{-1}; the (theta-constant)
        // sqrt(1 + sigma2^2) = 1/sin(theta) enters as -log sin(theta).
        return ab.log_alpha - 0.5 * rho * rho - 0.5 * c / (rho * rho) -
               n * std::log(rho) - nk * std::log(cph) + 2.0 * std::log(rho) -
               std::log(st);
    };

    double phi_hi = kPi / 2.0;
    {
        QuadRule scan = gauss_legendre(cfg.phi_scan_nodes, 0.0, kPi / 2.0);
        double running_max = kNegInf;
        for (std::size_t i = 0; i < scan.size(); ++i) {
            const double v = log_value(scan.nodes[i]);
            running_max = std::max(running_max, v);
            if (v < running_max - log_drop) {
                phi_hi = scan.nodes[i];
                break;
            }
        }
    }

    QuadRule rule = gauss_legendre(cfg.phi_nodes, 0.0, phi_hi);
    const std::size_t nphi = rule.size();
    std::vector<double> logs(nphi);
    double S = kNegInf;
    for (std::size_t i = 0; i < nphi; ++i) {
        logs[i] = log_value(rule.nodes[i]);
        S = std::max(S, logs[i]);
    }

    ThetaContrib out;
    out.S = S;
    out.mean_beta = Eigen::VectorXd::Zero(k);
    out.m2_beta = Eigen::MatrixXd::Zero(k, k);
    out.scale.setZero();
    if (S == kNegInf) return out;

    Eigen::VectorXd mean_w = Eigen::VectorXd::Zero(k);
    Eigen::VectorXd var_w = Eigen::VectorXd::Zero(k);
    Eigen::MatrixXd outer_w = Eigen::MatrixXd::Zero(k, k);
    Eigen::VectorXd mt(k), den(k);
    const double sigma2 = std::cos(theta) / st;

    for (std::size_t i = 0; i < nphi; ++i) {
        const double phi = rule.nodes[i];
        const double w = rule.weights[i];
        const double sph = std::sin(phi), cph = std::cos(phi);
        const double s2 = sph * sph, c2 = cph * cph;
        const double rho = 1.0 / (sph * st);
        const double sigma1 = cph / (sph * st);

        den = (slice.lambda.array() * s2 + c2).matrix();
        mt = (slice.lambda.array() * slice.w_tilde.array() / den.array()).matrix();

        const double f = w * std::exp(logs[i] - S);
        out.i0 += f;
        mean_w += (f * s2) * mt;
        var_w += (f * rho * rho * s2 * c2) * den.cwiseInverse();
        outer_w.selfadjointView<Eigen::Lower>().rankUpdate(mt, f * s2 * s2);
        out.scale(0, 0) += f * sigma1;
        out.scale(0, 1) += f * sigma1 * sigma1;
        out.scale(1, 0) += f * sigma2;
        out.scale(1, 1) += f * sigma2 * sigma2;
    }

    const double ct = std::cos(theta);
    Eigen::VectorXd q(k);
    for (Eigen::Index j = 0; j < k; ++j) q[j] = (j < k1) ? ct : st;
    out.mean_beta = q.asDiagonal() * (slice.V * mean_w);
    Eigen::MatrixXd M = outer_w.selfadjointView<Eigen::Lower>();
    M.diagonal() += var_w;
    Eigen::MatrixXd T = slice.V * M * slice.V.transpose();
    out.m2_beta = q.asDiagonal() * T * q.asDiagonal();
    return out;
}

}  // namespace

MixedReduction reduce(const ModelInput& mixed_model) {
    if (mixed_model.kind != ModelKind::mixed) {
        throw InvalidConfig("reduce expects a mixed model");
    }
    if ((mixed_model.prior_scales.array() <= 0.0).any()) {
        throw NonPositiveScale("prior scales must be positive");
    }
    MixedReduction red;
    red.back_map = mixed_model.prior_scales;
    red.model_hat = mixed_model;
    for (Eigen::Index j = 0; j < mixed_model.k2(); ++j) {
        red.model_hat.X2.col(j) *= mixed_model.prior_scales[j];
    }
    red.model_hat.prior_scales = Eigen::VectorXd::Ones(mixed_model.k2());
    return red;
}

PosteriorSummary mixed_moments(const ModelInput& model, const QuadratureConfig& cfg,
                               bool want_covariance, int threads) {
    cfg.check();
    if (model.n() < model.k()) {
        throw DimensionMismatch("mixed model requires n >= k");
    }
    MixedReduction red = reduce(model);
    Precompute pre = precompute(red.model_hat);
    const double n = static_cast<double>(model.n());
    const Eigen::Index k1 = model.k1();
    const Eigen::Index k = model.k();

    // Gaussian nodes in theta over the image of sigma2 > 0; the phi bound is
    // chosen adaptively per theta. The theta direction uses the same node
    // count as phi (the per-theta eigendecomposition is only k x k here).
    QuadRule theta_rule = gauss_legendre(cfg.phi_nodes, 0.0, kPi / 2.0);
    std::vector<ThetaContrib> parts(theta_rule.size());
    parallel_for(theta_rule.size(), threads, [&](std::size_t i) {
        parts[i] = eval_theta(pre, k1, n, theta_rule.nodes[i], cfg);
    });
    for (std::size_t i = 0; i < parts.size(); ++i) {
        parts[i].scale_by(theta_rule.weights[i]);
    }
    ThetaContrib total = pairwise_reduce(parts, combine);

    PosteriorSummary s;
    if (!(total.i0 > 0.0) || !std::isfinite(total.i0)) {
        throw Error("normalizing constant is not positive/finite; degenerate input?");
    }
    // Normalizer of the reduced density f_hat, which lacks the constant
    // exp(-sigma3^2/2) = exp(-1/2) carried by the spherical kernel.
    s.log_norm_const = total.S + std::log(total.i0) + 0.5;
    s.beta_mean = total.mean_beta / total.i0;
    Eigen::MatrixXd e2 = total.m2_beta / total.i0;
    Eigen::MatrixXd cov = e2 - s.beta_mean * s.beta_mean.transpose();
    cov = 0.5 * (cov + cov.transpose()).eval();

    // Back to the original group-2 parametrization.
    Eigen::VectorXd bm = Eigen::VectorXd::Ones(k);
    bm.tail(model.k2()) = red.back_map;
    s.beta_mean = s.beta_mean.cwiseProduct(bm);
    cov = bm.asDiagonal() * cov * bm.asDiagonal();
    for (Eigen::Index j = 0; j < k; ++j) {
        if (cov(j, j) < -1e-10) {
            throw NonPositiveVariance("negative posterior variance beyond tolerance");
        }
        if (cov(j, j) < 0.0) cov(j, j) = 0.0;
    }
    s.beta_sd = cov.diagonal().cwiseSqrt();
    if (want_covariance) s.beta_cov = std::move(cov);

    s.scale_mean.resize(2);
    s.scale_sd.resize(2);
    for (int i = 0; i < 2; ++i) {
        const double m1 = total.scale(i, 0) / total.i0;
        const double m2 = total.scale(i, 1) / total.i0;
        s.scale_mean[i] = m1;
        s.scale_sd[i] = std::sqrt(std::max(0.0, m2 - m1 * m1));
    }
    s.theta_nodes_used = cfg.phi_nodes;
    return s;
}

}  // namespace quadpost
