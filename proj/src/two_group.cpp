#include "quadpost/two_group.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <vector>

#include "quadpost/errors.hpp"
#include "quadpost/parallel.hpp"
#include "quadpost/rho_integral.hpp"

namespace quadpost {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kLog2Pi = 1.8378770664093454836;

// Unweighted contribution of one theta node, carried with its own log
// offset S so that numerator and normalizer stay representable for any n.
struct ThetaContrib {
    double S = kNegInf;
    double i0 = 0.0;
    Eigen::VectorXd mean_beta;
    Eigen::MatrixXd m2_beta;           // only when covariance is requested
    Eigen::Matrix<double, 3, 2> scale; // sigma x power (p = 1, 2)
    bool with_cov = false;
    bool with_scales = false;

    void scale_by(double w) {
        i0 *= w;
        mean_beta *= w;
        if (with_cov) m2_beta *= w;
        if (with_scales) scale *= w;
    }
};

void combine(ThetaContrib& a, ThetaContrib& b) {
    const double S = std::max(a.S, b.S);
    if (S == kNegInf) return;
    const double fa = (a.S == kNegInf) ? 0.0 : std::exp(a.S - S);
    const double fb = (b.S == kNegInf) ? 0.0 : std::exp(b.S - S);
    a.i0 = a.i0 * fa + b.i0 * fb;
    a.mean_beta = a.mean_beta * fa + b.mean_beta * fb;
    if (a.with_cov) a.m2_beta = a.m2_beta * fa + b.m2_beta * fb;
    if (a.with_scales) a.scale = a.scale * fa + b.scale * fb;
    a.S = S;
}

struct EngineOptions {
    bool want_cov = false;
    bool want_scales = false;
    int threads = 1;
};

// Evaluates the phi/rho double integral for one theta slice.
ThetaContrib eval_theta(const Precompute& pre, Eigen::Index k1, double n,
                        double theta, const QuadratureConfig& cfg,
                        const EngineOptions& opt) {
    const Eigen::Index k = pre.X.cols();
    ThetaSlice slice = theta_slice(pre, k1, theta);
    const double nk = n - static_cast<double>(k);
    const double log_drop = std::log(cfg.drop_factor);

    auto log_base_l0 = [&](double phi) {
        AlphaBeta ab = alpha_beta(slice, phi);
        const double cph = std::cos(phi);
        const double c = pre.d_norm_sq / (cph * cph) + ab.beta;
        const double base = ab.log_alpha + std::log(std::sin(phi)) - nk * std::log(cph);
        return base + integrate_rho_log(c, n, 0, cfg.rho_nodes, cfg.drop_factor);
    };

    // Upper phi bound: walk the scan nodes and cut where the integrand has
    // dropped by drop_factor from the running maximum.
    double phi_hi = kPi / 2.0;
    {
        QuadRule scan = gauss_legendre(cfg.phi_scan_nodes, 0.0, kPi / 2.0);
        double running_max = kNegInf;
        for (std::size_t i = 0; i < scan.size(); ++i) {
            const double v = log_base_l0(scan.nodes[i]);
            running_max = std::max(running_max, v);
            if (v < running_max - log_drop) {
                phi_hi = scan.nodes[i];
                break;
            }
        }
    }

    QuadRule rule = gauss_legendre(cfg.phi_nodes, 0.0, phi_hi);
    const std::size_t nphi = rule.size();

    struct PhiNode {
        double l0 = kNegInf;  // base + log rho-integral, extra power 0
        double l1 = kNegInf;
        double l2 = kNegInf;
        double log_alpha = 0.0;
        double beta = 0.0;
    };
    std::vector<PhiNode> nodes(nphi);
    double S = kNegInf;
    for (std::size_t i = 0; i < nphi; ++i) {
        const double phi = rule.nodes[i];
        AlphaBeta ab = alpha_beta(slice, phi);
        const double cph = std::cos(phi);
        const double c = pre.d_norm_sq / (cph * cph) + ab.beta;
        const double base = ab.log_alpha + std::log(std::sin(phi)) - nk * std::log(cph);
        PhiNode& nd = nodes[i];
        nd.log_alpha = ab.log_alpha;
        nd.beta = ab.beta;
        nd.l0 = base + integrate_rho_log(c, n, 0, cfg.rho_nodes, cfg.drop_factor);
        if (opt.want_scales) {
            nd.l1 = base + integrate_rho_log(c, n, 1, cfg.rho_nodes, cfg.drop_factor);
        }
        if (opt.want_scales || opt.want_cov) {
            nd.l2 = base + integrate_rho_log(c, n, 2, cfg.rho_nodes, cfg.drop_factor);
        }
        S = std::max(S, nd.l0);
    }

    ThetaContrib out;
    out.S = S;
    out.with_cov = opt.want_cov;
    out.with_scales = opt.want_scales;
    out.mean_beta = Eigen::VectorXd::Zero(k);
    if (opt.want_cov) out.m2_beta = Eigen::MatrixXd::Zero(k, k);
    out.scale.setZero();
    if (S == kNegInf) return out;

    Eigen::VectorXd mean_w = Eigen::VectorXd::Zero(k);
    Eigen::VectorXd var_w = Eigen::VectorXd::Zero(k);
    Eigen::MatrixXd outer_w;
    if (opt.want_cov) outer_w = Eigen::MatrixXd::Zero(k, k);
    Eigen::VectorXd mt(k), den(k);

    for (std::size_t i = 0; i < nphi; ++i) {
        const PhiNode& nd = nodes[i];
        const double phi = rule.nodes[i];
        const double w = rule.weights[i];
        const double sph = std::sin(phi), cph = std::cos(phi);
        const double s2 = sph * sph, c2 = cph * cph;

        den = (slice.lambda.array() * s2 + c2).matrix();
        mt = (slice.lambda.array() * slice.w_tilde.array() / den.array()).matrix();

        const double f0 = w * std::exp(nd.l0 - S);
        out.i0 += f0;
        mean_w += (f0 * s2) * mt;
        if (opt.want_cov) {
            const double f2 = w * std::exp(nd.l2 - S);
            var_w += (f2 * s2 * c2) * den.cwiseInverse();
            outer_w.selfadjointView<Eigen::Lower>().rankUpdate(mt, f0 * s2 * s2);
        }
        if (opt.want_scales) {
            const double f1 = w * std::exp(nd.l1 - S);
            const double f2 = w * std::exp(nd.l2 - S);
            out.scale(0, 0) += f1 * cph;
            out.scale(0, 1) += f2 * c2;
            out.scale(1, 0) += f1 * sph;  // cos/sin theta applied below
            out.scale(1, 1) += f2 * s2;
            out.scale(2, 0) += f1 * sph;
            out.scale(2, 1) += f2 * s2;
        }
    }

    // Back to beta coordinates: beta = (I1 cos + I2 sin) V w.
    const double ct = std::cos(theta), st = std::sin(theta);
    Eigen::VectorXd q(k);
    for (Eigen::Index j = 0; j < k; ++j) q[j] = (j < k1) ? ct : st;

    out.mean_beta = q.asDiagonal() * (slice.V * mean_w);
    if (opt.want_cov) {
        Eigen::MatrixXd M = outer_w.selfadjointView<Eigen::Lower>();
        M.diagonal() += var_w;
        Eigen::MatrixXd T = slice.V * M * slice.V.transpose();
        out.m2_beta = q.asDiagonal() * T * q.asDiagonal();
    }
    if (opt.want_scales) {
        out.scale(1, 0) *= ct;
        out.scale(1, 1) *= ct * ct;
        out.scale(2, 0) *= st;
        out.scale(2, 1) *= st * st;
    }
    return out;
}

PosteriorSummary summarize(ThetaContrib total, Eigen::Index k, bool want_cov,
                           bool want_scales) {
    PosteriorSummary s;
    if (!(total.i0 > 0.0) || !std::isfinite(total.i0)) {
        throw Error("normalizing constant is not positive/finite; degenerate input?");
    }
    s.log_norm_const = total.S + std::log(total.i0);
    s.beta_mean = total.mean_beta / total.i0;
    if (want_cov) {
        Eigen::MatrixXd e2 = total.m2_beta / total.i0;
        Eigen::MatrixXd cov = e2 - s.beta_mean * s.beta_mean.transpose();
        cov = 0.5 * (cov + cov.transpose()).eval();
        for (Eigen::Index j = 0; j < k; ++j) {
            if (cov(j, j) < -1e-10) {
                throw NonPositiveVariance("negative posterior variance beyond tolerance");
            }
            if (cov(j, j) < 0.0) cov(j, j) = 0.0;
        }
        s.beta_sd = cov.diagonal().cwiseSqrt();
        s.beta_cov = std::move(cov);
    }
    if (want_scales) {
        s.scale_mean.resize(3);
        s.scale_sd.resize(3);
        for (int i = 0; i < 3; ++i) {
            const double m1 = total.scale(i, 0) / total.i0;
            const double m2 = total.scale(i, 1) / total.i0;
            s.scale_mean[i] = m1;
            s.scale_sd[i] = std::sqrt(std::max(0.0, m2 - m1 * m1));
        }
    }
    return s;
}

ThetaContrib run_level(const Precompute& pre, Eigen::Index k1, double n,
                       const QuadRule& rule, const QuadratureConfig& cfg,
                       const EngineOptions& opt,
                       std::map<double, ThetaContrib>* cache) {
    const std::size_t m = rule.size();
    std::vector<ThetaContrib> parts(m);
    std::vector<std::size_t> todo;
    for (std::size_t i = 0; i < m; ++i) {
        if (cache != nullptr) {
            auto it = cache->find(rule.nodes[i]);
            if (it != cache->end()) {
                parts[i] = it->second;
                continue;
            }
        }
        todo.push_back(i);
    }
    parallel_for(todo.size(), opt.threads, [&](std::size_t t) {
        const std::size_t i = todo[t];
        parts[i] = eval_theta(pre, k1, n, rule.nodes[i], cfg, opt);
    });
    if (cache != nullptr) {
        for (std::size_t i : todo) cache->emplace(rule.nodes[i], parts[i]);
    }
    for (std::size_t i = 0; i < m; ++i) parts[i].scale_by(rule.weights[i]);
    return pairwise_reduce(parts, combine);
}

double summary_difference(const PosteriorSummary& a, const PosteriorSummary& b) {
    double diff = std::abs(a.log_norm_const - b.log_norm_const) /
                  std::max(1.0, std::abs(b.log_norm_const));
    for (Eigen::Index j = 0; j < a.beta_mean.size(); ++j) {
        diff = std::max(diff, std::abs(a.beta_mean[j] - b.beta_mean[j]) /
                                  std::max(1.0, std::abs(b.beta_mean[j])));
    }
    if (a.beta_sd.size() == b.beta_sd.size()) {
        for (Eigen::Index j = 0; j < a.beta_sd.size(); ++j) {
            diff = std::max(diff, std::abs(a.beta_sd[j] - b.beta_sd[j]) /
                                      std::max(1.0, std::abs(b.beta_sd[j])));
        }
    }
    return diff;
}

PosteriorSummary run_engine(const ModelInput& model, const QuadratureConfig& cfg,
                            const EngineOptions& opt) {
    cfg.check();
    if (model.kind != ModelKind::two_group) {
        throw InvalidConfig("two-group engine called with a mixed model");
    }
    Precompute pre = precompute(model);
    const double n = static_cast<double>(model.n());
    const Eigen::Index k1 = model.k1();
    const Eigen::Index k = model.k();

    if (!cfg.theta_doubling) {
        QuadRule rule = gauss_legendre(cfg.theta_nodes, 0.0, kPi / 2.0);
        ThetaContrib total = run_level(pre, k1, n, rule, cfg, opt, nullptr);
        PosteriorSummary s = summarize(std::move(total), k, opt.want_cov, opt.want_scales);
        s.theta_nodes_used = cfg.theta_nodes;
        return s;
    }

    std::map<double, ThetaContrib> cache;
    int order = std::max(2, cfg.theta_nodes);
    PosteriorSummary prev;
    bool have_prev = false;
    while (true) {
        QuadRule rule = chebyshev_practical(order, 0.0, kPi / 2.0);
        ThetaContrib total = run_level(pre, k1, n, rule, cfg, opt, &cache);
        PosteriorSummary s = summarize(std::move(total), k, opt.want_cov, opt.want_scales);
        s.theta_nodes_used = static_cast<int>(rule.size());
        if (have_prev) {
            s.theta_error_estimate = summary_difference(prev, s);
            if (s.theta_error_estimate < cfg.theta_tol) return s;
        }
        if (2 * order > cfg.theta_max_nodes) return s;  // best value so far
        prev = s;
        have_prev = true;
        order *= 2;
    }
}

}  // namespace

Precompute precompute(const ModelInput& model) {
    Precompute pre;
    pre.X = model.stacked();
    const Eigen::Index k = pre.X.cols();
    if (model.n() < k) {
        throw DimensionMismatch("precompute requires n >= k");
    }
    Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(k, k);
    gram.selfadjointView<Eigen::Lower>().rankUpdate(pre.X.transpose());
    pre.gram = gram.selfadjointView<Eigen::Lower>();
    pre.xty = pre.X.transpose() * model.y;
    pre.y_norm_sq = model.y.squaredNorm();

    // Minimum-norm least squares through the eigendecomposition of the Gram
    // matrix; zero eigenvalues are dropped, which also flags rank deficiency.
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(pre.gram);
    if (es.info() != Eigen::Success) {
        throw EigenFailure("eigendecomposition of X^t X did not converge");
    }
    const Eigen::VectorXd& ev = es.eigenvalues();
    const double lmax = std::max(0.0, ev.maxCoeff());
    const double tol = 1e-12 * std::max(lmax, 1e-300);
    Eigen::VectorXd inv = Eigen::VectorXd::Zero(k);
    for (Eigen::Index j = 0; j < k; ++j) {
        if (ev[j] > tol) {
            inv[j] = 1.0 / ev[j];
        } else {
            pre.rank_deficient = true;
        }
    }
    pre.beta_tilde =
        es.eigenvectors() * (inv.asDiagonal() * (es.eigenvectors().transpose() * pre.xty));
    pre.d_norm_sq = (model.y - pre.X * pre.beta_tilde).squaredNorm();
    return pre;
}

ThetaSlice theta_slice(const Precompute& pre, Eigen::Index k1, double theta) {
    const Eigen::Index k = pre.X.cols();
    if (!(theta > 0.0) || !(theta < kPi / 2.0)) {
        throw InvalidInterval("theta must lie in (0, pi/2)");
    }
    const double ct = std::cos(theta), st = std::sin(theta);
    Eigen::VectorXd q(k);
    for (Eigen::Index j = 0; j < k; ++j) q[j] = (j < k1) ? ct : st;

    // X_theta^t X_theta = diag(q) X^t X diag(q): rescale the cached Gram.
    Eigen::MatrixXd gram_theta = q.asDiagonal() * pre.gram * q.asDiagonal();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gram_theta);
    if (es.info() != Eigen::Success) {
        throw EigenFailure("eigendecomposition of X_theta^t X_theta did not converge");
    }
    ThetaSlice slice;
    slice.theta = theta;
    slice.lambda = es.eigenvalues().cwiseMax(0.0);
    slice.V = es.eigenvectors();
    slice.w_tilde = slice.V.transpose() * (pre.beta_tilde.array() / q.array()).matrix();
    return slice;
}

AlphaBeta alpha_beta(const ThetaSlice& slice, double phi) {
    if (!(phi > 0.0) || !(phi < kPi / 2.0)) {
        throw InvalidInterval("phi must lie in (0, pi/2)");
    }
    const double s2 = std::sin(phi) * std::sin(phi);
    const double c2 = std::cos(phi) * std::cos(phi);
    AlphaBeta ab;
    for (Eigen::Index j = 0; j < slice.lambda.size(); ++j) {
        const double den = slice.lambda[j] * s2 + c2;
        ab.log_alpha += 0.5 * (kLog2Pi - std::log(den));
        ab.beta += slice.lambda[j] * slice.w_tilde[j] * slice.w_tilde[j] / den;
    }
    return ab;
}

double log_norm_constant(const ModelInput& model, const QuadratureConfig& cfg,
                         int threads) {
    EngineOptions opt{false, false, threads};
    return run_engine(model, cfg, opt).log_norm_const;
}

Eigen::VectorXd posterior_means(const ModelInput& model,
                                const QuadratureConfig& cfg, int threads) {
    EngineOptions opt{false, false, threads};
    return run_engine(model, cfg, opt).beta_mean;
}

CovarianceResult posterior_covariance(const ModelInput& model,
                                      const QuadratureConfig& cfg, int threads) {
    EngineOptions opt{true, false, threads};
    PosteriorSummary s = run_engine(model, cfg, opt);
    return {std::move(s.beta_mean), std::move(*s.beta_cov)};
}

ScaleMomentsResult scale_moments(const ModelInput& model,
                                 const QuadratureConfig& cfg, int threads) {
    EngineOptions opt{false, true, threads};
    PosteriorSummary s = run_engine(model, cfg, opt);
    return {std::move(s.scale_mean), std::move(s.scale_sd)};
}

PosteriorSummary fit_two_group(const ModelInput& model, const QuadratureConfig& cfg,
                               bool want_covariance, int threads) {
    // The covariance machinery is what produces the sds, so the second-moment
    // pass always runs; the off-diagonal block is dropped if unwanted.
    EngineOptions opt{true, true, threads};
    PosteriorSummary s = run_engine(model, cfg, opt);
    if (!want_covariance) s.beta_cov.reset();
    return s;
}

}  // namespace quadpost
