#include "quadpost/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <numeric>

#include "quadpost/errors.hpp"
#include "quadpost/rng.hpp"

namespace quadpost {
namespace oracle {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;
constexpr double kNegInf = -std::numeric_limits<double>::infinity();

struct Ctx {
    Eigen::MatrixXd gram;
    Eigen::VectorXd xty;
    double y_norm_sq = 0.0;
    const ModelInput* model = nullptr;
};

Ctx make_ctx(const ModelInput& model) {
    Ctx ctx;
    Eigen::MatrixXd X = model.stacked();
    Eigen::MatrixXd g = Eigen::MatrixXd::Zero(model.k(), model.k());
    g.selfadjointView<Eigen::Lower>().rankUpdate(X.transpose());
    ctx.gram = g.selfadjointView<Eigen::Lower>();
    ctx.xty = X.transpose() * model.y;
    ctx.y_norm_sq = model.y.squaredNorm();
    ctx.model = &model;
    return ctx;
}

ConditionalMoments node_moments(const Ctx& ctx, const Eigen::VectorXd& sigma) {
    const ModelInput& m = *ctx.model;
    const Eigen::Index k = m.k(), k1 = m.k1();
    const bool mixed = (m.kind == ModelKind::mixed);
    const int want = mixed ? 2 : 3;
    if (sigma.size() != want) {
        throw DimensionMismatch("sigma has the wrong number of components");
    }
    if ((sigma.array() <= 0.0).any()) {
        throw NonPositiveScale("all sigma components must be positive");
    }
    const double s1 = sigma[0], s2 = sigma[1];

    Eigen::MatrixXd A = ctx.gram / (s1 * s1);
    for (Eigen::Index j = 0; j < k; ++j) {
        double prior_sd;
        if (j < k1) {
            prior_sd = s2;
        } else {
            prior_sd = mixed ? m.prior_scales[j - k1] : sigma[2];
        }
        A(j, j) += 1.0 / (prior_sd * prior_sd);
    }
    Eigen::LLT<Eigen::MatrixXd> llt(A);
    if (llt.info() != Eigen::Success) {
        throw SingularMatrix("conditional precision matrix is not positive definite");
    }
    ConditionalMoments out;
    Eigen::VectorXd v = ctx.xty / (s1 * s1);
    out.mean = llt.solve(v);
    out.cov = llt.solve(Eigen::MatrixXd::Identity(k, k));

    const double logdet = 2.0 * llt.matrixLLT().diagonal().array().log().sum();

    const double n = static_cast<double>(m.n());
    double pref = -0.5 * sigma.squaredNorm() - n * std::log(s1) -
                  static_cast<double>(k1) * std::log(s2);
    if (!mixed) {
        pref -= static_cast<double>(m.k2()) * std::log(sigma[2]);
    }
    out.log_evidence = pref + 0.5 * static_cast<double>(k) * kLog2Pi - 0.5 * logdet -
                       0.5 * (ctx.y_norm_sq / (s1 * s1) - out.mean.dot(v));
    return out;
}

struct GridTotals {
    double peak = kNegInf;          // max of log_evidence + log weights
    double peak_ev = kNegInf;       // max of log_evidence alone
    double boundary_peak = kNegInf; // max of log_evidence on the upper boundary
    double z = 0.0;                 // sum of exp(log_term - peak)
    Eigen::VectorXd mean_num;
    Eigen::MatrixXd second_num;
    Eigen::VectorXd scale1_num;
    Eigen::VectorXd scale2_num;
    double log_norm = kNegInf;
};

// Sequential tensor sweep with streaming rescaling by the running peak.
GridTotals sweep(const Ctx& ctx, const std::vector<QuadRule>& dims,
                 const std::vector<int>& loop_order) {
    const int D = static_cast<int>(dims.size());
    const Eigen::Index k = ctx.model->k();
    GridTotals t;
    t.mean_num = Eigen::VectorXd::Zero(k);
    t.second_num = Eigen::MatrixXd::Zero(k, k);
    t.scale1_num = Eigen::VectorXd::Zero(D);
    t.scale2_num = Eigen::VectorXd::Zero(D);

    std::vector<int> order(loop_order);
    if (order.empty()) {
        order.resize(D);
        std::iota(order.begin(), order.end(), 0);
    }

    std::size_t total = 1;
    for (const auto& d : dims) total *= d.size();
    std::vector<std::size_t> idx(D, 0);
    Eigen::VectorXd sigma(D);

    for (std::size_t flat = 0; flat < total; ++flat) {
        std::size_t rem = flat;
        for (int o = D - 1; o >= 0; --o) {
            const int d = order[o];
            idx[d] = rem % dims[d].size();
            rem /= dims[d].size();
        }
        double logw = 0.0;
        bool on_boundary = false;
        for (int d = 0; d < D; ++d) {
            sigma[d] = dims[d].nodes[idx[d]];
            logw += std::log(dims[d].weights[idx[d]]);
            if (idx[d] + 1 == dims[d].size()) on_boundary = true;
        }
        ConditionalMoments cm = node_moments(ctx, sigma);
        const double log_term = cm.log_evidence + logw;
        t.peak_ev = std::max(t.peak_ev, cm.log_evidence);
        if (on_boundary) t.boundary_peak = std::max(t.boundary_peak, cm.log_evidence);
        if (log_term > t.peak) {
            const double f = std::exp(t.peak - log_term);
            t.z *= f;
            t.mean_num *= f;
            t.second_num *= f;
            t.scale1_num *= f;
            t.scale2_num *= f;
            t.peak = log_term;
        }
        const double p = std::exp(log_term - t.peak);
        t.z += p;
        t.mean_num += p * cm.mean;
        t.second_num += p * (cm.cov + cm.mean * cm.mean.transpose());
        for (int d = 0; d < D; ++d) {
            t.scale1_num[d] += p * sigma[d];
            t.scale2_num[d] += p * sigma[d] * sigma[d];
        }
    }
    t.log_norm = t.peak + std::log(t.z);
    return t;
}

PosteriorSummary totals_to_summary(const GridTotals& t, int D) {
    PosteriorSummary s;
    s.log_norm_const = t.log_norm;
    s.beta_mean = t.mean_num / t.z;
    Eigen::MatrixXd cov = t.second_num / t.z - s.beta_mean * s.beta_mean.transpose();
    cov = 0.5 * (cov + cov.transpose()).eval();
    s.beta_sd = cov.diagonal().cwiseMax(0.0).cwiseSqrt();
    s.beta_cov = std::move(cov);
    s.scale_mean.resize(D);
    s.scale_sd.resize(D);
    for (int d = 0; d < D; ++d) {
        const double m1 = t.scale1_num[d] / t.z;
        const double m2 = t.scale2_num[d] / t.z;
        s.scale_mean[d] = m1;
        s.scale_sd[d] = std::sqrt(std::max(0.0, m2 - m1 * m1));
    }
    return s;
}

std::vector<QuadRule> refined(const std::vector<QuadRule>& dims, int factor) {
    std::vector<QuadRule> out;
    out.reserve(dims.size());
    for (const auto& d : dims) {
        out.push_back(gauss_legendre(static_cast<int>(d.size()) * factor, d.a, d.b));
    }
    return out;
}

}  // namespace

SigmaGrid make_sigma_grid(int ndims, int nodes_per_dim, double hi, bool self_check) {
    if (ndims < 2 || ndims > 3) {
        throw InvalidConfig("sigma grid must have 2 or 3 dimensions");
    }
    SigmaGrid g;
    g.self_check = self_check;
    for (int d = 0; d < ndims; ++d) {
        g.dims.push_back(gauss_legendre(nodes_per_dim, 0.0, hi));
    }
    return g;
}

ConditionalMoments conditional_moments(const ModelInput& model,
                                       const Eigen::VectorXd& sigma) {
    Ctx ctx = make_ctx(model);
    return node_moments(ctx, sigma);
}

PosteriorSummary brute_force_summary(const ModelInput& model, const SigmaGrid& grid) {
    const int D = static_cast<int>(grid.dims.size());
    const int want = (model.kind == ModelKind::mixed) ? 2 : 3;
    if (D != want) {
        throw DimensionMismatch("sigma grid dimensionality does not match the model");
    }
    Ctx ctx = make_ctx(model);

    // Widen the upper truncation until the boundary integrand has dropped by
    // at least 1e16 from the peak.
    std::vector<QuadRule> dims = grid.dims;
    GridTotals t;
    const double boundary_drop = std::log(1e16);
    for (int attempt = 0;; ++attempt) {
        t = sweep(ctx, dims, {});
        if (t.boundary_peak <= t.peak_ev - boundary_drop) break;
        if (attempt >= 4) {
            throw GridTooCoarse("sigma grid boundary drop not achieved");
        }
        for (auto& d : dims) {
            d = gauss_legendre(static_cast<int>(d.size()), d.a, d.b * 1.5);
        }
    }

    PosteriorSummary coarse = totals_to_summary(t, D);
    if (!grid.self_check) return coarse;

    GridTotals t2 = sweep(ctx, refined(dims, 2), {});
    PosteriorSummary fine = totals_to_summary(t2, D);
    for (Eigen::Index j = 0; j < model.k(); ++j) {
        const double delta = std::abs(fine.beta_mean[j] - coarse.beta_mean[j]);
        if (delta > 1e-7 * (1.0 + std::abs(fine.beta_mean[j]))) {
            throw GridTooCoarse("doubling the sigma grid moved a posterior mean");
        }
    }
    return fine;
}

Eigen::MatrixXd sample_posterior(const ModelInput& model, const SigmaGrid& grid,
                                 int n_draws, std::uint64_t seed) {
    Ctx ctx = make_ctx(model);
    const int D = static_cast<int>(grid.dims.size());
    const Eigen::Index k = model.k();

    std::size_t total = 1;
    for (const auto& d : grid.dims) total *= d.size();

    // Pass 1: log weights of every node.
    std::vector<double> log_terms(total);
    std::vector<std::size_t> idx(D, 0);
    Eigen::VectorXd sigma(D);
    double peak = kNegInf;
    for (std::size_t flat = 0; flat < total; ++flat) {
        std::size_t rem = flat;
        for (int d = D - 1; d >= 0; --d) {
            idx[d] = rem % grid.dims[d].size();
            rem /= grid.dims[d].size();
        }
        double logw = 0.0;
        for (int d = 0; d < D; ++d) {
            sigma[d] = grid.dims[d].nodes[idx[d]];
            logw += std::log(grid.dims[d].weights[idx[d]]);
        }
        log_terms[flat] = node_moments(ctx, sigma).log_evidence + logw;
        peak = std::max(peak, log_terms[flat]);
    }
    std::vector<double> cum(total);
    double z = 0.0;
    for (std::size_t i = 0; i < total; ++i) {
        z += std::exp(log_terms[i] - peak);
        cum[i] = z;
    }

    // Pass 2: categorical draw over nodes, then the conditional Gaussian.
    struct NodeFactor {
        Eigen::VectorXd mean;
        Eigen::MatrixXd chol;
    };
    std::map<std::size_t, NodeFactor> factors;
    Rng rng(seed);
    Eigen::MatrixXd draws(n_draws, k);
    Eigen::VectorXd zvec(k);
    for (int i = 0; i < n_draws; ++i) {
        const double u = rng.uniform() * z;
        const std::size_t node =
            std::lower_bound(cum.begin(), cum.end(), u) - cum.begin();
        auto it = factors.find(node);
        if (it == factors.end()) {
            std::size_t rem = node;
            for (int d = D - 1; d >= 0; --d) {
                idx[d] = rem % grid.dims[d].size();
                rem /= grid.dims[d].size();
            }
            for (int d = 0; d < D; ++d) sigma[d] = grid.dims[d].nodes[idx[d]];
            ConditionalMoments cm = node_moments(ctx, sigma);
            NodeFactor nf;
            nf.mean = cm.mean;
            nf.chol = Eigen::LLT<Eigen::MatrixXd>(cm.cov).matrixL();
            it = factors.emplace(node, std::move(nf)).first;
        }
        for (Eigen::Index j = 0; j < k; ++j) zvec[j] = rng.normal();
        draws.row(i) = (it->second.mean + it->second.chol * zvec).transpose();
    }
    return draws;
}

GaussianLemmaReport gaussian_lemma_check(const Eigen::MatrixXd& C,
                                         const Eigen::VectorXd& beta_tilde,
                                         int quad_nodes, int mc_draws,
                                         std::uint64_t seed) {
    const Eigen::Index k = C.rows();
    if (C.cols() != k || beta_tilde.size() != k) {
        throw DimensionMismatch("gaussian_lemma_check: shape mismatch");
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(C);
    if (es.info() != Eigen::Success || es.eigenvalues().minCoeff() <= 0.0) {
        throw SingularMatrix("gaussian_lemma_check requires SPD C");
    }
    const Eigen::VectorXd lam = es.eigenvalues();
    const Eigen::MatrixXd U = es.eigenvectors();

    const double log_det = lam.array().log().sum();
    const double target_norm =
        std::exp(0.5 * static_cast<double>(k) * std::log(std::numbers::pi) - 0.5 * log_det);
    const Eigen::MatrixXd target_second =
        0.5 * es.operatorInverseSqrt() * es.operatorInverseSqrt() +
        beta_tilde * beta_tilde.transpose();
    const double second_scale = 1.0 + target_second.cwiseAbs().maxCoeff();
    const double mean_scale = 1.0 + beta_tilde.cwiseAbs().maxCoeff();

    GaussianLemmaReport rep;

    // Tensor quadrature in the diagonalizing coordinates: the integrand
    // factorizes, so only 1-D moments are needed.
    {
        Eigen::VectorXd m0(k), m1(k), m2(k);
        for (Eigen::Index j = 0; j < k; ++j) {
            const double L = std::sqrt(40.0 / lam[j]);
            QuadRule r = gauss_legendre(quad_nodes, -L, L);
            double a0 = 0.0, a1 = 0.0, a2 = 0.0;
            for (std::size_t i = 0; i < r.size(); ++i) {
                const double x = r.nodes[i];
                const double e = std::exp(-lam[j] * x * x) * r.weights[i];
                a0 += e;
                a1 += e * x;
                a2 += e * x * x;
            }
            m0[j] = a0;
            m1[j] = a1;
            m2[j] = a2;
        }
        const double i0 = m0.prod();
        rep.quad_norm_dev = std::abs(i0 / target_norm - 1.0);
        Eigen::VectorXd zmean(k);
        for (Eigen::Index j = 0; j < k; ++j) zmean[j] = m1[j] / m0[j];
        Eigen::VectorXd mean = beta_tilde + U * zmean;
        rep.quad_mean_dev = (mean - beta_tilde).cwiseAbs().maxCoeff() / mean_scale;
        Eigen::VectorXd diag(k);
        for (Eigen::Index j = 0; j < k; ++j) diag[j] = m2[j] / m0[j];
        Eigen::MatrixXd second = U * diag.asDiagonal() * U.transpose() +
                                 beta_tilde * (U * zmean).transpose() +
                                 (U * zmean) * beta_tilde.transpose() +
                                 beta_tilde * beta_tilde.transpose();
        rep.quad_second_dev =
            (second - target_second).cwiseAbs().maxCoeff() / second_scale;
    }

    // Importance sampling with a slightly widened Gaussian proposal.
    {
        Rng rng(seed);
        Eigen::VectorXd pl = (0.75 * lam.array().inverse()).sqrt();  // prop sd in z
        double sw = 0.0;
        Eigen::VectorXd swx = Eigen::VectorXd::Zero(k);
        Eigen::MatrixXd swxx = Eigen::MatrixXd::Zero(k, k);
        double log_prop_norm = 0.0;
        for (Eigen::Index j = 0; j < k; ++j) {
            log_prop_norm += -0.5 * kLog2Pi - std::log(pl[j]);
        }
        Eigen::VectorXd zvec(k);
        for (int i = 0; i < mc_draws; ++i) {
            double quad = 0.0, prop_quad = 0.0;
            for (Eigen::Index j = 0; j < k; ++j) {
                const double g = rng.normal();
                zvec[j] = pl[j] * g;
                quad += lam[j] * zvec[j] * zvec[j];
                prop_quad += g * g;
            }
            const double w = std::exp(-quad - (log_prop_norm - 0.5 * prop_quad));
            sw += w;
            swx += w * zvec;
            swxx.selfadjointView<Eigen::Lower>().rankUpdate(zvec, w);
        }
        const double i0 = sw / mc_draws;
        rep.mc_norm_dev = std::abs(i0 / target_norm - 1.0);
        Eigen::VectorXd mean = beta_tilde + U * (swx / sw);
        rep.mc_mean_dev = (mean - beta_tilde).cwiseAbs().maxCoeff() / mean_scale;
        Eigen::MatrixXd exx = Eigen::MatrixXd(swxx.selfadjointView<Eigen::Lower>()) / sw;
        Eigen::MatrixXd second = U * exx * U.transpose() +
                                 beta_tilde * (U * (swx / sw)).transpose() +
                                 (U * (swx / sw)) * beta_tilde.transpose() +
                                 beta_tilde * beta_tilde.transpose();
        rep.mc_second_dev =
            (second - target_second).cwiseAbs().maxCoeff() / second_scale;
    }
    return rep;
}

}  // namespace oracle
}  // namespace quadpost
