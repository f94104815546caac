#include "quadpost/special_intercept.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
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

// Per-node factorization of X^t X + R~ through the k1 x k1 Schur
// complement S = D1 + kappa - B^t P2 B.
struct NodeFactor {
    Eigen::VectorXd p1;  // (D1 + kappa)^{-1}
    Eigen::VectorXd p2;  // (D2 + tau)^{-1}
    Eigen::MatrixXd w;   // B^t P2 B
    Eigen::LLT<Eigen::MatrixXd> s_llt;
    double logdet = 0.0;

    Eigen::VectorXd solve(const StructuredDesign& sd, const Eigen::VectorXd& rhs) const {
        const Eigen::Index k1 = sd.k1(), k2 = sd.k2();
        Eigen::VectorXd rhs1 = rhs.head(k1), rhs2 = rhs.tail(k2);
        Eigen::VectorXd t_top = sd.b.transpose() * p2.cwiseProduct(rhs2);
        Eigen::VectorXd t_bot = p1.cwiseProduct(rhs1);
        Eigen::VectorXd u = s_llt.solve(t_top - w * t_bot);
        Eigen::VectorXd s_top = p1.cwiseInverse().cwiseProduct(u);
        Eigen::VectorXd s_bot = t_bot - p1.cwiseProduct(s_top);
        Eigen::VectorXd x(k1 + k2);
        x.head(k1) = p1.cwiseProduct(rhs1 - s_top);
        x.tail(k2) = p2.cwiseProduct(rhs2 - sd.b * s_bot);
        return x;
    }
};

NodeFactor make_factor(const StructuredDesign& sd, const NuThetaNode& node) {
    const double ct = std::cos(node.theta), st = std::sin(node.theta);
    const double tau = (ct * ct) / (st * st);
    const double kappa = (ct * ct) / (node.nu2 * node.nu2);
    NodeFactor f;
    f.p1 = (sd.d1.array() + kappa).inverse().matrix();
    f.p2 = (sd.d2.array() + tau).inverse().matrix();
    f.w = sd.b.transpose() * f.p2.asDiagonal() * sd.b;
    Eigen::MatrixXd s = -f.w;
    s.diagonal() += (sd.d1.array() + kappa).matrix();
    f.s_llt.compute(s);
    if (f.s_llt.info() != Eigen::Success) {
        throw SingularMatrix("structured Schur complement is not positive definite");
    }
    f.logdet = (sd.d2.array() + tau).log().sum() +
               2.0 * f.s_llt.matrixLLT().diagonal().array().log().sum();
    return f;
}

double golden_max(const std::function<double(double)>& g, double a, double b,
                  int iters) {
    const double gr = (std::sqrt(5.0) - 1.0) / 2.0;
    double c = b - gr * (b - a);
    double d = a + gr * (b - a);
    double fc = g(c), fd = g(d);
    for (int i = 0; i < iters; ++i) {
        if (fc > fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - gr * (b - a);
            fc = g(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + gr * (b - a);
            fd = g(d);
        }
    }
    return 0.5 * (a + b);
}

struct ThetaContrib {
    double S = kNegInf;
    double i0 = 0.0;
    Eigen::VectorXd mean_beta;
    Eigen::MatrixXd m2_beta;
    Eigen::Matrix<double, 3, 2> scale;

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

struct CovPlan {
    bool full = false;
    std::vector<int> subset;  // sorted unique indices; empty + !full => diag only
};

// Inverse entries of X^t X + R~ from the Schur pieces: the group-1 block is
// S^{-1}, the cross block -S^{-1} B^t P2, and the group-2 block
// P2 + P2 B S^{-1} B^t P2. The full diagonal goes to diag_acc; strictly
// off-diagonal entries of the requested block go to the lower triangle of
// block_acc.
void add_inverse_entries(const StructuredDesign& sd, const NodeFactor& f,
                         const CovPlan& plan, double coeff,
                         Eigen::VectorXd& diag_acc, Eigen::MatrixXd& block_acc) {
    const Eigen::Index k1 = sd.k1(), k2 = sd.k2();
    Eigen::MatrixXd sinv = f.s_llt.solve(Eigen::MatrixXd::Identity(k1, k1));
    Eigen::MatrixXd g2 = f.s_llt.solve(sd.b.transpose());  // k1 x k2

    diag_acc.head(k1) += coeff * sinv.diagonal();
    for (Eigen::Index j = 0; j < k2; ++j) {
        const double corr = sd.b.row(j).dot(g2.col(j));
        diag_acc[k1 + j] += coeff * (f.p2[j] + f.p2[j] * f.p2[j] * corr);
    }
    if (!plan.full && plan.subset.empty()) return;

    auto entry = [&](Eigen::Index i, Eigen::Index j) -> double {
        if (i < k1 && j < k1) return sinv(i, j);
        if (i >= k1 && j >= k1) {
            const Eigen::Index a = i - k1, b = j - k1;
            return f.p2[a] * f.p2[b] * sd.b.row(a).dot(g2.col(b));
        }
        const Eigen::Index gi = (i < k1) ? i : j;         // group-1 index
        const Eigen::Index gj = ((i < k1) ? j : i) - k1;  // group-2 index
        return -g2(gi, gj) * f.p2[gj];
    };
    if (plan.full) {
        for (Eigen::Index i = 0; i < k1 + k2; ++i) {
            for (Eigen::Index j = 0; j < i; ++j) {
                block_acc(i, j) += coeff * entry(i, j);
            }
        }
    } else {
        for (std::size_t a = 0; a < plan.subset.size(); ++a) {
            for (std::size_t b = 0; b < a; ++b) {
                const Eigen::Index i = plan.subset[a], j = plan.subset[b];
                block_acc(std::max(i, j), std::min(i, j)) += coeff * entry(i, j);
            }
        }
    }
}

ThetaContrib eval_theta(const StructuredDesign& sd, double n, double theta,
                        const QuadratureConfig& cfg, const CovPlan& plan) {
    const Eigen::Index k1 = sd.k1(), k2 = sd.k2(), k = sd.k();
    const double ct = std::cos(theta), st = std::sin(theta);
    const double log_drop = std::log(cfg.drop_factor);
    const double const_theta = 0.5 * static_cast<double>(k) * kLog2Pi -
                               (n - static_cast<double>(k)) * std::log(ct) -
                               static_cast<double>(k2) * std::log(st);

    struct NodeEval {
        NodeFactor f;
        Eigen::VectorXd beta_bar;
        double c = 0.0;
        double u = 0.0;
        double log_pre = kNegInf;  // everything except the u-power and rho terms
        double logh0 = kNegInf;
    };
    auto eval = [&](double nu2) {
        NuThetaNode node{nu2, theta};
        NodeEval e;
        e.f = make_factor(sd, node);
        e.beta_bar = e.f.solve(sd, sd.xty);
        e.c = std::max(0.0, (sd.y_norm_sq - e.beta_bar.dot(sd.xty)) / (ct * ct));
        e.u = 1.0 + nu2 * nu2;
        e.log_pre =
            -static_cast<double>(k1) * std::log(nu2) - 0.5 * e.f.logdet + const_theta;
        e.logh0 = e.log_pre + 0.5 * (n - 3.0) * std::log(e.u) +
                  integrate_rho_log(e.c * e.u, n, 0, cfg.rho_nodes, cfg.drop_factor);
        return e;
    };
    auto g = [&](double nu2) { return eval(nu2).logh0; };

    // Peak of the rho-marginalized integrand in nu2, then the same
    // drop-factor truncation used for rho.
    double peak_pos;
    {
        double best = kNegInf;
        int best_i = 0;
        const int m = 41;
        std::vector<double> probes(m);
        for (int i = 0; i < m; ++i) {
            probes[i] = std::exp(std::log(1e-6) +
                                 (std::log(1e3) - std::log(1e-6)) * i / (m - 1.0));
            const double v = g(probes[i]);
            if (v > best) {
                best = v;
                best_i = i;
            }
        }
        const double lo = probes[std::max(0, best_i - 1)];
        const double hi = probes[std::min(m - 1, best_i + 1)];
        peak_pos = golden_max(g, lo, hi, 48);
    }
    const double g_peak = g(peak_pos);
    const double target = g_peak - log_drop;

    double nu_lo = 0.0;
    {
        const double eps = 1e-10 * std::max(peak_pos, 1.0);
        if (g(eps) < target) {
            double a = eps, b = peak_pos;
            for (int i = 0; i < 48; ++i) {
                const double mid = 0.5 * (a + b);
                (g(mid) < target ? a : b) = mid;
            }
            nu_lo = a;
        }
    }
    double nu_hi;
    {
        double w = std::max(peak_pos, 1.0);
        int tries = 0;
        while (g(peak_pos + w) > target) {
            if (++tries > 60) throw BisectionFailure("nu2 upper bound never brackets");
            w *= 2.0;
        }
        double a = peak_pos, b = peak_pos + w;
        for (int i = 0; i < 48; ++i) {
            const double mid = 0.5 * (a + b);
            (g(mid) > target ? a : b) = mid;
        }
        nu_hi = b;
    }

    QuadRule rule = gauss_legendre(cfg.phi_nodes, nu_lo, nu_hi);

    ThetaContrib out;
    out.mean_beta = Eigen::VectorXd::Zero(k);
    out.m2_beta = Eigen::MatrixXd::Zero(k, k);
    out.scale.setZero();
    Eigen::VectorXd diag_acc = Eigen::VectorXd::Zero(k);

    // Streaming accumulation with a running log offset.
    double S = kNegInf;
    for (std::size_t i = 0; i < rule.size(); ++i) {
        const double nu2 = rule.nodes[i];
        const double wq = rule.weights[i];
        NodeEval e = eval(nu2);
        const double lu = std::log(e.u);
        const double logh1 =
            e.log_pre + 0.5 * (n - 4.0) * lu +
            integrate_rho_log(e.c * e.u, n, 1, cfg.rho_nodes, cfg.drop_factor);
        const double logh2 =
            e.log_pre + 0.5 * (n - 5.0) * lu +
            integrate_rho_log(e.c * e.u, n, 2, cfg.rho_nodes, cfg.drop_factor);
        if (e.logh0 > S) {
            const double r = std::exp(S - e.logh0);
            out.i0 *= r;
            out.mean_beta *= r;
            out.m2_beta *= r;
            out.scale *= r;
            diag_acc *= r;
            S = e.logh0;
        }
        const double f0 = wq * std::exp(e.logh0 - S);
        const double f1 = wq * std::exp(logh1 - S);
        const double f2 = wq * std::exp(logh2 - S);
        out.i0 += f0;
        out.mean_beta += f0 * e.beta_bar;
        out.m2_beta.selfadjointView<Eigen::Lower>().rankUpdate(e.beta_bar, f0);
        add_inverse_entries(sd, e.f, plan, f2 * ct * ct, diag_acc, out.m2_beta);
        out.scale(0, 0) += f1 * ct;
        out.scale(0, 1) += f2 * ct * ct;
        out.scale(1, 0) += f1 * nu2;
        out.scale(1, 1) += f2 * nu2 * nu2;
        out.scale(2, 0) += f1 * st;
        out.scale(2, 1) += f2 * st * st;
    }
    out.m2_beta.diagonal() += diag_acc;
    out.S = S;
    return out;
}

}  // namespace

std::optional<StructuredDesign> detect_structure(const ModelInput& model) {
    const Eigen::Index n = model.n(), k1 = model.k1(), k2 = model.k2();
    StructuredDesign sd;
    sd.d1 = Eigen::VectorXd::Zero(k1);
    sd.d2 = Eigen::VectorXd::Zero(k2);
    sd.b = Eigen::MatrixXd::Zero(k2, k1);
    sd.xty = Eigen::VectorXd::Zero(k1 + k2);
    sd.y_norm_sq = model.y.squaredNorm();

    for (Eigen::Index r = 0; r < n; ++r) {
        Eigen::Index i1 = -1, i2 = -1;
        for (Eigen::Index j = 0; j < k1; ++j) {
            if (model.X1(r, j) != 0.0) {
                if (i1 >= 0) return std::nullopt;
                i1 = j;
            }
        }
        for (Eigen::Index j = 0; j < k2; ++j) {
            if (model.X2(r, j) != 0.0) {
                if (i2 >= 0) return std::nullopt;
                i2 = j;
            }
        }
        if (i1 < 0 || i2 < 0) return std::nullopt;
        const double a = model.X1(r, i1), b = model.X2(r, i2);
        sd.d1[i1] += a * a;
        sd.d2[i2] += b * b;
        sd.b(i2, i1) += a * b;
        sd.xty[i1] += a * model.y[r];
        sd.xty[k1 + i2] += b * model.y[r];
    }
    return sd;
}

double schur_logdet(const StructuredDesign& sd, const NuThetaNode& node) {
    return make_factor(sd, node).logdet;
}

Eigen::VectorXd smw_solve(const StructuredDesign& sd, const NuThetaNode& node,
                          const Eigen::VectorXd& rhs) {
    if (rhs.size() != sd.k()) {
        throw DimensionMismatch("smw_solve: rhs length does not match the design");
    }
    return make_factor(sd, node).solve(sd, rhs);
}

PosteriorSummary special_moments(const ModelInput& model, const QuadratureConfig& cfg,
                                 bool cov_full, const std::vector<int>& cov_subset,
                                 int threads) {
    cfg.check();
    auto sd_opt = detect_structure(model);
    if (!sd_opt.has_value()) {
        throw InvalidConfig("special_moments requires the structured design");
    }
    const StructuredDesign& sd = *sd_opt;
    const Eigen::Index k = sd.k();
    const double n = static_cast<double>(model.n());

    CovPlan plan;
    plan.full = cov_full;
    plan.subset = cov_subset;
    std::sort(plan.subset.begin(), plan.subset.end());
    plan.subset.erase(std::unique(plan.subset.begin(), plan.subset.end()),
                      plan.subset.end());
    for (int idx : plan.subset) {
        if (idx < 0 || idx >= k) throw InvalidConfig("covariance index out of range");
    }

    QuadRule theta_rule = gauss_legendre(cfg.phi_nodes, 0.0, kPi / 2.0);
    std::vector<ThetaContrib> parts(theta_rule.size());
    parallel_for(theta_rule.size(), threads, [&](std::size_t i) {
        parts[i] = eval_theta(sd, n, theta_rule.nodes[i], cfg, plan);
    });
    for (std::size_t i = 0; i < parts.size(); ++i) {
        parts[i].scale_by(theta_rule.weights[i]);
    }
    ThetaContrib total = pairwise_reduce(parts, combine);

    PosteriorSummary s;
    if (!(total.i0 > 0.0) || !std::isfinite(total.i0)) {
        throw Error("normalizing constant is not positive/finite; degenerate input?");
    }
    s.log_norm_const = total.S + std::log(total.i0);
    s.beta_mean = total.mean_beta / total.i0;
    Eigen::MatrixXd e2 = Eigen::MatrixXd(total.m2_beta.selfadjointView<Eigen::Lower>());
    e2 /= total.i0;
    Eigen::MatrixXd cov = e2 - s.beta_mean * s.beta_mean.transpose();
    cov = 0.5 * (cov + cov.transpose()).eval();
    for (Eigen::Index j = 0; j < k; ++j) {
        if (cov(j, j) < -1e-10) {
            throw NonPositiveVariance("negative posterior variance beyond tolerance");
        }
        if (cov(j, j) < 0.0) cov(j, j) = 0.0;
    }
    s.beta_sd = cov.diagonal().cwiseSqrt();
    if (plan.full) {
        s.beta_cov = std::move(cov);
    } else if (!plan.subset.empty()) {
        // Only the requested block carries the conditional-covariance part;
        // blank everything else off the diagonal rather than report partial
        // values.
        std::vector<bool> in(k, false);
        for (int idx : plan.subset) in[static_cast<std::size_t>(idx)] = true;
        for (Eigen::Index i = 0; i < k; ++i) {
            for (Eigen::Index j = 0; j < k; ++j) {
                if (i != j && !(in[i] && in[j])) cov(i, j) = 0.0;
            }
        }
        s.beta_cov = std::move(cov);
    }
    s.scale_mean.resize(3);
    s.scale_sd.resize(3);
    for (int i = 0; i < 3; ++i) {
        const double m1 = total.scale(i, 0) / total.i0;
        const double m2 = total.scale(i, 1) / total.i0;
        s.scale_mean[i] = m1;
        s.scale_sd[i] = std::sqrt(std::max(0.0, m2 - m1 * m1));
    }
    s.theta_nodes_used = cfg.phi_nodes;
    return s;
}

}  // namespace quadpost
