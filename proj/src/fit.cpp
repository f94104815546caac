#include "quadpost/fit.hpp"

#include <algorithm>
#include <chrono>
#include <map>

#include "quadpost/errors.hpp"
#include "quadpost/mixed_effects.hpp"
#include "quadpost/special_intercept.hpp"
#include "quadpost/two_group.hpp"

namespace quadpost {

namespace {

QuadratureConfig parse_quad(const FlatConfig& flat) {
    QuadratureConfig q;
    q.rho_nodes = flat.get_int("rho_nodes", q.rho_nodes);
    q.phi_nodes = flat.get_int("phi_nodes", q.phi_nodes);
    q.phi_scan_nodes = flat.get_int("phi_scan_nodes", q.phi_scan_nodes);
    q.theta_nodes = flat.get_int("theta_nodes", q.theta_nodes);
    q.drop_factor = flat.get_double("drop_factor", q.drop_factor);
    q.theta_tol = flat.get_double("theta_tol", q.theta_tol);
    q.theta_doubling = flat.get_bool("theta_doubling", q.theta_doubling);
    q.theta_max_nodes = flat.get_int("theta_max_nodes", q.theta_max_nodes);
    q.check();
    return q;
}

// Chooses the structured fast path when its outer-grid cost beats the
// per-theta eigendecomposition cost of the general engine.
bool special_is_cheaper(Eigen::Index k1, Eigen::Index k2, const QuadratureConfig& q) {
    const double k = static_cast<double>(k1 + k2);
    const double special = static_cast<double>(q.phi_nodes) *
                           static_cast<double>(k2) * static_cast<double>(k1 * k1);
    const double general = 10.0 * k * k * k;
    return special < general;
}

}  // namespace

FitConfig parse_fit_config(const FlatConfig& flat) {
    FitConfig cfg;
    const std::string kind = flat.get_or("model", "two_group");
    if (kind == "two_group") {
        cfg.kind = ModelKind::two_group;
    } else if (kind == "mixed") {
        cfg.kind = ModelKind::mixed;
    } else {
        throw InvalidConfig("model must be two_group or mixed, got '" + kind + "'");
    }
    cfg.outcome = flat.get("outcome");
    cfg.group1 = flat.get_list("group1");
    cfg.group2 = flat.get_list("group2");
    cfg.cell = flat.get_or("cell", "");
    if (cfg.group1.empty() && cfg.cell.empty()) {
        throw InvalidConfig("need at least one group-1 column (group1 or cell)");
    }
    if (cfg.group2.empty()) {
        throw InvalidConfig("need at least one group-2 column");
    }
    if (cfg.kind == ModelKind::mixed) {
        for (const std::string& s : flat.get_list("prior_scales")) {
            cfg.prior_scales.push_back(std::stod(s));
        }
        if (cfg.prior_scales.empty()) {
            throw InvalidConfig("mixed model requires prior_scales");
        }
    }
    cfg.standardize = flat.get_bool("standardize", true);
    cfg.center = flat.get_bool("center", false);

    const std::string path = flat.get_or("path", "auto");
    if (path == "auto") {
        cfg.path = FitConfig::Path::auto_detect;
    } else if (path == "general") {
        cfg.path = FitConfig::Path::general;
    } else if (path == "special") {
        cfg.path = FitConfig::Path::special;
    } else {
        throw InvalidConfig("path must be auto, general or special");
    }

    const std::string cov = flat.get_or("covariance", "none");
    if (cov == "none") {
        cfg.cov_mode = FitConfig::CovMode::none;
    } else if (cov == "full") {
        cfg.cov_mode = FitConfig::CovMode::full;
    } else {
        cfg.cov_mode = FitConfig::CovMode::subset;
        cfg.cov_names = flat.get_list("covariance");
    }
    cfg.quad = parse_quad(flat);
    cfg.threads = flat.get_int("threads", 1);
    cfg.standardized_output = flat.get_bool("standardized_output", false);
    return cfg;
}

Dataset load_dataset(const CsvTable& csv, const FitConfig& cfg) {
    Dataset d;
    const std::size_t n = csv.rows.size();
    if (n == 0) {
        throw IoError(csv.path + ": no data rows");
    }
    const std::size_t ycol = csv.col(cfg.outcome);
    d.y.resize(static_cast<Eigen::Index>(n));
    for (std::size_t r = 0; r < n; ++r) {
        d.y[static_cast<Eigen::Index>(r)] = parse_double(csv, r, ycol);
    }

    std::vector<std::string> g1_names;
    std::vector<Eigen::VectorXd> g1_cols;

    if (!cfg.cell.empty()) {
        const std::size_t cc = csv.col(cfg.cell);
        std::vector<std::string> levels;
        std::map<std::string, std::size_t> level_of;
        std::vector<std::size_t> row_level(n);
        for (std::size_t r = 0; r < n; ++r) {
            const std::string& v = csv.rows[r][cc];
            auto it = level_of.find(v);
            if (it == level_of.end()) {
                it = level_of.emplace(v, levels.size()).first;
                levels.push_back(v);
            }
            row_level[r] = it->second;
        }
        for (std::size_t l = 0; l < levels.size(); ++l) {
            Eigen::VectorXd col = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
            for (std::size_t r = 0; r < n; ++r) {
                if (row_level[r] == l) col[static_cast<Eigen::Index>(r)] = 1.0;
            }
            g1_cols.push_back(std::move(col));
            g1_names.push_back(cfg.cell + ":" + levels[l]);
        }
    }
    for (const std::string& name : cfg.group1) {
        const std::size_t c = csv.col(name);
        Eigen::VectorXd col(static_cast<Eigen::Index>(n));
        for (std::size_t r = 0; r < n; ++r) {
            col[static_cast<Eigen::Index>(r)] = parse_double(csv, r, c);
        }
        g1_cols.push_back(std::move(col));
        g1_names.push_back(name);
    }

    d.k1 = static_cast<Eigen::Index>(g1_cols.size());
    d.X1.resize(static_cast<Eigen::Index>(n), d.k1);
    for (Eigen::Index j = 0; j < d.k1; ++j) d.X1.col(j) = g1_cols[j];

    d.X2.resize(static_cast<Eigen::Index>(n),
                static_cast<Eigen::Index>(cfg.group2.size()));
    for (std::size_t j = 0; j < cfg.group2.size(); ++j) {
        const std::size_t c = csv.col(cfg.group2[j]);
        for (std::size_t r = 0; r < n; ++r) {
            d.X2(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j)) =
                parse_double(csv, r, c);
        }
    }
    d.names = g1_names;
    d.names.insert(d.names.end(), cfg.group2.begin(), cfg.group2.end());
    return d;
}

FitResult run_fit(const Dataset& data, const FitConfig& cfg) {
    const auto t0 = std::chrono::steady_clock::now();

    Eigen::VectorXd prior;
    if (cfg.kind == ModelKind::mixed) {
        prior.resize(data.X2.cols());
        if (cfg.prior_scales.size() == 1) {
            prior.setConstant(cfg.prior_scales[0]);
        } else if (static_cast<Eigen::Index>(cfg.prior_scales.size()) == data.X2.cols()) {
            for (Eigen::Index j = 0; j < prior.size(); ++j) {
                prior[j] = cfg.prior_scales[static_cast<std::size_t>(j)];
            }
        } else {
            throw InvalidConfig("prior_scales must have 1 entry or one per group-2 column");
        }
    }

    ModelInput model = validate(data.X1, data.X2, data.y, cfg.kind, prior);
    Standardization stdz;
    stdz.y_scale = 1.0;
    stdz.column_scales = Eigen::VectorXd::Ones(model.k());
    stdz.column_centers = Eigen::VectorXd::Zero(model.k());
    stdz.centered.assign(static_cast<std::size_t>(model.k()), false);
    stdz.scaled.assign(static_cast<std::size_t>(model.k()), false);
    if (cfg.standardize) {
        auto [m, s] = standardize(model, cfg.center);
        model = std::move(m);
        stdz = std::move(s);
    }

    // Covariance requests.
    const bool want_cov = cfg.cov_mode != FitConfig::CovMode::none;
    std::vector<int> cov_subset;
    if (cfg.cov_mode == FitConfig::CovMode::subset) {
        for (const std::string& name : cfg.cov_names) {
            auto it = std::find(data.names.begin(), data.names.end(), name);
            if (it == data.names.end()) {
                throw InvalidConfig("covariance refers to unknown coefficient '" +
                                    name + "'");
            }
            cov_subset.push_back(static_cast<int>(it - data.names.begin()));
        }
    }

    FitResult res;
    res.names = data.names;
    res.k1 = data.k1;
    res.n = model.n();
    res.kind = cfg.kind;
    res.rank_warning = model.rank_deficient;
    res.stdz = stdz;

    if (cfg.kind == ModelKind::mixed) {
        res.standardized = mixed_moments(model, cfg.quad, want_cov, cfg.threads);
        res.path_used = "mixed";
    } else {
        bool use_special = false;
        auto sd = detect_structure(model);
        if (cfg.path == FitConfig::Path::special) {
            if (!sd.has_value()) {
                throw InvalidConfig("path = special requires the structured design");
            }
            use_special = true;
        } else if (cfg.path == FitConfig::Path::auto_detect && sd.has_value()) {
            use_special = special_is_cheaper(model.k1(), model.k2(), cfg.quad);
        }
        if (use_special) {
            res.standardized = special_moments(
                model, cfg.quad, cfg.cov_mode == FitConfig::CovMode::full, cov_subset,
                cfg.threads);
            if (!want_cov) res.standardized.beta_cov.reset();
            res.path_used = "special";
        } else {
            res.standardized = fit_two_group(model, cfg.quad, want_cov, cfg.threads);
            res.path_used = "general";
        }
    }

    res.original = to_original_units(res.standardized, stdz);
    const auto t1 = std::chrono::steady_clock::now();
    res.seconds = std::chrono::duration<double>(t1 - t0).count();
    return res;
}

nlohmann::ordered_json fit_to_json(const FitResult& res, const FitConfig& cfg) {
    using json = nlohmann::ordered_json;
    json out;
    out["model"] = (res.kind == ModelKind::mixed) ? "mixed" : "two_group";
    out["n"] = static_cast<long long>(res.n);
    out["k1"] = static_cast<long long>(res.k1);
    out["k2"] = static_cast<long long>(res.names.size() - res.k1);
    out["path"] = res.path_used;
    out["rank_warning"] = res.rank_warning;
    out["log_norm_const"] = res.standardized.log_norm_const;

    auto coef_block = [&](const PosteriorSummary& s) {
        json arr = json::array();
        for (std::size_t j = 0; j < res.names.size(); ++j) {
            json c;
            c["name"] = res.names[j];
            c["group"] = (static_cast<Eigen::Index>(j) < res.k1) ? 1 : 2;
            c["mean"] = s.beta_mean[static_cast<Eigen::Index>(j)];
            c["sd"] = s.beta_sd[static_cast<Eigen::Index>(j)];
            arr.push_back(std::move(c));
        }
        return arr;
    };
    auto scale_block = [&](const PosteriorSummary& s) {
        static const char* names3[] = {"sigma1", "sigma2", "sigma3"};
        json arr = json::array();
        for (Eigen::Index i = 0; i < s.scale_mean.size(); ++i) {
            json c;
            c["name"] = names3[i];
            c["mean"] = s.scale_mean[i];
            c["sd"] = s.scale_sd[i];
            arr.push_back(std::move(c));
        }
        return arr;
    };

    out["coefficients"] = coef_block(res.original);
    out["scales"] = scale_block(res.original);

    if (res.original.beta_cov.has_value()) {
        const Eigen::MatrixXd& cov = *res.original.beta_cov;
        json names = json::array();
        json matrix = json::array();
        if (cfg.cov_mode == FitConfig::CovMode::subset) {
            std::vector<Eigen::Index> idx;
            for (const std::string& name : cfg.cov_names) {
                idx.push_back(std::find(res.names.begin(), res.names.end(), name) -
                              res.names.begin());
            }
            for (Eigen::Index i : idx) names.push_back(res.names[static_cast<std::size_t>(i)]);
            for (Eigen::Index i : idx) {
                json row = json::array();
                for (Eigen::Index j : idx) row.push_back(cov(i, j));
                matrix.push_back(std::move(row));
            }
        } else {
            for (const std::string& n : res.names) names.push_back(n);
            for (Eigen::Index i = 0; i < cov.rows(); ++i) {
                json row = json::array();
                for (Eigen::Index j = 0; j < cov.cols(); ++j) row.push_back(cov(i, j));
                matrix.push_back(std::move(row));
            }
        }
        out["covariance"] = {{"names", std::move(names)}, {"matrix", std::move(matrix)}};
    }

    json stdz;
    stdz["y_scale"] = res.stdz.y_scale;
    json scales = json::array();
    json centers = json::array();
    for (Eigen::Index j = 0; j < res.stdz.column_scales.size(); ++j) {
        scales.push_back(res.stdz.column_scales[j]);
        centers.push_back(res.stdz.column_centers[j]);
    }
    stdz["column_scales"] = std::move(scales);
    stdz["column_centers"] = std::move(centers);
    out["standardization"] = std::move(stdz);

    json quad;
    quad["theta_nodes"] = cfg.quad.theta_nodes;
    quad["phi_nodes"] = cfg.quad.phi_nodes;
    quad["rho_nodes"] = cfg.quad.rho_nodes;
    quad["theta_nodes_used"] = res.standardized.theta_nodes_used;
    quad["theta_error_estimate"] = res.standardized.theta_error_estimate;
    out["quadrature"] = std::move(quad);

    if (cfg.standardized_output) {
        json std_block;
        std_block["coefficients"] = coef_block(res.standardized);
        std_block["scales"] = scale_block(res.standardized);
        out["standardized"] = std::move(std_block);
    }
    if (cfg.timing) {
        out["timing_seconds"] = res.seconds;
    }
    return out;
}

double self_consistency(const Dataset& data, const FitConfig& cfg) {
    FitResult base = run_fit(data, cfg);
    FitConfig doubled = cfg;
    doubled.quad.theta_nodes *= 2;
    doubled.quad.phi_nodes *= 2;
    doubled.quad.rho_nodes *= 2;
    doubled.quad.phi_scan_nodes *= 2;
    FitResult fine = run_fit(data, doubled);
    double err = 0.0;
    for (Eigen::Index j = 0; j < base.original.beta_mean.size(); ++j) {
        err = std::max(err, std::abs(base.original.beta_mean[j] -
                                     fine.original.beta_mean[j]));
        err = std::max(err,
                       std::abs(base.original.beta_sd[j] - fine.original.beta_sd[j]));
    }
    for (Eigen::Index j = 0; j < base.original.scale_mean.size(); ++j) {
        err = std::max(err, std::abs(base.original.scale_mean[j] -
                                     fine.original.scale_mean[j]));
        err = std::max(err,
                       std::abs(base.original.scale_sd[j] - fine.original.scale_sd[j]));
    }
    return err;
}

}  // namespace quadpost
