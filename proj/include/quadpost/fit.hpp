#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "quadpost/csv.hpp"
#include "quadpost/flat_config.hpp"
#include "quadpost/model.hpp"
#include "quadpost/quadrature.hpp"

#include "json.hpp"

namespace quadpost {

/// Dataset-level fit configuration (parsed from the sidecar config file).
struct FitConfig {
    ModelKind kind = ModelKind::two_group;
    std::string outcome;
    std::vector<std::string> group1;
    std::vector<std::string> group2;
    std::string cell;  // categorical column expanded one-hot into group 1
    std::vector<double> prior_scales;  // mixed: broadcast if a single value
    bool standardize = true;
    bool center = false;

    enum class Path { auto_detect, general, special };
    Path path = Path::auto_detect;

    enum class CovMode { none, full, subset };
    CovMode cov_mode = CovMode::none;
    std::vector<std::string> cov_names;

    QuadratureConfig quad;
    int threads = 1;
    bool standardized_output = false;
    bool timing = false;
};

FitConfig parse_fit_config(const FlatConfig& flat);

/// Numeric design assembled from a CSV per the config's column roles.
struct Dataset {
    Eigen::MatrixXd X1;
    Eigen::MatrixXd X2;
    Eigen::VectorXd y;
    std::vector<std::string> names;  // k coefficient names, group 1 first
    Eigen::Index k1 = 0;
};

Dataset load_dataset(const CsvTable& csv, const FitConfig& cfg);

struct FitResult {
    PosteriorSummary standardized;
    PosteriorSummary original;
    Standardization stdz;
    std::vector<std::string> names;
    Eigen::Index k1 = 0;
    Eigen::Index n = 0;
    ModelKind kind = ModelKind::two_group;
    std::string path_used;  // general | special | mixed
    double seconds = 0.0;
    bool rank_warning = false;
};

/// Validates, standardizes, dispatches (mixed -> mixed engine; structured
/// two-group -> fast path when cheaper; otherwise general engine) and maps
/// the summary back to original units.
FitResult run_fit(const Dataset& data, const FitConfig& cfg);

nlohmann::ordered_json fit_to_json(const FitResult& res, const FitConfig& cfg);

/// Largest absolute difference in reported means/sds between this fit and a
/// rerun with all node counts doubled (self-consistency check).
double self_consistency(const Dataset& data, const FitConfig& cfg);

}  // namespace quadpost
