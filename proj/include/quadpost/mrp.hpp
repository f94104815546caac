#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

namespace quadpost {

/// Poststratification table: per cell, a set of (coefficient, weight)
/// pairs defining the linear combination whose posterior mean/sd is wanted.
struct PoststratTable {
    struct Row {
        std::string cell;
        std::vector<std::pair<std::string, double>> weights;
    };
    std::vector<Row> rows;  // first-appearance cell order
};

/// Reads a long-format CSV with columns cell, coef, weight.
PoststratTable read_poststrat_table(const std::string& path);

/// Coefficient summary parsed back from a fit's JSON output.
struct SummaryView {
    std::vector<std::string> names;
    Eigen::VectorXd mean;
    Eigen::VectorXd sd;
    std::vector<std::string> cov_names;
    Eigen::MatrixXd cov;
    bool has_cov = false;
};

SummaryView read_summary_json(const std::string& path);

struct CellEstimate {
    std::string cell;
    double mean = 0.0;
    double sd = 0.0;
};

/// E[sum_i d_i Z_i] = sum_i d_i E[Z_i] and Var = d^t Cov d over the emitted
/// covariance block. Throws MissingCovariance if any referenced coefficient
/// is not covered by the block.
std::vector<CellEstimate> mrp_combine(const SummaryView& summary,
                                      const PoststratTable& table);

void write_cell_estimates(const std::string& path,
                          const std::vector<CellEstimate>& cells);

}  // namespace quadpost
