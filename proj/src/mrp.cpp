#include "quadpost/mrp.hpp"

#include <cmath>
#include <fstream>
#include <map>

#include "quadpost/csv.hpp"
#include "quadpost/errors.hpp"

#include "json.hpp"

namespace quadpost {

PoststratTable read_poststrat_table(const std::string& path) {
    CsvTable t = read_csv(path);
    const std::size_t ccell = t.col("cell");
    const std::size_t ccoef = t.col("coef");
    const std::size_t cw = t.col("weight");

    PoststratTable table;
    std::map<std::string, std::size_t> row_of;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const std::string& cell = t.rows[r][ccell];
        auto it = row_of.find(cell);
        if (it == row_of.end()) {
            it = row_of.emplace(cell, table.rows.size()).first;
            table.rows.push_back({cell, {}});
        }
        table.rows[it->second].weights.emplace_back(t.rows[r][ccoef],
                                                    parse_double(t, r, cw));
    }
    return table;
}

SummaryView read_summary_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open summary " + path);
    }
    nlohmann::json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw IoError(path + ": invalid JSON: " + e.what());
    }
    SummaryView v;
    const auto& coefs = j.at("coefficients");
    v.mean.resize(static_cast<Eigen::Index>(coefs.size()));
    v.sd.resize(static_cast<Eigen::Index>(coefs.size()));
    Eigen::Index i = 0;
    for (const auto& c : coefs) {
        v.names.push_back(c.at("name").get<std::string>());
        v.mean[i] = c.at("mean").get<double>();
        v.sd[i] = c.at("sd").get<double>();
        ++i;
    }
    if (j.contains("covariance")) {
        v.has_cov = true;
        const auto& cov = j.at("covariance");
        for (const auto& n : cov.at("names")) {
            v.cov_names.push_back(n.get<std::string>());
        }
        const auto& m = cov.at("matrix");
        const Eigen::Index d = static_cast<Eigen::Index>(v.cov_names.size());
        v.cov.resize(d, d);
        for (Eigen::Index r = 0; r < d; ++r) {
            for (Eigen::Index c = 0; c < d; ++c) {
                v.cov(r, c) = m.at(static_cast<std::size_t>(r))
                                  .at(static_cast<std::size_t>(c))
                                  .get<double>();
            }
        }
    }
    return v;
}

std::vector<CellEstimate> mrp_combine(const SummaryView& summary,
                                      const PoststratTable& table) {
    std::map<std::string, Eigen::Index> mean_idx, cov_idx;
    for (std::size_t i = 0; i < summary.names.size(); ++i) {
        mean_idx[summary.names[i]] = static_cast<Eigen::Index>(i);
    }
    for (std::size_t i = 0; i < summary.cov_names.size(); ++i) {
        cov_idx[summary.cov_names[i]] = static_cast<Eigen::Index>(i);
    }

    std::vector<CellEstimate> out;
    out.reserve(table.rows.size());
    for (const auto& row : table.rows) {
        CellEstimate est;
        est.cell = row.cell;
        double var = 0.0;
        std::vector<std::pair<Eigen::Index, double>> cov_terms;
        for (const auto& [coef, w] : row.weights) {
            auto mit = mean_idx.find(coef);
            if (mit == mean_idx.end()) {
                throw MissingCovariance("cell '" + row.cell +
                                        "' references unknown coefficient '" + coef +
                                        "'");
            }
            est.mean += w * summary.mean[mit->second];
            if (!summary.has_cov) {
                throw MissingCovariance(
                    "summary has no covariance block; refit with covariance enabled");
            }
            auto cit = cov_idx.find(coef);
            if (cit == cov_idx.end()) {
                throw MissingCovariance("coefficient '" + coef +
                                        "' is not in the emitted covariance block");
            }
            cov_terms.emplace_back(cit->second, w);
        }
        for (const auto& [i, wi] : cov_terms) {
            for (const auto& [j, wj] : cov_terms) {
                var += wi * wj * summary.cov(i, j);
            }
        }
        est.sd = std::sqrt(std::max(0.0, var));
        out.push_back(std::move(est));
    }
    return out;
}

void write_cell_estimates(const std::string& path,
                          const std::vector<CellEstimate>& cells) {
    std::vector<std::vector<std::string>> rows;
    rows.reserve(cells.size());
    for (const auto& c : cells) {
        rows.push_back({c.cell, format_double(c.mean), format_double(c.sd)});
    }
    write_csv(path, {"cell", "mean", "sd"}, rows);
}

}  // namespace quadpost
