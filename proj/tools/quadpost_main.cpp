// quadpost: posterior moments for two-group and mixed-effects Bayesian
// linear regression via analytic marginalization and adaptive quadrature.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <string>

#include "CLI11.hpp"

#include "quadpost/csv.hpp"
#include "quadpost/errors.hpp"
#include "quadpost/fit.hpp"
#include "quadpost/flat_config.hpp"
#include "quadpost/generators.hpp"
#include "quadpost/mrp.hpp"

namespace {

int threads_from_env(int requested) {
    const char* force = std::getenv("QUADPOST_SINGLE_THREAD");
    if (force != nullptr && std::string(force) == "1") return 1;
    return requested;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Posterior-moment engine for two-group normal-normal and "
                 "mixed-effects linear regression"};
    app.require_subcommand(1);

    // fit
    std::string fit_data, fit_config, fit_out;
    int fit_threads = 1;
    bool fit_timing = false;
    bool fit_std_output = false;
    auto* fit_cmd = app.add_subcommand("fit", "Fit a model from CSV data");
    fit_cmd->add_option("--data", fit_data, "input CSV")->required();
    fit_cmd->add_option("--config", fit_config, "flat key=value config")->required();
    fit_cmd->add_option("--out", fit_out, "output JSON path")->required();
    fit_cmd->add_option("--threads", fit_threads, "worker threads (default 1)");
    fit_cmd->add_flag("--timing", fit_timing, "include wall time in the JSON");
    fit_cmd->add_flag("--standardized", fit_std_output,
                      "also emit standardized-unit summaries");

    // mrp
    std::string mrp_summary, mrp_table, mrp_out;
    auto* mrp_cmd =
        app.add_subcommand("mrp", "Poststratify a fitted summary over a cell table");
    mrp_cmd->add_option("--summary", mrp_summary, "fit JSON")->required();
    mrp_cmd->add_option("--table", mrp_table, "cell,coef,weight CSV")->required();
    mrp_cmd->add_option("--out", mrp_out, "output CSV path")->required();

    // gen
    auto* gen_cmd = app.add_subcommand("gen", "Generate synthetic datasets");
    gen_cmd->require_subcommand(1);
    int rats_j = 100, rats_t = 20;
    std::uint64_t rats_seed = 1;
    std::string rats_out = "rats";
    auto* rats_cmd = gen_cmd->add_subcommand("rats", "hierarchical growth data");
    rats_cmd->add_option("--rats", rats_j, "number of subjects");
    rats_cmd->add_option("--weeks", rats_t, "number of weighings");
    rats_cmd->add_option("--seed", rats_seed, "random seed");
    rats_cmd->add_option("--out", rats_out, "output path prefix");

    int survey_cells = 351, survey_resp = 135501;
    std::uint64_t survey_seed = 1;
    std::string survey_out = "survey";
    auto* survey_cmd = gen_cmd->add_subcommand("survey", "MRP-shaped survey data");
    survey_cmd->add_option("--cells", survey_cells, "number of cells");
    survey_cmd->add_option("--respondents", survey_resp, "number of respondents");
    survey_cmd->add_option("--seed", survey_seed, "random seed");
    survey_cmd->add_option("--out", survey_out, "output path prefix");

    CLI11_PARSE(app, argc, argv);

    try {
        if (fit_cmd->parsed()) {
            quadpost::FitConfig cfg =
                quadpost::parse_fit_config(quadpost::FlatConfig::from_file(fit_config));
            cfg.threads = threads_from_env(fit_threads);
            cfg.timing = fit_timing;
            if (fit_std_output) cfg.standardized_output = true;
            quadpost::CsvTable csv = quadpost::read_csv(fit_data);
            quadpost::Dataset data = quadpost::load_dataset(csv, cfg);
            quadpost::FitResult res = quadpost::run_fit(data, cfg);
            std::ofstream out(fit_out, std::ios::binary);
            if (!out) {
                throw quadpost::IoError("cannot write " + fit_out);
            }
            out << quadpost::fit_to_json(res, cfg).dump(2) << '\n';
            std::cerr << "fit: path=" << res.path_used << " n=" << res.n
                      << " k=" << res.names.size() << " in " << res.seconds << "s\n";
        } else if (mrp_cmd->parsed()) {
            quadpost::SummaryView summary = quadpost::read_summary_json(mrp_summary);
            quadpost::PoststratTable table = quadpost::read_poststrat_table(mrp_table);
            quadpost::write_cell_estimates(mrp_out,
                                           quadpost::mrp_combine(summary, table));
        } else if (rats_cmd->parsed()) {
            auto files = quadpost::gen_rats(rats_j, rats_t, rats_seed, rats_out);
            std::cerr << "wrote " << files.data_path << " and " << files.config_path
                      << "\n";
        } else if (survey_cmd->parsed()) {
            auto files =
                quadpost::gen_survey(survey_cells, survey_resp, survey_seed, survey_out);
            std::cerr << "wrote " << files.data_path << ", " << files.config_path
                      << " and " << files.table_path << "\n";
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
