#include "quadpost/generators.hpp"

#include <array>
#include <cmath>
#include <fstream>
#include <string>
#include <vector>

#include "quadpost/csv.hpp"
#include "quadpost/errors.hpp"
#include "quadpost/rng.hpp"

namespace quadpost {

namespace {

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw IoError("cannot write " + path);
    }
    out << text;
}

std::string label(const char* stem, int i, int width) {
    std::string num = std::to_string(i);
    while (static_cast<int>(num.size()) < width) num.insert(num.begin(), '0');
    return std::string(stem) + num;
}

}  // namespace

GeneratedFiles gen_rats(int subjects, int weeks, std::uint64_t seed,
                        const std::string& out_prefix) {
    if (subjects < 2 || weeks < 2) {
        throw InvalidConfig("gen_rats needs at least 2 subjects and 2 weeks");
    }
    Rng rng(seed);
    const double intercept_sd = 1.0;
    const double slope_sd = 0.2;
    const double noise_sd = 0.5;

    std::vector<double> alpha(subjects), beta(subjects);
    for (int j = 0; j < subjects; ++j) alpha[j] = intercept_sd * rng.normal();
    for (int j = 0; j < subjects; ++j) beta[j] = slope_sd * rng.normal();

    const double wbar = 0.5 * (1.0 + weeks);
    std::vector<std::string> header;
    for (int j = 1; j <= subjects; ++j) header.push_back(label("a", j, 3));
    for (int j = 1; j <= subjects; ++j) header.push_back(label("s", j, 3));
    header.push_back("y");

    std::vector<std::vector<std::string>> rows;
    rows.reserve(static_cast<std::size_t>(subjects) * weeks);
    for (int j = 0; j < subjects; ++j) {
        for (int t = 1; t <= weeks; ++t) {
            const double w = t - wbar;
            const double y = alpha[j] + beta[j] * w + noise_sd * rng.normal();
            std::vector<std::string> row(2 * subjects + 1, "0");
            row[j] = "1";
            row[subjects + j] = format_double(w);
            row[2 * subjects] = format_double(y);
            rows.push_back(std::move(row));
        }
    }

    GeneratedFiles out;
    out.data_path = out_prefix + ".csv";
    out.config_path = out_prefix + ".cfg";
    write_csv(out.data_path, header, rows);

    std::string cfg = "model = two_group\noutcome = y\ngroup1 = ";
    for (int j = 1; j <= subjects; ++j) {
        if (j > 1) cfg += ",";
        cfg += label("a", j, 3);
    }
    cfg += "\ngroup2 = ";
    for (int j = 1; j <= subjects; ++j) {
        if (j > 1) cfg += ",";
        cfg += label("s", j, 3);
    }
    cfg += "\n";
    write_text(out.config_path, cfg);
    return out;
}

GeneratedFiles gen_survey(int cells, int respondents, std::uint64_t seed,
                          const std::string& out_prefix) {
    if (cells < 1 || respondents < 1) {
        throw InvalidConfig("gen_survey needs at least 1 cell and 1 respondent");
    }
    Rng rng(seed);
    constexpr int kAges = 4;
    const double cell_sd = 0.5;
    const double noise_sd = 0.8;
    const double b0 = 0.3;
    const double b_density = 0.2;
    const double b_age[kAges] = {-0.2, -0.05, 0.1, 0.3};

    std::vector<double> u(cells), density(cells);
    std::vector<std::array<double, kAges>> age_prop(cells);
    for (int c = 0; c < cells; ++c) u[c] = cell_sd * rng.normal();
    for (int c = 0; c < cells; ++c) density[c] = rng.normal();
    for (int c = 0; c < cells; ++c) {
        double total = 0.0;
        for (int a = 0; a < kAges; ++a) {
            age_prop[c][a] = -std::log(rng.uniform());
            total += age_prop[c][a];
        }
        for (int a = 0; a < kAges; ++a) age_prop[c][a] /= total;
    }

    std::vector<std::string> header = {"city", "intercept"};
    for (int a = 1; a <= kAges; ++a) header.push_back(label("age_", a, 1));
    header.push_back("density");
    header.push_back("y");

    std::vector<std::vector<std::string>> rows;
    rows.reserve(static_cast<std::size_t>(respondents));
    for (int i = 0; i < respondents; ++i) {
        const int c = static_cast<int>(rng.below(static_cast<std::uint64_t>(cells)));
        // Respondent age drawn from the cell's age distribution.
        int a = kAges - 1;
        double uu = rng.uniform(), acc = 0.0;
        for (int t = 0; t < kAges; ++t) {
            acc += age_prop[c][t];
            if (uu <= acc) {
                a = t;
                break;
            }
        }
        const double y =
            u[c] + b0 + b_age[a] + b_density * density[c] + noise_sd * rng.normal();
        std::vector<std::string> row(header.size(), "0");
        row[0] = label("c", c + 1, 4);
        row[1] = "1";
        row[2 + a] = "1";
        row[2 + kAges] = format_double(density[c]);
        row[3 + kAges] = format_double(y);
        rows.push_back(std::move(row));
    }

    GeneratedFiles out;
    out.data_path = out_prefix + ".csv";
    out.config_path = out_prefix + ".cfg";
    out.table_path = out_prefix + "_table.csv";
    write_csv(out.data_path, header, rows);

    std::string cfg =
        "model = mixed\noutcome = y\ncell = city\ngroup2 = intercept,age_1,age_2,"
        "age_3,age_4,density\nprior_scales = 1\ncovariance = full\n";
    write_text(out.config_path, cfg);

    std::vector<std::vector<std::string>> trows;
    for (int c = 0; c < cells; ++c) {
        const std::string cell_label = label("c", c + 1, 4);
        trows.push_back({cell_label, "city:" + cell_label, "1"});
        trows.push_back({cell_label, "intercept", "1"});
        for (int a = 0; a < kAges; ++a) {
            trows.push_back(
                {cell_label, label("age_", a + 1, 1), format_double(age_prop[c][a])});
        }
        trows.push_back({cell_label, "density", format_double(density[c])});
    }
    write_csv(out.table_path, {"cell", "coef", "weight"}, trows);
    return out;
}

}  // namespace quadpost
