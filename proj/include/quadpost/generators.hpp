#pragma once

#include <cstdint>
#include <string>

namespace quadpost {

struct GeneratedFiles {
    std::string data_path;
    std::string config_path;
    std::string table_path;  // survey only
};

/// Synthetic hierarchical growth dataset: J subjects weighed at T evenly
/// spaced times. Group 1 holds the subject indicator columns (per-subject
/// intercepts a_1..a_J), group 2 the same indicators multiplied by the
/// centered time (per-subject slopes s_1..s_J). True parameters: intercepts
/// N(0, 1), slopes N(0, 0.2), noise sd 0.5. Deterministic per seed; writes
/// <prefix>.csv and a matching <prefix>.cfg.
GeneratedFiles gen_rats(int subjects, int weeks, std::uint64_t seed,
                        const std::string& out_prefix);

/// Synthetic poststratification-shaped survey: respondents belong to one of
/// `cells` geographic cells (hierarchical intercepts, group 1 via the cell
/// column) and carry an intercept, four age-group indicators, and a cell
/// density covariate with unit-normal priors (group 2, mixed model). Writes
/// <prefix>.csv, <prefix>.cfg and a <prefix>_table.csv with per-cell
/// combination weights (age proportions summing to 1, cell density, unit
/// intercept/cell weights).
GeneratedFiles gen_survey(int cells, int respondents, std::uint64_t seed,
                          const std::string& out_prefix);

}  // namespace quadpost
