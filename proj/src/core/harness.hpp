#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "core/config.hpp"
#include "core/discovery.hpp"

namespace cdd {

enum class TrendScope { Everyone, Discriminated, Favored };
enum class TrendFilter { All, Protected, Unprotected };

const char* to_string(TrendScope s);
const char* to_string(TrendFilter f);
TrendScope trend_scope_from_string(std::string_view name);

struct TrendRow {
    double bin_lo = 0.0;
    double bin_hi = 0.0;
    TrendFilter filter = TrendFilter::All;
    long long n = 0;
    std::optional<double> mean_pos_prob; // fraction with a positive decision
    std::optional<double> mean_rd;
    std::optional<double> mean_rdc;
    bool low_count_flag = false; // n < min_count
};

// Equal-width propensity bins over [0,1]. Scope restricts to flagged
// individuals (or everyone), filter restricts to one group. Means are absent
// for empty bins; low-count bins keep their means and are only flagged.
std::vector<TrendRow> bin_trends(std::span<const IndividualScore> scores, TrendScope scope,
                                 TrendFilter filter, int n_bins = 10, int min_count = 5);

// Table with columns bin_lo, bin_hi, filter, n, mean_pos_prob, mean_rd,
// mean_rdc, low_count_flag; absent means are empty fields.
void write_trends(std::span<const TrendRow> rows, std::ostream& out, char delim = ',');

struct TamperResult {
    Dataset dataset;
    std::vector<RecordId> flipped;   // ascending ids
    long long matched_positive = 0;  // positive records the conditions matched
};

// Walk records in ascending id order; every positive record matching the
// conditions draws once from an mt19937_64 stream seeded with `seed` and is
// flipped to negative when the draw falls below `fraction`.
TamperResult tamper(const Dataset& ds, const std::vector<RuleAtom>& conditions, double fraction,
                    std::uint64_t seed);

// Covariate selection honoring the config's manual override; the override
// still gets gains computed for the report.
CovariateSelection compute_selection(const Dataset& ds, const PipelineConfig& cfg);

// Comparison table (rule_index, predicted_rdc, per-group match counts and
// mean rd_causal) shared by the pipeline and the C API.
std::string compare_rules_csv(std::span<const Rule> rules, const Dataset& ds,
                              std::span<const IndividualScore> scores);

struct PipelineResult {
    std::filesystem::path out_dir;
    std::vector<std::string> artifacts; // file names written, in write order
};

// load -> normalize -> select -> fit -> score -> trends -> trees -> rules ->
// comparisons, plus the same over the tampered copy when a tamper block is
// configured. Writes a manifest with the parameter echo and input digest.
PipelineResult run_pipeline(const PipelineConfig& cfg, const std::filesystem::path& out_dir);

} // namespace cdd
