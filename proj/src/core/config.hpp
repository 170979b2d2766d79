#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "core/dataset.hpp"
#include "core/discovery.hpp"
#include "core/measures.hpp"
#include "core/propensity.hpp"

namespace cdd {

struct TamperConfig {
    std::vector<RuleAtom> conditions;
    double fraction = 0.0;
    std::optional<std::uint64_t> seed; // falls back to the analysis seed
};

struct PipelineConfig {
    std::filesystem::path dataset_path; // resolved against the config file location
    DatasetSpec spec;

    int k = 15;
    std::optional<double> max_distance;
    double alpha = 0.1;
    int bins = 10;
    int min_count = 5;
    std::uint64_t seed = 0;
    FallbackMode fallback = FallbackMode::PaperLiteral;
    int threads = 0;

    double proxy_threshold = 0.95;
    FitOptions fit;
    std::vector<std::string> selection_override; // bypasses select_covariates when non-empty

    TreeParams tree;
    std::optional<TamperConfig> tamper;
};

// Parse the JSON config document; relative dataset paths resolve against
// base_dir.
PipelineConfig parse_config(const std::string& text, const std::filesystem::path& base_dir);
PipelineConfig load_config_file(const std::filesystem::path& path);

// Parameter echo for the run manifest; deterministic field order.
std::string config_to_json(const PipelineConfig& cfg);

FallbackMode fallback_from_string(std::string_view name); // "paper-literal" | "expected-negative"
const char* to_string(FallbackMode mode);

} // namespace cdd
