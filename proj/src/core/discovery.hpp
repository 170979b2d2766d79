#pragma once

#include <iosfwd>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "core/dataset.hpp"
#include "core/measures.hpp"
#include "core/propensity.hpp"

namespace cdd {

enum class Flag { Discriminated, Favored, Neither };

inline const char* to_string(Flag f) {
    switch (f) {
    case Flag::Discriminated: return "discriminated";
    case Flag::Favored: return "favored";
    case Flag::Neither: return "neither";
    }
    return "?";
}

struct IndividualScore {
    RecordId id = -1;
    Group group = Group::Protected;
    Decision decision = Decision::Negative;
    double propensity = 0.0;
    double rd = 0.0;
    double rd_causal = 0.0;
    double disadvantage = 0.0; // rd_causal for protected, -rd_causal for unprotected
    Flag flag = Flag::Neither;
};

struct ScoreParams {
    int k = 15;
    std::optional<double> max_distance;
    double alpha = 0.1;
    FallbackMode fallback = FallbackMode::PaperLiteral;
    int threads = 0; // 0: one per hardware thread
};

// discriminated iff negative decision and disadvantage > alpha; favored iff
// positive decision and disadvantage <= -alpha.
Flag classify(Decision decision, double disadvantage, double alpha);

// Per-record kset, RD, RD^c, disadvantage, flag; output ordered by id and
// independent of the worker count.
std::vector<IndividualScore> score_all(const Dataset& ds, const LogisticModel& model,
                                       const ScoreParams& params);

void write_scores(std::span<const IndividualScore> scores, std::ostream& out, char delim = ',');

struct TreeParams {
    int min_leaf = 25;
    int max_depth = 6;
};

struct TreeNode {
    bool leaf = true;
    // split; numeric sends value < threshold left, categorical sends
    // value == level left (thresholds on the raw scale)
    int col = -1;
    double threshold = 0.0;
    std::int32_t level = -1;
    int left = -1;
    int right = -1;
    // stats of the labels routed here (kept for leaves)
    double prediction = 0.0;
    long long count = 0;
    double variance = 0.0;
};

struct RegressionTree {
    std::vector<TreeNode> nodes; // nodes[0] is the root
};

// CART with variance-reduction splits over the covariate columns. Numeric
// candidates are midpoints between consecutive distinct sorted values,
// categorical candidates one-level-vs-rest. Ties resolved by column order,
// then smaller split value.
RegressionTree learn_tree(const Dataset& ds, std::span<const RecordId> records,
                          std::span<const double> labels, const TreeParams& params);

struct RuleAtom {
    std::string attr;
    bool numeric = false;
    // numeric: lo <= value < hi, raw scale
    double lo = -std::numeric_limits<double>::infinity();
    double hi = std::numeric_limits<double>::infinity();
    // categorical: allowed tokens, level order
    std::vector<std::string> values;
};

struct Rule {
    std::vector<RuleAtom> atoms; // column order; empty matches everything
    double predicted_rdc = 0.0;
    long long count = 0;     // training records routed to the leaf
    double variance = 0.0;
    long long support_protected = 0;
    long long support_unprotected = 0;
    double coverage_protected = 0.0;   // share of matches in each group; 0 when no matches
    double coverage_unprotected = 0.0;
};

bool atom_matches(const RuleAtom& atom, const Dataset& ds, RecordId id);
bool rule_matches(const Rule& rule, const Dataset& ds, RecordId id);

// One rule per leaf (root-to-leaf atoms merged per attribute), support and
// coverage measured over full_dataset, sorted by predicted_rdc descending.
std::vector<Rule> extract_rules(const RegressionTree& tree, const Dataset& full_dataset);

struct RuleGroupStats {
    long long n_protected = 0;
    long long n_unprotected = 0;
    std::optional<double> mean_rdc_protected;   // absent when no protected record matches
    std::optional<double> mean_rdc_unprotected;
};

RuleGroupStats compare_rule_across_groups(const Rule& rule, const Dataset& ds,
                                          std::span<const IndividualScore> scores);

std::string tree_to_json(const RegressionTree& tree, const Dataset& ds);
std::string rules_to_json(std::span<const Rule> rules);
std::string atom_to_text(const RuleAtom& atom);

} // namespace cdd
