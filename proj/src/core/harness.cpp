#include "core/harness.hpp"

#include <algorithm>
#include <fstream>
#include <random>
#include <sstream>

#include <json.hpp>

#include "core/neighborhood.hpp"

namespace cdd {
namespace {

using ordered_json = nlohmann::ordered_json;

[[noreturn]] void fail(std::string msg, const char* stage) { throw Error(std::move(msg), stage); }

} // namespace

const char* to_string(TrendScope s) {
    switch (s) {
    case TrendScope::Everyone: return "everyone";
    case TrendScope::Discriminated: return "discriminated";
    case TrendScope::Favored: return "favored";
    }
    return "?";
}

const char* to_string(TrendFilter f) {
    switch (f) {
    case TrendFilter::All: return "all";
    case TrendFilter::Protected: return "protected";
    case TrendFilter::Unprotected: return "unprotected";
    }
    return "?";
}

TrendScope trend_scope_from_string(std::string_view name) {
    if (name == "everyone") return TrendScope::Everyone;
    if (name == "discriminated") return TrendScope::Discriminated;
    if (name == "favored") return TrendScope::Favored;
    fail("scope must be one of everyone/discriminated/favored, got '" + std::string(name) + "'",
         "trends");
}

std::vector<TrendRow> bin_trends(std::span<const IndividualScore> scores, TrendScope scope,
                                 TrendFilter filter, int n_bins, int min_count) {
    if (n_bins < 1) fail("n_bins must be at least 1", "trends");
    if (min_count < 0) fail("min_count must be non-negative", "trends");
    if (scores.empty()) fail("no scores to bin", "trends");

    struct Acc {
        long long n = 0;
        long long pos = 0;
        double rd = 0.0;
        double rdc = 0.0;
    };
    std::vector<Acc> acc(static_cast<std::size_t>(n_bins));
    for (const auto& s : scores) {
        if (scope == TrendScope::Discriminated && s.flag != Flag::Discriminated) continue;
        if (scope == TrendScope::Favored && s.flag != Flag::Favored) continue;
        if (filter == TrendFilter::Protected && s.group != Group::Protected) continue;
        if (filter == TrendFilter::Unprotected && s.group != Group::Unprotected) continue;
        int b = static_cast<int>(s.propensity * n_bins);
        b = std::clamp(b, 0, n_bins - 1);
        Acc& a = acc[static_cast<std::size_t>(b)];
        ++a.n;
        if (s.decision == Decision::Positive) ++a.pos;
        a.rd += s.rd;
        a.rdc += s.rd_causal;
    }

    std::vector<TrendRow> rows;
    rows.reserve(acc.size());
    for (int b = 0; b < n_bins; ++b) {
        const Acc& a = acc[static_cast<std::size_t>(b)];
        TrendRow row;
        row.bin_lo = static_cast<double>(b) / n_bins;
        row.bin_hi = static_cast<double>(b + 1) / n_bins;
        row.filter = filter;
        row.n = a.n;
        if (a.n > 0) {
            const double n = static_cast<double>(a.n);
            row.mean_pos_prob = static_cast<double>(a.pos) / n;
            row.mean_rd = a.rd / n;
            row.mean_rdc = a.rdc / n;
        }
        row.low_count_flag = a.n < min_count;
        rows.push_back(row);
    }
    return rows;
}

void write_trends(std::span<const TrendRow> rows, std::ostream& out, char delim) {
    out << "bin_lo" << delim << "bin_hi" << delim << "filter" << delim << "n" << delim
        << "mean_pos_prob" << delim << "mean_rd" << delim << "mean_rdc" << delim << "low_count_flag\n";
    const auto opt = [](const std::optional<double>& v) {
        return v ? format_double(*v) : std::string();
    };
    for (const auto& r : rows) {
        out << format_double(r.bin_lo) << delim << format_double(r.bin_hi) << delim
            << to_string(r.filter) << delim << r.n << delim << opt(r.mean_pos_prob) << delim
            << opt(r.mean_rd) << delim << opt(r.mean_rdc) << delim
            << (r.low_count_flag ? "true" : "false") << '\n';
    }
}

TamperResult tamper(const Dataset& ds, const std::vector<RuleAtom>& conditions, double fraction,
                    std::uint64_t seed) {
    if (!(fraction >= 0.0 && fraction <= 1.0)) fail("fraction must lie in [0, 1]", "tamper");
    if (conditions.empty()) fail("tamper needs at least one condition", "tamper");
    for (const auto& atom : conditions) {
        const int ci = ds.column_index(atom.attr);
        if (ci < 0) fail("condition references unknown attribute '" + atom.attr + "'", "tamper");
        if (ds.columns()[static_cast<std::size_t>(ci)].is_numeric() != atom.numeric)
            fail("condition on '" + atom.attr + "' does not match the attribute kind", "tamper");
    }

    std::mt19937_64 rng(seed);
    TamperResult res;
    for (std::size_t i = 0; i < ds.size(); ++i) {
        const auto id = static_cast<RecordId>(i);
        if (ds.decision(id) != Decision::Positive) continue;
        bool match = true;
        for (const auto& atom : conditions)
            if (!atom_matches(atom, ds, id)) {
                match = false;
                break;
            }
        if (!match) continue;
        ++res.matched_positive;
        if (unit_double(rng) < fraction) res.flipped.push_back(id);
    }
    res.dataset = ds.with_decisions_flipped(res.flipped);
    return res;
}

namespace {

std::string read_file_bytes(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) fail("cannot open '" + p.string() + "'", "pipeline");
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write_artifact(const std::filesystem::path& dir, const std::string& name,
                    const std::string& text, std::vector<std::string>& artifacts) {
    const auto path = dir / name;
    std::ofstream out(path, std::ios::binary);
    if (!out) fail("cannot write '" + path.string() + "'", "pipeline");
    out << text;
    if (!out.flush()) fail("failed writing '" + path.string() + "'", "pipeline");
    artifacts.push_back(name);
}

// one analysis pass over `raw`; returns notes about skipped tree stages
std::vector<std::string> analyze_and_write(const PipelineConfig& cfg, const Dataset& raw,
                                           const std::filesystem::path& dir, const std::string& suffix,
                                           std::vector<std::string>& artifacts) {
    std::vector<std::string> skipped;
    const Dataset ds = normalize_numeric(raw);

    const CovariateSelection selection = compute_selection(ds, cfg);
    {
        std::ostringstream ss;
        write_selection_report(selection, ss);
        write_artifact(dir, "selection" + suffix + ".csv", ss.str(), artifacts);
    }

    const LogisticModel model = fit_propensity(ds, selection, cfg.fit);
    write_artifact(dir, "model" + suffix + ".json", model_to_json(model), artifacts);

    ScoreParams sp;
    sp.k = cfg.k;
    sp.max_distance = cfg.max_distance;
    sp.alpha = cfg.alpha;
    sp.fallback = cfg.fallback;
    sp.threads = cfg.threads;
    const std::vector<IndividualScore> scores = score_all(ds, model, sp);
    {
        std::ostringstream ss;
        write_scores(scores, ss);
        write_artifact(dir, "scores" + suffix + ".csv", ss.str(), artifacts);
    }

    for (const TrendScope scope :
         {TrendScope::Everyone, TrendScope::Discriminated, TrendScope::Favored}) {
        std::vector<TrendRow> rows;
        for (const TrendFilter filter :
             {TrendFilter::All, TrendFilter::Protected, TrendFilter::Unprotected}) {
            const auto part = bin_trends(scores, scope, filter, cfg.bins, cfg.min_count);
            rows.insert(rows.end(), part.begin(), part.end());
        }
        std::ostringstream ss;
        write_trends(rows, ss);
        write_artifact(dir, std::string("trends_") + to_string(scope) + suffix + ".csv", ss.str(),
                       artifacts);
    }

    struct Mode {
        const char* name;
        Group group;
        Decision decision;
    };
    for (const Mode mode : {Mode{"discrimination", Group::Protected, Decision::Negative},
                            Mode{"favoritism", Group::Unprotected, Decision::Positive}}) {
        std::vector<RecordId> ids;
        std::vector<double> labels;
        for (const auto& s : scores) {
            if (s.group != mode.group || s.decision != mode.decision) continue;
            ids.push_back(s.id);
            labels.push_back(s.rd_causal);
        }
        if (static_cast<long long>(ids.size()) < cfg.tree.min_leaf) {
            skipped.push_back(std::string("tree_") + mode.name + suffix + ": " +
                              std::to_string(ids.size()) + " records, min_leaf " +
                              std::to_string(cfg.tree.min_leaf));
            continue;
        }
        const RegressionTree tree = learn_tree(ds, ids, labels, cfg.tree);
        write_artifact(dir, std::string("tree_") + mode.name + suffix + ".json",
                       tree_to_json(tree, ds), artifacts);
        const std::vector<Rule> rules = extract_rules(tree, ds);
        write_artifact(dir, std::string("rules_") + mode.name + suffix + ".json",
                       rules_to_json(rules), artifacts);

        write_artifact(dir, std::string("compare_rules_") + mode.name + suffix + ".csv",
                       compare_rules_csv(rules, ds, scores), artifacts);
    }
    return skipped;
}

} // namespace

CovariateSelection compute_selection(const Dataset& ds, const PipelineConfig& cfg) {
    if (cfg.selection_override.empty()) return select_covariates(ds, cfg.proxy_threshold);
    CovariateSelection sel;
    for (const auto& name : cfg.selection_override) {
        const Column* c = ds.find_column(name);
        if (!c || c->schema.role != AttrRole::Covariate)
            fail("selection override names '" + name + "', which is not a covariate", "propensity");
        sel.selected.push_back(name);
    }
    for (const int ci : ds.covariate_columns()) {
        const auto& name = ds.columns()[static_cast<std::size_t>(ci)].schema.name;
        sel.ig_group.emplace_back(name, information_gain(ds, name, Target::Group));
        sel.ig_decision.emplace_back(name, information_gain(ds, name, Target::Decision));
    }
    return sel;
}

std::string compare_rules_csv(std::span<const Rule> rules, const Dataset& ds,
                              std::span<const IndividualScore> scores) {
    std::ostringstream ss;
    const char d = ',';
    ss << "rule_index" << d << "predicted_rdc" << d << "n_protected" << d << "mean_rdc_protected"
       << d << "n_unprotected" << d << "mean_rdc_unprotected\n";
    for (std::size_t r = 0; r < rules.size(); ++r) {
        const RuleGroupStats st = compare_rule_across_groups(rules[r], ds, scores);
        ss << r << d << format_double(rules[r].predicted_rdc) << d << st.n_protected << d
           << (st.mean_rdc_protected ? format_double(*st.mean_rdc_protected) : std::string()) << d
           << st.n_unprotected << d
           << (st.mean_rdc_unprotected ? format_double(*st.mean_rdc_unprotected) : std::string())
           << '\n';
    }
    return ss.str();
}

PipelineResult run_pipeline(const PipelineConfig& cfg, const std::filesystem::path& out_dir) {
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) fail("cannot create output directory '" + out_dir.string() + "': " + ec.message(),
                 "pipeline");

    PipelineResult res;
    res.out_dir = out_dir;

    const std::string input_bytes = read_file_bytes(cfg.dataset_path);
    std::istringstream in(input_bytes);
    const Dataset raw = load_dataset(in, cfg.spec);

    std::vector<std::string> skipped = analyze_and_write(cfg, raw, out_dir, "", res.artifacts);

    std::optional<TamperResult> tampered;
    std::uint64_t tamper_seed = 0;
    if (cfg.tamper) {
        tamper_seed = cfg.tamper->seed.value_or(cfg.seed);
        tampered = tamper(raw, cfg.tamper->conditions, cfg.tamper->fraction, tamper_seed);
        std::ostringstream ss;
        write_table(tampered->dataset, ss);
        write_artifact(out_dir, "tampered.csv", ss.str(), res.artifacts);
        const auto more =
            analyze_and_write(cfg, tampered->dataset, out_dir, "_tampered", res.artifacts);
        skipped.insert(skipped.end(), more.begin(), more.end());
    }

    ordered_json manifest;
    manifest["parameters"] = ordered_json::parse(config_to_json(cfg));
    manifest["input"] = {{"path", cfg.dataset_path.string()},
                         {"bytes", input_bytes.size()},
                         {"fnv1a64", to_hex(fnv1a64(input_bytes))}};
    if (tampered) {
        manifest["tamper"] = {{"seed", tamper_seed},
                              {"fraction", cfg.tamper->fraction},
                              {"matched_positive", tampered->matched_positive},
                              {"flipped_count", tampered->flipped.size()},
                              {"flipped_ids", tampered->flipped}};
    }
    if (!skipped.empty()) manifest["skipped"] = skipped;
    manifest["artifacts"] = res.artifacts;
    write_artifact(out_dir, "manifest.json", manifest.dump(2) + "\n", res.artifacts);
    return res;
}

} // namespace cdd
