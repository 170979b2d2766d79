#include <CLI11.hpp>
#include <cdd/cdd.h>

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <memory>
#include <string>

namespace {

struct ConfigDel { void operator()(cdd_config* p) const { cdd_config_free(p); } };
struct DatasetDel { void operator()(cdd_dataset* p) const { cdd_dataset_free(p); } };
struct ModelDel { void operator()(cdd_model* p) const { cdd_model_free(p); } };
struct ScoresDel { void operator()(cdd_scores* p) const { cdd_scores_free(p); } };
struct TreeDel { void operator()(cdd_tree* p) const { cdd_tree_free(p); } };

using ConfigPtr = std::unique_ptr<cdd_config, ConfigDel>;
using DatasetPtr = std::unique_ptr<cdd_dataset, DatasetDel>;
using ModelPtr = std::unique_ptr<cdd_model, ModelDel>;
using ScoresPtr = std::unique_ptr<cdd_scores, ScoresDel>;
using TreePtr = std::unique_ptr<cdd_tree, TreeDel>;

int fail() {
    std::cerr << "cdd: " << cdd_last_error() << '\n';
    return 1;
}

struct Common {
    std::string config_path;
    std::string out = ".";
    std::string k, max_dist, alpha, bins, seed, fallback;
    CLI::Option* k_opt = nullptr;
    CLI::Option* max_dist_opt = nullptr;
    CLI::Option* alpha_opt = nullptr;
    CLI::Option* bins_opt = nullptr;
    CLI::Option* seed_opt = nullptr;
    CLI::Option* fallback_opt = nullptr;
};

void attach_common(CLI::App* sub, Common& c) {
    sub->add_option("--config", c.config_path, "Run configuration (JSON)")
        ->required()
        ->check(CLI::ExistingFile);
    c.k_opt = sub->add_option("--k", c.k, "Neighborhood size (default 15)")->check(CLI::Number);
    c.max_dist_opt =
        sub->add_option("--max-dist", c.max_dist, "Neighborhood distance cap")->check(CLI::Number);
    c.alpha_opt = sub->add_option("--alpha", c.alpha, "Flagging threshold (default 0.1)")
                      ->check(CLI::Number);
    c.bins_opt = sub->add_option("--bins", c.bins, "Propensity bins for trends (default 10)")
                     ->check(CLI::Number);
    c.seed_opt = sub->add_option("--seed", c.seed, "Seed for randomized stages")->check(CLI::Number);
    sub->add_option("--out", c.out, "Output directory")->capture_default_str();
    c.fallback_opt = sub->add_option("--fallback", c.fallback, "Empty-comparison fallback")
                         ->check(CLI::IsMember({"paper-literal", "expected-negative"}));
}

ConfigPtr load_config(const Common& c) {
    cdd_config* raw = nullptr;
    if (cdd_config_load(c.config_path.c_str(), &raw) != CDD_OK) return nullptr;
    ConfigPtr cfg(raw);
    struct Override {
        CLI::Option* opt;
        const char* key;
        const std::string* value;
    };
    const Override items[] = {
        {c.k_opt, "k", &c.k},           {c.max_dist_opt, "max_distance", &c.max_dist},
        {c.alpha_opt, "alpha", &c.alpha}, {c.bins_opt, "bins", &c.bins},
        {c.seed_opt, "seed", &c.seed},  {c.fallback_opt, "fallback", &c.fallback},
    };
    for (const auto& it : items) {
        if (!it.opt || it.opt->count() == 0) continue;
        if (cdd_config_set(cfg.get(), it.key, it.value->c_str()) != CDD_OK) return nullptr;
    }
    return cfg;
}

bool ensure_out_dir(const std::string& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) {
        std::cerr << "cdd: [harness] cannot create output directory '" << dir
                  << "': " << ec.message() << '\n';
        return false;
    }
    return true;
}

std::string join(const std::string& dir, const std::string& name) {
    return (std::filesystem::path(dir) / name).string();
}

DatasetPtr load_dataset(const cdd_config* cfg) {
    cdd_dataset* raw = nullptr;
    if (cdd_dataset_load(cfg, &raw) != CDD_OK) return nullptr;
    return DatasetPtr(raw);
}

DatasetPtr normalized_dataset(const cdd_config* cfg) {
    DatasetPtr raw = load_dataset(cfg);
    if (!raw) return nullptr;
    cdd_dataset* norm = nullptr;
    if (cdd_dataset_normalize(raw.get(), &norm) != CDD_OK) return nullptr;
    return DatasetPtr(norm);
}

ModelPtr fit_model(const cdd_config* cfg, const cdd_dataset* normalized) {
    cdd_model* raw = nullptr;
    if (cdd_model_fit(cfg, normalized, &raw) != CDD_OK) return nullptr;
    return ModelPtr(raw);
}

ScoresPtr compute_scores(const cdd_config* cfg, const cdd_dataset* normalized,
                         const cdd_model* model) {
    cdd_scores* raw = nullptr;
    if (cdd_scores_compute(cfg, normalized, model, &raw) != CDD_OK) return nullptr;
    return ScoresPtr(raw);
}

int run_validate(const Common& c) {
    ConfigPtr cfg = load_config(c);
    if (!cfg) return fail();
    DatasetPtr ds = load_dataset(cfg.get());
    if (!ds) return fail();
    double p_neg = 0.0, p_pos = 0.0;
    if (cdd_dataset_base_rates(ds.get(), &p_neg, &p_pos) != CDD_OK) return fail();
    const auto count = [&](int32_t g, int32_t d) {
        return static_cast<long long>(cdd_dataset_count(ds.get(), g, d));
    };
    std::cout << "records: " << static_cast<long long>(cdd_dataset_size(ds.get())) << '\n'
              << "protected: " << count(CDD_GROUP_PROTECTED, -1) << " (negative "
              << count(CDD_GROUP_PROTECTED, CDD_DECISION_NEGATIVE) << ", positive "
              << count(CDD_GROUP_PROTECTED, CDD_DECISION_POSITIVE) << ")\n"
              << "unprotected: " << count(CDD_GROUP_UNPROTECTED, -1) << " (negative "
              << count(CDD_GROUP_UNPROTECTED, CDD_DECISION_NEGATIVE) << ", positive "
              << count(CDD_GROUP_UNPROTECTED, CDD_DECISION_POSITIVE) << ")\n"
              << "base rates: negative " << p_neg << ", positive " << p_pos << '\n';
    return 0;
}

int run_propensity(const Common& c) {
    ConfigPtr cfg = load_config(c);
    if (!cfg) return fail();
    DatasetPtr ds = normalized_dataset(cfg.get());
    if (!ds) return fail();
    ModelPtr model = fit_model(cfg.get(), ds.get());
    if (!model) return fail();
    if (!ensure_out_dir(c.out)) return 1;
    const std::string model_path = join(c.out, "model.json");
    const std::string selection_path = join(c.out, "selection.csv");
    if (cdd_model_save(model.get(), model_path.c_str()) != CDD_OK) return fail();
    if (cdd_model_write_selection(model.get(), selection_path.c_str()) != CDD_OK) return fail();
    int32_t iterations = 0, converged = 0;
    double final_ll = 0.0;
    if (cdd_model_meta(model.get(), &iterations, &final_ll, &converged) != CDD_OK) return fail();
    std::cout << "model: " << model_path << '\n'
              << "selection: " << selection_path << '\n'
              << "iterations: " << iterations << ", log_likelihood: " << final_ll
              << ", converged: " << (converged ? "yes" : "no") << '\n';
    return 0;
}

int run_score(const Common& c) {
    ConfigPtr cfg = load_config(c);
    if (!cfg) return fail();
    DatasetPtr ds = normalized_dataset(cfg.get());
    if (!ds) return fail();
    ModelPtr model = fit_model(cfg.get(), ds.get());
    if (!model) return fail();
    ScoresPtr scores = compute_scores(cfg.get(), ds.get(), model.get());
    if (!scores) return fail();
    if (!ensure_out_dir(c.out)) return 1;
    const std::string path = join(c.out, "scores.csv");
    if (cdd_scores_write(scores.get(), path.c_str()) != CDD_OK) return fail();
    long long discriminated = 0, favored = 0;
    const int64_t n = cdd_scores_count(scores.get());
    for (int64_t i = 0; i < n; ++i) {
        cdd_score_row row{};
        if (cdd_scores_get(scores.get(), i, &row) != CDD_OK) return fail();
        if (row.flag == CDD_FLAG_DISCRIMINATED) ++discriminated;
        if (row.flag == CDD_FLAG_FAVORED) ++favored;
    }
    std::cout << "scores: " << path << '\n'
              << "records: " << static_cast<long long>(n) << ", discriminated: " << discriminated
              << ", favored: " << favored << '\n';
    return 0;
}

int run_trends(const Common& c, const std::string& scope) {
    ConfigPtr cfg = load_config(c);
    if (!cfg) return fail();
    DatasetPtr ds = normalized_dataset(cfg.get());
    if (!ds) return fail();
    ModelPtr model = fit_model(cfg.get(), ds.get());
    if (!model) return fail();
    ScoresPtr scores = compute_scores(cfg.get(), ds.get(), model.get());
    if (!scores) return fail();
    if (!ensure_out_dir(c.out)) return 1;
    const std::string path = join(c.out, "trends_" + scope + ".csv");
    if (cdd_trends_write(cfg.get(), scores.get(), scope.c_str(), path.c_str()) != CDD_OK)
        return fail();
    std::cout << "trends: " << path << '\n';
    return 0;
}

int run_tree_family(const Common& c, const std::string& mode, bool want_tree, bool want_rules,
                    bool want_compare) {
    ConfigPtr cfg = load_config(c);
    if (!cfg) return fail();
    DatasetPtr ds = normalized_dataset(cfg.get());
    if (!ds) return fail();
    ModelPtr model = fit_model(cfg.get(), ds.get());
    if (!model) return fail();
    ScoresPtr scores = compute_scores(cfg.get(), ds.get(), model.get());
    if (!scores) return fail();
    cdd_tree* raw = nullptr;
    if (cdd_tree_learn(cfg.get(), ds.get(), scores.get(), mode.c_str(), &raw) != CDD_OK)
        return fail();
    TreePtr tree(raw);
    if (!ensure_out_dir(c.out)) return 1;
    if (want_tree) {
        const std::string path = join(c.out, "tree_" + mode + ".json");
        if (cdd_tree_write_json(tree.get(), path.c_str()) != CDD_OK) return fail();
        std::cout << "tree: " << path << '\n';
    }
    if (want_rules) {
        const std::string path = join(c.out, "rules_" + mode + ".json");
        if (cdd_tree_write_rules(tree.get(), path.c_str()) != CDD_OK) return fail();
        std::cout << "rules: " << path << '\n';
    }
    if (want_compare) {
        const std::string path = join(c.out, "compare_rules_" + mode + ".csv");
        if (cdd_tree_write_compare(tree.get(), ds.get(), scores.get(), path.c_str()) != CDD_OK)
            return fail();
        std::cout << "compare: " << path << '\n';
    }
    return 0;
}

int run_tamper(const Common& c) {
    ConfigPtr cfg = load_config(c);
    if (!cfg) return fail();
    DatasetPtr ds = load_dataset(cfg.get());
    if (!ds) return fail();
    cdd_dataset* tampered_raw = nullptr;
    int64_t* ids = nullptr;
    size_t flipped = 0;
    int64_t matched = 0;
    if (cdd_tamper_run(cfg.get(), ds.get(), &tampered_raw, &ids, &flipped, &matched) != CDD_OK)
        return fail();
    DatasetPtr tampered(tampered_raw);
    cdd_ids_free(ids);
    if (!ensure_out_dir(c.out)) return 1;
    const std::string path = join(c.out, "tampered.csv");
    if (cdd_dataset_write(tampered.get(), path.c_str()) != CDD_OK) return fail();
    std::cout << "tampered: " << path << '\n'
              << "matched positive: " << static_cast<long long>(matched)
              << ", flipped: " << static_cast<long long>(flipped) << '\n';
    return 0;
}

int run_pipeline(const Common& c) {
    ConfigPtr cfg = load_config(c);
    if (!cfg) return fail();
    if (cdd_pipeline_run(cfg.get(), c.out.c_str()) != CDD_OK) return fail();
    std::cout << "pipeline: " << join(c.out, "manifest.json") << '\n';
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"causal discrimination discovery"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(cdd_version()));

    int rc = 0;
    Common c_validate, c_propensity, c_score, c_trends, c_tree, c_rules, c_compare, c_tamper,
        c_pipeline;
    std::string scope = "discriminated";
    std::string tree_mode = "discrimination";
    std::string rules_mode = "discrimination";
    std::string compare_mode = "discrimination";
    const std::vector<std::string> modes = {"discrimination", "favoritism"};

    auto* validate = app.add_subcommand("validate", "Load a dataset and report basic counts");
    attach_common(validate, c_validate);
    validate->callback([&] { rc = run_validate(c_validate); });

    auto* propensity =
        app.add_subcommand("propensity", "Select covariates and fit the group membership model");
    attach_common(propensity, c_propensity);
    propensity->callback([&] { rc = run_propensity(c_propensity); });

    auto* score = app.add_subcommand("score", "Score every record and flag individuals");
    attach_common(score, c_score);
    score->callback([&] { rc = run_score(c_score); });

    auto* trends = app.add_subcommand("trends", "Bin scores by propensity and write trend rows");
    attach_common(trends, c_trends);
    trends->add_option("--scope", scope, "Rows to bin")
        ->check(CLI::IsMember({"everyone", "discriminated", "favored"}))
        ->capture_default_str();
    trends->callback([&] { rc = run_trends(c_trends, scope); });

    auto* tree = app.add_subcommand("tree", "Learn a regression tree over flaggable records");
    attach_common(tree, c_tree);
    tree->add_option("--mode", tree_mode, "Tree target")
        ->check(CLI::IsMember(modes))
        ->capture_default_str();
    tree->callback([&] { rc = run_tree_family(c_tree, tree_mode, true, false, false); });

    auto* rules = app.add_subcommand("rules", "Extract ranked rules from the regression tree");
    attach_common(rules, c_rules);
    rules->add_option("--mode", rules_mode, "Tree target")
        ->check(CLI::IsMember(modes))
        ->capture_default_str();
    rules->callback([&] { rc = run_tree_family(c_rules, rules_mode, false, true, false); });

    auto* compare =
        app.add_subcommand("compare-rules", "Evaluate each rule on both groups side by side");
    attach_common(compare, c_compare);
    compare->add_option("--mode", compare_mode, "Tree target")
        ->check(CLI::IsMember(modes))
        ->capture_default_str();
    compare->callback([&] { rc = run_tree_family(c_compare, compare_mode, false, false, true); });

    auto* tamper = app.add_subcommand("tamper", "Flip configured positive decisions and echo");
    attach_common(tamper, c_tamper);
    tamper->callback([&] { rc = run_tamper(c_tamper); });

    auto* pipeline = app.add_subcommand("pipeline", "Run every stage and write a manifest");
    attach_common(pipeline, c_pipeline);
    pipeline->callback([&] { rc = run_pipeline(c_pipeline); });

    CLI11_PARSE(app, argc, argv);
    return rc;
}
