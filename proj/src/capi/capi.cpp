#include "cdd/cdd.h"

#include <cstring>
#include <fstream>
#include <new>
#include <optional>
#include <sstream>
#include <string>

#include "core/config.hpp"
#include "core/dataset.hpp"
#include "core/discovery.hpp"
#include "core/harness.hpp"
#include "core/propensity.hpp"

struct cdd_config {
    cdd::PipelineConfig cfg;
};

struct cdd_dataset {
    cdd::Dataset ds;
};

struct cdd_model {
    cdd::LogisticModel model;
    std::optional<cdd::CovariateSelection> selection; // absent on reopened models
};

struct cdd_scores {
    std::vector<cdd::IndividualScore> scores;
};

struct cdd_tree {
    cdd::RegressionTree tree;
    std::vector<cdd::Rule> rules;
    std::string tree_json;
    std::string rules_json;
};

namespace {

thread_local std::string g_last_error;

cdd_status set_error(cdd_status code, std::string message) {
    g_last_error = std::move(message);
    return code;
}

template <typename Fn>
cdd_status wrap(Fn&& fn) {
    try {
        fn();
        return CDD_OK;
    } catch (const cdd::Error& e) {
        return set_error(CDD_ERR_RUN, e.tagged_message());
    } catch (const std::bad_alloc&) {
        return set_error(CDD_ERR_NOMEM, "out of memory");
    } catch (const std::exception& e) {
        return set_error(CDD_ERR_INTERNAL, std::string("internal error: ") + e.what());
    } catch (...) {
        return set_error(CDD_ERR_INTERNAL, "internal error");
    }
}

cdd_status require(bool ok, const char* what) {
    return ok ? CDD_OK : set_error(CDD_ERR_INVALID_ARGUMENT, std::string(what) + " must not be NULL");
}

#define CDD_REQUIRE(cond, what)                                   \
    do {                                                          \
        if (require((cond) != 0, (what)) != CDD_OK) return CDD_ERR_INVALID_ARGUMENT; \
    } while (0)

void write_text(const std::string& path, const std::string& text, const char* stage) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw cdd::Error("cannot write '" + path + "'", stage);
    out << text;
    if (!out.flush()) throw cdd::Error("failed writing '" + path + "'", stage);
}

std::string read_text(const std::string& path, const char* stage) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw cdd::Error("cannot open '" + path + "'", stage);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void require_normalized(const cdd_dataset* ds, const char* stage) {
    if (!ds->ds.is_normalized())
        throw cdd::Error("dataset is not normalized; call cdd_dataset_normalize first", stage);
}

int32_t flag_code(cdd::Flag f) {
    switch (f) {
    case cdd::Flag::Neither: return CDD_FLAG_NEITHER;
    case cdd::Flag::Discriminated: return CDD_FLAG_DISCRIMINATED;
    case cdd::Flag::Favored: return CDD_FLAG_FAVORED;
    }
    return CDD_FLAG_NEITHER;
}

cdd::ScoreParams score_params(const cdd::PipelineConfig& cfg) {
    cdd::ScoreParams sp;
    sp.k = cfg.k;
    sp.max_distance = cfg.max_distance;
    sp.alpha = cfg.alpha;
    sp.fallback = cfg.fallback;
    sp.threads = cfg.threads;
    return sp;
}

bool parse_int(const char* text, long long& out) {
    try {
        std::size_t pos = 0;
        out = std::stoll(text, &pos);
        return pos == std::strlen(text);
    } catch (...) {
        return false;
    }
}

} // namespace

extern "C" {

const char* cdd_last_error(void) { return g_last_error.c_str(); }

const char* cdd_version(void) { return "1.0.0"; }

cdd_status cdd_config_load(const char* path, cdd_config** out) {
    CDD_REQUIRE(path, "path");
    CDD_REQUIRE(out, "out");
    return wrap([&] { *out = new cdd_config{cdd::load_config_file(path)}; });
}

cdd_status cdd_config_parse(const char* json_text, const char* base_dir, cdd_config** out) {
    CDD_REQUIRE(json_text, "json_text");
    CDD_REQUIRE(out, "out");
    return wrap([&] {
        *out = new cdd_config{cdd::parse_config(json_text, base_dir ? base_dir : ".")};
    });
}

cdd_status cdd_config_set(cdd_config* cfg, const char* key, const char* value) {
    CDD_REQUIRE(cfg, "cfg");
    CDD_REQUIRE(key, "key");
    CDD_REQUIRE(value, "value");
    const std::string k = key;
    const std::string v = value;
    return wrap([&] {
        const auto bad = [&](const char* why) {
            throw cdd::Error("config key '" + k + "': " + why + " (got '" + v + "')", "config");
        };
        long long i = 0;
        double d = 0.0;
        if (k == "k") {
            if (!parse_int(value, i) || i < 1) bad("needs an integer >= 1");
            cfg->cfg.k = static_cast<int>(i);
        } else if (k == "max_distance") {
            if (!cdd::parse_double(v, d) || !(d > 0.0)) bad("needs a positive number");
            cfg->cfg.max_distance = d;
        } else if (k == "alpha") {
            if (!cdd::parse_double(v, d) || d < 0.0) bad("needs a number >= 0");
            cfg->cfg.alpha = d;
        } else if (k == "bins") {
            if (!parse_int(value, i) || i < 1) bad("needs an integer >= 1");
            cfg->cfg.bins = static_cast<int>(i);
        } else if (k == "min_count") {
            if (!parse_int(value, i) || i < 0) bad("needs an integer >= 0");
            cfg->cfg.min_count = static_cast<int>(i);
        } else if (k == "seed") {
            if (!parse_int(value, i) || i < 0) bad("needs an integer >= 0");
            cfg->cfg.seed = static_cast<std::uint64_t>(i);
        } else if (k == "fallback") {
            cfg->cfg.fallback = cdd::fallback_from_string(v);
        } else if (k == "threads") {
            if (!parse_int(value, i) || i < 0) bad("needs an integer >= 0");
            cfg->cfg.threads = static_cast<int>(i);
        } else {
            throw cdd::Error("unknown config key '" + k + "'", "config");
        }
    });
}

void cdd_config_free(cdd_config* cfg) { delete cfg; }

cdd_status cdd_dataset_load(const cdd_config* cfg, cdd_dataset** out) {
    CDD_REQUIRE(cfg, "cfg");
    CDD_REQUIRE(out, "out");
    return wrap([&] {
        *out = new cdd_dataset{cdd::load_dataset_file(cfg->cfg.dataset_path, cfg->cfg.spec)};
    });
}

cdd_status cdd_dataset_normalize(const cdd_dataset* ds, cdd_dataset** out) {
    CDD_REQUIRE(ds, "ds");
    CDD_REQUIRE(out, "out");
    return wrap([&] { *out = new cdd_dataset{cdd::normalize_numeric(ds->ds)}; });
}

int64_t cdd_dataset_size(const cdd_dataset* ds) {
    return ds ? static_cast<int64_t>(ds->ds.size()) : 0;
}

int64_t cdd_dataset_count(const cdd_dataset* ds, int32_t group, int32_t decision) {
    if (!ds) return 0;
    int64_t n = 0;
    for (std::size_t i = 0; i < ds->ds.size(); ++i) {
        const auto id = static_cast<cdd::RecordId>(i);
        if (group >= 0 && static_cast<int32_t>(ds->ds.group(id)) != group) continue;
        if (decision >= 0 && static_cast<int32_t>(ds->ds.decision(id)) != decision) continue;
        ++n;
    }
    return n;
}

cdd_status cdd_dataset_base_rates(const cdd_dataset* ds, double* p_negative, double* p_positive) {
    CDD_REQUIRE(ds, "ds");
    return wrap([&] {
        const cdd::BaseRates r = cdd::base_rates(ds->ds);
        if (p_negative) *p_negative = r.p_negative;
        if (p_positive) *p_positive = r.p_positive;
    });
}

cdd_status cdd_dataset_write(const cdd_dataset* ds, const char* path) {
    CDD_REQUIRE(ds, "ds");
    CDD_REQUIRE(path, "path");
    return wrap([&] { cdd::write_table_file(ds->ds, path); });
}

void cdd_dataset_free(cdd_dataset* ds) { delete ds; }

cdd_status cdd_tamper_run(const cdd_config* cfg, const cdd_dataset* ds, cdd_dataset** tampered,
                          int64_t** flipped_ids, size_t* flipped_count, int64_t* matched_positive) {
    CDD_REQUIRE(cfg, "cfg");
    CDD_REQUIRE(ds, "ds");
    return wrap([&] {
        if (!cfg->cfg.tamper) throw cdd::Error("config has no tamper block", "tamper");
        const std::uint64_t seed = cfg->cfg.tamper->seed.value_or(cfg->cfg.seed);
        cdd::TamperResult res =
            cdd::tamper(ds->ds, cfg->cfg.tamper->conditions, cfg->cfg.tamper->fraction, seed);
        if (flipped_ids) {
            *flipped_ids = new int64_t[res.flipped.size()];
            std::copy(res.flipped.begin(), res.flipped.end(), *flipped_ids);
        }
        if (flipped_count) *flipped_count = res.flipped.size();
        if (matched_positive) *matched_positive = res.matched_positive;
        if (tampered) *tampered = new cdd_dataset{std::move(res.dataset)};
    });
}

void cdd_ids_free(int64_t* ids) { delete[] ids; }

cdd_status cdd_model_fit(const cdd_config* cfg, const cdd_dataset* normalized, cdd_model** out) {
    CDD_REQUIRE(cfg, "cfg");
    CDD_REQUIRE(normalized, "normalized");
    CDD_REQUIRE(out, "out");
    return wrap([&] {
        require_normalized(normalized, "propensity");
        auto model = std::make_unique<cdd_model>();
        model->selection = cdd::compute_selection(normalized->ds, cfg->cfg);
        model->model = cdd::fit_propensity(normalized->ds, *model->selection, cfg->cfg.fit);
        *out = model.release();
    });
}

cdd_status cdd_model_save(const cdd_model* model, const char* path) {
    CDD_REQUIRE(model, "model");
    CDD_REQUIRE(path, "path");
    return wrap([&] { write_text(path, cdd::model_to_json(model->model), "propensity"); });
}

cdd_status cdd_model_open(const char* path, cdd_model** out) {
    CDD_REQUIRE(path, "path");
    CDD_REQUIRE(out, "out");
    return wrap([&] {
        auto model = std::make_unique<cdd_model>();
        model->model = cdd::model_from_json(read_text(path, "propensity"));
        *out = model.release();
    });
}

cdd_status cdd_model_write_selection(const cdd_model* model, const char* path) {
    CDD_REQUIRE(model, "model");
    CDD_REQUIRE(path, "path");
    return wrap([&] {
        if (!model->selection)
            throw cdd::Error("selection report unavailable on a reopened model", "propensity");
        std::ostringstream ss;
        cdd::write_selection_report(*model->selection, ss);
        write_text(path, ss.str(), "propensity");
    });
}

cdd_status cdd_model_propensity(const cdd_model* model, const cdd_dataset* normalized, int64_t id,
                                double* e_out) {
    CDD_REQUIRE(model, "model");
    CDD_REQUIRE(normalized, "normalized");
    CDD_REQUIRE(e_out, "e_out");
    return wrap([&] {
        require_normalized(normalized, "propensity");
        *e_out = cdd::propensity_score(model->model, normalized->ds, id);
    });
}

cdd_status cdd_model_meta(const cdd_model* model, int32_t* iterations, double* final_ll,
                          int32_t* converged) {
    CDD_REQUIRE(model, "model");
    if (iterations) *iterations = model->model.training_meta.iterations;
    if (final_ll) *final_ll = model->model.training_meta.final_log_likelihood;
    if (converged) *converged = model->model.training_meta.converged ? 1 : 0;
    return CDD_OK;
}

void cdd_model_free(cdd_model* model) { delete model; }

cdd_status cdd_scores_compute(const cdd_config* cfg, const cdd_dataset* normalized,
                              const cdd_model* model, cdd_scores** out) {
    CDD_REQUIRE(cfg, "cfg");
    CDD_REQUIRE(normalized, "normalized");
    CDD_REQUIRE(model, "model");
    CDD_REQUIRE(out, "out");
    return wrap([&] {
        require_normalized(normalized, "discovery");
        *out = new cdd_scores{cdd::score_all(normalized->ds, model->model, score_params(cfg->cfg))};
    });
}

int64_t cdd_scores_count(const cdd_scores* scores) {
    return scores ? static_cast<int64_t>(scores->scores.size()) : 0;
}

cdd_status cdd_scores_get(const cdd_scores* scores, int64_t index, cdd_score_row* out) {
    CDD_REQUIRE(scores, "scores");
    CDD_REQUIRE(out, "out");
    return wrap([&] {
        if (index < 0 || static_cast<std::size_t>(index) >= scores->scores.size())
            throw cdd::Error("score index " + std::to_string(index) + " out of range", "discovery");
        const cdd::IndividualScore& s = scores->scores[static_cast<std::size_t>(index)];
        out->id = s.id;
        out->group = static_cast<int32_t>(s.group);
        out->decision = static_cast<int32_t>(s.decision);
        out->flag = flag_code(s.flag);
        out->propensity = s.propensity;
        out->rd = s.rd;
        out->rd_causal = s.rd_causal;
        out->disadvantage = s.disadvantage;
    });
}

cdd_status cdd_scores_write(const cdd_scores* scores, const char* path) {
    CDD_REQUIRE(scores, "scores");
    CDD_REQUIRE(path, "path");
    return wrap([&] {
        std::ostringstream ss;
        cdd::write_scores(scores->scores, ss);
        write_text(path, ss.str(), "discovery");
    });
}

void cdd_scores_free(cdd_scores* scores) { delete scores; }

cdd_status cdd_trends_write(const cdd_config* cfg, const cdd_scores* scores, const char* scope,
                            const char* path) {
    CDD_REQUIRE(cfg, "cfg");
    CDD_REQUIRE(scores, "scores");
    CDD_REQUIRE(scope, "scope");
    CDD_REQUIRE(path, "path");
    return wrap([&] {
        const cdd::TrendScope sc = cdd::trend_scope_from_string(scope);
        std::vector<cdd::TrendRow> rows;
        for (const cdd::TrendFilter f : {cdd::TrendFilter::All, cdd::TrendFilter::Protected,
                                         cdd::TrendFilter::Unprotected}) {
            const auto part =
                cdd::bin_trends(scores->scores, sc, f, cfg->cfg.bins, cfg->cfg.min_count);
            rows.insert(rows.end(), part.begin(), part.end());
        }
        std::ostringstream ss;
        cdd::write_trends(rows, ss);
        write_text(path, ss.str(), "trends");
    });
}

cdd_status cdd_tree_learn(const cdd_config* cfg, const cdd_dataset* normalized,
                          const cdd_scores* scores, const char* mode, cdd_tree** out) {
    CDD_REQUIRE(cfg, "cfg");
    CDD_REQUIRE(normalized, "normalized");
    CDD_REQUIRE(scores, "scores");
    CDD_REQUIRE(mode, "mode");
    CDD_REQUIRE(out, "out");
    return wrap([&] {
        require_normalized(normalized, "discovery");
        const std::string m = mode;
        cdd::Group group;
        cdd::Decision decision;
        if (m == "discrimination") {
            group = cdd::Group::Protected;
            decision = cdd::Decision::Negative;
        } else if (m == "favoritism") {
            group = cdd::Group::Unprotected;
            decision = cdd::Decision::Positive;
        } else {
            throw cdd::Error("mode must be 'discrimination' or 'favoritism', got '" + m + "'",
                             "discovery");
        }
        std::vector<cdd::RecordId> ids;
        std::vector<double> labels;
        for (const auto& s : scores->scores) {
            if (s.group != group || s.decision != decision) continue;
            ids.push_back(s.id);
            labels.push_back(s.rd_causal);
        }
        if (static_cast<long long>(ids.size()) < cfg->cfg.tree.min_leaf)
            throw cdd::Error("mode '" + m + "' has " + std::to_string(ids.size()) +
                                 " records, fewer than min_leaf " +
                                 std::to_string(cfg->cfg.tree.min_leaf),
                             "discovery");
        auto tree = std::make_unique<cdd_tree>();
        tree->tree = cdd::learn_tree(normalized->ds, ids, labels, cfg->cfg.tree);
        tree->rules = cdd::extract_rules(tree->tree, normalized->ds);
        tree->tree_json = cdd::tree_to_json(tree->tree, normalized->ds);
        tree->rules_json = cdd::rules_to_json(tree->rules);
        *out = tree.release();
    });
}

cdd_status cdd_tree_write_json(const cdd_tree* tree, const char* path) {
    CDD_REQUIRE(tree, "tree");
    CDD_REQUIRE(path, "path");
    return wrap([&] { write_text(path, tree->tree_json, "discovery"); });
}

cdd_status cdd_tree_write_rules(const cdd_tree* tree, const char* path) {
    CDD_REQUIRE(tree, "tree");
    CDD_REQUIRE(path, "path");
    return wrap([&] { write_text(path, tree->rules_json, "discovery"); });
}

cdd_status cdd_tree_write_compare(const cdd_tree* tree, const cdd_dataset* normalized,
                                  const cdd_scores* scores, const char* path) {
    CDD_REQUIRE(tree, "tree");
    CDD_REQUIRE(normalized, "normalized");
    CDD_REQUIRE(scores, "scores");
    CDD_REQUIRE(path, "path");
    return wrap([&] {
        write_text(path, cdd::compare_rules_csv(tree->rules, normalized->ds, scores->scores),
                   "discovery");
    });
}

void cdd_tree_free(cdd_tree* tree) { delete tree; }

cdd_status cdd_pipeline_run(const cdd_config* cfg, const char* out_dir) {
    CDD_REQUIRE(cfg, "cfg");
    CDD_REQUIRE(out_dir, "out_dir");
    return wrap([&] { cdd::run_pipeline(cfg->cfg, out_dir); });
}

} // extern "C"
