#include "core/config.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

namespace cdd {
namespace {

using ordered_json = nlohmann::ordered_json;

[[noreturn]] void fail(std::string msg) { throw Error(std::move(msg), "config"); }

AttrKind kind_from(const std::string& s) {
    if (s == "numeric") return AttrKind::Numeric;
    if (s == "categorical") return AttrKind::Categorical;
    fail("attribute kind must be 'numeric' or 'categorical', got '" + s + "'");
}

AttrRole role_from(const std::string& s) {
    if (s == "covariate") return AttrRole::Covariate;
    if (s == "group") return AttrRole::Group;
    if (s == "decision") return AttrRole::Decision;
    if (s == "ignore") return AttrRole::Ignore;
    fail("attribute role must be one of covariate/group/decision/ignore, got '" + s + "'");
}

const char* role_name(AttrRole r) {
    switch (r) {
    case AttrRole::Covariate: return "covariate";
    case AttrRole::Group: return "group";
    case AttrRole::Decision: return "decision";
    case AttrRole::Ignore: return "ignore";
    }
    return "?";
}

PositiveRule::Op op_from(const std::string& s) {
    if (s == "<") return PositiveRule::Op::Lt;
    if (s == "<=") return PositiveRule::Op::Le;
    if (s == ">") return PositiveRule::Op::Gt;
    if (s == ">=") return PositiveRule::Op::Ge;
    fail("decision op must be one of < <= > >=, got '" + s + "'");
}

const char* op_name(PositiveRule::Op op) {
    switch (op) {
    case PositiveRule::Op::Lt: return "<";
    case PositiveRule::Op::Le: return "<=";
    case PositiveRule::Op::Gt: return ">";
    case PositiveRule::Op::Ge: return ">=";
    case PositiveRule::Op::None: break;
    }
    return "?";
}

std::vector<std::string> string_list(const ordered_json& j, const char* what) {
    if (!j.is_array()) fail(std::string(what) + " must be an array of strings");
    std::vector<std::string> out;
    for (const auto& e : j) {
        if (!e.is_string()) fail(std::string(what) + " must be an array of strings");
        out.push_back(e.get<std::string>());
    }
    return out;
}

RuleAtom atom_from(const ordered_json& j) {
    if (!j.is_object() || !j.contains("attr")) fail("tamper condition needs an 'attr' field");
    RuleAtom atom;
    atom.attr = j.at("attr").get<std::string>();
    const bool has_range = j.contains("lo") || j.contains("hi");
    const bool has_values = j.contains("values");
    if (has_range == has_values)
        fail("tamper condition on '" + atom.attr + "' needs either 'values' or 'lo'/'hi'");
    if (has_values) {
        atom.numeric = false;
        atom.values = string_list(j.at("values"), "tamper condition values");
        if (atom.values.empty()) fail("tamper condition on '" + atom.attr + "' has an empty value set");
    } else {
        atom.numeric = true;
        if (j.contains("lo") && !j.at("lo").is_null()) atom.lo = j.at("lo").get<double>();
        if (j.contains("hi") && !j.at("hi").is_null()) atom.hi = j.at("hi").get<double>();
        if (!(atom.lo < atom.hi))
            fail("tamper condition on '" + atom.attr + "' has an empty range");
    }
    return atom;
}

ordered_json atom_echo(const RuleAtom& atom) {
    ordered_json j;
    j["attr"] = atom.attr;
    if (atom.numeric) {
        j["lo"] = std::isinf(atom.lo) ? ordered_json() : ordered_json(atom.lo);
        j["hi"] = std::isinf(atom.hi) ? ordered_json() : ordered_json(atom.hi);
    } else {
        j["values"] = atom.values;
    }
    return j;
}

} // namespace

FallbackMode fallback_from_string(std::string_view name) {
    if (name == "paper-literal") return FallbackMode::PaperLiteral;
    if (name == "expected-negative") return FallbackMode::ExpectedNegative;
    fail("fallback must be 'paper-literal' or 'expected-negative', got '" + std::string(name) + "'");
}

const char* to_string(FallbackMode mode) {
    return mode == FallbackMode::PaperLiteral ? "paper-literal" : "expected-negative";
}

PipelineConfig parse_config(const std::string& text, const std::filesystem::path& base_dir) {
    ordered_json doc;
    try {
        doc = ordered_json::parse(text);
    } catch (const std::exception& e) {
        fail(std::string("config is not valid JSON: ") + e.what());
    }

    PipelineConfig cfg;
    try {
        if (!doc.contains("dataset") || !doc["dataset"].contains("path"))
            fail("config needs dataset.path");
        const auto& jd = doc["dataset"];
        std::filesystem::path p = jd.at("path").get<std::string>();
        cfg.dataset_path = p.is_absolute() ? p : base_dir / p;
        if (jd.contains("delimiter")) {
            const std::string d = jd.at("delimiter").get<std::string>();
            if (d.size() != 1) fail("dataset.delimiter must be a single character");
            cfg.spec.delimiter = d[0];
        }
        if (jd.contains("missing")) cfg.spec.missing_values = string_list(jd.at("missing"), "dataset.missing");
        if (jd.contains("ignore_unlisted")) cfg.spec.ignore_unlisted = jd.at("ignore_unlisted").get<bool>();

        if (!doc.contains("attributes")) fail("config needs an attributes array");
        for (const auto& ja : doc.at("attributes")) {
            AttributeSchema a;
            a.name = ja.at("name").get<std::string>();
            a.kind = kind_from(ja.at("kind").get<std::string>());
            if (ja.contains("role")) a.role = role_from(ja.at("role").get<std::string>());
            cfg.spec.attributes.push_back(std::move(a));
        }

        if (!doc.contains("group")) fail("config needs a group block");
        const auto& jg = doc.at("group");
        cfg.spec.group_attribute = jg.at("attribute").get<std::string>();
        cfg.spec.protected_value = jg.at("protected").get<std::string>();
        if (jg.contains("unprotected"))
            cfg.spec.unprotected_values = string_list(jg.at("unprotected"), "group.unprotected");

        if (!doc.contains("decision")) fail("config needs a decision block");
        const auto& jc = doc.at("decision");
        cfg.spec.decision_attribute = jc.at("attribute").get<std::string>();
        if (jc.contains("op")) {
            cfg.spec.positive.op = op_from(jc.at("op").get<std::string>());
            cfg.spec.positive.threshold = jc.at("threshold").get<double>();
        }
        if (jc.contains("positive"))
            cfg.spec.positive.tokens = string_list(jc.at("positive"), "decision.positive");
        if (jc.contains("negative"))
            cfg.spec.negative_values = string_list(jc.at("negative"), "decision.negative");

        if (doc.contains("analysis")) {
            const auto& ja = doc.at("analysis");
            cfg.k = ja.value("k", cfg.k);
            if (ja.contains("max_distance") && !ja.at("max_distance").is_null())
                cfg.max_distance = ja.at("max_distance").get<double>();
            cfg.alpha = ja.value("alpha", cfg.alpha);
            cfg.bins = ja.value("bins", cfg.bins);
            cfg.min_count = ja.value("min_count", cfg.min_count);
            cfg.seed = ja.value("seed", cfg.seed);
            cfg.threads = ja.value("threads", cfg.threads);
            if (ja.contains("fallback"))
                cfg.fallback = fallback_from_string(ja.at("fallback").get<std::string>());
        }
        if (doc.contains("propensity")) {
            const auto& jp = doc.at("propensity");
            cfg.fit.l2 = jp.value("l2", cfg.fit.l2);
            cfg.fit.max_iters = jp.value("max_iters", cfg.fit.max_iters);
            cfg.fit.tol = jp.value("tol", cfg.fit.tol);
            cfg.fit.clip_epsilon = jp.value("clip_epsilon", cfg.fit.clip_epsilon);
            cfg.fit.binarize_numeric = jp.value("binarize_numeric", cfg.fit.binarize_numeric);
            cfg.proxy_threshold = jp.value("proxy_threshold", cfg.proxy_threshold);
            if (jp.contains("selection"))
                cfg.selection_override = string_list(jp.at("selection"), "propensity.selection");
        }
        if (doc.contains("tree")) {
            const auto& jt = doc.at("tree");
            cfg.tree.min_leaf = jt.value("min_leaf", cfg.tree.min_leaf);
            cfg.tree.max_depth = jt.value("max_depth", cfg.tree.max_depth);
        }
        if (doc.contains("tamper")) {
            const auto& jt = doc.at("tamper");
            TamperConfig t;
            if (!jt.contains("conditions")) fail("tamper block needs a conditions array");
            for (const auto& jc2 : jt.at("conditions")) t.conditions.push_back(atom_from(jc2));
            if (t.conditions.empty()) fail("tamper block needs at least one condition");
            t.fraction = jt.at("fraction").get<double>();
            if (jt.contains("seed") && !jt.at("seed").is_null())
                t.seed = jt.at("seed").get<std::uint64_t>();
            cfg.tamper = std::move(t);
        }
    } catch (const Error&) {
        throw;
    } catch (const std::exception& e) {
        fail(std::string("malformed config: ") + e.what());
    }

    if (cfg.k < 1) fail("analysis.k must be at least 1");
    if (cfg.max_distance && !(*cfg.max_distance > 0.0)) fail("analysis.max_distance must be positive");
    if (cfg.alpha < 0.0) fail("analysis.alpha must be non-negative");
    if (cfg.bins < 1) fail("analysis.bins must be at least 1");
    if (cfg.min_count < 0) fail("analysis.min_count must be non-negative");
    if (cfg.threads < 0) fail("analysis.threads must be non-negative");
    if (cfg.fit.l2 < 0.0) fail("propensity.l2 must be non-negative");
    if (cfg.fit.max_iters < 0) fail("propensity.max_iters must be non-negative");
    if (!(cfg.fit.tol > 0.0)) fail("propensity.tol must be positive");
    if (!(cfg.fit.clip_epsilon > 0.0 && cfg.fit.clip_epsilon < 0.5))
        fail("propensity.clip_epsilon must lie in (0, 0.5)");
    if (!(cfg.proxy_threshold > 0.0 && cfg.proxy_threshold <= 1.0))
        fail("propensity.proxy_threshold must lie in (0, 1]");
    if (cfg.tree.min_leaf < 1) fail("tree.min_leaf must be at least 1");
    if (cfg.tree.max_depth < 0) fail("tree.max_depth must be non-negative");
    if (cfg.tamper && !(cfg.tamper->fraction >= 0.0 && cfg.tamper->fraction <= 1.0))
        fail("tamper.fraction must lie in [0, 1]");
    cfg.spec.validate();
    return cfg;
}

PipelineConfig load_config_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) fail("cannot open config file '" + path.string() + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str(), path.parent_path());
}

std::string config_to_json(const PipelineConfig& cfg) {
    ordered_json doc;
    doc["dataset"] = {{"path", cfg.dataset_path.string()},
                      {"delimiter", std::string(1, cfg.spec.delimiter)},
                      {"missing", cfg.spec.missing_values},
                      {"ignore_unlisted", cfg.spec.ignore_unlisted}};
    doc["attributes"] = ordered_json::array();
    for (const auto& a : cfg.spec.attributes)
        doc["attributes"].push_back({{"name", a.name},
                                     {"kind", a.kind == AttrKind::Numeric ? "numeric" : "categorical"},
                                     {"role", role_name(a.role)}});
    doc["group"] = {{"attribute", cfg.spec.group_attribute},
                    {"protected", cfg.spec.protected_value},
                    {"unprotected", cfg.spec.unprotected_values}};
    ordered_json jd;
    jd["attribute"] = cfg.spec.decision_attribute;
    if (cfg.spec.positive.is_numeric_rule()) {
        jd["op"] = op_name(cfg.spec.positive.op);
        jd["threshold"] = cfg.spec.positive.threshold;
    } else {
        jd["positive"] = cfg.spec.positive.tokens;
        jd["negative"] = cfg.spec.negative_values;
    }
    doc["decision"] = std::move(jd);
    doc["analysis"] = {{"k", cfg.k},
                       {"max_distance", cfg.max_distance ? ordered_json(*cfg.max_distance) : ordered_json()},
                       {"alpha", cfg.alpha},
                       {"bins", cfg.bins},
                       {"min_count", cfg.min_count},
                       {"seed", cfg.seed},
                       {"fallback", to_string(cfg.fallback)},
                       {"threads", cfg.threads}};
    doc["propensity"] = {{"l2", cfg.fit.l2},
                         {"max_iters", cfg.fit.max_iters},
                         {"tol", cfg.fit.tol},
                         {"clip_epsilon", cfg.fit.clip_epsilon},
                         {"binarize_numeric", cfg.fit.binarize_numeric},
                         {"proxy_threshold", cfg.proxy_threshold},
                         {"selection", cfg.selection_override}};
    doc["tree"] = {{"min_leaf", cfg.tree.min_leaf}, {"max_depth", cfg.tree.max_depth}};
    if (cfg.tamper) {
        ordered_json jt;
        jt["conditions"] = ordered_json::array();
        for (const auto& atom : cfg.tamper->conditions) jt["conditions"].push_back(atom_echo(atom));
        jt["fraction"] = cfg.tamper->fraction;
        jt["seed"] = cfg.tamper->seed ? ordered_json(*cfg.tamper->seed) : ordered_json();
        doc["tamper"] = std::move(jt);
    }
    return doc.dump(2) + "\n";
}

} // namespace cdd
