#include "core/discovery.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <thread>

#include <json.hpp>

#include "core/neighborhood.hpp"

namespace cdd {
namespace {

using ordered_json = nlohmann::ordered_json;

[[noreturn]] void fail(std::string msg) { throw Error(std::move(msg), "discovery"); }

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kZeroSse = 1e-12; // treat smaller node SSE as zero variance

bool contains(const std::vector<std::string>& v, std::string_view t) {
    return std::find(v.begin(), v.end(), t) != v.end();
}

} // namespace

Flag classify(Decision decision, double disadvantage, double alpha) {
    if (alpha < 0.0) fail("alpha must be non-negative");
    if (decision == Decision::Negative && disadvantage > alpha) return Flag::Discriminated;
    if (decision == Decision::Positive && disadvantage <= -alpha) return Flag::Favored;
    return Flag::Neither;
}

std::vector<IndividualScore> score_all(const Dataset& ds, const LogisticModel& model,
                                       const ScoreParams& params) {
    if (!ds.is_normalized()) fail("scoring requires a normalized dataset");
    if (params.k < 1) fail("k must be at least 1");
    if (params.alpha < 0.0) fail("alpha must be non-negative");
    if (ds.empty()) return {};

    const BaseRates rates = base_rates(ds);
    const std::vector<double> propensities = propensity_scores(model, ds);
    std::vector<double> weights(propensities.size());
    for (std::size_t i = 0; i < propensities.size(); ++i) weights[i] = weight_of(propensities[i]);

    std::vector<IndividualScore> out(ds.size());
    const auto work = [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            const auto id = static_cast<RecordId>(i);
            const KSet ks = kset(ds, id, params.k, params.max_distance);
            const ContingencyTable t = contingency(ks, ds);
            const CausalNegativeRate cnr = causal_negative_rate(ks, ds, weights, rates, params.fallback);
            IndividualScore s;
            s.id = id;
            s.group = ds.group(id);
            s.decision = ds.decision(id);
            s.propensity = propensities[i];
            s.rd = risk_difference(t, rates, params.fallback);
            s.rd_causal = protected_negative_rate(t, rates) - cnr.p2c;
            s.disadvantage = s.group == Group::Protected ? s.rd_causal : -s.rd_causal;
            s.flag = classify(s.decision, s.disadvantage, params.alpha);
            out[i] = s;
        }
    };

    std::size_t threads = params.threads > 0 ? static_cast<std::size_t>(params.threads)
                                             : std::max(1u, std::thread::hardware_concurrency());
    threads = std::min(threads, ds.size());
    if (threads <= 1) {
        work(0, ds.size());
        return out;
    }
    const std::size_t chunk = (ds.size() + threads - 1) / threads;
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(threads);
    for (std::size_t t = 0; t < threads; ++t) {
        const std::size_t begin = t * chunk;
        const std::size_t end = std::min(ds.size(), begin + chunk);
        if (begin >= end) break;
        pool.emplace_back([&, t, begin, end] {
            try {
                work(begin, end);
            } catch (...) {
                errors[t] = std::current_exception();
            }
        });
    }
    for (auto& th : pool) th.join();
    for (const auto& e : errors)
        if (e) std::rethrow_exception(e);
    return out;
}

void write_scores(std::span<const IndividualScore> scores, std::ostream& out, char delim) {
    out << "id" << delim << "group" << delim << "decision" << delim << "propensity" << delim << "rd"
        << delim << "rd_causal" << delim << "disadvantage" << delim << "flag\n";
    for (const auto& s : scores) {
        out << s.id << delim << to_string(s.group) << delim << to_string(s.decision) << delim
            << format_double(s.propensity) << delim << format_double(s.rd) << delim
            << format_double(s.rd_causal) << delim << format_double(s.disadvantage) << delim
            << to_string(s.flag) << '\n';
    }
}

namespace {

struct NodeStats {
    double sum = 0.0;
    double sumsq = 0.0;
    long long n = 0;

    double sse() const {
        if (n == 0) return 0.0;
        const double s = sumsq - sum * sum / static_cast<double>(n);
        return s > 0.0 ? s : 0.0;
    }
};

struct SplitChoice {
    bool found = false;
    double gain = 0.0;
    int col = -1;
    double threshold = 0.0;
    std::int32_t level = -1;
};

struct TreeBuilder {
    const Dataset& ds;
    std::span<const RecordId> records;
    std::span<const double> labels;
    const TreeParams& params;
    RegressionTree tree;

    int build(std::vector<std::size_t>& idx, int depth) {
        NodeStats stats;
        for (const std::size_t i : idx) {
            stats.sum += labels[i];
            stats.sumsq += labels[i] * labels[i];
        }
        stats.n = static_cast<long long>(idx.size());

        const int node = static_cast<int>(tree.nodes.size());
        tree.nodes.emplace_back();
        const double n = static_cast<double>(stats.n);
        tree.nodes[static_cast<std::size_t>(node)].prediction = stats.sum / n;
        tree.nodes[static_cast<std::size_t>(node)].count = stats.n;
        tree.nodes[static_cast<std::size_t>(node)].variance = stats.sse() / n;

        if (depth >= params.max_depth || stats.n < 2LL * params.min_leaf || stats.sse() <= kZeroSse)
            return node;
        const SplitChoice best = best_split(idx, stats);
        if (!best.found) return node;

        std::vector<std::size_t> left, right;
        const Column& c = ds.columns()[static_cast<std::size_t>(best.col)];
        for (const std::size_t i : idx) {
            const auto rid = static_cast<std::size_t>(records[i]);
            const bool go_left = c.is_numeric() ? c.raw[rid] < best.threshold
                                                : c.codes[rid] == best.level;
            (go_left ? left : right).push_back(i);
        }
        idx.clear();
        idx.shrink_to_fit();

        TreeNode& nd = tree.nodes[static_cast<std::size_t>(node)];
        nd.leaf = false;
        nd.col = best.col;
        nd.threshold = best.threshold;
        nd.level = best.level;
        const int l = build(left, depth + 1);
        const int r = build(right, depth + 1);
        tree.nodes[static_cast<std::size_t>(node)].left = l;
        tree.nodes[static_cast<std::size_t>(node)].right = r;
        return node;
    }

    // strict improvement keeps the first candidate among gain ties, which
    // realizes the (column order, smaller split value) tie-break
    SplitChoice best_split(const std::vector<std::size_t>& idx, const NodeStats& parent) const {
        SplitChoice best;
        const double parent_sse = parent.sse();
        for (const int ci : ds.covariate_columns()) {
            const Column& c = ds.columns()[static_cast<std::size_t>(ci)];
            if (c.is_numeric())
                scan_numeric(c, ci, idx, parent, parent_sse, best);
            else
                scan_categorical(c, ci, idx, parent, parent_sse, best);
        }
        return best;
    }

    void consider(SplitChoice& best, double gain, int col, double threshold, std::int32_t level) const {
        if (gain <= 0.0) return;
        if (best.found && gain <= best.gain) return;
        best = SplitChoice{true, gain, col, threshold, level};
    }

    void scan_numeric(const Column& c, int ci, const std::vector<std::size_t>& idx,
                      const NodeStats& parent, double parent_sse, SplitChoice& best) const {
        std::vector<std::pair<double, double>> vl; // (raw value, label), sorted by value
        vl.reserve(idx.size());
        for (const std::size_t i : idx)
            vl.emplace_back(c.raw[static_cast<std::size_t>(records[i])], labels[i]);
        std::sort(vl.begin(), vl.end(),
                  [](const auto& a, const auto& b) { return a.first < b.first; });
        NodeStats leftst;
        for (std::size_t i = 0; i + 1 < vl.size(); ++i) {
            leftst.sum += vl[i].second;
            leftst.sumsq += vl[i].second * vl[i].second;
            ++leftst.n;
            if (vl[i].first == vl[i + 1].first) continue;
            const long long nr = parent.n - leftst.n;
            if (leftst.n < params.min_leaf || nr < params.min_leaf) continue;
            NodeStats rightst{parent.sum - leftst.sum, parent.sumsq - leftst.sumsq, nr};
            const double gain = parent_sse - leftst.sse() - rightst.sse();
            consider(best, gain, ci, 0.5 * (vl[i].first + vl[i + 1].first), -1);
        }
    }

    void scan_categorical(const Column& c, int ci, const std::vector<std::size_t>& idx,
                          const NodeStats& parent, double parent_sse, SplitChoice& best) const {
        std::vector<NodeStats> per_level(c.levels.size());
        for (const std::size_t i : idx) {
            NodeStats& st = per_level[static_cast<std::size_t>(c.codes[static_cast<std::size_t>(records[i])])];
            st.sum += labels[i];
            st.sumsq += labels[i] * labels[i];
            ++st.n;
        }
        for (std::size_t l = 0; l < per_level.size(); ++l) {
            const NodeStats& leftst = per_level[l];
            const long long nr = parent.n - leftst.n;
            if (leftst.n < params.min_leaf || nr < params.min_leaf) continue;
            NodeStats rightst{parent.sum - leftst.sum, parent.sumsq - leftst.sumsq, nr};
            const double gain = parent_sse - leftst.sse() - rightst.sse();
            consider(best, gain, ci, 0.0, static_cast<std::int32_t>(l));
        }
    }
};

} // namespace

RegressionTree learn_tree(const Dataset& ds, std::span<const RecordId> records,
                          std::span<const double> labels, const TreeParams& params) {
    if (records.size() != labels.size()) fail("records and labels differ in length");
    if (records.empty()) fail("cannot learn a tree from no records");
    if (params.min_leaf < 1) fail("min_leaf must be at least 1");
    if (params.max_depth < 0) fail("max_depth must be non-negative");
    if (static_cast<long long>(records.size()) < params.min_leaf)
        fail("fewer records than min_leaf");
    for (std::size_t i = 0; i < records.size(); ++i) {
        if (records[i] < 0 || static_cast<std::size_t>(records[i]) >= ds.size())
            fail("record id " + std::to_string(records[i]) + " out of range");
        if (!std::isfinite(labels[i])) fail("non-finite label at position " + std::to_string(i));
    }

    TreeBuilder builder{ds, records, labels, params, {}};
    std::vector<std::size_t> idx(records.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    builder.build(idx, 0);
    return builder.tree;
}

bool atom_matches(const RuleAtom& atom, const Dataset& ds, RecordId id) {
    const int ci = ds.column_index(atom.attr);
    if (ci < 0) fail("rule attribute '" + atom.attr + "' missing from dataset");
    const Column& c = ds.columns()[static_cast<std::size_t>(ci)];
    if (atom.numeric != c.is_numeric())
        fail("rule attribute '" + atom.attr + "' kind does not match the dataset");
    if (atom.numeric) {
        const double v = c.raw[static_cast<std::size_t>(id)];
        return v >= atom.lo && v < atom.hi;
    }
    return contains(atom.values, c.token_of(id));
}

bool rule_matches(const Rule& rule, const Dataset& ds, RecordId id) {
    for (const auto& atom : rule.atoms)
        if (!atom_matches(atom, ds, id)) return false;
    return true;
}

namespace {

struct PathConstraints {
    std::vector<double> lo, hi;
    std::vector<std::int32_t> eq;
    std::vector<std::vector<bool>> excluded;

    explicit PathConstraints(const Dataset& ds)
        : lo(ds.columns().size(), -kInf),
          hi(ds.columns().size(), kInf),
          eq(ds.columns().size(), -1),
          excluded(ds.columns().size()) {
        for (std::size_t i = 0; i < ds.columns().size(); ++i)
            excluded[i].assign(ds.columns()[i].levels.size(), false);
    }
};

Rule materialize_rule(const PathConstraints& pc, const Dataset& ds, const TreeNode& leaf) {
    Rule rule;
    for (std::size_t ci = 0; ci < ds.columns().size(); ++ci) {
        const Column& c = ds.columns()[ci];
        if (c.is_numeric()) {
            if (pc.lo[ci] == -kInf && pc.hi[ci] == kInf) continue;
            RuleAtom atom;
            atom.attr = c.schema.name;
            atom.numeric = true;
            atom.lo = pc.lo[ci];
            atom.hi = pc.hi[ci];
            rule.atoms.push_back(std::move(atom));
        } else {
            RuleAtom atom;
            atom.attr = c.schema.name;
            atom.numeric = false;
            if (pc.eq[ci] >= 0) {
                atom.values.push_back(c.levels[static_cast<std::size_t>(pc.eq[ci])]);
            } else {
                bool any = false;
                for (const bool e : pc.excluded[ci]) any = any || e;
                if (!any) continue;
                for (std::size_t l = 0; l < c.levels.size(); ++l)
                    if (!pc.excluded[ci][l]) atom.values.push_back(c.levels[l]);
            }
            rule.atoms.push_back(std::move(atom));
        }
    }
    rule.predicted_rdc = leaf.prediction;
    rule.count = leaf.count;
    rule.variance = leaf.variance;
    return rule;
}

void collect_rules(const RegressionTree& tree, int node, PathConstraints& pc, const Dataset& ds,
                   std::vector<Rule>& out) {
    const TreeNode& nd = tree.nodes[static_cast<std::size_t>(node)];
    if (nd.leaf) {
        out.push_back(materialize_rule(pc, ds, nd));
        return;
    }
    const auto ci = static_cast<std::size_t>(nd.col);
    const Column& c = ds.columns()[ci];
    if (c.is_numeric()) {
        const double old_hi = pc.hi[ci];
        pc.hi[ci] = std::min(pc.hi[ci], nd.threshold);
        collect_rules(tree, nd.left, pc, ds, out);
        pc.hi[ci] = old_hi;
        const double old_lo = pc.lo[ci];
        pc.lo[ci] = std::max(pc.lo[ci], nd.threshold);
        collect_rules(tree, nd.right, pc, ds, out);
        pc.lo[ci] = old_lo;
    } else {
        const std::int32_t old_eq = pc.eq[ci];
        pc.eq[ci] = nd.level;
        collect_rules(tree, nd.left, pc, ds, out);
        pc.eq[ci] = old_eq;
        pc.excluded[ci][static_cast<std::size_t>(nd.level)] = true;
        collect_rules(tree, nd.right, pc, ds, out);
        pc.excluded[ci][static_cast<std::size_t>(nd.level)] = false;
    }
}

} // namespace

std::vector<Rule> extract_rules(const RegressionTree& tree, const Dataset& full_dataset) {
    if (tree.nodes.empty()) fail("cannot extract rules from an empty tree");
    std::vector<Rule> rules;
    PathConstraints pc(full_dataset);
    collect_rules(tree, 0, pc, full_dataset, rules);

    for (std::size_t r = 0; r < full_dataset.size(); ++r) {
        const auto id = static_cast<RecordId>(r);
        const bool prot = full_dataset.group(id) == Group::Protected;
        for (auto& rule : rules) {
            if (!rule_matches(rule, full_dataset, id)) continue;
            (prot ? rule.support_protected : rule.support_unprotected) += 1;
        }
    }
    for (auto& rule : rules) {
        const long long total = rule.support_protected + rule.support_unprotected;
        if (total > 0) {
            rule.coverage_protected = static_cast<double>(rule.support_protected) / static_cast<double>(total);
            rule.coverage_unprotected = static_cast<double>(rule.support_unprotected) / static_cast<double>(total);
        }
    }
    std::stable_sort(rules.begin(), rules.end(),
                     [](const Rule& a, const Rule& b) { return a.predicted_rdc > b.predicted_rdc; });
    return rules;
}

RuleGroupStats compare_rule_across_groups(const Rule& rule, const Dataset& ds,
                                          std::span<const IndividualScore> scores) {
    RuleGroupStats out;
    double sum_p = 0.0, sum_u = 0.0;
    for (const auto& s : scores) {
        if (!rule_matches(rule, ds, s.id)) continue;
        if (s.group == Group::Protected) {
            ++out.n_protected;
            sum_p += s.rd_causal;
        } else {
            ++out.n_unprotected;
            sum_u += s.rd_causal;
        }
    }
    if (out.n_protected > 0) out.mean_rdc_protected = sum_p / static_cast<double>(out.n_protected);
    if (out.n_unprotected > 0) out.mean_rdc_unprotected = sum_u / static_cast<double>(out.n_unprotected);
    return out;
}

namespace {

ordered_json node_to_json(const RegressionTree& tree, int node, const Dataset& ds) {
    const TreeNode& nd = tree.nodes[static_cast<std::size_t>(node)];
    ordered_json j;
    j["leaf"] = nd.leaf;
    j["count"] = nd.count;
    j["prediction"] = nd.prediction;
    j["variance"] = nd.variance;
    if (!nd.leaf) {
        const Column& c = ds.columns()[static_cast<std::size_t>(nd.col)];
        ordered_json split;
        split["attr"] = c.schema.name;
        if (c.is_numeric()) {
            split["op"] = "<";
            split["threshold"] = nd.threshold;
        } else {
            split["op"] = "==";
            split["level"] = c.levels[static_cast<std::size_t>(nd.level)];
        }
        j["split"] = std::move(split);
        j["left"] = node_to_json(tree, nd.left, ds);
        j["right"] = node_to_json(tree, nd.right, ds);
    }
    return j;
}

ordered_json atom_to_json(const RuleAtom& atom) {
    ordered_json j;
    j["attr"] = atom.attr;
    if (atom.numeric) {
        j["lo"] = atom.lo == -kInf ? ordered_json() : ordered_json(atom.lo);
        j["hi"] = atom.hi == kInf ? ordered_json() : ordered_json(atom.hi);
    } else {
        j["values"] = atom.values;
    }
    return j;
}

} // namespace

std::string atom_to_text(const RuleAtom& atom) {
    if (atom.numeric) {
        if (atom.lo == -kInf) return atom.attr + " < " + format_double(atom.hi);
        if (atom.hi == kInf) return atom.attr + " >= " + format_double(atom.lo);
        return atom.attr + " in [" + format_double(atom.lo) + ", " + format_double(atom.hi) + ")";
    }
    std::string text = atom.attr + " in {";
    for (std::size_t i = 0; i < atom.values.size(); ++i) {
        if (i) text += ", ";
        text += atom.values[i];
    }
    return text + "}";
}

std::string tree_to_json(const RegressionTree& tree, const Dataset& ds) {
    if (tree.nodes.empty()) fail("cannot serialize an empty tree");
    return node_to_json(tree, 0, ds).dump(2) + "\n";
}

std::string rules_to_json(std::span<const Rule> rules) {
    ordered_json doc = ordered_json::array();
    for (const auto& rule : rules) {
        ordered_json j;
        j["conditions"] = ordered_json::array();
        std::string text;
        for (const auto& atom : rule.atoms) {
            j["conditions"].push_back(atom_to_json(atom));
            if (!text.empty()) text += " and ";
            text += atom_to_text(atom);
        }
        j["text"] = text.empty() ? "true" : text;
        j["predicted_rdc"] = rule.predicted_rdc;
        j["count"] = rule.count;
        j["variance"] = rule.variance;
        j["support"] = {{"protected", rule.support_protected}, {"unprotected", rule.support_unprotected}};
        j["coverage_share"] = {{"protected", rule.coverage_protected}, {"unprotected", rule.coverage_unprotected}};
        doc.push_back(std::move(j));
    }
    return doc.dump(2) + "\n";
}

} // namespace cdd
