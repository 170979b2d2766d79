#include "core/propensity.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include <json.hpp>

namespace cdd {
namespace {

using ordered_json = nlohmann::ordered_json;

[[noreturn]] void fail(std::string msg) { throw Error(std::move(msg), "propensity"); }

// cell labels for entropy; numeric columns get equal-frequency bins
std::vector<int> discretize(const Column& c, int bins) {
    const std::size_t n = c.is_numeric() ? c.values.size() : c.codes.size();
    std::vector<int> cells(n);
    if (!c.is_numeric()) {
        for (std::size_t i = 0; i < n; ++i) cells[i] = c.codes[i];
        return cells;
    }
    std::vector<double> sorted = c.values;
    std::sort(sorted.begin(), sorted.end());
    std::vector<double> edges;
    for (int b = 1; b < bins; ++b) {
        const std::size_t idx = static_cast<std::size_t>(b) * n / static_cast<std::size_t>(bins);
        if (idx < n) edges.push_back(sorted[idx]);
    }
    for (std::size_t i = 0; i < n; ++i)
        cells[i] = static_cast<int>(std::upper_bound(edges.begin(), edges.end(), c.values[i]) - edges.begin());
    return cells;
}

double entropy_bits(const std::vector<long long>& counts, long long total) {
    if (total <= 0) return 0.0;
    double h = 0.0;
    for (const long long c : counts) {
        if (c <= 0) continue;
        const double p = static_cast<double>(c) / static_cast<double>(total);
        h -= p * std::log2(p);
    }
    return h;
}

std::vector<int> target_labels(const Dataset& ds, Target t) {
    std::vector<int> out(ds.size());
    for (std::size_t i = 0; i < ds.size(); ++i) {
        const auto id = static_cast<RecordId>(i);
        out[i] = t == Target::Group ? static_cast<int>(ds.group(id)) : static_cast<int>(ds.decision(id));
    }
    return out;
}

struct IgParts {
    double ig = 0.0;
    double h_attr = 0.0;
    double h_target = 0.0;
};

IgParts ig_parts(const std::vector<int>& cells, const std::vector<int>& labels) {
    const long long n = static_cast<long long>(cells.size());
    const int ncells = cells.empty() ? 0 : *std::max_element(cells.begin(), cells.end()) + 1;
    std::vector<long long> cell_counts(static_cast<std::size_t>(ncells), 0);
    std::vector<long long> label_counts(2, 0);
    std::vector<long long> joint(static_cast<std::size_t>(ncells) * 2, 0);
    for (std::size_t i = 0; i < cells.size(); ++i) {
        ++cell_counts[static_cast<std::size_t>(cells[i])];
        ++label_counts[static_cast<std::size_t>(labels[i])];
        ++joint[static_cast<std::size_t>(cells[i]) * 2 + static_cast<std::size_t>(labels[i])];
    }
    IgParts out;
    out.h_attr = entropy_bits(cell_counts, n);
    out.h_target = entropy_bits(label_counts, n);
    double cond = 0.0;
    for (int x = 0; x < ncells; ++x) {
        const long long nx = cell_counts[static_cast<std::size_t>(x)];
        if (nx == 0) continue;
        const std::vector<long long> row{joint[static_cast<std::size_t>(x) * 2],
                                         joint[static_cast<std::size_t>(x) * 2 + 1]};
        cond += static_cast<double>(nx) / static_cast<double>(n) * entropy_bits(row, nx);
    }
    out.ig = out.h_target - cond;
    if (out.ig < 0.0) out.ig = 0.0; // clamp float noise on independent attrs
    return out;
}

IgParts ig_of(const Dataset& ds, const Column& col, Target target, int bins) {
    return ig_parts(discretize(col, bins), target_labels(ds, target));
}

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

double softplus(double t) {
    return t > 0.0 ? t + std::log1p(std::exp(-t)) : std::log1p(std::exp(t));
}

struct ResolvedFeature {
    BasisFeature::Kind kind;
    int col = -1;
    std::int32_t code = -1;
    double threshold = 0.0;
};

std::vector<ResolvedFeature> resolve_basis(const LogisticModel& model, const Dataset& ds) {
    std::vector<ResolvedFeature> out;
    out.reserve(model.basis.size());
    for (const auto& f : model.basis) {
        ResolvedFeature rf;
        rf.kind = f.kind;
        rf.threshold = f.threshold;
        if (f.kind != BasisFeature::Kind::Intercept) {
            rf.col = ds.column_index(f.attr);
            if (rf.col < 0) fail("model attribute '" + f.attr + "' missing from dataset");
            const Column& c = ds.columns()[static_cast<std::size_t>(rf.col)];
            if (f.kind == BasisFeature::Kind::LevelIndicator) {
                if (c.is_numeric()) fail("model attribute '" + f.attr + "' is numeric, expected categorical");
                rf.code = c.level_code(f.level); // -1: unseen level, indicator never fires
            } else if (!c.is_numeric()) {
                fail("model attribute '" + f.attr + "' is categorical, expected numeric");
            }
        }
        out.push_back(rf);
    }
    return out;
}

double eval_feature(const Dataset& ds, const ResolvedFeature& rf, RecordId id) {
    switch (rf.kind) {
    case BasisFeature::Kind::Intercept:
        return 1.0;
    case BasisFeature::Kind::LevelIndicator: {
        const Column& c = ds.columns()[static_cast<std::size_t>(rf.col)];
        return c.codes[static_cast<std::size_t>(id)] == rf.code ? 1.0 : 0.0;
    }
    case BasisFeature::Kind::NumericValue:
        return ds.columns()[static_cast<std::size_t>(rf.col)].values[static_cast<std::size_t>(id)];
    case BasisFeature::Kind::NumericAboveThreshold:
        return ds.columns()[static_cast<std::size_t>(rf.col)].values[static_cast<std::size_t>(id)] >= rf.threshold
                   ? 1.0
                   : 0.0;
    }
    fail("unknown basis feature kind");
}

double clip(double v, double eps) { return std::min(std::max(v, eps), 1.0 - eps); }

const char* kind_name(BasisFeature::Kind k) {
    switch (k) {
    case BasisFeature::Kind::Intercept: return "intercept";
    case BasisFeature::Kind::LevelIndicator: return "level";
    case BasisFeature::Kind::NumericValue: return "numeric";
    case BasisFeature::Kind::NumericAboveThreshold: return "numeric_above";
    }
    return "?";
}

BasisFeature::Kind kind_of(const std::string& name) {
    if (name == "intercept") return BasisFeature::Kind::Intercept;
    if (name == "level") return BasisFeature::Kind::LevelIndicator;
    if (name == "numeric") return BasisFeature::Kind::NumericValue;
    if (name == "numeric_above") return BasisFeature::Kind::NumericAboveThreshold;
    fail("unknown basis feature kind '" + name + "' in model document");
}

} // namespace

double information_gain(const Dataset& ds, std::string_view attr, Target target, int bins) {
    if (ds.empty()) fail("information gain is undefined on an empty dataset");
    if (bins < 1) fail("bins must be at least 1");
    const Column* col = ds.find_column(attr);
    if (!col) fail("unknown attribute '" + std::string(attr) + "'");
    return ig_of(ds, *col, target, bins).ig;
}

CovariateSelection select_covariates(const Dataset& ds, double proxy_threshold) {
    const auto& cov = ds.covariate_columns();
    if (cov.size() < 2) fail("covariate selection needs at least 2 covariates");
    if (ds.empty()) fail("covariate selection is undefined on an empty dataset");

    CovariateSelection sel;
    std::vector<double> su(cov.size(), 0.0);
    for (std::size_t i = 0; i < cov.size(); ++i) {
        const Column& c = ds.columns()[static_cast<std::size_t>(cov[i])];
        const IgParts g = ig_of(ds, c, Target::Group, 10);
        const IgParts d = ig_of(ds, c, Target::Decision, 10);
        sel.ig_group.emplace_back(c.schema.name, g.ig);
        sel.ig_decision.emplace_back(c.schema.name, d.ig);
        const double denom = g.h_attr + g.h_target;
        su[i] = denom > 0.0 ? 2.0 * g.ig / denom : 0.0;
    }

    // top-50% cutoff with ties included: keep everything at or above the
    // ceil(C/2)-th largest gain
    const auto cutoff_value = [&](const std::vector<std::pair<std::string, double>>& igs) {
        std::vector<double> v;
        v.reserve(igs.size());
        for (const auto& [_, ig] : igs) v.push_back(ig);
        std::sort(v.begin(), v.end(), std::greater<>());
        const std::size_t keep = (v.size() + 1) / 2;
        return v[keep - 1];
    };
    const double thr_g = cutoff_value(sel.ig_group);
    const double thr_d = cutoff_value(sel.ig_decision);

    for (std::size_t i = 0; i < cov.size(); ++i) {
        if (sel.ig_group[i].second < thr_g || sel.ig_decision[i].second < thr_d) continue;
        if (su[i] > proxy_threshold)
            sel.dropped_proxies.push_back({sel.ig_group[i].first, su[i]});
        else
            sel.selected.push_back(sel.ig_group[i].first);
    }
    if (sel.selected.empty())
        fail("covariate selection is empty; review the gains and configure a manual selection override");
    return sel;
}

std::vector<BasisFeature> build_basis(const Dataset& ds, const std::vector<std::string>& selected,
                                      bool binarize_numeric) {
    std::vector<BasisFeature> basis;
    basis.push_back(BasisFeature{BasisFeature::Kind::Intercept, "", "", 0.0});
    for (const auto& name : selected) {
        const Column* c = ds.find_column(name);
        if (!c) fail("selected attribute '" + name + "' missing from dataset");
        if (c->is_numeric()) {
            if (binarize_numeric) {
                std::vector<double> sorted = c->values;
                std::sort(sorted.begin(), sorted.end());
                const std::size_t n = sorted.size();
                const double median = n == 0 ? 0.0
                                     : n % 2 ? sorted[n / 2]
                                             : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
                basis.push_back(BasisFeature{BasisFeature::Kind::NumericAboveThreshold, name, "", median});
            } else {
                basis.push_back(BasisFeature{BasisFeature::Kind::NumericValue, name, "", 0.0});
            }
        } else {
            // reference level: most frequent, first-seen on ties
            std::vector<long long> counts(c->levels.size(), 0);
            for (const auto code : c->codes) ++counts[static_cast<std::size_t>(code)];
            const std::size_t ref = static_cast<std::size_t>(
                std::max_element(counts.begin(), counts.end()) - counts.begin());
            for (std::size_t l = 0; l < c->levels.size(); ++l)
                if (l != ref)
                    basis.push_back(BasisFeature{BasisFeature::Kind::LevelIndicator, name, c->levels[l], 0.0});
        }
    }
    return basis;
}

double logistic_log_likelihood(std::span<const double> X, std::span<const double> y,
                               std::span<const double> beta, double l2) {
    const std::size_t d = beta.size();
    if (d == 0 || y.empty() || X.size() != y.size() * d)
        fail("design matrix shape mismatch");
    double ll = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        double z = 0.0;
        for (std::size_t j = 0; j < d; ++j) z += beta[j] * X[i * d + j];
        ll -= y[i] > 0.5 ? softplus(-z) : softplus(z);
    }
    for (std::size_t j = 1; j < d; ++j) ll -= 0.5 * l2 * beta[j] * beta[j];
    return ll;
}

std::vector<double> logistic_gradient(std::span<const double> X, std::span<const double> y,
                                      std::span<const double> beta, double l2) {
    const std::size_t d = beta.size();
    if (d == 0 || y.empty() || X.size() != y.size() * d)
        fail("design matrix shape mismatch");
    std::vector<double> grad(d, 0.0);
    for (std::size_t i = 0; i < y.size(); ++i) {
        double z = 0.0;
        for (std::size_t j = 0; j < d; ++j) z += beta[j] * X[i * d + j];
        const double resid = y[i] - sigmoid(z);
        for (std::size_t j = 0; j < d; ++j) grad[j] += resid * X[i * d + j];
    }
    for (std::size_t j = 1; j < d; ++j) grad[j] -= l2 * beta[j];
    return grad;
}

LogisticModel fit_propensity(const Dataset& ds, const CovariateSelection& selection,
                             const FitOptions& opts) {
    if (ds.empty()) fail("cannot fit on an empty dataset");
    if (selection.selected.empty()) fail("cannot fit with an empty covariate selection");
    if (!(opts.clip_epsilon > 0.0 && opts.clip_epsilon < 0.5)) fail("clip epsilon must lie in (0, 0.5)");
    bool has_p = false, has_u = false;
    for (std::size_t i = 0; i < ds.size(); ++i)
        (ds.group(static_cast<RecordId>(i)) == Group::Protected ? has_p : has_u) = true;
    if (!has_p || !has_u) fail("cannot fit a propensity model on a single-group dataset");

    LogisticModel model;
    model.clip_epsilon = opts.clip_epsilon;
    model.basis = build_basis(ds, selection.selected, opts.binarize_numeric);
    const std::size_t d = model.basis.size();
    const std::size_t n = ds.size();
    model.beta.assign(d, 0.0);

    const auto resolved = resolve_basis(model, ds);
    std::vector<double> X(n * d);
    std::vector<double> y(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto id = static_cast<RecordId>(i);
        y[i] = ds.group(id) == Group::Protected ? 1.0 : 0.0;
        for (std::size_t j = 0; j < d; ++j) X[i * d + j] = eval_feature(ds, resolved[j], id);
    }

    const auto penalized_ll = [&](const std::vector<double>& beta) {
        return logistic_log_likelihood(X, y, beta, opts.l2);
    };

    double ll = penalized_ll(model.beta);
    std::vector<double> trial(d);
    for (int iter = 0; iter < opts.max_iters; ++iter) {
        const std::vector<double> grad = logistic_gradient(X, y, model.beta, opts.l2);

        double gmax = 0.0, gsq = 0.0;
        for (const double g : grad) {
            gmax = std::max(gmax, std::abs(g));
            gsq += g * g;
        }
        if (gmax < opts.tol) {
            model.training_meta.converged = true;
            break;
        }

        // backtracking line search on the ascent direction (Armijo, c = 1e-4)
        double step = 1.0;
        bool accepted = false;
        while (step >= 1e-12) {
            for (std::size_t j = 0; j < d; ++j) trial[j] = model.beta[j] + step * grad[j];
            const double trial_ll = penalized_ll(trial);
            if (!std::isfinite(trial_ll)) fail("non-finite likelihood during fitting (diverging step)");
            if (trial_ll >= ll + 1e-4 * step * gsq) {
                model.beta = trial;
                ll = trial_ll;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) break; // step underflow: no representable improvement remains
        ++model.training_meta.iterations;
        model.training_meta.ll_history.push_back(ll);
    }
    model.training_meta.final_log_likelihood = ll;
    return model;
}

double propensity_score(const LogisticModel& model, const Dataset& ds, RecordId id) {
    if (id < 0 || static_cast<std::size_t>(id) >= ds.size())
        fail("record id " + std::to_string(id) + " out of range");
    const auto resolved = resolve_basis(model, ds);
    double z = 0.0;
    for (std::size_t j = 0; j < resolved.size(); ++j)
        z += model.beta[j] * eval_feature(ds, resolved[j], id);
    return clip(sigmoid(z), model.clip_epsilon);
}

std::vector<double> propensity_scores(const LogisticModel& model, const Dataset& ds) {
    const auto resolved = resolve_basis(model, ds);
    std::vector<double> out(ds.size());
    for (std::size_t i = 0; i < ds.size(); ++i) {
        double z = 0.0;
        for (std::size_t j = 0; j < resolved.size(); ++j)
            z += model.beta[j] * eval_feature(ds, resolved[j], static_cast<RecordId>(i));
        out[i] = clip(sigmoid(z), model.clip_epsilon);
    }
    return out;
}

double weight_of(double e) {
    if (!(e > 0.0 && e < 1.0)) fail("propensity score outside (0, 1); clipping was bypassed");
    return e / (1.0 - e);
}

std::vector<double> propensity_weights(const LogisticModel& model, const Dataset& ds) {
    std::vector<double> w = propensity_scores(model, ds);
    for (double& e : w) e = weight_of(e);
    return w;
}

void write_selection_report(const CovariateSelection& sel, std::ostream& out, char delim) {
    out << "attr" << delim << "ig_group" << delim << "ig_decision" << delim << "status\n";
    const auto status_of = [&](const std::string& name) -> std::string {
        for (const auto& s : sel.selected)
            if (s == name) return "selected";
        for (const auto& p : sel.dropped_proxies)
            if (p.name == name) return "dropped_proxy";
        return "below_cutoff";
    };
    for (std::size_t i = 0; i < sel.ig_group.size(); ++i) {
        out << sel.ig_group[i].first << delim << format_double(sel.ig_group[i].second) << delim
            << format_double(sel.ig_decision[i].second) << delim << status_of(sel.ig_group[i].first)
            << '\n';
    }
}

std::string model_to_json(const LogisticModel& model) {
    ordered_json doc;
    doc["clip_epsilon"] = model.clip_epsilon;
    doc["basis"] = ordered_json::array();
    for (const auto& f : model.basis) {
        ordered_json jf;
        jf["kind"] = kind_name(f.kind);
        if (f.kind != BasisFeature::Kind::Intercept) jf["attr"] = f.attr;
        if (f.kind == BasisFeature::Kind::LevelIndicator) jf["level"] = f.level;
        if (f.kind == BasisFeature::Kind::NumericAboveThreshold) jf["threshold"] = f.threshold;
        doc["basis"].push_back(std::move(jf));
    }
    doc["beta"] = model.beta;
    doc["training"] = {{"iterations", model.training_meta.iterations},
                       {"final_log_likelihood", model.training_meta.final_log_likelihood},
                       {"converged", model.training_meta.converged}};
    return doc.dump(2) + "\n";
}

LogisticModel model_from_json(const std::string& text) {
    ordered_json doc;
    try {
        doc = ordered_json::parse(text);
    } catch (const std::exception& e) {
        fail(std::string("model document is not valid JSON: ") + e.what());
    }
    try {
        LogisticModel model;
        model.clip_epsilon = doc.at("clip_epsilon").get<double>();
        for (const auto& jf : doc.at("basis")) {
            BasisFeature f;
            f.kind = kind_of(jf.at("kind").get<std::string>());
            if (f.kind != BasisFeature::Kind::Intercept) f.attr = jf.at("attr").get<std::string>();
            if (f.kind == BasisFeature::Kind::LevelIndicator) f.level = jf.at("level").get<std::string>();
            if (f.kind == BasisFeature::Kind::NumericAboveThreshold)
                f.threshold = jf.at("threshold").get<double>();
            model.basis.push_back(std::move(f));
        }
        model.beta = doc.at("beta").get<std::vector<double>>();
        if (doc.contains("training")) {
            const auto& t = doc["training"];
            model.training_meta.iterations = t.value("iterations", 0);
            model.training_meta.final_log_likelihood = t.value("final_log_likelihood", 0.0);
            model.training_meta.converged = t.value("converged", false);
        }
        if (model.beta.size() != model.basis.size())
            fail("model document beta length does not match the basis");
        if (!(model.clip_epsilon > 0.0 && model.clip_epsilon < 0.5))
            fail("model clip epsilon must lie in (0, 0.5)");
        if (model.basis.empty() || model.basis.front().kind != BasisFeature::Kind::Intercept)
            fail("model basis must start with the intercept");
        return model;
    } catch (const Error&) {
        throw;
    } catch (const std::exception& e) {
        fail(std::string("malformed model document: ") + e.what());
    }
}

} // namespace cdd
