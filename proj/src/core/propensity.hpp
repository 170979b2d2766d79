#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "core/dataset.hpp"

namespace cdd {

enum class Target { Group, Decision };

// H(target) - H(target | attr) in bits, from empirical joint counts. Numeric
// attributes are discretized into `bins` equal-frequency cells first.
double information_gain(const Dataset& ds, std::string_view attr, Target target, int bins = 10);

struct CovariateSelection {
    struct DroppedProxy {
        std::string name;
        double group_association = 0.0; // symmetric uncertainty vs the group
    };
    std::vector<std::string> selected;                    // schema order
    std::vector<DroppedProxy> dropped_proxies;
    std::vector<std::pair<std::string, double>> ig_group;    // every covariate, schema order
    std::vector<std::pair<std::string, double>> ig_decision;
};

// Intersection of the top-50% covariates by IG vs group and by IG vs
// decision (cutoff ties included), minus attributes whose symmetric
// uncertainty with the group exceeds proxy_threshold.
CovariateSelection select_covariates(const Dataset& ds, double proxy_threshold = 0.95);

struct BasisFeature {
    enum class Kind { Intercept, LevelIndicator, NumericValue, NumericAboveThreshold };
    Kind kind = Kind::Intercept;
    std::string attr;
    std::string level;      // LevelIndicator: 1 when the record carries this token
    double threshold = 0.0; // NumericAboveThreshold: 1 when value >= threshold (normalized scale)
};

struct TrainingMeta {
    int iterations = 0;
    double final_log_likelihood = 0.0; // penalized
    bool converged = false;
    std::vector<double> ll_history;    // one entry per accepted ascent step
};

struct FitOptions {
    double l2 = 1e-4;       // no penalty on the intercept
    int max_iters = 1000;
    double tol = 1e-6;      // gradient max-norm
    double clip_epsilon = 0.01;
    bool binarize_numeric = false; // numeric features become at-or-above-median indicators
};

struct LogisticModel {
    std::vector<BasisFeature> basis; // basis[0] is the intercept
    std::vector<double> beta;        // same length as basis
    TrainingMeta training_meta;
    double clip_epsilon = 0.01;
};

// Intercept, then per selected attribute: indicators for every categorical
// level except the most frequent (reference), or the numeric feature.
std::vector<BasisFeature> build_basis(const Dataset& ds, const std::vector<std::string>& selected,
                                      bool binarize_numeric);

// Penalized Bernoulli log-likelihood and its gradient over a dense row-major
// design matrix X (y.size() rows, beta.size() columns). Column 0 is the
// intercept and carries no L2 penalty. These are the exact objective and
// ascent direction used by fit_propensity.
double logistic_log_likelihood(std::span<const double> X, std::span<const double> y,
                               std::span<const double> beta, double l2);
std::vector<double> logistic_gradient(std::span<const double> X, std::span<const double> y,
                                      std::span<const double> beta, double l2);

// Penalized maximum likelihood of group = protected via batch gradient
// ascent with backtracking line search. Deterministic: zero init, no
// stochasticity.
LogisticModel fit_propensity(const Dataset& ds, const CovariateSelection& selection,
                             const FitOptions& opts = {});

// clip(sigmoid(beta . phi(x)), eps, 1-eps); unseen categorical levels
// contribute zero to every indicator.
double propensity_score(const LogisticModel& model, const Dataset& ds, RecordId id);
std::vector<double> propensity_scores(const LogisticModel& model, const Dataset& ds);

// w = e/(1-e); the shared constant K cancels in every weighted rate and is
// dropped.
double weight_of(double e);
std::vector<double> propensity_weights(const LogisticModel& model, const Dataset& ds);

// Table with columns attr, ig_group, ig_decision, status.
void write_selection_report(const CovariateSelection& sel, std::ostream& out, char delim = ',');

std::string model_to_json(const LogisticModel& model);
LogisticModel model_from_json(const std::string& text);

} // namespace cdd
