#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "core/common.hpp"

namespace cdd {

enum class AttrKind { Numeric, Categorical };
enum class AttrRole { Covariate, Group, Decision, Ignore };

struct AttributeSchema {
    std::string name;
    AttrKind kind = AttrKind::Categorical;
    AttrRole role = AttrRole::Covariate;
};

// Condition mapping a raw attribute value to the positive decision:
// a token set for categorical attributes, an operator against a
// threshold for numeric ones.
struct PositiveRule {
    enum class Op { None, Lt, Le, Gt, Ge };
    std::vector<std::string> tokens;
    Op op = Op::None;
    double threshold = 0.0;

    bool is_numeric_rule() const { return op != Op::None; }
    bool holds(double v) const;
    bool holds(std::string_view token) const;
};

// Everything needed to interpret a delimited table: attribute kinds and
// roles, the protected group value, the positive decision condition.
struct DatasetSpec {
    std::vector<AttributeSchema> attributes;
    std::string group_attribute;
    std::string protected_value;
    std::vector<std::string> unprotected_values; // when non-empty, any other token is rejected
    std::string decision_attribute;
    PositiveRule positive;
    std::vector<std::string> negative_values;    // when non-empty, any other token is rejected
    char delimiter = ',';
    std::vector<std::string> missing_values;     // tokens rejected wherever they appear
    bool ignore_unlisted = false;                // tolerate header columns absent from `attributes`

    void validate() const; // throws Error on an inconsistent spec
    const AttributeSchema* find(std::string_view name) const;
};

struct Column {
    AttributeSchema schema;
    // numeric storage; `values` is what analysis reads (min-max scaled once
    // normalize_numeric ran), `raw` keeps loaded values for thresholds,
    // display and echo
    std::vector<double> values;
    std::vector<double> raw;
    bool normalized = false;
    double norm_min = 0.0;
    double norm_max = 0.0;
    // categorical storage; codes index `levels`, tokens kept verbatim in
    // first-seen order
    std::vector<std::int32_t> codes;
    std::vector<std::string> levels;

    bool is_numeric() const { return schema.kind == AttrKind::Numeric; }
    std::int32_t level_code(std::string_view token) const; // -1 when unseen
    const std::string& token_of(RecordId id) const {
        return levels[static_cast<std::size_t>(codes[static_cast<std::size_t>(id)])];
    }
};

struct BaseRates {
    double p_negative = 0.0;
    double p_positive = 0.0;
};

// Columnar relation; record ids are dense 0..n-1 in row order. Immutable
// after construction (the mutating entry points return new datasets), so
// concurrent reads are safe.
class Dataset {
public:
    Dataset() = default;

    std::size_t size() const { return decision_.size(); }
    bool empty() const { return decision_.empty(); }

    const std::vector<Column>& columns() const { return columns_; }
    int column_index(std::string_view name) const; // -1 when absent
    const Column* find_column(std::string_view name) const;
    const std::vector<int>& covariate_columns() const { return covariate_cols_; }

    Group group(RecordId id) const { return group_[static_cast<std::size_t>(id)]; }
    Decision decision(RecordId id) const { return decision_[static_cast<std::size_t>(id)]; }

    const std::string& group_attribute() const { return group_attr_; }
    const std::string& decision_attribute() const { return decision_attr_; }
    char delimiter() const { return delimiter_; }
    bool is_normalized() const { return normalized_; }

    // Copy with the given records' decisions set to negative. Ids must refer
    // to positive records; the decision column cell is rewritten from the
    // stored negative token so an echoed file reloads consistently. Requires
    // a categorical decision attribute.
    Dataset with_decisions_flipped(std::span<const RecordId> ids) const;

private:
    friend Dataset load_dataset(std::istream&, const DatasetSpec&);
    friend Dataset normalize_numeric(const Dataset&);
    friend Dataset binarize_decision(const Dataset&, std::string_view, const PositiveRule&);
    friend void write_table(const Dataset&, std::ostream&);

    std::vector<Column> columns_;      // header order; ignored columns never stored
    std::vector<int> covariate_cols_;
    std::vector<Group> group_;
    std::vector<Decision> decision_;
    std::string group_attr_;
    std::string decision_attr_;
    std::string negative_token_;       // template for decision flips; may be empty
    char delimiter_ = ',';
    bool normalized_ = false;

    void rebuild_covariate_index();
    int require_column(std::string_view name) const; // throws when absent
};

// Parse a delimited table with a header row. Errors carry 1-based line and
// column positions.
Dataset load_dataset(std::istream& in, const DatasetSpec& spec);
Dataset load_dataset_file(const std::filesystem::path& path, const DatasetSpec& spec);

// Re-derive the binary decision from `attribute` under `rule`; the attribute
// leaves the covariate set and becomes the decision source. The previous
// decision column is dropped.
Dataset binarize_decision(const Dataset& ds, std::string_view attribute, const PositiveRule& rule);

// Min-max scale every numeric covariate to [0,1] using the observed column
// range; constant columns map to 0. Already-normalized input is returned
// unchanged, keeping the recorded ranges.
Dataset normalize_numeric(const Dataset& ds);

std::vector<RecordId> partition_by_group(const Dataset& ds, Group g);

BaseRates base_rates(const Dataset& ds); // throws on an empty dataset

// Echo in the table format: raw values, verbatim categorical tokens, the
// loaded column order. A loaded file echoes byte-identically apart from
// delimiter spacing and numeric formatting.
void write_table(const Dataset& ds, std::ostream& out);
void write_table_file(const Dataset& ds, const std::filesystem::path& path);

} // namespace cdd
