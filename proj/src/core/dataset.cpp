#include "core/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <unordered_map>
#include <utility>

namespace cdd {
namespace {

[[noreturn]] void fail(std::string msg) { throw Error(std::move(msg), "dataset"); }

bool contains(const std::vector<std::string>& v, std::string_view t) {
    return std::find(v.begin(), v.end(), t) != v.end();
}

std::string cell_pos(int line, int field, std::string_view attr) {
    return "line " + std::to_string(line) + ", column " + std::to_string(field + 1) +
           " ('" + std::string(attr) + "')";
}

} // namespace

bool PositiveRule::holds(double v) const {
    switch (op) {
    case Op::Lt: return v < threshold;
    case Op::Le: return v <= threshold;
    case Op::Gt: return v > threshold;
    case Op::Ge: return v >= threshold;
    case Op::None: break;
    }
    fail("positive decision rule has no numeric operator");
}

bool PositiveRule::holds(std::string_view token) const {
    for (const auto& t : tokens)
        if (t == token) return true;
    return false;
}

const AttributeSchema* DatasetSpec::find(std::string_view name) const {
    for (const auto& a : attributes)
        if (a.name == name) return &a;
    return nullptr;
}

void DatasetSpec::validate() const {
    if (attributes.empty()) fail("schema declares no attributes");
    for (std::size_t i = 0; i < attributes.size(); ++i) {
        const auto& a = attributes[i];
        if (a.name.empty()) fail("attribute " + std::to_string(i + 1) + " has an empty name");
        for (std::size_t j = i + 1; j < attributes.size(); ++j)
            if (attributes[j].name == a.name) fail("duplicate attribute name '" + a.name + "'");
    }
    if (delimiter == '\n' || delimiter == '\r' || delimiter == '\0')
        fail("delimiter must be a printable character");

    if (group_attribute.empty()) fail("no group attribute configured");
    const AttributeSchema* g = find(group_attribute);
    if (!g) fail("group attribute '" + group_attribute + "' not in schema");
    if (g->kind != AttrKind::Categorical) fail("group attribute '" + group_attribute + "' must be categorical");
    if (protected_value.empty()) fail("no protected group value configured");
    if (contains(unprotected_values, protected_value))
        fail("protected value '" + protected_value + "' also listed as unprotected");

    if (decision_attribute.empty()) fail("no decision attribute configured");
    const AttributeSchema* d = find(decision_attribute);
    if (!d) fail("decision attribute '" + decision_attribute + "' not in schema");
    if (decision_attribute == group_attribute) fail("group and decision attributes must differ");
    if (d->kind == AttrKind::Numeric) {
        if (!positive.is_numeric_rule())
            fail("numeric decision attribute '" + decision_attribute + "' needs a threshold rule");
    } else {
        if (positive.is_numeric_rule())
            fail("categorical decision attribute '" + decision_attribute + "' cannot use a threshold rule");
        if (positive.tokens.empty()) fail("no positive decision value configured");
        for (const auto& t : positive.tokens)
            if (contains(negative_values, t)) fail("decision value '" + t + "' listed as both positive and negative");
    }

    for (const auto& a : attributes) {
        if (a.role == AttrRole::Group && a.name != group_attribute)
            fail("attribute '" + a.name + "' declares role group but '" + group_attribute + "' is configured");
        if (a.role == AttrRole::Decision && a.name != decision_attribute)
            fail("attribute '" + a.name + "' declares role decision but '" + decision_attribute + "' is configured");
    }
}

std::int32_t Column::level_code(std::string_view token) const {
    for (std::size_t i = 0; i < levels.size(); ++i)
        if (levels[i] == token) return static_cast<std::int32_t>(i);
    return -1;
}

int Dataset::column_index(std::string_view name) const {
    for (std::size_t i = 0; i < columns_.size(); ++i)
        if (columns_[i].schema.name == name) return static_cast<int>(i);
    return -1;
}

const Column* Dataset::find_column(std::string_view name) const {
    const int i = column_index(name);
    return i < 0 ? nullptr : &columns_[static_cast<std::size_t>(i)];
}

int Dataset::require_column(std::string_view name) const {
    const int i = column_index(name);
    if (i < 0) fail("unknown attribute '" + std::string(name) + "'");
    return i;
}

void Dataset::rebuild_covariate_index() {
    covariate_cols_.clear();
    for (std::size_t i = 0; i < columns_.size(); ++i)
        if (columns_[i].schema.role == AttrRole::Covariate)
            covariate_cols_.push_back(static_cast<int>(i));
}

Dataset load_dataset(std::istream& in, const DatasetSpec& spec) {
    spec.validate();

    std::string line;
    if (!std::getline(in, line)) fail("empty input: missing header row");

    const auto header = split(line, spec.delimiter);
    std::unordered_map<std::string, int> seen;
    for (std::size_t j = 0; j < header.size(); ++j) {
        std::string name(trim(header[j]));
        if (name.empty()) fail("empty header name (column " + std::to_string(j + 1) + ")");
        if (!seen.emplace(name, static_cast<int>(j)).second)
            fail("duplicate header column '" + name + "' (column " + std::to_string(j + 1) + ")");
    }

    // one stored column per non-ignored header field, in header order
    struct Bound {
        AttributeSchema schema; // role resolved against the configured group/decision names
        int field = -1;
    };
    std::vector<Bound> bound;
    for (std::size_t j = 0; j < header.size(); ++j) {
        const std::string name(trim(header[j]));
        const AttributeSchema* a = spec.find(name);
        if (!a) {
            if (spec.ignore_unlisted) continue;
            fail("unlisted header column '" + name + "' (column " + std::to_string(j + 1) + ")");
        }
        AttributeSchema s = *a;
        if (s.name == spec.group_attribute) s.role = AttrRole::Group;
        else if (s.name == spec.decision_attribute) s.role = AttrRole::Decision;
        if (s.role == AttrRole::Ignore) continue;
        bound.push_back(Bound{std::move(s), static_cast<int>(j)});
    }
    for (const auto& a : spec.attributes) {
        if (a.role == AttrRole::Ignore && a.name != spec.group_attribute && a.name != spec.decision_attribute)
            continue;
        if (!seen.count(a.name)) fail("missing column '" + a.name + "'");
    }

    Dataset ds;
    ds.delimiter_ = spec.delimiter;
    ds.group_attr_ = spec.group_attribute;
    ds.decision_attr_ = spec.decision_attribute;
    ds.columns_.resize(bound.size());
    int group_col = -1, decision_col = -1;
    std::vector<std::unordered_map<std::string, std::int32_t>> level_maps(bound.size());
    for (std::size_t i = 0; i < bound.size(); ++i) {
        ds.columns_[i].schema = bound[i].schema;
        if (bound[i].schema.role == AttrRole::Group) group_col = static_cast<int>(i);
        if (bound[i].schema.role == AttrRole::Decision) decision_col = static_cast<int>(i);
    }

    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        const auto fields = split(line, spec.delimiter);
        if (fields.size() != header.size())
            fail("line " + std::to_string(line_no) + ": expected " + std::to_string(header.size()) +
                 " fields, found " + std::to_string(fields.size()));

        for (std::size_t i = 0; i < bound.size(); ++i) {
            Column& col = ds.columns_[i];
            const int f = bound[i].field;
            const std::string_view token = trim(fields[static_cast<std::size_t>(f)]);
            if (token.empty() || contains(spec.missing_values, token))
                fail(cell_pos(line_no, f, col.schema.name) + ": missing value");
            if (col.is_numeric()) {
                double v = 0.0;
                if (!parse_double(token, v))
                    fail(cell_pos(line_no, f, col.schema.name) + ": non-numeric token '" + std::string(token) + "'");
                if (!std::isfinite(v))
                    fail(cell_pos(line_no, f, col.schema.name) + ": non-finite value '" + std::string(token) + "'");
                col.values.push_back(v);
                col.raw.push_back(v);
            } else {
                auto& map = level_maps[i];
                auto it = map.find(std::string(token));
                std::int32_t code;
                if (it == map.end()) {
                    code = static_cast<std::int32_t>(col.levels.size());
                    col.levels.emplace_back(token);
                    map.emplace(std::string(token), code);
                } else {
                    code = it->second;
                }
                col.codes.push_back(code);
            }
        }

        {
            const Column& gc = ds.columns_[static_cast<std::size_t>(group_col)];
            const std::string& token = gc.levels[static_cast<std::size_t>(gc.codes.back())];
            if (token == spec.protected_value) {
                ds.group_.push_back(Group::Protected);
            } else if (!spec.unprotected_values.empty() && !contains(spec.unprotected_values, token)) {
                fail(cell_pos(line_no, bound[static_cast<std::size_t>(group_col)].field, gc.schema.name) +
                     ": unknown group level '" + token + "'");
            } else {
                ds.group_.push_back(Group::Unprotected);
            }
        }
        {
            const Column& dc = ds.columns_[static_cast<std::size_t>(decision_col)];
            if (dc.is_numeric()) {
                ds.decision_.push_back(spec.positive.holds(dc.raw.back()) ? Decision::Positive : Decision::Negative);
            } else {
                const std::string& token = dc.levels[static_cast<std::size_t>(dc.codes.back())];
                if (spec.positive.holds(token)) {
                    ds.decision_.push_back(Decision::Positive);
                } else if (!spec.negative_values.empty() && !contains(spec.negative_values, token)) {
                    fail(cell_pos(line_no, bound[static_cast<std::size_t>(decision_col)].field, dc.schema.name) +
                         ": unknown decision level '" + token + "'");
                } else {
                    ds.decision_.push_back(Decision::Negative);
                    if (ds.negative_token_.empty()) ds.negative_token_ = token;
                }
            }
        }
    }

    if (!spec.negative_values.empty()) ds.negative_token_ = spec.negative_values.front();
    ds.rebuild_covariate_index();
    return ds;
}

Dataset load_dataset_file(const std::filesystem::path& path, const DatasetSpec& spec) {
    std::ifstream in(path);
    if (!in) fail("cannot open dataset file '" + path.string() + "'");
    return load_dataset(in, spec);
}

Dataset binarize_decision(const Dataset& ds, std::string_view attribute, const PositiveRule& rule) {
    const int src = ds.require_column(attribute);
    const Column& col = ds.columns()[static_cast<std::size_t>(src)];
    if (col.schema.role == AttrRole::Group) fail("cannot binarize the group attribute");
    if (col.is_numeric() && !rule.is_numeric_rule())
        fail("numeric attribute '" + std::string(attribute) + "' needs a threshold rule");
    if (!col.is_numeric() && rule.is_numeric_rule())
        fail("categorical attribute '" + std::string(attribute) + "' cannot use a threshold rule");
    if (!col.is_numeric() && rule.tokens.empty()) fail("no positive decision value given");

    Dataset out = ds;
    if (out.decision_attr_ != attribute) {
        const int old = out.column_index(out.decision_attr_);
        if (old >= 0) out.columns_.erase(out.columns_.begin() + old);
    }
    const int idx = out.require_column(attribute);
    Column& dc = out.columns_[static_cast<std::size_t>(idx)];
    dc.schema.role = AttrRole::Decision;
    out.decision_attr_.assign(attribute);

    const std::size_t n = out.size();
    out.decision_.assign(n, Decision::Negative);
    out.negative_token_.clear();
    for (std::size_t i = 0; i < n; ++i) {
        const bool pos = dc.is_numeric() ? rule.holds(dc.raw[i])
                                         : rule.holds(dc.token_of(static_cast<RecordId>(i)));
        out.decision_[i] = pos ? Decision::Positive : Decision::Negative;
        if (!pos && !dc.is_numeric() && out.negative_token_.empty())
            out.negative_token_ = dc.token_of(static_cast<RecordId>(i));
    }
    out.rebuild_covariate_index();
    return out;
}

Dataset normalize_numeric(const Dataset& ds) {
    if (ds.is_normalized()) return ds;
    Dataset out = ds;
    for (const int ci : out.covariate_cols_) {
        Column& c = out.columns_[static_cast<std::size_t>(ci)];
        if (!c.is_numeric()) continue;
        c.normalized = true;
        if (c.values.empty()) {
            c.norm_min = 0.0;
            c.norm_max = 0.0;
            continue;
        }
        const auto [mn, mx] = std::minmax_element(c.values.begin(), c.values.end());
        c.norm_min = *mn;
        c.norm_max = *mx;
        const double span = c.norm_max - c.norm_min;
        for (double& v : c.values) v = span > 0.0 ? (v - c.norm_min) / span : 0.0;
    }
    out.normalized_ = true;
    return out;
}

std::vector<RecordId> partition_by_group(const Dataset& ds, Group g) {
    std::vector<RecordId> out;
    for (std::size_t i = 0; i < ds.size(); ++i)
        if (ds.group(static_cast<RecordId>(i)) == g) out.push_back(static_cast<RecordId>(i));
    return out;
}

BaseRates base_rates(const Dataset& ds) {
    if (ds.empty()) fail("base rates are undefined on an empty dataset");
    std::size_t neg = 0;
    for (std::size_t i = 0; i < ds.size(); ++i)
        if (ds.decision(static_cast<RecordId>(i)) == Decision::Negative) ++neg;
    const double n = static_cast<double>(ds.size());
    return BaseRates{static_cast<double>(neg) / n, static_cast<double>(ds.size() - neg) / n};
}

Dataset Dataset::with_decisions_flipped(std::span<const RecordId> ids) const {
    Dataset out = *this;
    if (ids.empty()) return out;
    const int di = out.require_column(out.decision_attr_);
    Column& dc = out.columns_[static_cast<std::size_t>(di)];
    if (dc.is_numeric()) fail("decision flips need a categorical decision attribute");
    if (out.negative_token_.empty()) fail("no negative decision token observed or configured");
    std::int32_t code = dc.level_code(out.negative_token_);
    if (code < 0) {
        code = static_cast<std::int32_t>(dc.levels.size());
        dc.levels.push_back(out.negative_token_);
    }
    for (const RecordId id : ids) {
        if (id < 0 || static_cast<std::size_t>(id) >= out.size())
            fail("flip id " + std::to_string(id) + " out of range");
        if (out.decision_[static_cast<std::size_t>(id)] != Decision::Positive)
            fail("flip id " + std::to_string(id) + " is not a positive record");
        out.decision_[static_cast<std::size_t>(id)] = Decision::Negative;
        dc.codes[static_cast<std::size_t>(id)] = code;
    }
    return out;
}

void write_table(const Dataset& ds, std::ostream& out) {
    const char d = ds.delimiter_;
    for (std::size_t i = 0; i < ds.columns_.size(); ++i) {
        if (i) out << d;
        out << ds.columns_[i].schema.name;
    }
    out << '\n';
    for (std::size_t r = 0; r < ds.size(); ++r) {
        for (std::size_t i = 0; i < ds.columns_.size(); ++i) {
            if (i) out << d;
            const Column& c = ds.columns_[i];
            if (c.is_numeric()) out << format_double(c.raw[r]);
            else out << c.token_of(static_cast<RecordId>(r));
        }
        out << '\n';
    }
}

void write_table_file(const Dataset& ds, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail("cannot open output file '" + path.string() + "'");
    write_table(ds, out);
    if (!out.flush()) fail("failed writing '" + path.string() + "'");
}

} // namespace cdd
