#include "nkdb/tabular.hpp"

#include "nkdb/errors.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>

namespace nkdb {

namespace {

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t");
    return s.substr(first, last - first + 1);
}

Cell make_cell(std::string_view raw, bool quoted) {
    if (quoted) {
        if (raw.empty()) return std::nullopt;
        return std::string(raw);
    }
    const auto t = trim(raw);
    if (t.empty() || t == "?") return std::nullopt;
    return std::string(t);
}

// Reads one CSV record. Returns false at end of input. Quoted fields may
// span lines.
bool read_record(std::istream& in, std::vector<Cell>& out, std::size_t& line_no) {
    out.clear();
    std::string field;
    bool quoted = false;
    bool in_quotes = false;
    bool any = false;
    char ch;
    while (in.get(ch)) {
        any = true;
        if (in_quotes) {
            if (ch == '"') {
                if (in.peek() == '"') {
                    in.get(ch);
                    field.push_back('"');
                } else {
                    in_quotes = false;
                }
            } else {
                if (ch == '\n') ++line_no;
                field.push_back(ch);
            }
            continue;
        }
        if (ch == '"' && trim(field).empty()) {
            field.clear();
            quoted = true;
            in_quotes = true;
        } else if (ch == ',') {
            out.push_back(make_cell(field, quoted));
            field.clear();
            quoted = false;
        } else if (ch == '\n') {
            ++line_no;
            if (!field.empty() && field.back() == '\r') field.pop_back();
            out.push_back(make_cell(field, quoted));
            return true;
        } else if (!quoted) {
            field.push_back(ch);
        }
    }
    if (in_quotes) throw DataError("unterminated quoted field");
    if (!any) return false;
    if (!field.empty() && field.back() == '\r') field.pop_back();
    out.push_back(make_cell(field, quoted));
    ++line_no;
    return true;
}

bool blank_record(const std::vector<Cell>& record) {
    return record.size() == 1 && !record.front().has_value();
}

}  // namespace

std::optional<std::size_t> RawTable::find_column(std::string_view name) const {
    const auto it = std::find(column_names.begin(), column_names.end(), name);
    if (it == column_names.end()) return std::nullopt;
    return static_cast<std::size_t>(it - column_names.begin());
}

RawTable RawTable::subset(std::span<const std::size_t> rows) const {
    RawTable out{column_names, {}, label_column};
    out.cells.reserve(rows.size());
    for (auto r : rows) out.cells.push_back(cells.at(r));
    return out;
}

RawTable parse_csv(std::istream& in, std::string_view label_column, std::string_view source) {
    RawTable table;
    std::vector<Cell> record;
    std::size_t line_no = 0;
    try {
        if (!read_record(in, record, line_no)) throw DataError(std::string(source) + ": empty file, expected a header row");
        for (std::size_t c = 0; c < record.size(); ++c) {
            if (!record[c]) throw DataError(std::string(source) + ": header column " + std::to_string(c + 1) + " is empty");
            table.column_names.push_back(*record[c]);
        }
        std::set<std::string> seen;
        for (const auto& name : table.column_names) {
            if (!seen.insert(name).second) throw DataError(std::string(source) + ": duplicate column '" + name + "'");
        }
        while (read_record(in, record, line_no)) {
            if (blank_record(record) && table.column_names.size() != 1) continue;
            if (record.size() != table.column_names.size()) {
                throw DataError(std::string(source) + ": ragged rows: line " + std::to_string(line_no) + " has " +
                                std::to_string(record.size()) + " fields, header has " +
                                std::to_string(table.column_names.size()));
            }
            table.cells.push_back(record);
        }
    } catch (const DataError& e) {
        const std::string msg = e.what();
        if (msg.rfind(std::string(source), 0) == 0) throw;
        throw DataError(std::string(source) + ": " + msg);
    }
    if (label_column.empty()) {
        table.label_column = table.num_columns();
        return table;
    }
    const auto label = table.find_column(label_column);
    if (!label) throw DataError(std::string(source) + ": label column '" + std::string(label_column) + "' not found");
    table.label_column = *label;
    return table;
}

RawTable load_csv(const std::filesystem::path& path, std::string_view label_column) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError(path.string() + ": cannot open file");
    return parse_csv(in, label_column, path.string());
}

RawTable drop_columns(const RawTable& table, std::span<const std::string> names) {
    std::vector<bool> keep(table.num_columns(), true);
    for (const auto& name : names) {
        const auto c = table.find_column(name);
        if (!c) throw DataError("cannot drop column '" + name + "': not found");
        if (*c == table.label_column) throw DataError("cannot drop the label column '" + name + "'");
        keep[*c] = false;
    }
    RawTable out;
    for (std::size_t c = 0; c < table.num_columns(); ++c) {
        if (!keep[c]) continue;
        if (c == table.label_column) out.label_column = out.column_names.size();
        out.column_names.push_back(table.column_names[c]);
    }
    out.cells.reserve(table.num_rows());
    for (const auto& row : table.cells) {
        std::vector<Cell> kept;
        kept.reserve(out.column_names.size());
        for (std::size_t c = 0; c < row.size(); ++c)
            if (keep[c]) kept.push_back(row[c]);
        out.cells.push_back(std::move(kept));
    }
    return out;
}

void PreprocessSpec::validate() const {
    if (num_bins < 2) throw std::invalid_argument("num_bins must be >= 2");
    if (!(numeric_threshold > 0.0 && numeric_threshold <= 1.0))
        throw std::invalid_argument("numeric_threshold must lie in (0, 1]");
}

// ---- imputation ----

Imputer Imputer::fit(const RawTable& table) {
    Imputer imp;
    imp.fill_.resize(table.num_columns());
    for (std::size_t c = 0; c < table.num_columns(); ++c) {
        std::map<std::string, std::size_t> counts;
        for (const auto& row : table.cells)
            if (row[c]) ++counts[*row[c]];
        if (counts.empty()) {
            imp.fill_[c] = "NA";
            continue;
        }
        // std::map iterates in lexicographic order, so the first maximum wins ties.
        auto best = counts.begin();
        for (auto it = counts.begin(); it != counts.end(); ++it)
            if (it->second > best->second) best = it;
        imp.fill_[c] = best->first;
    }
    return imp;
}

RawTable Imputer::apply(const RawTable& table) const {
    if (table.num_columns() != fill_.size()) throw std::invalid_argument("imputer column count mismatch");
    RawTable out = table;
    for (auto& row : out.cells)
        for (std::size_t c = 0; c < row.size(); ++c)
            if (!row[c]) row[c] = fill_[c];
    return out;
}

RawTable impute_missing(const RawTable& table) { return Imputer::fit(table).apply(table); }

// ---- discretization ----

std::optional<double> parse_number(std::string_view token) {
    if (token.empty()) return std::nullopt;
    double value = 0.0;
    const char* first = token.data();
    const char* last = token.data() + token.size();
    if (*first == '+') ++first;
    const auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc() || ptr != last || !std::isfinite(value)) return std::nullopt;
    return value;
}

std::string NumericBins::label_for(double value) const {
    const auto bin = std::lower_bound(cuts.begin(), cuts.end(), value) - cuts.begin();
    return "bin" + std::to_string(bin);
}

Discretizer Discretizer::fit(const RawTable& table, const PreprocessSpec& spec) {
    spec.validate();
    Discretizer d;
    for (std::size_t c = 0; c < table.num_columns(); ++c) {
        if (c == table.label_column) continue;
        std::vector<double> values;
        std::size_t present = 0;
        for (const auto& row : table.cells) {
            if (!row[c]) continue;
            ++present;
            if (auto v = parse_number(*row[c])) values.push_back(*v);
        }
        if (present == 0 || values.empty()) continue;
        if (static_cast<double>(values.size()) < spec.numeric_threshold * static_cast<double>(present)) continue;

        std::sort(values.begin(), values.end());
        std::vector<double> uniq = values;
        uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
        const std::size_t n = values.size();
        const std::size_t bins = std::min<std::size_t>(static_cast<std::size_t>(spec.num_bins), uniq.size());
        NumericBins nb;
        for (std::size_t j = 1; j < bins; ++j) {
            const std::size_t rank = (j * n + bins - 1) / bins;  // ceil(j n / B)
            nb.cuts.push_back(values[rank - 1]);
        }
        d.columns_.emplace(table.column_names[c], std::move(nb));
    }
    return d;
}

Discretizer Discretizer::from_columns(std::map<std::string, NumericBins> columns) {
    Discretizer d;
    d.columns_ = std::move(columns);
    return d;
}

std::string Discretizer::apply_token(std::string_view column, const std::string& token) const {
    const auto it = columns_.find(std::string(column));
    if (it == columns_.end()) return token;
    if (auto v = parse_number(token)) return it->second.label_for(*v);
    return token;
}

RawTable Discretizer::apply(const RawTable& table) const {
    RawTable out = table;
    for (std::size_t c = 0; c < out.num_columns(); ++c) {
        if (c == out.label_column) continue;
        const auto it = columns_.find(out.column_names[c]);
        if (it == columns_.end()) continue;
        for (auto& row : out.cells) {
            if (!row[c]) continue;
            if (auto v = parse_number(*row[c])) row[c] = it->second.label_for(*v);
        }
    }
    return out;
}

RawTable discretize(const RawTable& table, const PreprocessSpec& spec) {
    return Discretizer::fit(table, spec).apply(table);
}

// ---- encoding ----

Alphabet::Alphabet(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {
    std::sort(tokens_.begin(), tokens_.end());
    tokens_.erase(std::unique(tokens_.begin(), tokens_.end()), tokens_.end());
    for (std::size_t i = 0; i < tokens_.size(); ++i) index_.emplace(tokens_[i], static_cast<std::uint32_t>(i));
}

std::optional<std::uint32_t> Alphabet::find(std::string_view token) const {
    const auto it = index_.find(token);
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

double Schema::avg_alphabet_size() const {
    if (features.empty()) return 0.0;
    std::size_t total = 0;
    for (const auto& a : features) total += a.size();
    return static_cast<double>(total) / static_cast<double>(features.size());
}

Dataset::Dataset(Schema schema, std::vector<std::uint32_t> features, std::vector<std::uint32_t> labels)
    : schema_(std::move(schema)), features_(std::move(features)), labels_(std::move(labels)) {
    const std::size_t m = schema_.num_features();
    if (schema_.feature_names.size() != m) throw std::invalid_argument("schema: feature name count mismatch");
    if (features_.size() != labels_.size() * m) throw std::invalid_argument("dataset: feature matrix size mismatch");
    for (std::size_t i = 0; i < m; ++i)
        if (schema_.features[i].size() == 0) throw std::invalid_argument("dataset: empty feature alphabet");
    for (std::size_t r = 0; r < labels_.size(); ++r) {
        if (labels_[r] >= schema_.labels.size()) throw std::invalid_argument("dataset: label index out of range");
        for (std::size_t i = 0; i < m; ++i)
            if (features_[r * m + i] >= schema_.features[i].size())
                throw std::invalid_argument("dataset: feature index out of range");
    }
}

Dataset Dataset::subset(std::span<const std::size_t> rows) const {
    const std::size_t m = num_features();
    std::vector<std::uint32_t> x;
    std::vector<std::uint32_t> y;
    x.reserve(rows.size() * m);
    y.reserve(rows.size());
    for (auto r : rows) {
        const auto src = row(r);
        x.insert(x.end(), src.begin(), src.end());
        y.push_back(labels_.at(r));
    }
    return Dataset(schema_, std::move(x), std::move(y));
}

RawTable Dataset::decode() const {
    RawTable t;
    t.column_names = schema_.feature_names;
    t.column_names.push_back(schema_.label_name);
    t.label_column = schema_.num_features();
    t.cells.reserve(num_rows());
    for (std::size_t r = 0; r < num_rows(); ++r) {
        std::vector<Cell> cells;
        cells.reserve(num_features() + 1);
        for (std::size_t i = 0; i < num_features(); ++i) cells.emplace_back(schema_.features[i].token(value(r, i)));
        cells.emplace_back(schema_.labels.token(label(r)));
        t.cells.push_back(std::move(cells));
    }
    return t;
}

Dataset encode(const RawTable& table) {
    const std::size_t cols = table.num_columns();
    if (table.label_column >= cols) throw std::invalid_argument("encode: label column out of range");
    std::vector<std::vector<std::string>> tokens(cols);
    for (std::size_t r = 0; r < table.num_rows(); ++r) {
        const auto& row = table.cells[r];
        if (row.size() != cols) throw DataError("encode: row " + std::to_string(r) + " has the wrong arity");
        for (std::size_t c = 0; c < cols; ++c) {
            if (!row[c])
                throw DataError("encode: missing value at row " + std::to_string(r) + ", column '" +
                                table.column_names[c] + "'");
            tokens[c].push_back(*row[c]);
        }
    }
    Schema schema;
    schema.label_name = table.column_names[table.label_column];
    schema.labels = Alphabet(tokens[table.label_column]);
    if (schema.labels.size() < 2)
        throw DataError("label column '" + schema.label_name + "' has fewer than 2 distinct values");
    std::vector<std::size_t> feature_cols;
    for (std::size_t c = 0; c < cols; ++c) {
        if (c == table.label_column) continue;
        feature_cols.push_back(c);
        schema.feature_names.push_back(table.column_names[c]);
        schema.features.emplace_back(tokens[c]);
    }
    if (feature_cols.empty()) throw DataError("table has no feature columns");
    const std::size_t m = feature_cols.size();
    std::vector<std::uint32_t> x(table.num_rows() * m);
    std::vector<std::uint32_t> y(table.num_rows());
    for (std::size_t r = 0; r < table.num_rows(); ++r) {
        for (std::size_t i = 0; i < m; ++i) x[r * m + i] = *schema.features[i].find(*table.cells[r][feature_cols[i]]);
        y[r] = *schema.labels.find(*table.cells[r][table.label_column]);
    }
    return Dataset(std::move(schema), std::move(x), std::move(y));
}

std::vector<std::uint32_t> encode_row(const Schema& schema, std::span<const Cell> feature_tokens) {
    if (feature_tokens.size() != schema.num_features())
        throw DataError("row has " + std::to_string(feature_tokens.size()) + " features, model expects " +
                        std::to_string(schema.num_features()));
    std::vector<std::uint32_t> out(feature_tokens.size(), kUnknownValue);
    for (std::size_t i = 0; i < feature_tokens.size(); ++i) {
        if (!feature_tokens[i]) continue;
        if (auto idx = schema.features[i].find(*feature_tokens[i])) out[i] = *idx;
    }
    return out;
}

Dataset prepare(const RawTable& table, const PreprocessSpec& spec) {
    const RawTable dropped = drop_columns(table, spec.dropped_columns);
    return encode(discretize(impute_missing(dropped), spec));
}

}  // namespace nkdb
