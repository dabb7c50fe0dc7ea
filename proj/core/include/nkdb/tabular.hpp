#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace nkdb {

using Cell = std::optional<std::string>;

/// Untyped table as read from disk. A missing cell is std::nullopt.
struct RawTable {
    std::vector<std::string> column_names;
    std::vector<std::vector<Cell>> cells;  // row-major, every row has column_names.size() cells
    std::size_t label_column = 0;  // num_columns() when unlabeled

    std::size_t num_rows() const { return cells.size(); }
    std::size_t num_columns() const { return column_names.size(); }
    std::optional<std::size_t> find_column(std::string_view name) const;

    /// Rows selected by index, in the given order.
    RawTable subset(std::span<const std::size_t> rows) const;
};

/// Reads a comma-separated file with a header row. Quoted fields follow
/// RFC 4180 (doubled quotes inside quotes). Empty cells and "?" are missing.
/// An empty `label_column` reads an unlabeled table (label_column = num_columns()).
RawTable load_csv(const std::filesystem::path& path, std::string_view label_column);

/// Same as load_csv, reading from a stream. `source` names the stream in diagnostics.
RawTable parse_csv(std::istream& in, std::string_view label_column, std::string_view source = "<stream>");

/// Removes the named columns. The label column cannot be dropped.
RawTable drop_columns(const RawTable& table, std::span<const std::string> names);

struct PreprocessSpec {
    int num_bins = 5;
    double numeric_threshold = 0.95;  // fraction of parseable cells that makes a column numeric
    std::vector<std::string> dropped_columns;

    void validate() const;
};

/// Per-column mode fill. Ties go to the lexicographically smallest token;
/// a column with no present cell is filled with "NA".
class Imputer {
public:
    static Imputer fit(const RawTable& table);
    RawTable apply(const RawTable& table) const;

    const std::vector<std::string>& fill_values() const { return fill_; }

private:
    std::vector<std::string> fill_;
};

RawTable impute_missing(const RawTable& table);

/// Equal-frequency bin edges for one numeric column.
struct NumericBins {
    std::vector<double> cuts;  // ascending, size = bins - 1; x goes to the number of cuts strictly below it

    std::string label_for(double value) const;
};

/// Fitted discretization: which columns are numeric and where their bin
/// edges lie. Fitting on one table and applying to another keeps test
/// data out of the bin boundaries.
class Discretizer {
public:
    static Discretizer fit(const RawTable& table, const PreprocessSpec& spec);

    /// Maps numeric cells to "bin<j>" tokens. Cells that do not parse as a
    /// number are kept verbatim; missing cells stay missing.
    RawTable apply(const RawTable& table) const;

    /// Discretizes a single token of the named column (non-numeric columns pass through).
    std::string apply_token(std::string_view column, const std::string& token) const;

    /// Column name -> bins, for the numeric columns only.
    const std::map<std::string, NumericBins>& numeric_columns() const { return columns_; }

    static Discretizer from_columns(std::map<std::string, NumericBins> columns);

private:
    std::map<std::string, NumericBins> columns_;
};

RawTable discretize(const RawTable& table, const PreprocessSpec& spec);

/// Parses a whole token as a finite double.
std::optional<double> parse_number(std::string_view token);

/// Sorted alphabet of tokens with index lookup.
class Alphabet {
public:
    Alphabet() = default;
    /// Distinct tokens in lexicographic order.
    explicit Alphabet(std::vector<std::string> tokens);

    std::size_t size() const { return tokens_.size(); }
    const std::string& token(std::size_t index) const { return tokens_.at(index); }
    const std::vector<std::string>& tokens() const { return tokens_; }
    std::optional<std::uint32_t> find(std::string_view token) const;

    friend bool operator==(const Alphabet& a, const Alphabet& b) { return a.tokens_ == b.tokens_; }

private:
    std::vector<std::string> tokens_;
    std::map<std::string, std::uint32_t, std::less<>> index_;
};

/// Value dictionaries of an encoded dataset.
struct Schema {
    std::vector<std::string> feature_names;
    std::string label_name;
    std::vector<Alphabet> features;
    Alphabet labels;

    std::size_t num_features() const { return features.size(); }
    /// Average feature alphabet size (1/m) * sum |A_i|.
    double avg_alphabet_size() const;
};

/// Encoded value used for a token outside the training alphabet.
inline constexpr std::uint32_t kUnknownValue = UINT32_MAX;

/// Integer-encoded discrete dataset.
class Dataset {
public:
    Dataset(Schema schema, std::vector<std::uint32_t> features, std::vector<std::uint32_t> labels);

    const Schema& schema() const { return schema_; }
    std::size_t num_rows() const { return labels_.size(); }
    std::size_t num_features() const { return schema_.num_features(); }
    std::size_t num_classes() const { return schema_.labels.size(); }
    std::size_t alphabet_size(std::size_t feature) const { return schema_.features[feature].size(); }

    std::span<const std::uint32_t> row(std::size_t r) const {
        return {features_.data() + r * num_features(), num_features()};
    }
    std::uint32_t value(std::size_t r, std::size_t feature) const { return features_[r * num_features() + feature]; }
    std::uint32_t label(std::size_t r) const { return labels_[r]; }
    std::span<const std::uint32_t> labels() const { return labels_; }

    /// Rows by index, keeping this dataset's schema.
    Dataset subset(std::span<const std::size_t> rows) const;

    /// Decodes back to a fully discrete RawTable (label column last).
    RawTable decode() const;

private:
    Schema schema_;
    std::vector<std::uint32_t> features_;  // row-major n x m
    std::vector<std::uint32_t> labels_;
};

/// Encodes a fully discrete table. Alphabets are the lexicographically
/// sorted distinct tokens of each column.
Dataset encode(const RawTable& table);

/// Encodes a feature row against an existing schema. Tokens outside the
/// alphabet (and missing cells) become kUnknownValue.
std::vector<std::uint32_t> encode_row(const Schema& schema, std::span<const Cell> feature_tokens);

/// Full pipeline on one table: drop columns, impute, discretize, encode.
Dataset prepare(const RawTable& table, const PreprocessSpec& spec);

}  // namespace nkdb
