#pragma once

#include "nkdb/classifiers.hpp"
#include "nkdb/tabular.hpp"

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

namespace nkdb {

struct SplitSpec {
    std::size_t repeats = 5;
    double test_fraction = 0.3;
    std::uint64_t seed = kDefaultSeed;
    bool stratified = true;

    void validate() const;
};

struct Partition {
    std::vector<std::size_t> train;  // ascending row indices
    std::vector<std::size_t> test;
};

/// Deterministic train/test partition for (spec.seed, repeat). Stratified
/// partitions take round(n * test_fraction) test rows, distributed over the
/// classes by largest remainder, and always leave at least one training row
/// per class.
Partition make_partition(std::span<const std::string> labels, const SplitSpec& spec, std::size_t repeat);

std::pair<RawTable, RawTable> split(const RawTable& table, const SplitSpec& spec, std::size_t repeat);

/// Encoded split. The training part is re-encoded so its alphabets come from
/// the training rows only; the test part keeps the source schema.
std::pair<Dataset, Dataset> split(const Dataset& data, const SplitSpec& spec, std::size_t repeat);

struct ClassifierSpec {
    ClassifierKind kind = ClassifierKind::NeuralKdb;
    std::size_t k = 2;
    TrainConfig config;

    /// "kdb:2", "neural_kdb:2", "nb", ...
    std::string name() const;
};

/// Parses "nb,kdb:2,neuralkdb:2" style lists. Entries without ":k" get `default_k`.
std::vector<ClassifierSpec> parse_classifier_list(std::string_view text, std::size_t default_k,
                                                  const TrainConfig& config);

struct AccuracyRecord {
    std::size_t entry = 0;  // index into EvalReport::classifiers
    std::size_t repeat = 0;
    double accuracy = 0.0;
    std::size_t correct = 0;
    std::size_t total = 0;
};

struct AggregateRow {
    std::size_t entry = 0;
    double mean = 0.0;
    double stddev = 0.0;  // sample standard deviation, 0 for a single repeat
};

struct EvalReport {
    std::string dataset;
    PreprocessSpec preprocess;
    SplitSpec split;
    std::vector<ClassifierSpec> classifiers;
    std::vector<std::string> sweep_values;  // per entry; empty outside sweeps
    std::string sweep_parameter;
    std::vector<AccuracyRecord> records;    // ordered by (entry, repeat)

    std::vector<AggregateRow> aggregates() const;

    /// dataset,classifier,k,repeat,accuracy (sweeps add param,value columns).
    void write_csv(std::ostream& out) const;
    /// Aggregates plus metadata as a JSON document.
    std::string aggregate_json() const;
};

/// Repeated holdout: for each repeat, preprocessing is fitted on the training
/// rows only, every classifier is fitted on them and scored on the test rows.
/// `table` must already have dropped columns removed.
EvalReport evaluate(const RawTable& table, const std::vector<ClassifierSpec>& classifiers, const SplitSpec& spec,
                    const PreprocessSpec& preprocess, const std::string& dataset_name = "");

enum class SweepParameter { K, Dim, Batch, Epochs };

SweepParameter parse_sweep_parameter(std::string_view name);
std::string_view to_string(SweepParameter p);

/// One evaluate() pass per value of `parameter`, all other settings taken from `base`.
EvalReport sweep(const RawTable& table, const ClassifierSpec& base, SweepParameter parameter,
                 const std::vector<std::size_t>& values, const SplitSpec& spec, const PreprocessSpec& preprocess,
                 const std::string& dataset_name = "");

/// Accuracy of a fitted model on raw rows; test labels outside the model's
/// label alphabet count as misses.
AccuracyRecord score(const TrainedModel& model, const RawTable& test);

/// Mean and sample standard deviation.
std::pair<double, double> mean_and_stddev(std::span<const double> values);

}  // namespace nkdb
