#pragma once

#include "nkdb/embeddings.hpp"
#include "nkdb/structure.hpp"
#include "nkdb/tabular.hpp"

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace nkdb {

enum class ClassifierKind { NeuralKdb, NeuralNb, Nn, Kdb, Tan, Nb };

/// Canonical name: neural_kdb, neural_nb, nn, kdb, tan, nb.
std::string_view to_string(ClassifierKind kind);
/// Case-insensitive; underscores and hyphens are optional ("NeuralKDB", "neural-kdb").
ClassifierKind parse_classifier_kind(std::string_view name);

/// Generative kinds score P(x, y); nn is the only discriminative one.
bool is_generative(ClassifierKind kind);
/// Kinds trained by gradient descent, governed by TrainConfig.
bool is_neural(ClassifierKind kind);
/// Kinds whose structure depends on the dependence order k.
bool uses_k(ClassifierKind kind);

struct ClassPrior {
    std::vector<double> probs;

    friend bool operator==(const ClassPrior&, const ClassPrior&) = default;
};

/// Class proportions in the training data, unsmoothed.
ClassPrior estimate_prior(const Dataset& data);

/// Count-based conditional tables with add-one smoothing:
/// P(a | pa, y) = (count(a, pa, y) + 1) / (count(pa, y) + |A_i|).
class FrequencyCPT {
public:
    /// Context key: parent values in the structure's parent order, then the label.
    using Context = std::vector<std::uint32_t>;
    using Table = std::map<Context, std::vector<std::uint64_t>>;

    static FrequencyCPT fit(const Dataset& data, const DependenceStructure& structure);
    static FrequencyCPT from_tables(std::vector<std::size_t> alphabet_sizes, std::vector<Table> tables);

    /// Smoothed distribution over the feature's values. Contexts never seen
    /// in training (including unknown parent values) give the uniform vector.
    std::vector<double> distribution(std::size_t feature, std::span<const std::uint32_t> context) const;
    double probability(std::size_t feature, std::uint32_t value, std::span<const std::uint32_t> context) const;

    const std::vector<Table>& tables() const { return tables_; }
    const std::vector<std::size_t>& alphabet_sizes() const { return alphabet_sizes_; }

    friend bool operator==(const FrequencyCPT&, const FrequencyCPT&) = default;

private:
    std::vector<std::size_t> alphabet_sizes_;
    std::vector<Table> tables_;  // per feature
};

/// Discriminative baseline: concatenated value embeddings mapped linearly to class logits.
struct NNHead {
    std::size_t dim = 0;
    std::vector<std::size_t> alphabet_sizes;
    std::size_t num_labels = 0;
    std::vector<double> embeddings;  // per (feature, value) a d-vector, features in index order
    std::vector<double> weights;     // num_labels x (m * dim), row-major
    std::vector<double> bias;        // num_labels

    /// Unknown values contribute a zero block to the concatenation.
    std::vector<double> logits(std::span<const std::uint32_t> row) const;
    std::size_t embedding_offset(std::size_t feature, std::size_t value) const;

    friend bool operator==(const NNHead&, const NNHead&) = default;
};

/// Cross-entropy mini-batch gradient descent over training rows, with the
/// same batching, seeding and step rule as the embedding trainer.
NNHead train_nn_head(const Dataset& data, const TrainConfig& config, std::vector<double>* epoch_mean_loss = nullptr);

using ModelParameters = std::variant<EmbeddingStore, FrequencyCPT, NNHead>;

struct TrainedModel {
    ClassifierKind kind = ClassifierKind::Nb;
    std::size_t k = 0;
    Schema schema;
    Discretizer discretizer;  // applied to raw feature tokens before encoding
    DependenceStructure structure;
    ClassPrior prior;
    ModelParameters params;
    TrainConfig config;
    std::vector<double> training_loss;  // per-epoch mean loss, neural kinds only
};

/// Builds the structure for `kind` and estimates its parameters.
/// k is ignored by kinds that do not use it.
TrainedModel fit(const Dataset& data, ClassifierKind kind, std::size_t k, const TrainConfig& config);

/// ln P(y) + sum_i ln P(x_i | pa_i(x), y). Unknown child values score
/// 1/|A_i|; unknown parent values add nothing to the neural context.
double log_joint(const TrainedModel& model, std::span<const std::uint32_t> row, std::uint32_t label);

struct Prediction {
    std::uint32_t label_index = 0;
    std::string label;
    std::vector<double> posterior;  // over schema.labels
};

/// Prediction for an encoded row (kUnknownValue allowed).
Prediction predict_encoded(const TrainedModel& model, std::span<const std::uint32_t> row);

/// Prediction for raw feature tokens aligned with schema.feature_names.
/// Tokens go through the model's discretizer and dictionaries first.
Prediction predict(const TrainedModel& model, std::span<const Cell> feature_tokens);

/// Maps a raw row (in the model's feature order) to encoded values.
std::vector<std::uint32_t> encode_features(const TrainedModel& model, std::span<const Cell> feature_tokens);

}  // namespace nkdb
