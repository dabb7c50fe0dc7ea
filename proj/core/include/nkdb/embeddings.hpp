#pragma once

#include "nkdb/structure.hpp"
#include "nkdb/tabular.hpp"

#include <compare>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace nkdb {

inline constexpr std::uint64_t kDefaultSeed = 42;

/// Which side of a conditional an embedding vector sits on.
enum class Role : std::uint8_t { Parent, Child, Label };

/// Identifies one d-vector of the store. `feature` is ignored for labels.
struct ParamId {
    Role role;
    std::uint32_t feature;
    std::uint32_t value;

    friend auto operator<=>(const ParamId&, const ParamId&) = default;
};

/// Parent-role, child-role and label embeddings. Parent and child vectors
/// exist for every (feature, value) pair, label vectors for every class;
/// all share the dimension `dim`.
class EmbeddingStore {
public:
    EmbeddingStore() = default;
    /// Zero-initialized store.
    EmbeddingStore(std::size_t dim, std::vector<std::size_t> alphabet_sizes, std::size_t num_labels);

    std::size_t dim() const { return dim_; }
    std::size_t num_features() const { return alphabet_sizes_.size(); }
    std::size_t alphabet_size(std::size_t feature) const { return alphabet_sizes_[feature]; }
    const std::vector<std::size_t>& alphabet_sizes() const { return alphabet_sizes_; }
    std::size_t num_labels() const { return num_labels_; }

    std::size_t offset(const ParamId& id) const;
    std::span<double> vector(const ParamId& id) { return {params_.data() + offset(id), dim_}; }
    std::span<const double> vector(const ParamId& id) const { return {params_.data() + offset(id), dim_}; }

    std::span<const double> parent(std::size_t feature, std::size_t value) const {
        return vector({Role::Parent, static_cast<std::uint32_t>(feature), static_cast<std::uint32_t>(value)});
    }
    std::span<const double> child(std::size_t feature, std::size_t value) const {
        return vector({Role::Child, static_cast<std::uint32_t>(feature), static_cast<std::uint32_t>(value)});
    }
    std::span<const double> label(std::size_t value) const {
        return vector({Role::Label, 0, static_cast<std::uint32_t>(value)});
    }

    /// All parameters, flat: parent vectors, then child vectors, then label vectors.
    std::span<double> parameters() { return params_; }
    std::span<const double> parameters() const { return params_; }

    friend bool operator==(const EmbeddingStore&, const EmbeddingStore&) = default;

private:
    std::size_t dim_ = 0;
    std::vector<std::size_t> alphabet_sizes_;
    std::size_t num_labels_ = 0;
    std::vector<std::size_t> value_offsets_;  // prefix sums of alphabet sizes
    std::size_t values_total_ = 0;
    std::vector<double> params_;
};

struct ParentValue {
    std::uint32_t feature;
    std::uint32_t value;  // kUnknownValue contributes nothing to the context

    friend bool operator==(const ParentValue&, const ParentValue&) = default;
};

/// One (child value, parent values, label) observation.
struct Instantiation {
    std::uint32_t child_feature = 0;
    std::uint32_t child_value = 0;
    std::vector<ParentValue> parents;  // aligned with the structure's parent list
    std::uint32_t label = 0;

    friend bool operator==(const Instantiation&, const Instantiation&) = default;
};

/// Context vector: sum of the parents' parent-role vectors plus the label vector.
std::vector<double> aggregate_context(const EmbeddingStore& store, std::span<const ParentValue> parents,
                                      std::uint32_t label);

/// Softmax over the child feature's values of <context, child vector>.
std::vector<double> conditional_distribution(const EmbeddingStore& store, std::uint32_t child_feature,
                                             std::span<const ParentValue> parents, std::uint32_t label);

/// Same distribution in log space, computed with log-sum-exp.
std::vector<double> log_conditional_distribution(const EmbeddingStore& store, std::uint32_t child_feature,
                                                 std::span<const ParentValue> parents, std::uint32_t label);

/// Gradient keyed by parameter vector. Backed by a dense buffer shaped like
/// the store so it can be reused across batches.
class SparseGradient {
public:
    explicit SparseGradient(const EmbeddingStore& layout);

    /// Accumulation slot for one vector; marks it as touched.
    std::span<double> slot(const ParamId& id);

    bool contains(const ParamId& id) const;
    std::span<const double> at(const ParamId& id) const;
    /// Touched ids in ascending order.
    std::vector<ParamId> ids() const;
    std::size_t size() const { return touched_.size(); }

    /// store -= step * gradient, over touched vectors only.
    void apply(EmbeddingStore& store, double step) const;
    void clear();

private:
    const EmbeddingStore* layout_;
    std::size_t dim_;
    std::vector<double> buffer_;
    std::vector<char> is_touched_;  // per vector slot
    std::vector<ParamId> touched_;
};

struct LossAndGradient {
    double loss = 0.0;
    SparseGradient gradient;
};

/// Sum over the batch of -ln P(x_i | x_s, y) and its exact gradient.
LossAndGradient nll_and_gradient(const EmbeddingStore& store, std::span<const Instantiation> batch);

/// Accumulating form used by the trainer: adds the batch gradient into
/// `gradient` and returns the batch loss.
double accumulate_nll_gradient(const EmbeddingStore& store, std::span<const Instantiation> batch,
                               SparseGradient& gradient);

/// One instantiation per (row, feature) pair, rows outer and features in
/// index order. Duplicates are kept.
std::vector<Instantiation> collect_instantiations(const Dataset& data, const DependenceStructure& structure);

struct TrainConfig {
    std::size_t dim = 128;
    std::size_t batch_size = 32;
    std::size_t epochs = 10;
    double learning_rate = 0.005;
    std::uint64_t seed = kDefaultSeed;
    double init_scale = 0.2;

    void validate() const;
    friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

/// Store with every parameter drawn uniformly from [-init_scale, init_scale].
EmbeddingStore initialize_store(const Schema& schema, const TrainConfig& config);

/// Mean of -ln P(x_i | x_s, y) over the instantiations.
double mean_nll(const EmbeddingStore& store, std::span<const Instantiation> instantiations);

struct TrainResult {
    EmbeddingStore store;
    double initial_mean_nll = 0.0;
    /// Per epoch, the mean of the batch losses seen during that epoch.
    std::vector<double> epoch_mean_nll;
};

/// Mini-batch gradient descent on the summed negative log-likelihood.
/// Each epoch shuffles the instantiations, cuts consecutive batches (the
/// last may be short) and takes one fixed-size step per batch.
TrainResult train(const Dataset& data, const DependenceStructure& structure, const TrainConfig& config);

}  // namespace nkdb
