#include "nkdb/embeddings.hpp"

#include "nkdb/random.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace nkdb {

EmbeddingStore::EmbeddingStore(std::size_t dim, std::vector<std::size_t> alphabet_sizes, std::size_t num_labels)
    : dim_(dim), alphabet_sizes_(std::move(alphabet_sizes)), num_labels_(num_labels) {
    if (dim_ == 0) throw std::invalid_argument("embedding dimension must be >= 1");
    value_offsets_.reserve(alphabet_sizes_.size());
    for (auto s : alphabet_sizes_) {
        if (s == 0) throw std::invalid_argument("embedding store: empty alphabet");
        value_offsets_.push_back(values_total_);
        values_total_ += s;
    }
    params_.assign((2 * values_total_ + num_labels_) * dim_, 0.0);
}

std::size_t EmbeddingStore::offset(const ParamId& id) const {
    switch (id.role) {
        case Role::Parent:
        case Role::Child: {
            if (id.feature >= alphabet_sizes_.size() || id.value >= alphabet_sizes_[id.feature])
                throw std::out_of_range("embedding store: feature value out of range");
            const std::size_t base = id.role == Role::Child ? values_total_ : 0;
            return (base + value_offsets_[id.feature] + id.value) * dim_;
        }
        case Role::Label:
            if (id.value >= num_labels_) throw std::out_of_range("embedding store: label out of range");
            return (2 * values_total_ + id.value) * dim_;
    }
    throw std::invalid_argument("embedding store: bad role");
}

namespace {

void add_into(std::span<double> acc, std::span<const double> v) {
    for (std::size_t t = 0; t < acc.size(); ++t) acc[t] += v[t];
}

double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t t = 0; t < a.size(); ++t) s += a[t] * b[t];
    return s;
}

std::vector<double> logits(const EmbeddingStore& store, std::uint32_t child_feature, std::span<const double> context) {
    const std::size_t n = store.alphabet_size(child_feature);
    std::vector<double> out(n);
    for (std::size_t r = 0; r < n; ++r) out[r] = dot(context, store.child(child_feature, r));
    return out;
}

// In-place softmax; returns log-sum-exp of the input.
double softmax_inplace(std::vector<double>& z) {
    const double mx = *std::max_element(z.begin(), z.end());
    double sum = 0.0;
    for (auto& v : z) {
        v = std::exp(v - mx);
        sum += v;
    }
    for (auto& v : z) v /= sum;
    return mx + std::log(sum);
}

}  // namespace

std::vector<double> aggregate_context(const EmbeddingStore& store, std::span<const ParentValue> parents,
                                      std::uint32_t label) {
    std::vector<double> ctx(store.label(label).begin(), store.label(label).end());
    for (const auto& p : parents) {
        if (p.value == kUnknownValue) continue;
        add_into(ctx, store.parent(p.feature, p.value));
    }
    return ctx;
}

std::vector<double> conditional_distribution(const EmbeddingStore& store, std::uint32_t child_feature,
                                             std::span<const ParentValue> parents, std::uint32_t label) {
    auto z = logits(store, child_feature, aggregate_context(store, parents, label));
    softmax_inplace(z);
    return z;
}

std::vector<double> log_conditional_distribution(const EmbeddingStore& store, std::uint32_t child_feature,
                                                 std::span<const ParentValue> parents, std::uint32_t label) {
    auto z = logits(store, child_feature, aggregate_context(store, parents, label));
    const double mx = *std::max_element(z.begin(), z.end());
    double sum = 0.0;
    for (auto v : z) sum += std::exp(v - mx);
    const double lse = mx + std::log(sum);
    for (auto& v : z) v -= lse;
    return z;
}

// ---- gradient container ----

SparseGradient::SparseGradient(const EmbeddingStore& layout)
    : layout_(&layout),
      dim_(layout.dim()),
      buffer_(layout.parameters().size(), 0.0),
      is_touched_(layout.parameters().size() / std::max<std::size_t>(layout.dim(), 1), 0) {}

std::span<double> SparseGradient::slot(const ParamId& id) {
    const std::size_t off = layout_->offset(id);
    auto& flag = is_touched_[off / dim_];
    if (!flag) {
        flag = 1;
        touched_.push_back(id);
    }
    return {buffer_.data() + off, dim_};
}

bool SparseGradient::contains(const ParamId& id) const { return is_touched_[layout_->offset(id) / dim_] != 0; }

std::span<const double> SparseGradient::at(const ParamId& id) const {
    if (!contains(id)) throw std::out_of_range("gradient has no entry for this parameter");
    return {buffer_.data() + layout_->offset(id), dim_};
}

std::vector<ParamId> SparseGradient::ids() const {
    auto out = touched_;
    std::sort(out.begin(), out.end());
    return out;
}

void SparseGradient::apply(EmbeddingStore& store, double step) const {
    for (const auto& id : touched_) {
        auto dst = store.vector(id);
        const double* g = buffer_.data() + layout_->offset(id);
        for (std::size_t t = 0; t < dim_; ++t) dst[t] -= step * g[t];
    }
}

void SparseGradient::clear() {
    for (const auto& id : touched_) {
        const std::size_t off = layout_->offset(id);
        std::fill_n(buffer_.begin() + static_cast<std::ptrdiff_t>(off), dim_, 0.0);
        is_touched_[off / dim_] = 0;
    }
    touched_.clear();
}

double accumulate_nll_gradient(const EmbeddingStore& store, std::span<const Instantiation> batch,
                               SparseGradient& gradient) {
    const std::size_t d = store.dim();
    double loss = 0.0;
    std::vector<double> g_context(d);
    for (const auto& inst : batch) {
        const auto ctx = aggregate_context(store, inst.parents, inst.label);
        auto p = logits(store, inst.child_feature, ctx);
        const double x_logit = p[inst.child_value];
        const double lse = softmax_inplace(p);
        loss += lse - x_logit;

        std::fill(g_context.begin(), g_context.end(), 0.0);
        for (std::size_t r = 0; r < p.size(); ++r) {
            const double coeff = p[r] - (r == inst.child_value ? 1.0 : 0.0);
            const auto child = store.child(inst.child_feature, r);
            auto g_child = gradient.slot({Role::Child, inst.child_feature, static_cast<std::uint32_t>(r)});
            for (std::size_t t = 0; t < d; ++t) {
                g_child[t] += coeff * ctx[t];
                g_context[t] += coeff * child[t];
            }
        }
        for (const auto& par : inst.parents) {
            if (par.value == kUnknownValue) continue;
            add_into(gradient.slot({Role::Parent, par.feature, par.value}), g_context);
        }
        add_into(gradient.slot({Role::Label, 0, inst.label}), g_context);
    }
    return loss;
}

LossAndGradient nll_and_gradient(const EmbeddingStore& store, std::span<const Instantiation> batch) {
    if (batch.empty()) throw std::invalid_argument("nll_and_gradient: empty batch");
    LossAndGradient out{0.0, SparseGradient(store)};
    out.loss = accumulate_nll_gradient(store, batch, out.gradient);
    return out;
}

std::vector<Instantiation> collect_instantiations(const Dataset& data, const DependenceStructure& structure) {
    const std::size_t m = data.num_features();
    if (structure.num_features() != m) throw std::invalid_argument("structure arity does not match the dataset");
    std::vector<Instantiation> out;
    out.reserve(data.num_rows() * m);
    for (std::size_t r = 0; r < data.num_rows(); ++r) {
        for (std::size_t i = 0; i < m; ++i) {
            Instantiation inst;
            inst.child_feature = static_cast<std::uint32_t>(i);
            inst.child_value = data.value(r, i);
            inst.label = data.label(r);
            inst.parents.reserve(structure.parents[i].size());
            for (auto p : structure.parents[i])
                inst.parents.push_back({static_cast<std::uint32_t>(p), data.value(r, p)});
            out.push_back(std::move(inst));
        }
    }
    return out;
}

void TrainConfig::validate() const {
    if (dim < 1 || batch_size < 1) throw std::invalid_argument("dim and batch size must be >= 1");
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw std::invalid_argument("learning rate must be > 0");
    if (!(init_scale > 0.0) || !std::isfinite(init_scale)) throw std::invalid_argument("init scale must be > 0");
}

EmbeddingStore initialize_store(const Schema& schema, const TrainConfig& config) {
    std::vector<std::size_t> sizes;
    for (const auto& a : schema.features) sizes.push_back(a.size());
    EmbeddingStore store(config.dim, std::move(sizes), schema.labels.size());
    Rng rng = Rng::derive(config.seed, {0});
    for (auto& w : store.parameters()) w = rng.uniform(-config.init_scale, config.init_scale);
    return store;
}

double mean_nll(const EmbeddingStore& store, std::span<const Instantiation> instantiations) {
    if (instantiations.empty()) return 0.0;
    double total = 0.0;
    for (const auto& inst : instantiations) {
        const auto lp = log_conditional_distribution(store, inst.child_feature, inst.parents, inst.label);
        total -= lp[inst.child_value];
    }
    return total / static_cast<double>(instantiations.size());
}

TrainResult train(const Dataset& data, const DependenceStructure& structure, const TrainConfig& config) {
    config.validate();
    if (data.num_rows() == 0) throw std::invalid_argument("train: empty dataset");
    auto instantiations = collect_instantiations(data, structure);

    TrainResult result{initialize_store(data.schema(), config), 0.0, {}};
    result.initial_mean_nll = mean_nll(result.store, instantiations);

    Rng rng = Rng::derive(config.seed, {1});
    SparseGradient gradient(result.store);
    const std::span<const Instantiation> all(instantiations);

    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        rng.shuffle(std::span<Instantiation>(instantiations));
        double epoch_loss = 0.0;
        for (std::size_t start = 0; start < all.size(); start += config.batch_size) {
            const auto batch = all.subspan(start, std::min(config.batch_size, all.size() - start));
            gradient.clear();
            epoch_loss += accumulate_nll_gradient(result.store, batch, gradient);
            gradient.apply(result.store, config.learning_rate);
        }
        result.epoch_mean_nll.push_back(epoch_loss / static_cast<double>(all.size()));
    }
    return result;
}

}  // namespace nkdb
