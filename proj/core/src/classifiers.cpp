#include "nkdb/classifiers.hpp"

#include "nkdb/errors.hpp"
#include "nkdb/random.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace nkdb {

std::string_view to_string(ClassifierKind kind) {
    switch (kind) {
        case ClassifierKind::NeuralKdb: return "neural_kdb";
        case ClassifierKind::NeuralNb: return "neural_nb";
        case ClassifierKind::Nn: return "nn";
        case ClassifierKind::Kdb: return "kdb";
        case ClassifierKind::Tan: return "tan";
        case ClassifierKind::Nb: return "nb";
    }
    return "?";
}

ClassifierKind parse_classifier_kind(std::string_view name) {
    std::string key;
    for (char c : name) {
        if (c == '_' || c == '-') continue;
        key.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
    if (key == "neuralkdb") return ClassifierKind::NeuralKdb;
    if (key == "neuralnb") return ClassifierKind::NeuralNb;
    if (key == "nn") return ClassifierKind::Nn;
    if (key == "kdb") return ClassifierKind::Kdb;
    if (key == "tan") return ClassifierKind::Tan;
    if (key == "nb") return ClassifierKind::Nb;
    throw std::invalid_argument("unknown classifier '" + std::string(name) + "'");
}

bool is_generative(ClassifierKind kind) { return kind != ClassifierKind::Nn; }

bool is_neural(ClassifierKind kind) {
    return kind == ClassifierKind::NeuralKdb || kind == ClassifierKind::NeuralNb || kind == ClassifierKind::Nn;
}

bool uses_k(ClassifierKind kind) { return kind == ClassifierKind::NeuralKdb || kind == ClassifierKind::Kdb; }

ClassPrior estimate_prior(const Dataset& data) {
    if (data.num_rows() == 0) throw std::invalid_argument("estimate_prior: empty dataset");
    std::vector<std::uint64_t> counts(data.num_classes(), 0);
    for (auto y : data.labels()) ++counts[y];
    ClassPrior prior;
    prior.probs.reserve(counts.size());
    const double n = static_cast<double>(data.num_rows());
    for (auto c : counts) prior.probs.push_back(static_cast<double>(c) / n);
    return prior;
}

// ---- frequency tables ----

FrequencyCPT FrequencyCPT::fit(const Dataset& data, const DependenceStructure& structure) {
    const std::size_t m = data.num_features();
    if (structure.num_features() != m) throw std::invalid_argument("structure arity does not match the dataset");
    FrequencyCPT cpt;
    cpt.alphabet_sizes_.reserve(m);
    for (std::size_t i = 0; i < m; ++i) cpt.alphabet_sizes_.push_back(data.alphabet_size(i));
    cpt.tables_.resize(m);
    Context key;
    for (std::size_t r = 0; r < data.num_rows(); ++r) {
        for (std::size_t i = 0; i < m; ++i) {
            key.clear();
            for (auto p : structure.parents[i]) key.push_back(data.value(r, p));
            key.push_back(data.label(r));
            auto [it, inserted] = cpt.tables_[i].try_emplace(key);
            if (inserted) it->second.assign(cpt.alphabet_sizes_[i], 0);
            ++it->second[data.value(r, i)];
        }
    }
    return cpt;
}

FrequencyCPT FrequencyCPT::from_tables(std::vector<std::size_t> alphabet_sizes, std::vector<Table> tables) {
    if (alphabet_sizes.size() != tables.size()) throw std::invalid_argument("cpt: table count mismatch");
    for (std::size_t i = 0; i < tables.size(); ++i)
        for (const auto& [ctx, counts] : tables[i])
            if (counts.size() != alphabet_sizes[i]) throw std::invalid_argument("cpt: count row has the wrong width");
    FrequencyCPT cpt;
    cpt.alphabet_sizes_ = std::move(alphabet_sizes);
    cpt.tables_ = std::move(tables);
    return cpt;
}

std::vector<double> FrequencyCPT::distribution(std::size_t feature, std::span<const std::uint32_t> context) const {
    const std::size_t width = alphabet_sizes_.at(feature);
    const auto& table = tables_[feature];
    const auto it = table.find(Context(context.begin(), context.end()));
    if (it == table.end()) return std::vector<double>(width, 1.0 / static_cast<double>(width));
    std::uint64_t total = 0;
    for (auto c : it->second) total += c;
    const double denom = static_cast<double>(total + width);
    std::vector<double> out(width);
    for (std::size_t a = 0; a < width; ++a) out[a] = (static_cast<double>(it->second[a]) + 1.0) / denom;
    return out;
}

double FrequencyCPT::probability(std::size_t feature, std::uint32_t value, std::span<const std::uint32_t> context) const {
    const std::size_t width = alphabet_sizes_.at(feature);
    if (value == kUnknownValue) return 1.0 / static_cast<double>(width);
    const auto& table = tables_[feature];
    const auto it = table.find(Context(context.begin(), context.end()));
    if (it == table.end()) return 1.0 / static_cast<double>(width);
    std::uint64_t total = 0;
    for (auto c : it->second) total += c;
    return (static_cast<double>(it->second.at(value)) + 1.0) / static_cast<double>(total + width);
}

// ---- NN baseline ----

std::size_t NNHead::embedding_offset(std::size_t feature, std::size_t value) const {
    std::size_t slot = value;
    for (std::size_t i = 0; i < feature; ++i) slot += alphabet_sizes[i];
    return slot * dim;
}

std::vector<double> NNHead::logits(std::span<const std::uint32_t> row) const {
    const std::size_t m = alphabet_sizes.size();
    const std::size_t width = m * dim;
    std::vector<double> z(bias);
    for (std::size_t i = 0; i < m; ++i) {
        if (row[i] == kUnknownValue) continue;
        const double* e = embeddings.data() + embedding_offset(i, row[i]);
        for (std::size_t c = 0; c < num_labels; ++c) {
            const double* w = weights.data() + c * width + i * dim;
            double s = 0.0;
            for (std::size_t t = 0; t < dim; ++t) s += w[t] * e[t];
            z[c] += s;
        }
    }
    return z;
}

namespace {

void softmax(std::vector<double>& z) {
    const double mx = *std::max_element(z.begin(), z.end());
    double sum = 0.0;
    for (auto& v : z) {
        v = std::exp(v - mx);
        sum += v;
    }
    for (auto& v : z) v /= sum;
}

}  // namespace

NNHead train_nn_head(const Dataset& data, const TrainConfig& config, std::vector<double>* epoch_mean_loss) {
    config.validate();
    if (data.num_rows() == 0) throw std::invalid_argument("train_nn_head: empty dataset");
    const std::size_t m = data.num_features();
    const std::size_t d = config.dim;
    const std::size_t ny = data.num_classes();
    const std::size_t width = m * d;

    NNHead head;
    head.dim = d;
    head.num_labels = ny;
    std::size_t values_total = 0;
    for (std::size_t i = 0; i < m; ++i) {
        head.alphabet_sizes.push_back(data.alphabet_size(i));
        values_total += data.alphabet_size(i);
    }
    head.embeddings.resize(values_total * d);
    head.weights.resize(ny * width);
    head.bias.assign(ny, 0.0);
    Rng init = Rng::derive(config.seed, {2});
    for (auto& w : head.embeddings) w = init.uniform(-config.init_scale, config.init_scale);
    for (auto& w : head.weights) w = init.uniform(-config.init_scale, config.init_scale);

    std::vector<std::size_t> order(data.num_rows());
    std::iota(order.begin(), order.end(), 0);
    Rng rng = Rng::derive(config.seed, {3});

    std::vector<double> g_weights(head.weights.size());
    std::vector<double> g_bias(ny);
    std::vector<double> g_embed(head.embeddings.size(), 0.0);
    std::vector<std::size_t> touched;
    std::vector<char> is_touched(values_total, 0);
    std::vector<double> hidden(width);

    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        rng.shuffle(std::span<std::size_t>(order));
        double epoch_loss = 0.0;
        for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
            const std::size_t stop = std::min(order.size(), start + config.batch_size);
            std::fill(g_weights.begin(), g_weights.end(), 0.0);
            std::fill(g_bias.begin(), g_bias.end(), 0.0);
            for (auto slot : touched) std::fill_n(g_embed.begin() + static_cast<std::ptrdiff_t>(slot * d), d, 0.0);
            for (auto slot : touched) is_touched[slot] = 0;
            touched.clear();

            for (std::size_t b = start; b < stop; ++b) {
                const auto row = data.row(order[b]);
                const auto y = data.label(order[b]);
                for (std::size_t i = 0; i < m; ++i) {
                    const double* e = head.embeddings.data() + head.embedding_offset(i, row[i]);
                    std::copy(e, e + d, hidden.begin() + static_cast<std::ptrdiff_t>(i * d));
                }
                auto p = head.logits(row);
                const double mx = *std::max_element(p.begin(), p.end());
                double sum = 0.0;
                for (auto v : p) sum += std::exp(v - mx);
                epoch_loss += mx + std::log(sum) - p[y];
                softmax(p);
                for (std::size_t c = 0; c < ny; ++c) {
                    const double dz = p[c] - (c == y ? 1.0 : 0.0);
                    g_bias[c] += dz;
                    double* gw = g_weights.data() + c * width;
                    const double* w = head.weights.data() + c * width;
                    for (std::size_t i = 0; i < m; ++i) {
                        const std::size_t off = head.embedding_offset(i, row[i]);
                        const std::size_t slot = off / d;
                        if (!is_touched[slot]) {
                            is_touched[slot] = 1;
                            touched.push_back(slot);
                        }
                        double* ge = g_embed.data() + off;
                        for (std::size_t t = 0; t < d; ++t) {
                            gw[i * d + t] += dz * hidden[i * d + t];
                            ge[t] += dz * w[i * d + t];
                        }
                    }
                }
            }
            const double lr = config.learning_rate;
            for (std::size_t t = 0; t < head.weights.size(); ++t) head.weights[t] -= lr * g_weights[t];
            for (std::size_t c = 0; c < ny; ++c) head.bias[c] -= lr * g_bias[c];
            for (auto slot : touched)
                for (std::size_t t = 0; t < d; ++t) head.embeddings[slot * d + t] -= lr * g_embed[slot * d + t];
        }
        if (epoch_mean_loss) epoch_mean_loss->push_back(epoch_loss / static_cast<double>(order.size()));
    }
    return head;
}

// ---- unified model ----

TrainedModel fit(const Dataset& data, ClassifierKind kind, std::size_t k, const TrainConfig& config) {
    if (data.num_rows() == 0) throw std::invalid_argument("fit: empty dataset");
    if (is_neural(kind)) config.validate();
    TrainedModel model;
    model.kind = kind;
    model.k = uses_k(kind) ? k : (kind == ClassifierKind::Tan ? 1 : 0);
    model.schema = data.schema();
    model.prior = estimate_prior(data);
    model.config = config;
    switch (kind) {
        case ClassifierKind::NeuralKdb:
        case ClassifierKind::NeuralNb: {
            model.structure = kind == ClassifierKind::NeuralKdb ? build_kdb_structure(data, k)
                                                               : build_empty_structure(data.num_features());
            auto result = train(data, model.structure, config);
            model.params = std::move(result.store);
            model.training_loss = std::move(result.epoch_mean_nll);
            break;
        }
        case ClassifierKind::Nn:
            model.structure = build_empty_structure(data.num_features());
            model.params = train_nn_head(data, config, &model.training_loss);
            break;
        case ClassifierKind::Kdb:
        case ClassifierKind::Tan:
        case ClassifierKind::Nb:
            model.structure = kind == ClassifierKind::Kdb   ? build_kdb_structure(data, k)
                              : kind == ClassifierKind::Tan ? build_tan_structure(data)
                                                            : build_empty_structure(data.num_features());
            model.params = FrequencyCPT::fit(data, model.structure);
            break;
    }
    return model;
}

double log_joint(const TrainedModel& model, std::span<const std::uint32_t> row, std::uint32_t label) {
    if (!is_generative(model.kind)) throw std::invalid_argument("log_joint: nn is not a generative classifier");
    const std::size_t m = model.schema.num_features();
    if (row.size() != m) throw std::invalid_argument("log_joint: row arity mismatch");
    if (label >= model.prior.probs.size()) throw std::out_of_range("log_joint: label out of range");

    double total = std::log(model.prior.probs[label]);
    if (const auto* store = std::get_if<EmbeddingStore>(&model.params)) {
        std::vector<ParentValue> parents;
        for (std::size_t i = 0; i < m; ++i) {
            const double width = static_cast<double>(store->alphabet_size(i));
            if (row[i] == kUnknownValue) {
                total += -std::log(width);
                continue;
            }
            parents.clear();
            for (auto p : model.structure.parents[i]) parents.push_back({static_cast<std::uint32_t>(p), row[p]});
            const auto lp = log_conditional_distribution(*store, static_cast<std::uint32_t>(i), parents, label);
            total += lp[row[i]];
        }
    } else {
        const auto& cpt = std::get<FrequencyCPT>(model.params);
        std::vector<std::uint32_t> context;
        for (std::size_t i = 0; i < m; ++i) {
            context.clear();
            for (auto p : model.structure.parents[i]) context.push_back(row[p]);
            context.push_back(label);
            total += std::log(cpt.probability(i, row[i], context));
        }
    }
    return total;
}

Prediction predict_encoded(const TrainedModel& model, std::span<const std::uint32_t> row) {
    const std::size_t ny = model.schema.labels.size();
    if (row.size() != model.schema.num_features()) throw DataError("row arity does not match the model");
    std::vector<double> scores(ny);
    if (model.kind == ClassifierKind::Nn) {
        scores = std::get<NNHead>(model.params).logits(row);
    } else {
        for (std::size_t c = 0; c < ny; ++c) scores[c] = log_joint(model, row, static_cast<std::uint32_t>(c));
    }
    Prediction out;
    // First maximum wins ties.
    out.label_index = static_cast<std::uint32_t>(std::max_element(scores.begin(), scores.end()) - scores.begin());
    out.label = model.schema.labels.token(out.label_index);
    const double mx = scores[out.label_index];
    out.posterior.resize(ny);
    if (std::isinf(mx) && mx < 0) {
        std::fill(out.posterior.begin(), out.posterior.end(), 1.0 / static_cast<double>(ny));
        return out;
    }
    double sum = 0.0;
    for (std::size_t c = 0; c < ny; ++c) {
        out.posterior[c] = std::exp(scores[c] - mx);
        sum += out.posterior[c];
    }
    for (auto& p : out.posterior) p /= sum;
    return out;
}

std::vector<std::uint32_t> encode_features(const TrainedModel& model, std::span<const Cell> feature_tokens) {
    const auto& names = model.schema.feature_names;
    if (feature_tokens.size() != names.size())
        throw DataError("row has " + std::to_string(feature_tokens.size()) + " features, model expects " +
                        std::to_string(names.size()));
    std::vector<Cell> discrete(feature_tokens.begin(), feature_tokens.end());
    for (std::size_t i = 0; i < discrete.size(); ++i)
        if (discrete[i]) discrete[i] = model.discretizer.apply_token(names[i], *discrete[i]);
    return encode_row(model.schema, discrete);
}

Prediction predict(const TrainedModel& model, std::span<const Cell> feature_tokens) {
    return predict_encoded(model, encode_features(model, feature_tokens));
}

}  // namespace nkdb
