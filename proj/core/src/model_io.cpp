#include "nkdb/model_io.hpp"

#include "nkdb/errors.hpp"

#include <nlohmann/json.hpp>

#include <fstream>
#include <sstream>

namespace nkdb {

using nlohmann::json;

namespace {

constexpr const char* kMagic = "neuralkdb-model";

std::string context_key(const FrequencyCPT::Context& ctx) {
    std::string key;
    for (std::size_t i = 0; i < ctx.size(); ++i) {
        if (i) key += ',';
        key += std::to_string(ctx[i]);
    }
    return key;
}

FrequencyCPT::Context parse_context_key(const std::string& key) {
    FrequencyCPT::Context ctx;
    std::stringstream ss(key);
    std::string part;
    while (std::getline(ss, part, ',')) {
        std::size_t used = 0;
        const unsigned long v = std::stoul(part, &used);
        if (used != part.size()) throw ModelFormatError("bad CPT context key '" + key + "'");
        ctx.push_back(static_cast<std::uint32_t>(v));
    }
    return ctx;
}

json embeddings_to_json(const EmbeddingStore& store) {
    json parent = json::array();
    json child = json::array();
    for (std::size_t i = 0; i < store.num_features(); ++i) {
        std::vector<double> p;
        std::vector<double> c;
        for (std::size_t r = 0; r < store.alphabet_size(i); ++r) {
            const auto pv = store.parent(i, r);
            const auto cv = store.child(i, r);
            p.insert(p.end(), pv.begin(), pv.end());
            c.insert(c.end(), cv.begin(), cv.end());
        }
        parent.push_back(std::move(p));
        child.push_back(std::move(c));
    }
    std::vector<double> label;
    for (std::size_t y = 0; y < store.num_labels(); ++y) {
        const auto v = store.label(y);
        label.insert(label.end(), v.begin(), v.end());
    }
    return {{"type", "embeddings"}, {"dim", store.dim()}, {"parent", parent}, {"child", child}, {"label", label}};
}

EmbeddingStore embeddings_from_json(const json& j, const Schema& schema) {
    std::vector<std::size_t> sizes;
    for (const auto& a : schema.features) sizes.push_back(a.size());
    EmbeddingStore store(j.at("dim").get<std::size_t>(), sizes, schema.labels.size());
    const std::size_t d = store.dim();
    const auto& parent = j.at("parent");
    const auto& child = j.at("child");
    if (parent.size() != sizes.size() || child.size() != sizes.size())
        throw ModelFormatError("embedding arrays do not match the feature count");
    auto fill = [d](const json& src, std::size_t rows, auto&& target) {
        const auto flat = src.get<std::vector<double>>();
        if (flat.size() != rows * d) throw ModelFormatError("embedding array has the wrong length");
        for (std::size_t r = 0; r < rows; ++r) {
            auto dst = target(r);
            std::copy_n(flat.begin() + static_cast<std::ptrdiff_t>(r * d), d, dst.begin());
        }
    };
    for (std::size_t i = 0; i < sizes.size(); ++i) {
        const auto fi = static_cast<std::uint32_t>(i);
        fill(parent[i], sizes[i], [&](std::size_t r) {
            return store.vector({Role::Parent, fi, static_cast<std::uint32_t>(r)});
        });
        fill(child[i], sizes[i], [&](std::size_t r) {
            return store.vector({Role::Child, fi, static_cast<std::uint32_t>(r)});
        });
    }
    fill(j.at("label"), schema.labels.size(),
         [&](std::size_t r) { return store.vector({Role::Label, 0, static_cast<std::uint32_t>(r)}); });
    return store;
}

json cpt_to_json(const FrequencyCPT& cpt) {
    json tables = json::array();
    for (const auto& table : cpt.tables()) {
        json t = json::object();
        for (const auto& [ctx, counts] : table) t[context_key(ctx)] = counts;
        tables.push_back(std::move(t));
    }
    return {{"type", "cpt"}, {"smoothing", "laplace"}, {"tables", tables}};
}

FrequencyCPT cpt_from_json(const json& j, const Schema& schema, const DependenceStructure& structure) {
    const auto& tables_json = j.at("tables");
    if (tables_json.size() != schema.num_features()) throw ModelFormatError("CPT table count does not match the features");
    std::vector<std::size_t> sizes;
    std::vector<FrequencyCPT::Table> tables(schema.num_features());
    for (std::size_t i = 0; i < schema.num_features(); ++i) {
        sizes.push_back(schema.features[i].size());
        for (const auto& [key, counts] : tables_json[i].items()) {
            auto ctx = parse_context_key(key);
            if (ctx.size() != structure.parents[i].size() + 1) throw ModelFormatError("CPT context has the wrong arity");
            tables[i].emplace(std::move(ctx), counts.get<std::vector<std::uint64_t>>());
        }
    }
    try {
        return FrequencyCPT::from_tables(std::move(sizes), std::move(tables));
    } catch (const std::invalid_argument& e) {
        throw ModelFormatError(e.what());
    }
}

json nn_to_json(const NNHead& head) {
    return {{"type", "nn"},
            {"dim", head.dim},
            {"embeddings", head.embeddings},
            {"weights", head.weights},
            {"bias", head.bias}};
}

NNHead nn_from_json(const json& j, const Schema& schema) {
    NNHead head;
    head.dim = j.at("dim").get<std::size_t>();
    head.num_labels = schema.labels.size();
    std::size_t values = 0;
    for (const auto& a : schema.features) {
        head.alphabet_sizes.push_back(a.size());
        values += a.size();
    }
    head.embeddings = j.at("embeddings").get<std::vector<double>>();
    head.weights = j.at("weights").get<std::vector<double>>();
    head.bias = j.at("bias").get<std::vector<double>>();
    if (head.embeddings.size() != values * head.dim ||
        head.weights.size() != head.num_labels * schema.num_features() * head.dim ||
        head.bias.size() != head.num_labels)
        throw ModelFormatError("nn parameter arrays have the wrong length");
    return head;
}

}  // namespace

std::string model_to_json(const TrainedModel& model) {
    json features = json::array();
    for (std::size_t i = 0; i < model.schema.num_features(); ++i)
        features.push_back({{"name", model.schema.feature_names[i]}, {"values", model.schema.features[i].tokens()}});

    json numeric = json::object();
    for (const auto& [name, bins] : model.discretizer.numeric_columns()) numeric[name] = bins.cuts;

    json params;
    if (const auto* store = std::get_if<EmbeddingStore>(&model.params)) params = embeddings_to_json(*store);
    else if (const auto* cpt = std::get_if<FrequencyCPT>(&model.params)) params = cpt_to_json(*cpt);
    else params = nn_to_json(std::get<NNHead>(model.params));

    json doc = {
        {"format", kMagic},
        {"format_version", kModelFormatVersion},
        {"kind", std::string(to_string(model.kind))},
        {"k", model.k},
        {"dictionaries",
         {{"features", features},
          {"label", {{"name", model.schema.label_name}, {"values", model.schema.labels.tokens()}}}}},
        {"preprocessing", {{"numeric_bins", numeric}}},
        {"structure", {{"order", model.structure.order}, {"parents", model.structure.parents}, {"k", model.structure.k}}},
        {"prior", model.prior.probs},
        {"parameters", params},
        {"config",
         {{"dim", model.config.dim},
          {"batch_size", model.config.batch_size},
          {"epochs", model.config.epochs},
          {"learning_rate", model.config.learning_rate},
          {"init_scale", model.config.init_scale}}},
        {"seed", model.config.seed},
        {"training_loss", model.training_loss},
    };
    return doc.dump(1);
}

TrainedModel model_from_json(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::exception& e) {
        throw ModelFormatError(std::string("model file is not valid JSON: ") + e.what());
    }
    if (!doc.is_object() || !doc.contains("format") || doc["format"] != kMagic)
        throw ModelFormatError("not a model file (missing or wrong format magic)");
    if (!doc.contains("format_version") || !doc["format_version"].is_number_integer())
        throw ModelFormatError("model file has no format_version");
    const int version = doc["format_version"].get<int>();
    if (version != kModelFormatVersion)
        throw ModelFormatError("unsupported model format version " + std::to_string(version) + " (expected " +
                               std::to_string(kModelFormatVersion) + ")");
    try {
        TrainedModel model;
        model.kind = parse_classifier_kind(doc.at("kind").get<std::string>());
        model.k = doc.at("k").get<std::size_t>();

        const auto& dict = doc.at("dictionaries");
        for (const auto& f : dict.at("features")) {
            model.schema.feature_names.push_back(f.at("name").get<std::string>());
            auto values = f.at("values").get<std::vector<std::string>>();
            Alphabet a(values);
            if (a.tokens() != values) throw ModelFormatError("feature dictionary is not sorted and distinct");
            model.schema.features.push_back(std::move(a));
        }
        model.schema.label_name = dict.at("label").at("name").get<std::string>();
        auto labels = dict.at("label").at("values").get<std::vector<std::string>>();
        model.schema.labels = Alphabet(labels);
        if (model.schema.labels.tokens() != labels) throw ModelFormatError("label dictionary is not sorted and distinct");

        std::map<std::string, NumericBins> numeric;
        for (const auto& [name, cuts] : doc.at("preprocessing").at("numeric_bins").items())
            numeric.emplace(name, NumericBins{cuts.get<std::vector<double>>()});
        model.discretizer = Discretizer::from_columns(std::move(numeric));

        const auto& st = doc.at("structure");
        model.structure.order = st.at("order").get<std::vector<std::size_t>>();
        model.structure.parents = st.at("parents").get<std::vector<std::vector<std::size_t>>>();
        model.structure.k = st.at("k").get<std::size_t>();
        if (model.structure.num_features() != model.schema.num_features())
            throw ModelFormatError("structure does not cover the dictionary features");
        model.structure.validate();

        model.prior.probs = doc.at("prior").get<std::vector<double>>();
        if (model.prior.probs.size() != model.schema.labels.size()) throw ModelFormatError("prior has the wrong length");

        const auto& cfg = doc.at("config");
        model.config.dim = cfg.at("dim").get<std::size_t>();
        model.config.batch_size = cfg.at("batch_size").get<std::size_t>();
        model.config.epochs = cfg.at("epochs").get<std::size_t>();
        model.config.learning_rate = cfg.at("learning_rate").get<double>();
        model.config.init_scale = cfg.at("init_scale").get<double>();
        model.config.seed = doc.at("seed").get<std::uint64_t>();
        if (doc.contains("training_loss")) model.training_loss = doc["training_loss"].get<std::vector<double>>();

        const auto& params = doc.at("parameters");
        const auto type = params.at("type").get<std::string>();
        const bool neural_generative = model.kind == ClassifierKind::NeuralKdb || model.kind == ClassifierKind::NeuralNb;
        if (type == "embeddings" && neural_generative) {
            model.params = embeddings_from_json(params, model.schema);
        } else if (type == "cpt" && !is_neural(model.kind)) {
            model.params = cpt_from_json(params, model.schema, model.structure);
        } else if (type == "nn" && model.kind == ClassifierKind::Nn) {
            model.params = nn_from_json(params, model.schema);
        } else {
            throw ModelFormatError("parameter type '" + type + "' does not match classifier kind '" +
                                   std::string(to_string(model.kind)) + "'");
        }
        return model;
    } catch (const json::exception& e) {
        throw ModelFormatError(std::string("malformed model file: ") + e.what());
    } catch (const std::invalid_argument& e) {
        throw ModelFormatError(std::string("malformed model file: ") + e.what());
    } catch (const std::out_of_range& e) {
        throw ModelFormatError(std::string("malformed model file: ") + e.what());
    }
}

void save_model(const TrainedModel& model, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError(path.string() + ": cannot open for writing");
    out << model_to_json(model) << '\n';
    if (!out) throw DataError(path.string() + ": write failed");
}

TrainedModel load_model(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError(path.string() + ": cannot open model file");
    std::stringstream buf;
    buf << in.rdbuf();
    try {
        return model_from_json(buf.str());
    } catch (const ModelFormatError& e) {
        throw ModelFormatError(path.string() + ": " + e.what());
    }
}

}  // namespace nkdb
