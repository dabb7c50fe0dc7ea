#include "nkdb_cli/cli.hpp"

#include "nkdb/classifiers.hpp"
#include "nkdb/errors.hpp"
#include "nkdb/evalharness.hpp"
#include "nkdb/infotheory.hpp"
#include "nkdb/model_io.hpp"
#include "nkdb/structure.hpp"
#include "nkdb/tabular.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>
#include <spdlog/sinks/stdout_sinks.h>
#include <spdlog/spdlog.h>

#include <charconv>
#include <filesystem>
#include <fstream>
#include <memory>
#include <ostream>
#include <sstream>

namespace nkdb::cli {

namespace {

struct Options {
    // data
    std::string data;
    std::string label_col = "class";
    int bins = 5;
    double numeric_threshold = 0.95;
    std::vector<std::string> drop_columns;

    // model
    std::string classifier = "neural_kdb";
    std::size_t k = 2;
    TrainConfig config;

    // files
    std::string model;
    std::string out = "-";
    std::string json;
    bool print_nll = false;

    // evaluation
    std::string classifiers = "nb,kdb:2,neural_kdb:2";
    SplitSpec split;
    bool no_stratify = false;
    std::string param;
    std::vector<std::size_t> values;

    bool structure = false;
    std::string log_level = "info";
};

std::shared_ptr<spdlog::logger> logger() {
    if (auto l = spdlog::get("nkdb")) return l;
    return spdlog::stderr_logger_st("nkdb");
}

std::string fmt_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
    std::string q = "\"";
    for (char c : s) {
        if (c == '"') q += '"';
        q += c;
    }
    return q + '"';
}

std::string join(const std::vector<std::string>& items) {
    std::string s;
    for (std::size_t i = 0; i < items.size(); ++i) s += (i ? "," : "") + items[i];
    return s;
}

void add_data_options(CLI::App& app, Options& o) {
    app.add_option("--data", o.data, "Input CSV with a header row")->required();
    app.add_option("--label-col", o.label_col, "Name of the label column");
    app.add_option("--bins", o.bins, "Equal-frequency bins per numeric column")->check(CLI::Range(2, 1000000));
    app.add_option("--numeric-threshold", o.numeric_threshold,
                   "Fraction of parseable cells that makes a column numeric")
        ->check(CLI::Range(0.0, 1.0));
    app.add_option("--drop-columns", o.drop_columns, "Columns to drop before preprocessing")->delimiter(',');
}

void add_train_options(CLI::App& app, Options& o) {
    app.add_option("--dim", o.config.dim, "Embedding dimension")->check(CLI::PositiveNumber);
    app.add_option("--batch", o.config.batch_size, "Mini-batch size")->check(CLI::PositiveNumber);
    app.add_option("--epochs", o.config.epochs, "Training epochs");
    app.add_option("--lr", o.config.learning_rate, "Gradient step size")->check(CLI::PositiveNumber);
    app.add_option("--init-scale", o.config.init_scale, "Embeddings start uniform in [-s, s]")
        ->check(CLI::PositiveNumber);
    app.add_option("--seed", o.config.seed, "Seed for every random step");
}

void add_split_options(CLI::App& app, Options& o) {
    app.add_option("--repeats", o.split.repeats, "Number of train/test splits")->check(CLI::PositiveNumber);
    app.add_option("--test-frac", o.split.test_fraction, "Fraction of rows held out for testing")
        ->check(CLI::Range(0.0, 1.0));
    app.add_flag("--no-stratify", o.no_stratify, "Plain random splits instead of stratified ones");
    app.add_option("--out", o.out, "Per-repeat accuracy CSV ('-' for stdout)");
    app.add_option("--json", o.json, "Also write aggregate results as JSON to this path");
}

PreprocessSpec preprocess_spec(const Options& o) {
    PreprocessSpec p;
    p.num_bins = o.bins;
    p.numeric_threshold = o.numeric_threshold;
    p.dropped_columns = o.drop_columns;
    return p;
}

RawTable load_table(const Options& o) {
    auto table = load_csv(o.data, o.label_col);
    return drop_columns(table, o.drop_columns);
}

std::string dataset_name(const std::string& path) { return std::filesystem::path(path).stem().string(); }

// Writes through `out` for "-", otherwise to the named file.
template <typename F>
void write_output(const std::string& path, std::ostream& out, F&& body) {
    if (path == "-" || path.empty()) {
        body(out);
        return;
    }
    std::ofstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot open '" + path + "' for writing");
    body(f);
    if (!f) throw DataError("failed writing '" + path + "'");
}

void log_common(const Options& o) {
    auto log = logger();
    log->info("data={} label_col={} bins={} numeric_threshold={} drop_columns=[{}]", o.data, o.label_col, o.bins,
              fmt_double(o.numeric_threshold), join(o.drop_columns));
}

void log_config(const TrainConfig& c) {
    logger()->info("dim={} batch={} epochs={} lr={} init_scale={} seed={}", c.dim, c.batch_size, c.epochs,
                   fmt_double(c.learning_rate), fmt_double(c.init_scale), c.seed);
}

int cmd_train(const Options& o, std::ostream& out) {
    const auto kind = parse_classifier_kind(o.classifier);
    log_common(o);
    logger()->info("classifier={} k={} model={}", to_string(kind), o.k, o.model);
    log_config(o.config);

    const auto spec = preprocess_spec(o);
    spec.validate();
    const auto imputed = impute_missing(load_table(o));
    const auto disc = Discretizer::fit(imputed, spec);
    const auto data = encode(disc.apply(imputed));
    logger()->info("{} rows, {} features, {} classes", data.num_rows(), data.num_features(), data.num_classes());

    auto model = fit(data, kind, o.k, o.config);
    model.discretizer = disc;
    save_model(model, o.model);
    if (o.print_nll) {
        out << "epoch,mean_nll\n";
        for (std::size_t e = 0; e < model.training_loss.size(); ++e)
            out << e + 1 << ',' << fmt_double(model.training_loss[e]) << '\n';
    }
    logger()->info("model written to {}", o.model);
    return 0;
}

int cmd_predict(const Options& o, std::ostream& out) {
    logger()->info("model={} data={} out={}", o.model, o.data, o.out);
    const auto model = load_model(o.model);
    const auto table = load_csv(o.data, "");
    std::vector<std::size_t> columns;
    for (const auto& name : model.schema.feature_names) {
        const auto c = table.find_column(name);
        if (!c) throw DataError(o.data + ": column '" + name + "' required by the model is missing");
        columns.push_back(*c);
    }
    write_output(o.out, out, [&](std::ostream& os) {
        os << "row_index,predicted_label";
        for (const auto& label : model.schema.labels.tokens()) os << ',' << csv_field(label);
        os << '\n';
        std::vector<Cell> tokens(columns.size());
        for (std::size_t r = 0; r < table.num_rows(); ++r) {
            for (std::size_t i = 0; i < columns.size(); ++i) tokens[i] = table.cells[r][columns[i]];
            const auto pred = predict(model, tokens);
            os << r << ',' << csv_field(pred.label);
            for (auto p : pred.posterior) os << ',' << fmt_double(p);
            os << '\n';
        }
    });
    return 0;
}

void emit_report(const Options& o, const EvalReport& report, std::ostream& out) {
    write_output(o.out, out, [&](std::ostream& os) { report.write_csv(os); });
    if (!o.json.empty()) write_output(o.json, out, [&](std::ostream& os) { os << report.aggregate_json() << '\n'; });
    for (const auto& a : report.aggregates()) {
        std::string label = report.classifiers[a.entry].name();
        if (!report.sweep_parameter.empty())
            label = std::string(to_string(report.classifiers[a.entry].kind)) + " " + report.sweep_parameter + "=" +
                    report.sweep_values[a.entry];
        logger()->info("{}: mean={} std={}", label, fmt_double(a.mean), fmt_double(a.stddev));
    }
}

SplitSpec split_spec(const Options& o) {
    SplitSpec s = o.split;
    s.seed = o.config.seed;
    s.stratified = !o.no_stratify;
    return s;
}

int cmd_eval(const Options& o, std::ostream& out) {
    const auto classifiers = parse_classifier_list(o.classifiers, o.k, o.config);
    const auto split = split_spec(o);
    log_common(o);
    logger()->info("classifiers={} repeats={} test_frac={} stratified={}", o.classifiers, split.repeats,
                   fmt_double(split.test_fraction), split.stratified);
    log_config(o.config);
    const auto report = evaluate(load_table(o), classifiers, split, preprocess_spec(o), dataset_name(o.data));
    emit_report(o, report, out);
    return 0;
}

int cmd_sweep(const Options& o, std::ostream& out) {
    ClassifierSpec base{parse_classifier_kind(o.classifier), o.k, o.config};
    const auto param = parse_sweep_parameter(o.param);
    const auto split = split_spec(o);
    std::vector<std::string> values;
    for (auto v : o.values) values.push_back(std::to_string(v));
    log_common(o);
    logger()->info("classifier={} k={} param={} values=[{}] repeats={} test_frac={} stratified={}",
                   to_string(base.kind), o.k, o.param, join(values), split.repeats, fmt_double(split.test_fraction),
                   split.stratified);
    log_config(o.config);
    const auto report = sweep(load_table(o), base, param, o.values, split, preprocess_spec(o), dataset_name(o.data));
    emit_report(o, report, out);
    return 0;
}

int cmd_inspect(const Options& o, std::ostream& out) {
    log_common(o);
    const auto spec = preprocess_spec(o);
    const auto data = prepare(load_table(o), spec);
    const auto& names = data.schema().feature_names;
    const auto mi = mutual_information_vector(data);

    if (!o.structure) {
        const auto cmi = conditional_mutual_information_matrix(data);
        write_output(o.out, out, [&](std::ostream& os) {
            os << "feature,mi\n";
            for (std::size_t i = 0; i < names.size(); ++i) os << csv_field(names[i]) << ',' << fmt_double(mi[i]) << '\n';
            os << "\ncmi";
            for (const auto& n : names) os << ',' << csv_field(n);
            os << '\n';
            for (std::size_t i = 0; i < names.size(); ++i) {
                os << csv_field(names[i]);
                for (std::size_t j = 0; j < names.size(); ++j) os << ',' << fmt_double(cmi(i, j));
                os << '\n';
            }
        });
        return 0;
    }

    const auto kind = parse_classifier_kind(o.classifier);
    logger()->info("structure of classifier={} k={}", to_string(kind), o.k);
    DependenceStructure s;
    switch (kind) {
        case ClassifierKind::Kdb:
        case ClassifierKind::NeuralKdb: s = build_kdb_structure(data, o.k); break;
        case ClassifierKind::Tan: s = build_tan_structure(data); break;
        default: s = build_empty_structure(data.num_features()); break;
    }
    nlohmann::ordered_json adj = nlohmann::ordered_json::object();
    for (auto i : s.order) {
        auto parents = nlohmann::ordered_json::array();
        for (auto p : s.parents[i]) parents.push_back(names[p]);
        adj[names[i]] = parents;
    }
    write_output(o.out, out, [&](std::ostream& os) { os << s.to_text(names) << adj.dump() << '\n'; });
    return 0;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    Options o;
    CLI::App app{"NeuralKDB and baseline Bayesian network classifiers for tabular data", "nkdb"};
    app.option_defaults()->always_capture_default();
    app.require_subcommand(1);
    app.fallthrough();
    app.add_option("--log-level", o.log_level, "trace, debug, info, warn, error or off")
        ->check(CLI::IsMember({"trace", "debug", "info", "warn", "error", "off"}));

    auto* train = app.add_subcommand("train", "Fit a classifier and save it as JSON");
    add_data_options(*train, o);
    train->add_option("--classifier", o.classifier, "neural_kdb, neural_nb, nn, kdb, tan or nb");
    train->add_option("--k", o.k, "Dependence order");
    add_train_options(*train, o);
    train->add_option("--model", o.model, "Output model file")->required();
    train->add_flag("--print-nll", o.print_nll, "Print per-epoch mean training loss as CSV");

    auto* predict_cmd = app.add_subcommand("predict", "Classify rows with a saved model");
    predict_cmd->add_option("--model", o.model, "Model file written by train")->required();
    predict_cmd->add_option("--data", o.data, "CSV with the model's feature columns")->required();
    predict_cmd->add_option("--out", o.out, "Prediction CSV ('-' for stdout)");

    auto* eval = app.add_subcommand("eval", "Repeated holdout accuracy of several classifiers");
    add_data_options(*eval, o);
    eval->add_option("--classifiers", o.classifiers, "Comma list of kind[:k] entries");
    eval->add_option("--k", o.k, "Dependence order for entries without ':k'");
    add_train_options(*eval, o);
    add_split_options(*eval, o);

    auto* sweep_cmd = app.add_subcommand("sweep", "Repeated holdout over a range of one setting");
    add_data_options(*sweep_cmd, o);
    sweep_cmd->add_option("--classifier", o.classifier, "Classifier kind");
    sweep_cmd->add_option("--k", o.k, "Dependence order when not swept");
    sweep_cmd->add_option("--param", o.param, "k, dim, batch or epochs")->required();
    sweep_cmd->add_option("--values", o.values, "Comma list of values")->required()->delimiter(',');
    add_train_options(*sweep_cmd, o);
    add_split_options(*sweep_cmd, o);

    auto* inspect = app.add_subcommand("inspect", "Print MI/CMI tables or a learned structure");
    add_data_options(*inspect, o);
    inspect->add_flag("--structure", o.structure, "Print the dependence structure instead of MI/CMI");
    inspect->add_option("--classifier", o.classifier, "Structure family: kdb, tan or nb");
    inspect->add_option("--k", o.k, "Dependence order");
    inspect->add_option("--out", o.out, "Output path ('-' for stdout)");

    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    if (argv.empty()) argv.push_back("nkdb");
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        app.exit(e, out, err);
        CLI::App* sub = app.get_subcommands().empty() ? &app : app.get_subcommands().front();
        err << sub->help();
        return 1;
    }

    auto log = logger();
    log->set_level(spdlog::level::from_str(o.log_level));
    try {
        if (train->parsed()) return cmd_train(o, out);
        if (predict_cmd->parsed()) return cmd_predict(o, out);
        if (eval->parsed()) return cmd_eval(o, out);
        if (sweep_cmd->parsed()) return cmd_sweep(o, out);
        if (inspect->parsed()) return cmd_inspect(o, out);
    } catch (const DataError& e) {
        err << "error: " << e.what() << '\n';
        return 2;
    } catch (const ModelFormatError& e) {
        err << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::invalid_argument& e) {
        err << "usage error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 2;
    }
    return 1;
}

}  // namespace nkdb::cli
