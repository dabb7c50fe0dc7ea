#include "nkdb/evalharness.hpp"

#include "nkdb/errors.hpp"
#include "nkdb/random.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <numeric>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace nkdb {

namespace {

std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

std::size_t effective_k(const ClassifierSpec& c) {
    if (uses_k(c.kind)) return c.k;
    return c.kind == ClassifierKind::Tan ? 1 : 0;
}

}  // namespace

void SplitSpec::validate() const {
    if (repeats < 1) throw std::invalid_argument("repeats must be >= 1");
    if (!(test_fraction > 0.0 && test_fraction < 1.0)) throw std::invalid_argument("test fraction must lie in (0, 1)");
}

Partition make_partition(std::span<const std::string> labels, const SplitSpec& spec, std::size_t repeat) {
    spec.validate();
    const std::size_t n = labels.size();
    if (n < 2) throw DataError("cannot split fewer than 2 rows");
    auto total_test = static_cast<std::size_t>(std::llround(static_cast<double>(n) * spec.test_fraction));
    total_test = std::clamp<std::size_t>(total_test, 1, n - 1);

    Rng rng = Rng::derive(spec.seed, {4, repeat});
    Partition part;
    if (!spec.stratified) {
        std::vector<std::size_t> idx(n);
        std::iota(idx.begin(), idx.end(), 0);
        rng.shuffle(std::span<std::size_t>(idx));
        part.test.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(total_test));
        part.train.assign(idx.begin() + static_cast<std::ptrdiff_t>(total_test), idx.end());
    } else {
        std::map<std::string, std::vector<std::size_t>> by_class;
        for (std::size_t r = 0; r < n; ++r) by_class[labels[r]].push_back(r);
        std::vector<std::vector<std::size_t>*> classes;
        for (auto& [label, rows] : by_class) classes.push_back(&rows);

        std::vector<std::size_t> quota(classes.size());
        std::vector<double> remainder(classes.size());
        std::size_t assigned = 0;
        for (std::size_t c = 0; c < classes.size(); ++c) {
            const std::size_t nc = classes[c]->size();
            const double exact = static_cast<double>(nc) * spec.test_fraction;
            quota[c] = std::min(static_cast<std::size_t>(std::floor(exact)), nc - 1);
            remainder[c] = exact - static_cast<double>(quota[c]);
            assigned += quota[c];
        }
        std::vector<std::size_t> rank(classes.size());
        std::iota(rank.begin(), rank.end(), 0);
        std::stable_sort(rank.begin(), rank.end(), [&](std::size_t a, std::size_t b) { return remainder[a] > remainder[b]; });
        while (assigned < total_test) {
            bool progressed = false;
            for (auto c : rank) {
                if (assigned == total_test) break;
                if (quota[c] + 1 >= classes[c]->size()) continue;
                ++quota[c];
                ++assigned;
                progressed = true;
            }
            if (!progressed) break;
        }
        for (std::size_t c = 0; c < classes.size(); ++c) {
            auto& rows = *classes[c];
            rng.shuffle(std::span<std::size_t>(rows));
            part.test.insert(part.test.end(), rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(quota[c]));
            part.train.insert(part.train.end(), rows.begin() + static_cast<std::ptrdiff_t>(quota[c]), rows.end());
        }
    }
    std::sort(part.train.begin(), part.train.end());
    std::sort(part.test.begin(), part.test.end());
    return part;
}

namespace {

std::vector<std::string> label_tokens(const RawTable& table) {
    std::vector<std::string> out;
    out.reserve(table.num_rows());
    for (std::size_t r = 0; r < table.num_rows(); ++r) {
        const auto& cell = table.cells[r][table.label_column];
        if (!cell) throw DataError("row " + std::to_string(r) + " has no label");
        out.push_back(*cell);
    }
    return out;
}

}  // namespace

std::pair<RawTable, RawTable> split(const RawTable& table, const SplitSpec& spec, std::size_t repeat) {
    const auto labels = label_tokens(table);
    const auto part = make_partition(labels, spec, repeat);
    return {table.subset(part.train), table.subset(part.test)};
}

std::pair<Dataset, Dataset> split(const Dataset& data, const SplitSpec& spec, std::size_t repeat) {
    if (spec.stratified) {
        std::vector<std::size_t> counts(data.num_classes(), 0);
        for (auto y : data.labels()) ++counts[y];
        for (std::size_t c = 0; c < counts.size(); ++c)
            if (counts[c] == 0)
                throw DataError("class '" + data.schema().labels.token(c) + "' has no rows; cannot stratify");
    }
    std::vector<std::string> labels;
    labels.reserve(data.num_rows());
    for (auto y : data.labels()) labels.push_back(data.schema().labels.token(y));
    const auto part = make_partition(labels, spec, repeat);
    return {encode(data.subset(part.train).decode()), data.subset(part.test)};
}

std::string ClassifierSpec::name() const {
    std::string out(to_string(kind));
    if (uses_k(kind)) out += ":" + std::to_string(k);
    return out;
}

std::vector<ClassifierSpec> parse_classifier_list(std::string_view text, std::size_t default_k,
                                                  const TrainConfig& config) {
    std::vector<ClassifierSpec> out;
    std::size_t start = 0;
    while (start <= text.size()) {
        const auto comma = text.find(',', start);
        const auto item = text.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start);
        if (!item.empty()) {
            ClassifierSpec spec;
            spec.config = config;
            spec.k = default_k;
            const auto colon = item.find(':');
            spec.kind = parse_classifier_kind(item.substr(0, colon));
            if (colon != std::string_view::npos) {
                const auto kt = item.substr(colon + 1);
                std::size_t k = 0;
                const auto [ptr, ec] = std::from_chars(kt.data(), kt.data() + kt.size(), k);
                if (ec != std::errc() || ptr != kt.data() + kt.size() || kt.empty())
                    throw std::invalid_argument("bad dependence order in '" + std::string(item) + "'");
                spec.k = k;
            }
            out.push_back(spec);
        }
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    if (out.empty()) throw std::invalid_argument("empty classifier list");
    return out;
}

std::pair<double, double> mean_and_stddev(std::span<const double> values) {
    if (values.empty()) return {0.0, 0.0};
    double sum = 0.0;
    for (auto v : values) sum += v;
    const double mean = sum / static_cast<double>(values.size());
    if (values.size() < 2) return {mean, 0.0};
    double ss = 0.0;
    for (auto v : values) ss += (v - mean) * (v - mean);
    return {mean, std::sqrt(ss / static_cast<double>(values.size() - 1))};
}

std::vector<AggregateRow> EvalReport::aggregates() const {
    std::vector<AggregateRow> out;
    for (std::size_t e = 0; e < classifiers.size(); ++e) {
        std::vector<double> acc;
        for (const auto& r : records)
            if (r.entry == e) acc.push_back(r.accuracy);
        const auto [mean, sd] = mean_and_stddev(acc);
        out.push_back({e, mean, sd});
    }
    return out;
}

void EvalReport::write_csv(std::ostream& out) const {
    const bool is_sweep = !sweep_parameter.empty();
    out << "dataset,classifier,k,repeat,accuracy";
    if (is_sweep) out << ",param,value";
    out << '\n';
    for (const auto& r : records) {
        const auto& c = classifiers[r.entry];
        out << dataset << ',' << to_string(c.kind) << ',' << effective_k(c) << ',' << r.repeat << ','
            << format_double(r.accuracy);
        if (is_sweep) out << ',' << sweep_parameter << ',' << sweep_values[r.entry];
        out << '\n';
    }
}

std::string EvalReport::aggregate_json() const {
    using nlohmann::json;
    json results = json::array();
    const auto aggs = aggregates();
    for (const auto& a : aggs) {
        const auto& c = classifiers[a.entry];
        std::vector<double> acc;
        for (const auto& r : records)
            if (r.entry == a.entry) acc.push_back(r.accuracy);
        json row = {{"classifier", c.name()},
                    {"kind", std::string(to_string(c.kind))},
                    {"k", effective_k(c)},
                    {"mean", a.mean},
                    {"std", a.stddev},
                    {"accuracies", acc}};
        if (is_neural(c.kind))
            row["config"] = {{"dim", c.config.dim},
                             {"batch_size", c.config.batch_size},
                             {"epochs", c.config.epochs},
                             {"learning_rate", c.config.learning_rate},
                             {"init_scale", c.config.init_scale},
                             {"seed", c.config.seed}};
        if (!sweep_parameter.empty()) {
            row["param"] = sweep_parameter;
            row["value"] = sweep_values[a.entry];
        }
        results.push_back(std::move(row));
    }
    json doc = {{"dataset", dataset},
                {"split",
                 {{"repeats", split.repeats},
                  {"test_fraction", split.test_fraction},
                  {"seed", split.seed},
                  {"stratified", split.stratified}}},
                {"preprocess",
                 {{"bins", preprocess.num_bins},
                  {"numeric_threshold", preprocess.numeric_threshold},
                  {"dropped_columns", preprocess.dropped_columns}}},
                {"results", results}};
    return doc.dump(2);
}

AccuracyRecord score(const TrainedModel& model, const RawTable& test) {
    const auto& names = model.schema.feature_names;
    std::vector<std::size_t> columns;
    for (const auto& name : names) {
        const auto c = test.find_column(name);
        if (!c) throw DataError("test data has no column '" + name + "'");
        columns.push_back(*c);
    }
    AccuracyRecord rec;
    rec.total = test.num_rows();
    std::vector<Cell> tokens(names.size());
    for (const auto& row : test.cells) {
        for (std::size_t i = 0; i < columns.size(); ++i) tokens[i] = row[columns[i]];
        const auto pred = predict(model, tokens);
        const auto& truth = row[test.label_column];
        if (truth && *truth == pred.label) ++rec.correct;
    }
    rec.accuracy = rec.total == 0 ? 0.0 : static_cast<double>(rec.correct) / static_cast<double>(rec.total);
    return rec;
}

EvalReport evaluate(const RawTable& table, const std::vector<ClassifierSpec>& classifiers, const SplitSpec& spec,
                    const PreprocessSpec& preprocess, const std::string& dataset_name) {
    spec.validate();
    preprocess.validate();
    if (classifiers.empty()) throw std::invalid_argument("evaluate: no classifiers");
    EvalReport report;
    report.dataset = dataset_name;
    report.preprocess = preprocess;
    report.split = spec;
    report.classifiers = classifiers;

    const RawTable imputed = impute_missing(table);
    std::vector<std::vector<AccuracyRecord>> by_entry(classifiers.size());
    for (std::size_t rep = 0; rep < spec.repeats; ++rep) {
        const auto [train_raw, test_raw] = split(imputed, spec, rep);
        const auto disc = Discretizer::fit(train_raw, preprocess);
        const Dataset train_data = encode(disc.apply(train_raw));
        for (std::size_t e = 0; e < classifiers.size(); ++e) {
            const auto& c = classifiers[e];
            TrainedModel model = fit(train_data, c.kind, c.k, c.config);
            model.discretizer = disc;
            auto rec = score(model, test_raw);
            rec.entry = e;
            rec.repeat = rep;
            by_entry[e].push_back(rec);
        }
    }
    for (auto& recs : by_entry) report.records.insert(report.records.end(), recs.begin(), recs.end());
    return report;
}

SweepParameter parse_sweep_parameter(std::string_view name) {
    if (name == "k") return SweepParameter::K;
    if (name == "dim") return SweepParameter::Dim;
    if (name == "batch") return SweepParameter::Batch;
    if (name == "epochs") return SweepParameter::Epochs;
    throw std::invalid_argument("unknown sweep parameter '" + std::string(name) + "' (expected k, dim, batch or epochs)");
}

std::string_view to_string(SweepParameter p) {
    switch (p) {
        case SweepParameter::K: return "k";
        case SweepParameter::Dim: return "dim";
        case SweepParameter::Batch: return "batch";
        case SweepParameter::Epochs: return "epochs";
    }
    return "?";
}

EvalReport sweep(const RawTable& table, const ClassifierSpec& base, SweepParameter parameter,
                 const std::vector<std::size_t>& values, const SplitSpec& spec, const PreprocessSpec& preprocess,
                 const std::string& dataset_name) {
    if (values.empty()) throw std::invalid_argument("sweep: empty value list");
    if (parameter == SweepParameter::K && !uses_k(base.kind))
        throw std::invalid_argument("sweep: " + std::string(to_string(base.kind)) + " has no dependence order k");
    if (parameter != SweepParameter::K && !is_neural(base.kind))
        throw std::invalid_argument("sweep: " + std::string(to_string(parameter)) + " does not apply to " +
                                    std::string(to_string(base.kind)));

    EvalReport merged;
    merged.dataset = dataset_name;
    merged.preprocess = preprocess;
    merged.split = spec;
    merged.sweep_parameter = std::string(to_string(parameter));
    for (auto v : values) {
        ClassifierSpec c = base;
        switch (parameter) {
            case SweepParameter::K: c.k = v; break;
            case SweepParameter::Dim: c.config.dim = v; break;
            case SweepParameter::Batch: c.config.batch_size = v; break;
            case SweepParameter::Epochs: c.config.epochs = v; break;
        }
        if (parameter != SweepParameter::K && v < 1) throw std::invalid_argument("sweep: values must be >= 1");
        const auto one = evaluate(table, {c}, spec, preprocess, dataset_name);
        const std::size_t entry = merged.classifiers.size();
        merged.classifiers.push_back(c);
        merged.sweep_values.push_back(std::to_string(v));
        for (auto rec : one.records) {
            rec.entry = entry;
            merged.records.push_back(rec);
        }
    }
    return merged;
}

}  // namespace nkdb
