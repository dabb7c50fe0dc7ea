// Acceptance checks 1-8. Prints one PASS/FAIL line per criterion and exits
// nonzero if any fails. Thresholds are fixed here on purpose.

#include "nkdb/classifiers.hpp"
#include "nkdb/embeddings.hpp"
#include "nkdb/evalharness.hpp"
#include "nkdb/infotheory.hpp"
#include "nkdb/model_io.hpp"
#include "nkdb/structure.hpp"
#include "nkdb/tabular.hpp"

#include "generators.hpp"
#include "oracles.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

using namespace nkdb;
namespace fs = std::filesystem;

namespace {

constexpr double kFdEpsilon = 1e-5;
constexpr double kFdRelTol = 1e-4;
constexpr double kFdSeconds = 10.0;
constexpr double kNormTol = 1e-9;
constexpr double kTanWeightTol = 1e-9;
constexpr double kSweepBand = 0.05;

struct Outcome {
    bool pass = true;
    std::string detail;
};

std::string fmt(double v, int digits = 4) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

std::string sci(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.2e", v);
    return buf;
}

const ClassifierKind kAllKinds[] = {ClassifierKind::NeuralKdb, ClassifierKind::NeuralNb, ClassifierKind::Nn,
                                    ClassifierKind::Kdb,       ClassifierKind::Tan,      ClassifierKind::Nb};

double batch_loss(const EmbeddingStore& s, const std::vector<Instantiation>& batch) {
    double total = 0;
    for (const auto& inst : batch) total -= log_conditional_distribution(s, inst.child_feature, inst.parents, inst.label)[inst.child_value];
    return total;
}

Outcome gradient_oracle() {
    const auto start = std::chrono::steady_clock::now();
    testkit::Gen g(101);
    const std::size_t dims[] = {1, 2, 8};
    const std::size_t alphabets[] = {2, 5};
    const std::size_t parent_counts[] = {0, 1, 3};
    double worst = 0;
    std::size_t coords = 0;
    for (int c = 0; c < 100; ++c) {
        const auto d = dims[c % 3];
        const auto a = alphabets[(c / 3) % 2];
        const auto pc = parent_counts[(c / 6) % 3];
        std::vector<std::size_t> sizes(pc + 1, a);
        for (std::size_t i = 1; i < sizes.size(); ++i) sizes[i] = g.between(2, 5);
        const std::size_t labels = g.between(2, 3);
        const auto store = testkit::random_store(g, d, sizes, labels, 0.8);
        std::vector<std::uint32_t> pf;
        for (std::uint32_t p = 1; p <= pc; ++p) pf.push_back(p);
        std::vector<Instantiation> batch;
        const auto batch_size = g.between(1, 3);
        for (std::size_t b = 0; b < batch_size; ++b) batch.push_back(testkit::random_instantiation(g, sizes, labels, 0, pf));

        const auto lg = nll_and_gradient(store, batch);
        std::vector<double> analytic(store.parameters().size(), 0.0);
        for (const auto& id : lg.gradient.ids()) {
            const auto off = store.offset(id);
            const auto v = lg.gradient.at(id);
            std::copy(v.begin(), v.end(), analytic.begin() + static_cast<std::ptrdiff_t>(off));
        }
        for (std::size_t idx = 0; idx < analytic.size(); ++idx) {
            const double numeric = testkit::central_difference(
                store, idx, kFdEpsilon, [&](const EmbeddingStore& s) { return batch_loss(s, batch); });
            const double scale = std::max({std::abs(analytic[idx]), std::abs(numeric), 1e-6});
            worst = std::max(worst, std::abs(analytic[idx] - numeric) / scale);
            ++coords;
        }
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    Outcome o;
    o.pass = worst < kFdRelTol && secs < kFdSeconds;
    o.detail = "100 cases, " + std::to_string(coords) + " coordinates, max rel err " + sci(worst) + ", " + fmt(secs, 2) + " s";
    return o;
}

Outcome normalization() {
    testkit::Gen g(202);
    double worst = 0;
    bool finite = true;
    for (int t = 0; t < 1000; ++t) {
        const auto dim = g.between(1, 32);
        const auto sizes = testkit::random_sizes(g, g.between(1, 5), 1, 8);
        const std::size_t labels = g.between(1, 4);
        const auto store = testkit::random_store(g, dim, sizes, labels, g.uniform(0.01, 30.0));
        const auto child = static_cast<std::uint32_t>(g.below(sizes.size()));
        std::vector<std::uint32_t> pf;
        for (std::uint32_t f = 0; f < sizes.size(); ++f)
            if (f != child && g.coin()) pf.push_back(f);
        auto inst = testkit::random_instantiation(g, sizes, labels, child, pf);
        for (auto& p : inst.parents)
            if (g.coin(0.1)) p.value = kUnknownValue;
        const auto p = conditional_distribution(store, child, inst.parents, inst.label);
        double sum = 0;
        for (auto v : p) {
            finite = finite && std::isfinite(v);
            sum += v;
        }
        worst = std::max(worst, std::abs(sum - 1.0));
    }
    return {finite && worst <= kNormTol, "1000 calls, max |sum-1| " + sci(worst) + (finite ? "" : ", non-finite entry")};
}

double tree_weight(const Dataset& d, const std::vector<std::pair<std::size_t, std::size_t>>& edges) {
    double w = 0;
    for (auto [u, v] : edges) w += testkit::brute_force_cmi(d, u, v);
    return w;
}

Outcome structure_oracle() {
    testkit::Gen g(303);
    int kdb_ok = 0;
    int tan_ok = 0;
    for (int t = 0; t < 50; ++t) {
        const auto m = g.between(1, 6);
        const auto sizes = testkit::random_sizes(g, m, 2, 4);
        const auto n = g.between(10, 200);
        const std::size_t labels = g.between(2, 3);
        const auto d = g.coin(0.7) ? testkit::correlated_dataset(g, n, sizes, labels)
                                   : testkit::random_dataset(g, n, sizes, labels);
        const auto k = g.between(0, 3);
        if (build_kdb_structure(d, k) == testkit::reference_kdb(d, k)) ++kdb_ok;

        const auto tan = build_tan_structure(d);
        std::vector<std::pair<std::size_t, std::size_t>> edges;
        bool shape_ok = true;
        for (std::size_t i = 0; i < m; ++i) {
            if (tan.parents[i].size() > 1) shape_ok = false;
            for (auto p : tan.parents[i]) edges.emplace_back(p, i);
        }
        shape_ok = shape_ok && edges.size() + 1 == m;
        double best = -1;
        for (const auto& tree : testkit::all_spanning_trees(m)) best = std::max(best, tree_weight(d, tree));
        if (shape_ok && std::abs(tree_weight(d, edges) - best) <= kTanWeightTol) ++tan_ok;
    }
    return {kdb_ok == 50 && tan_ok == 50,
            "kdb matches reference " + std::to_string(kdb_ok) + "/50, tan attains max weight " + std::to_string(tan_ok) + "/50"};
}

std::vector<std::vector<std::uint32_t>> all_rows(const std::vector<std::size_t>& sizes) {
    std::vector<std::vector<std::uint32_t>> rows{{}};
    for (auto s : sizes) {
        std::vector<std::vector<std::uint32_t>> next;
        for (const auto& r : rows)
            for (std::uint32_t v = 0; v < s; ++v) {
                auto e = r;
                e.push_back(v);
                next.push_back(e);
            }
        rows = std::move(next);
    }
    return rows;
}

Outcome reductions() {
    testkit::Gen g(404);
    const std::vector<std::size_t> sizes{3, 3, 3};
    const auto rows = all_rows(sizes);
    std::size_t freq_same = 0, neural_same = 0, checked = 0;
    for (std::uint64_t seed : {1u, 42u, 7u}) {
        const auto d = testkit::correlated_dataset(g, 90, sizes, 2);
        TrainConfig cfg;
        cfg.seed = seed;
        const auto kdb = fit(d, ClassifierKind::Kdb, 0, cfg);
        const auto nb = fit(d, ClassifierKind::Nb, 0, cfg);
        const auto nkdb = fit(d, ClassifierKind::NeuralKdb, 0, cfg);
        const auto nnb = fit(d, ClassifierKind::NeuralNb, 0, cfg);
        for (const auto& row : rows) {
            const auto a = predict_encoded(kdb, row);
            const auto b = predict_encoded(nb, row);
            const auto c = predict_encoded(nkdb, row);
            const auto e = predict_encoded(nnb, row);
            if (a.label_index == b.label_index && a.posterior == b.posterior) ++freq_same;
            if (c.label_index == e.label_index && c.posterior == e.posterior) ++neural_same;
            ++checked;
        }
    }
    return {freq_same == checked && neural_same == checked,
            "kdb0==nb " + std::to_string(freq_same) + "/" + std::to_string(checked) + ", neural_kdb0==neural_nb " +
                std::to_string(neural_same) + "/" + std::to_string(checked) + " rows over 3 seeds"};
}

Dataset planted_dataset() {
    testkit::Gen g(505);
    std::vector<std::vector<std::uint32_t>> rows;
    std::vector<std::uint32_t> labels;
    for (int r = 0; r < 200; ++r) {
        const auto y = static_cast<std::uint32_t>(g.below(2));
        const std::uint32_t x0 = g.coin(0.8) ? y : static_cast<std::uint32_t>(g.below(3));
        const std::uint32_t x1 = g.coin(0.85) ? (x0 + y) % 3 : static_cast<std::uint32_t>(g.below(3));
        const std::uint32_t x2 = g.coin(0.85) ? (x0 + x1) % 3 : static_cast<std::uint32_t>(g.below(3));
        rows.push_back({x0, x1, x2});
        labels.push_back(y);
    }
    return testkit::make_dataset(rows, labels, {3, 3, 3}, 2);
}

Outcome descent() {
    const auto d = planted_dataset();
    const TrainConfig cfg;
    const auto a = fit(d, ClassifierKind::NeuralKdb, 2, cfg);
    const auto b = fit(d, ClassifierKind::NeuralKdb, 2, cfg);
    const auto& loss = a.training_loss;
    const bool descends = loss.size() == cfg.epochs && loss.back() < loss.front();
    const bool same = a.params == b.params && model_to_json(a) == model_to_json(b);
    return {descends && same, "epoch mean nll " + fmt(loss.front()) + " -> " + fmt(loss.back()) +
                                  (same ? ", repeat run bit-identical" : ", repeat run differs")};
}

RawTable dataset(const std::string& name) { return load_csv(fs::path(NKDB_DATA_DIR) / (name + ".csv"), "class"); }

std::map<std::string, double> means(const EvalReport& r) {
    std::map<std::string, double> out;
    for (const auto& row : r.aggregates()) out[r.classifiers[row.entry].name()] = row.mean;
    return out;
}

Outcome accuracy() {
    struct Bound {
        std::string dataset, classifier;
        double lo, hi;
    };
    const std::vector<Bound> bounds{
        {"iris", "neural_kdb:2", 0.90, 1.0}, {"iris", "kdb:2", 0.89, 1.0},     {"iris", "nb", 0.86, 1.0},
        {"breast-w", "neural_kdb:2", 0.94, 1.0}, {"breast-w", "nb", 0.95, 1.0},
        {"car", "neural_kdb:2", 0.88, 1.0},  {"car", "nb", 0.80, 0.90},
    };
    const TrainConfig cfg;
    const auto specs = parse_classifier_list("nb,kdb:2,neural_kdb:2", 2, cfg);
    Outcome o;
    std::string current;
    std::map<std::string, double> m;
    for (const auto& b : bounds) {
        if (b.dataset != current) {
            current = b.dataset;
            m = means(evaluate(dataset(b.dataset), specs, SplitSpec{}, PreprocessSpec{}, b.dataset));
        }
        const double v = m.at(b.classifier);
        const bool ok = v >= b.lo && v <= b.hi;
        o.pass = o.pass && ok;
        if (!o.detail.empty()) o.detail += ", ";
        o.detail += b.dataset + " " + b.classifier + " " + fmt(v) + (ok ? "" : " (out of range)");
    }
    return o;
}

Outcome k_sweep() {
    const auto car = dataset("car");
    const std::vector<std::size_t> ks{1, 2, 3, 4};
    std::size_t rows = 0;
    Outcome o;
    for (auto kind : {ClassifierKind::Kdb, ClassifierKind::NeuralKdb}) {
        ClassifierSpec base;
        base.kind = kind;
        const auto report = sweep(car, base, SweepParameter::K, ks, SplitSpec{}, PreprocessSpec{}, "car");
        const auto agg = report.aggregates();
        rows += agg.size();
        std::string line = std::string(to_string(kind)) + " k=1..4:";
        double at2 = 0;
        for (const auto& a : agg)
            if (report.classifiers[a.entry].k == 2) at2 = a.mean;
        for (const auto& a : agg) {
            line += " " + fmt(a.mean);
            if (kind == ClassifierKind::NeuralKdb && std::abs(a.mean - at2) > kSweepBand) o.pass = false;
        }
        o.detail += (o.detail.empty() ? "" : "; ") + line;
    }
    if (rows != 8) o.pass = false;
    o.detail = std::to_string(rows) + " aggregate rows; " + o.detail;
    return o;
}

Outcome round_trip() {
    testkit::Gen g(808);
    const std::vector<std::size_t> sizes{3, 4, 2, 5};
    const auto d = testkit::correlated_dataset(g, 150, sizes, 3);
    const auto path = fs::temp_directory_path() / "nkdb_acceptance_model.json";
    int ok = 0;
    for (auto kind : kAllKinds) {
        const auto model = fit(d, kind, 2, TrainConfig{});
        save_model(model, path);
        const auto back = load_model(path);
        bool same = true;
        for (int r = 0; r < 100; ++r) {
            std::vector<std::uint32_t> row;
            for (auto s : sizes) row.push_back(static_cast<std::uint32_t>(g.below(s)));
            if (predict_encoded(model, row).posterior != predict_encoded(back, row).posterior) same = false;
        }
        if (same) ++ok;
    }
    fs::remove(path);
    return {ok == 6, std::to_string(ok) + "/6 kinds reproduce posteriors on 100 rows"};
}

}  // namespace

int main() {
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"gradient matches finite differences", gradient_oracle},
        {"conditionals are normalized", normalization},
        {"structures match oracles", structure_oracle},
        {"k=0 reductions", reductions},
        {"training descends deterministically", descent},
        {"holdout accuracy", accuracy},
        {"car k-sweep", k_sweep},
        {"model round trip", round_trip},
    };
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        if (!o.pass) ++failed;
        std::printf("criterion %zu %s: %s (%s)\n", i + 1, o.pass ? "PASS" : "FAIL", criteria[i].first.c_str(),
                    o.detail.c_str());
        std::fflush(stdout);
    }
    return failed == 0 ? 0 : 1;
}
