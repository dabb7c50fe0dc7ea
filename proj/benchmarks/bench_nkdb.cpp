#include "nkdb/classifiers.hpp"
#include "nkdb/embeddings.hpp"
#include "nkdb/infotheory.hpp"
#include "nkdb/structure.hpp"
#include "nkdb/tabular.hpp"

#include <benchmark/benchmark.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

using namespace nkdb;

namespace {

const std::filesystem::path kCar = std::filesystem::path(NKDB_DATA_DIR) / "car.csv";

const Dataset& car() {
    static const Dataset d = prepare(load_csv(kCar, "class"), PreprocessSpec{});
    return d;
}

// Synthetic dataset with m features of `arity` values and 3 classes.
Dataset synthetic(std::size_t rows, std::size_t m, std::size_t arity) {
    std::mt19937_64 rng(7);
    RawTable t;
    for (std::size_t i = 0; i < m; ++i) t.column_names.push_back("f" + std::to_string(i));
    t.column_names.push_back("class");
    t.label_column = m;
    for (std::size_t r = 0; r < rows; ++r) {
        std::vector<Cell> row;
        const auto y = rng() % 3;
        for (std::size_t i = 0; i < m; ++i) {
            const auto v = rng() % 4 == 0 ? rng() % arity : (y + i) % arity;
            row.emplace_back("v" + std::to_string(v));
        }
        row.emplace_back("c" + std::to_string(y));
        t.cells.push_back(std::move(row));
    }
    return encode(t);
}

}  // namespace

static void BM_LoadCar(benchmark::State& state) {
    std::ifstream f(kCar);
    std::stringstream ss;
    ss << f.rdbuf();
    const auto text = ss.str();
    for (auto _ : state) {
        std::istringstream in(text);
        benchmark::DoNotOptimize(parse_csv(in, "class"));
    }
}
BENCHMARK(BM_LoadCar);

static void BM_CmiMatrix(benchmark::State& state) {
    const auto d = synthetic(2000, static_cast<std::size_t>(state.range(0)), 5);
    for (auto _ : state) benchmark::DoNotOptimize(conditional_mutual_information_matrix(d));
    state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_CmiMatrix)->RangeMultiplier(2)->Range(4, 32)->Complexity(benchmark::oNSquared);

static void BM_KdbStructure(benchmark::State& state) {
    const auto d = synthetic(2000, 16, 5);
    const auto mi = mutual_information_vector(d);
    const auto cmi = conditional_mutual_information_matrix(d);
    for (auto _ : state) benchmark::DoNotOptimize(build_kdb_structure(mi, cmi, static_cast<std::size_t>(state.range(0))));
}
BENCHMARK(BM_KdbStructure)->DenseRange(1, 4);

static void BM_TanStructure(benchmark::State& state) {
    const auto d = synthetic(2000, 16, 5);
    const auto mi = mutual_information_vector(d);
    const auto cmi = conditional_mutual_information_matrix(d);
    for (auto _ : state) benchmark::DoNotOptimize(build_tan_structure(mi, cmi));
}
BENCHMARK(BM_TanStructure);

static void BM_NllAndGradient(benchmark::State& state) {
    const auto& d = car();
    const auto structure = build_kdb_structure(d, 2);
    TrainConfig cfg;
    cfg.dim = static_cast<std::size_t>(state.range(0));
    const auto store = initialize_store(d.schema(), cfg);
    auto insts = collect_instantiations(d, structure);
    insts.resize(cfg.batch_size);
    SparseGradient grad(store);
    for (auto _ : state) {
        grad.clear();
        benchmark::DoNotOptimize(accumulate_nll_gradient(store, insts, grad));
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(insts.size()));
}
BENCHMARK(BM_NllAndGradient)->Arg(16)->Arg(128)->Arg(512);

static void BM_TrainEpochCar(benchmark::State& state) {
    const auto& d = car();
    const auto structure = build_kdb_structure(d, static_cast<std::size_t>(state.range(0)));
    TrainConfig cfg;
    cfg.epochs = 1;
    for (auto _ : state) benchmark::DoNotOptimize(train(d, structure, cfg));
}
BENCHMARK(BM_TrainEpochCar)->Arg(0)->Arg(2)->Unit(benchmark::kMillisecond);

static void BM_Predict(benchmark::State& state) {
    const auto& d = car();
    const auto kind = static_cast<ClassifierKind>(state.range(0));
    TrainConfig cfg;
    cfg.epochs = 1;
    const auto model = fit(d, kind, 2, cfg);
    std::size_t r = 0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(predict_encoded(model, d.row(r)));
        r = (r + 1) % d.num_rows();
    }
    state.SetLabel(std::string(to_string(kind)));
}
BENCHMARK(BM_Predict)->DenseRange(0, 5);

BENCHMARK_MAIN();
