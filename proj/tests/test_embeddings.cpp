#include "nkdb/embeddings.hpp"

#include "generators.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

using namespace nkdb;

namespace {

// Child feature 0 with `parents` parent features 1..parents.
struct Case {
    EmbeddingStore store;
    std::vector<Instantiation> batch;
};

Case random_case(testkit::Gen& g, std::size_t dim, std::size_t child_size, std::size_t parents, std::size_t batch) {
    std::vector<std::size_t> sizes{child_size};
    std::vector<std::uint32_t> pf;
    for (std::size_t p = 0; p < parents; ++p) {
        sizes.push_back(g.between(2, 4));
        pf.push_back(static_cast<std::uint32_t>(p + 1));
    }
    Case c{testkit::random_store(g, dim, sizes, 3, 1.0), {}};
    for (std::size_t b = 0; b < batch; ++b) c.batch.push_back(testkit::random_instantiation(g, sizes, 3, 0, pf));
    return c;
}

double batch_loss(const EmbeddingStore& s, const std::vector<Instantiation>& batch) {
    return nll_and_gradient(s, batch).loss;
}

}  // namespace

TEST(AggregateContext, Examples) {
    EmbeddingStore zero(3, {2, 2}, 2);
    const std::vector<ParentValue> ps{{1, 0}};
    EXPECT_EQ(aggregate_context(zero, ps, 1), (std::vector<double>{0, 0, 0}));

    EmbeddingStore s(2, {2}, 2);
    auto vy = s.vector({Role::Label, 0, 1});
    vy[0] = 1;
    vy[1] = 2;
    EXPECT_EQ(aggregate_context(s, {}, 1), (std::vector<double>{1, 2}));

    EmbeddingStore one(1, {2, 2}, 2);
    one.vector({Role::Parent, 1, 1})[0] = 0.5;
    one.vector({Role::Label, 0, 0})[0] = 0.3;
    const std::vector<ParentValue> p1{{1, 1}};
    EXPECT_DOUBLE_EQ(aggregate_context(one, p1, 0)[0], 0.8);
}

TEST(AggregateContext, UnknownParentContributesNothing) {
    testkit::Gen g(1);
    const auto s = testkit::random_store(g, 4, {2, 3}, 2, 1.0);
    const std::vector<ParentValue> unknown{{1, kUnknownValue}};
    EXPECT_EQ(aggregate_context(s, unknown, 1), aggregate_context(s, {}, 1));
}

TEST(AggregateContext, ParentOrderDoesNotMatter) {
    testkit::Gen g(2);
    for (int t = 0; t < 50; ++t) {
        const std::vector<std::size_t> sizes{2, 3, 4, 2};
        const auto s = testkit::random_store(g, 5, sizes, 2, 1.0);
        std::vector<ParentValue> ps;
        for (std::uint32_t f = 1; f < 4; ++f) ps.push_back({f, static_cast<std::uint32_t>(g.below(sizes[f]))});
        auto rev = ps;
        std::reverse(rev.begin(), rev.end());
        const auto a = aggregate_context(s, ps, 0);
        const auto b = aggregate_context(s, rev, 0);
        for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], 1e-15);
    }
}

TEST(ConditionalDistribution, ZeroChildVectorsGiveUniform) {
    EmbeddingStore s(3, {4}, 2);
    s.vector({Role::Label, 0, 0})[1] = 2.0;
    for (auto p : conditional_distribution(s, 0, {}, 0)) EXPECT_DOUBLE_EQ(p, 0.25);
}

TEST(ConditionalDistribution, ScalarLogisticExample) {
    EmbeddingStore s(1, {2, 2}, 2);
    s.vector({Role::Parent, 1, 0})[0] = 0.5;
    s.vector({Role::Label, 0, 0})[0] = 0.3;
    s.vector({Role::Child, 0, 0})[0] = 1.0;
    s.vector({Role::Child, 0, 1})[0] = -1.0;
    const std::vector<ParentValue> ps{{1, 0}};
    const auto p = conditional_distribution(s, 0, ps, 0);
    EXPECT_NEAR(p[0], 0.83202, 1e-5);
    EXPECT_NEAR(p[1], 0.16798, 1e-5);
}

TEST(ConditionalDistribution, SingleValueAlphabet) {
    testkit::Gen g(3);
    const auto s = testkit::random_store(g, 4, {1}, 2, 1.0);
    EXPECT_EQ(conditional_distribution(s, 0, {}, 1), (std::vector<double>{1.0}));
}

TEST(ConditionalDistribution, NormalizedOnRandomStores) {
    testkit::Gen g(4);
    for (int t = 0; t < 1000; ++t) {
        const auto dim = g.between(1, 16);
        const auto sizes = testkit::random_sizes(g, g.between(1, 4), 1, 6);
        const auto s = testkit::random_store(g, dim, sizes, 3, g.uniform(0.01, 20.0));
        std::vector<std::uint32_t> pf;
        for (std::uint32_t f = 1; f < sizes.size(); ++f)
            if (g.coin()) pf.push_back(f);
        const auto inst = testkit::random_instantiation(g, sizes, 3, 0, pf);
        const auto p = conditional_distribution(s, 0, inst.parents, inst.label);
        double sum = 0;
        for (auto v : p) {
            EXPECT_TRUE(std::isfinite(v));
            EXPECT_GE(v, 0.0);
            sum += v;
        }
        EXPECT_NEAR(sum, 1.0, 1e-9);
        const auto lp = log_conditional_distribution(s, 0, inst.parents, inst.label);
        for (std::size_t r = 0; r < p.size(); ++r)
            if (p[r] > 1e-300) EXPECT_NEAR(std::exp(lp[r]), p[r], 1e-12);
    }
}

TEST(ConditionalDistribution, ShiftingChildVectorsChangesNothing) {
    testkit::Gen g(5);
    for (int t = 0; t < 100; ++t) {
        const std::vector<std::size_t> sizes{g.between(2, 5), 3};
        auto s = testkit::random_store(g, 4, sizes, 2, 1.0);
        const std::vector<ParentValue> ps{{1, static_cast<std::uint32_t>(g.below(3))}};
        const auto before = conditional_distribution(s, 0, ps, 1);
        std::vector<double> c(4);
        for (auto& v : c) v = g.uniform(-2, 2);
        for (std::uint32_t r = 0; r < sizes[0]; ++r) {
            auto v = s.vector({Role::Child, 0, r});
            for (std::size_t i = 0; i < 4; ++i) v[i] += c[i];
        }
        const auto after = conditional_distribution(s, 0, ps, 1);
        for (std::size_t r = 0; r < before.size(); ++r) EXPECT_NEAR(before[r], after[r], 1e-9);
    }
}

TEST(Gradient, ZeroStoreSingleInstantiation) {
    EmbeddingStore s(3, {2, 2}, 2);
    const std::vector<Instantiation> batch{{0, 1, {{1, 0}}, 1}};
    const auto lg = nll_and_gradient(s, batch);
    EXPECT_NEAR(lg.loss, std::log(2.0), 1e-15);
    for (std::uint32_t r = 0; r < 2; ++r)
        for (auto v : lg.gradient.at({Role::Child, 0, r})) EXPECT_EQ(v, 0.0);
}

TEST(Gradient, EmptyBatchRejected) {
    EmbeddingStore s(3, {2}, 2);
    EXPECT_THROW(nll_and_gradient(s, {}), std::invalid_argument);
}

TEST(Gradient, MatchesCentralDifferences) {
    testkit::Gen g(6);
    const std::size_t dims[] = {1, 2, 8};
    const std::size_t alphabets[] = {2, 5};
    const std::size_t parent_counts[] = {0, 1, 3};
    for (auto d : dims)
        for (auto a : alphabets)
            for (auto pc : parent_counts) {
                auto c = random_case(g, d, a, pc, 1 + g.below(3));
                const auto lg = nll_and_gradient(c.store, c.batch);
                for (std::size_t idx = 0; idx < c.store.parameters().size(); ++idx) {
                    const double numeric = testkit::central_difference(
                        c.store, idx, 1e-5, [&](const EmbeddingStore& s) { return batch_loss(s, c.batch); });
                    double analytic = 0;
                    for (const auto& id : lg.gradient.ids()) {
                        const auto off = c.store.offset(id);
                        if (idx >= off && idx < off + d) analytic = lg.gradient.at(id)[idx - off];
                    }
                    const double scale = std::max({std::abs(analytic), std::abs(numeric), 1e-6});
                    EXPECT_LT(std::abs(analytic - numeric) / scale, 1e-4)
                        << "d=" << d << " |A|=" << a << " parents=" << pc << " idx=" << idx;
                }
            }
}

TEST(Gradient, DuplicateInstantiationDoubles) {
    testkit::Gen g(7);
    auto c = random_case(g, 4, 3, 2, 1);
    const auto one = nll_and_gradient(c.store, c.batch);
    const std::vector<Instantiation> twice{c.batch[0], c.batch[0]};
    const auto two = nll_and_gradient(c.store, twice);
    EXPECT_DOUBLE_EQ(two.loss, 2 * one.loss);
    EXPECT_EQ(one.gradient.ids(), two.gradient.ids());
    for (const auto& id : one.gradient.ids())
        for (std::size_t i = 0; i < 4; ++i) EXPECT_DOUBLE_EQ(two.gradient.at(id)[i], 2 * one.gradient.at(id)[i]);
}

TEST(Gradient, TouchesOnlyReferencedVectors) {
    testkit::Gen g(8);
    auto c = random_case(g, 2, 3, 1, 1);
    const auto lg = nll_and_gradient(c.store, c.batch);
    // Three child vectors of feature 0, one parent vector, one label vector.
    EXPECT_EQ(lg.gradient.size(), 5u);
    EXPECT_FALSE(lg.gradient.contains({Role::Child, 1, 0}));
    EXPECT_THROW(lg.gradient.at({Role::Child, 1, 0}), std::out_of_range);
}

TEST(SparseGradientOps, ApplyAndClear) {
    EmbeddingStore s(2, {2}, 2);
    SparseGradient grad(s);
    auto slot = grad.slot({Role::Label, 0, 1});
    slot[0] = 1.0;
    slot[1] = -2.0;
    grad.apply(s, 0.5);
    EXPECT_EQ(s.label(1)[0], -0.5);
    EXPECT_EQ(s.label(1)[1], 1.0);
    grad.clear();
    EXPECT_EQ(grad.size(), 0u);
    EXPECT_EQ(grad.slot({Role::Label, 0, 1})[0], 0.0);
}

TEST(Collect, CountsAndMultiplicity) {
    const auto d = testkit::make_dataset({{0, 1, 1}, {0, 1, 1}}, {0, 0}, {2, 2, 2}, 2);
    DependenceStructure s;
    s.order = {0, 1, 2};
    s.parents = {{}, {0}, {0, 1}};
    s.k = 2;
    const auto inst = collect_instantiations(d, s);
    ASSERT_EQ(inst.size(), 6u);
    EXPECT_EQ(inst[0], inst[3]);
    EXPECT_EQ(inst[2].parents, (std::vector<ParentValue>{{0, 0}, {1, 1}}));
    for (const auto& i : collect_instantiations(d, build_empty_structure(3))) EXPECT_TRUE(i.parents.empty());
    EXPECT_THROW(collect_instantiations(d, build_empty_structure(2)), std::invalid_argument);
}

TEST(Train, ZeroEpochsReturnsInitialStore) {
    testkit::Gen g(9);
    const auto d = testkit::random_dataset(g, 30, {2, 3}, 2);
    TrainConfig cfg;
    cfg.epochs = 0;
    cfg.dim = 4;
    const auto r = train(d, build_empty_structure(2), cfg);
    EXPECT_EQ(r.store, initialize_store(d.schema(), cfg));
    EXPECT_TRUE(r.epoch_mean_nll.empty());
    for (auto w : r.store.parameters()) EXPECT_LE(std::abs(w), cfg.init_scale);
}

TEST(Train, DeterministicUnderSeed) {
    testkit::Gen g(10);
    const auto d = testkit::correlated_dataset(g, 80, {2, 3, 3}, 2);
    const auto s = build_kdb_structure(d, 2);
    TrainConfig cfg;
    cfg.dim = 8;
    cfg.epochs = 3;
    const auto a = train(d, s, cfg);
    const auto b = train(d, s, cfg);
    EXPECT_EQ(a.store, b.store);
    EXPECT_EQ(a.epoch_mean_nll, b.epoch_mean_nll);
    cfg.seed = 7;
    EXPECT_NE(train(d, s, cfg).store, a.store);
}

TEST(Train, XorLikeDescends) {
    testkit::Gen g(11);
    std::vector<std::vector<std::uint32_t>> rows;
    std::vector<std::uint32_t> labels;
    for (int r = 0; r < 200; ++r) {
        const auto a = static_cast<std::uint32_t>(g.below(2));
        const auto b = static_cast<std::uint32_t>(g.below(2));
        const std::uint32_t c = g.coin(0.9) ? (a ^ b) : 1 - (a ^ b);
        rows.push_back({a, b, c});
        labels.push_back(g.coin(0.8) ? c : 1 - c);
    }
    const auto d = testkit::make_dataset(rows, labels, {2, 2, 2}, 2);
    const auto r = train(d, build_kdb_structure(d, 2), TrainConfig{});
    ASSERT_EQ(r.epoch_mean_nll.size(), 10u);
    EXPECT_LT(r.epoch_mean_nll.back(), r.initial_mean_nll);
    EXPECT_LT(r.epoch_mean_nll.back(), r.epoch_mean_nll.front());
}

TEST(Train, ConfigValidation) {
    TrainConfig cfg;
    cfg.learning_rate = 0;
    EXPECT_THROW(cfg.validate(), std::invalid_argument);
    cfg = TrainConfig{};
    cfg.batch_size = 0;
    EXPECT_THROW(cfg.validate(), std::invalid_argument);
    cfg = TrainConfig{};
    cfg.dim = 0;
    EXPECT_THROW(cfg.validate(), std::invalid_argument);
}

TEST(Train, DefaultsMatchPublishedSettings) {
    const TrainConfig cfg;
    EXPECT_EQ(cfg.dim, 128u);
    EXPECT_EQ(cfg.batch_size, 32u);
    EXPECT_EQ(cfg.epochs, 10u);
}
