#include "evonas/nsga2.hpp"

#include <gtest/gtest.h>

#include "oracles.hpp"

using namespace evonas;

namespace {

Individual ind(std::int64_t id, double intros, double acc) {
    Individual i;
    i.id = id;
    i.objectives = ObjectiveVector{intros, acc};
    i.status = EvalStatus::Ok;
    i.encoding.genes = {0, 0, 0, 0, 0, 0};
    return i;
}

std::vector<ObjectiveVector> random_objectives(Rng& rng, size_t n) {
    std::vector<ObjectiveVector> out(n);
    for (auto& o : out) {
        o.introspectability = rng.uniform(0, 2);
        o.accuracy = rng.uniform();
    }
    return out;
}

}  // namespace

TEST(Dominance, Examples) {
    EXPECT_TRUE(dominates({0.5, 0.9}, {0.4, 0.8}));
    EXPECT_FALSE(dominates({0.5, 0.9}, {0.5, 0.9}));
    EXPECT_FALSE(dominates({0.6, 0.7}, {0.4, 0.8}));
    EXPECT_FALSE(dominates({0.4, 0.8}, {0.6, 0.7}));
    // equal in one, better in the other
    EXPECT_TRUE(dominates({0.5, 0.9}, {0.5, 0.8}));
}

TEST(Dominance, PartialOrderProperties) {
    Rng rng(11);
    const auto objs = random_objectives(rng, 60);
    for (const auto& a : objs) EXPECT_FALSE(dominates(a, a));
    for (const auto& a : objs)
        for (const auto& b : objs)
            if (dominates(a, b)) {
                EXPECT_FALSE(dominates(b, a));
                EXPECT_EQ(dominates(a, b), oracles::dominates(a, b));
            }
    for (const auto& a : objs)
        for (const auto& b : objs)
            for (const auto& c : objs)
                if (dominates(a, b) && dominates(b, c)) EXPECT_TRUE(dominates(a, c));
}

TEST(NondominatedSort, Examples) {
    std::vector<Individual> pop{ind(0, 2, 2), ind(1, 1, 1), ind(2, 1.5, 0.5)};
    auto fronts = nondominated_sort(pop);
    ASSERT_EQ(fronts.size(), 2u);
    EXPECT_EQ(fronts[0], (std::vector<std::int64_t>{0}));
    EXPECT_EQ(fronts[1], (std::vector<std::int64_t>{1, 2}));

    std::vector<Individual> equal{ind(0, 1, 1), ind(1, 1, 1), ind(2, 1, 1)};
    EXPECT_EQ(nondominated_sort(equal).size(), 1u);

    std::vector<Individual> chain{ind(0, 1, 1), ind(1, 2, 2), ind(2, 3, 3)};
    auto chain_fronts = nondominated_sort(chain);
    ASSERT_EQ(chain_fronts.size(), 3u);
    EXPECT_EQ(chain_fronts[0], (std::vector<std::int64_t>{2}));
    EXPECT_EQ(chain_fronts[2], (std::vector<std::int64_t>{0}));
}

TEST(NondominatedSort, UnevaluatedIsContractViolation) {
    std::vector<Individual> pop{ind(0, 1, 1)};
    pop.push_back({});
    pop.back().id = 1;
    EXPECT_THROW(nondominated_sort(pop), ValidationError);
}

TEST(NondominatedSort, MatchesStripOracle) {
    Rng rng(7);
    for (int trial = 0; trial < 25; ++trial) {
        const size_t n = 1 + rng.below(200);
        auto objs = random_objectives(rng, n);
        if (trial % 3 == 0)  // force ties
            for (size_t i = 0; i + 1 < objs.size(); i += 2) objs[i + 1] = objs[i];
        auto fast = nondominated_sort_indices(objs);
        auto slow = oracles::strip_fronts(objs);
        ASSERT_EQ(fast.size(), slow.size());
        for (size_t f = 0; f < fast.size(); ++f) {
            auto a = fast[f];
            auto b = slow[f];
            std::sort(a.begin(), a.end());
            std::sort(b.begin(), b.end());
            EXPECT_EQ(a, b) << "front " << f;
        }
    }
}

TEST(CrowdingDistance, Examples) {
    const auto inf = std::numeric_limits<double>::infinity();
    EXPECT_EQ(crowding_distance({{1, 1}})[0], inf);
    auto two = crowding_distance({{1, 1}, {2, 0.5}});
    EXPECT_EQ(two[0], inf);
    EXPECT_EQ(two[1], inf);
    // three collinear equally spaced points: middle gets 1 + 1 = 2
    auto three = crowding_distance({{0, 0}, {1, 0.5}, {2, 1}});
    EXPECT_EQ(three[0], inf);
    EXPECT_DOUBLE_EQ(three[1], 2.0);
    EXPECT_EQ(three[2], inf);
}

TEST(CrowdingDistance, ConstantObjectiveContributesNothing) {
    auto d = crowding_distance({{1, 0.2}, {1, 0.5}, {1, 0.9}});
    EXPECT_DOUBLE_EQ(d[1], (0.9 - 0.2) / 0.7);
}

TEST(Sbx, IdenticalParentsYieldIdenticalChildren) {
    Rng rng(3);
    Encoding p;
    p.genes = {1, 2, 3, 4, 0, 2};
    for (int i = 0; i < 200; ++i) {
        auto [c1, c2] = sbx_crossover(p, p, rng);
        EXPECT_EQ(c1, p);
        EXPECT_EQ(c2, p);
    }
}

TEST(Sbx, ZeroProbabilityCopiesParents) {
    Rng rng(4);
    Encoding a, b;
    a.genes = {0, 1, 2, 3, 4, 0};
    b.genes = {4, 3, 2, 1, 0, 4};
    auto [c1, c2] = sbx_crossover(a, b, rng, {0.0, 3.0});
    EXPECT_EQ(c1, a);
    EXPECT_EQ(c2, b);
}

TEST(Sbx, ChildrenAlwaysInRange) {
    Rng rng(5);
    for (int i = 0; i < 100000; ++i) {
        Encoding a, b;
        for (int g = 0; g < kNumGenes; ++g) {
            a.genes[g] = static_cast<std::uint8_t>(rng.below(5));
            b.genes[g] = static_cast<std::uint8_t>(rng.below(5));
        }
        auto [c1, c2] = sbx_crossover(a, b, rng);
        EXPECT_TRUE(c1.valid());
        EXPECT_TRUE(c2.valid());
    }
}

TEST(PolynomialMutation, ZeroProbabilityIsIdentity) {
    Rng rng(6);
    Encoding x;
    x.genes = {0, 4, 2, 1, 3, 0};
    EXPECT_EQ(polynomial_mutation(x, rng, {0.0, 3.0}), x);
}

TEST(PolynomialMutation, OutputInRange) {
    Rng rng(7);
    Encoding x;
    for (int i = 0; i < 100000; ++i) {
        for (int g = 0; g < kNumGenes; ++g) x.genes[g] = static_cast<std::uint8_t>(rng.below(5));
        EXPECT_TRUE(polynomial_mutation(x, rng).valid());
    }
}

TEST(PolynomialMutation, ExpectedApplicationsPerOffspring) {
    // 6 genes at p = 1/6: one application per offspring on average.
    Rng rng(8);
    Encoding x;
    x.genes = {2, 2, 2, 2, 2, 2};
    double total = 0;
    const int trials = 10000;
    for (int i = 0; i < trials; ++i) {
        int applied = 0;
        polynomial_mutation(x, rng, {}, &applied);
        total += applied;
    }
    EXPECT_NEAR(total / trials, 1.0, 0.1);
}

TEST(Survive, FullFrontIsKept) {
    std::vector<Individual> pool;
    for (int i = 0; i < 4; ++i) pool.push_back(ind(i, 1.0 + i * 0.1, 1.0 - i * 0.1));
    for (int i = 4; i < 8; ++i) pool.push_back(ind(i, 0.1, 0.1));
    auto kept = survive(pool, 4);
    ASSERT_EQ(kept.size(), 4u);
    for (const auto& s : kept) EXPECT_LT(s.id, 4);
}

TEST(Survive, TruncationKeepsBoundaryMembers) {
    // One mutually non-dominated front of 5, keep 3: the two extreme points
    // carry infinite crowding distance and must survive.
    std::vector<Individual> pool;
    for (int i = 0; i < 5; ++i) pool.push_back(ind(i, 0.1 * i, 1.0 - 0.1 * i));
    auto kept = survive(pool, 3);
    std::set<std::int64_t> ids;
    for (const auto& s : kept) ids.insert(s.id);
    EXPECT_TRUE(ids.count(0));
    EXPECT_TRUE(ids.count(4));
}

TEST(Survive, MatchesBruteForceOracle) {
    Rng rng(9);
    for (int trial = 0; trial < 60; ++trial) {
        std::vector<Individual> pool;
        for (int i = 0; i < 20; ++i)
            pool.push_back(ind(i, std::round(rng.uniform(0, 2) * 8) / 8.0,
                               std::round(rng.uniform() * 8) / 8.0));
        auto kept = survive(pool, 10);
        std::vector<std::int64_t> ids;
        for (const auto& s : kept) ids.push_back(s.id);
        EXPECT_EQ(ids, oracles::survive_ids(pool, 10));
    }
}

TEST(Survive, PermutationInvariant) {
    Rng rng(10);
    std::vector<Individual> pool;
    for (int i = 0; i < 16; ++i) pool.push_back(ind(i, rng.uniform(0, 2), rng.uniform()));
    auto baseline = survive(pool, 8);
    for (int trial = 0; trial < 10; ++trial) {
        rng.shuffle(pool.begin(), pool.end());
        auto kept = survive(pool, 8);
        ASSERT_EQ(kept.size(), baseline.size());
        for (size_t i = 0; i < kept.size(); ++i) EXPECT_EQ(kept[i].id, baseline[i].id);
    }
}

TEST(AccuracyOnlyMode, ReducesToSingleObjectiveSorting) {
    // With selection ignoring introspectability, fronts are pure accuracy
    // groups regardless of the other axis.
    std::vector<Individual> pop{ind(0, 2.0, 0.3), ind(1, 0.1, 0.9), ind(2, 1.0, 0.6),
                                ind(3, 0.0, 0.9)};
    auto fronts = nondominated_sort(pop, ObjectiveMode::AccuracyOnly);
    ASSERT_EQ(fronts.size(), 3u);
    EXPECT_EQ(fronts[0], (std::vector<std::int64_t>{1, 3}));
    EXPECT_EQ(fronts[1], (std::vector<std::int64_t>{2}));
    EXPECT_EQ(fronts[2], (std::vector<std::int64_t>{0}));
}

TEST(Tournament, PrefersRankThenCrowding) {
    std::vector<Individual> pop{ind(0, 2, 2), ind(1, 1, 1)};
    auto rp = RankedPopulation::build(pop, ObjectiveMode::Multi);
    EXPECT_TRUE(rp.preferred(0, 1));
    EXPECT_FALSE(rp.preferred(1, 0));
}
