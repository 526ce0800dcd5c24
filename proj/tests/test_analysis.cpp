#include "evonas/analysis.hpp"

#include <gtest/gtest.h>

#include "oracles.hpp"

using namespace evonas;

namespace {

Individual ind(std::int64_t id, const std::string& genes, double intros, double acc, int gen = 0,
               std::vector<std::int64_t> parents = {}) {
    Individual i;
    i.id = id;
    i.encoding = Encoding::parse(genes);
    i.objectives = ObjectiveVector{intros, acc};
    i.generation = gen;
    i.parent_ids = std::move(parents);
    i.status = EvalStatus::Ok;
    return i;
}

}  // namespace

TEST(Motifs, SixtyTwoPerEncoding) {
    EXPECT_EQ(motifs_of(Encoding::parse("0,1,2,3,4,0")).size(), 62u);
}

TEST(Motifs, PlantedCountMotifScoresPerfectCorrelation) {
    // Seven mutually non-dominated members; member k carries exactly k pool
    // operators, and the count grows strictly with the accuracy rank, so every
    // uniform-pool motif has |Spearman| = 1. The size-1 motif with the largest
    // support must come out on top.
    // Non-pool slots carry a fixed mixed jumble so no other operator's count
    // is strictly monotone in rank.
    std::vector<Individual> front;
    const std::array<std::string, 7> genomes = {
        "0,1,4,0,1,4",  // 0 pools
        "2,1,4,0,1,4",  // 1
        "2,2,4,0,1,4",  // 2
        "2,2,2,0,1,4",  // 3
        "2,2,2,2,1,4",  // 4
        "2,2,2,2,2,4",  // 5
        "2,2,2,2,2,2",  // 6
    };
    for (int k = 0; k < 7; ++k)
        front.push_back(ind(k, genomes[k], 2.0 - 0.2 * k, 0.3 + 0.1 * k));
    auto motifs = mine_motifs(front);
    ASSERT_FALSE(motifs.empty());
    EXPECT_DOUBLE_EQ(motifs[0].correlation, 1.0);
    EXPECT_EQ(motifs[0].size, 1);
    EXPECT_EQ(motifs[0].uniform_op(), 2);
    EXPECT_EQ(motifs[0].support, 6);  // members 1..6 match [2,*,*,*,*,*]
    for (const auto& m : motifs) {
        EXPECT_GE(m.support, 3);
        EXPECT_GE(m.correlation, 0.2);
    }
}

TEST(Motifs, ResultIsAParetoSet) {
    Rng rng(61);
    std::vector<Individual> front;
    for (int k = 0; k < 12; ++k) {
        Encoding e;
        for (int g = 0; g < kNumGenes; ++g) e.genes[g] = static_cast<std::uint8_t>(rng.below(5));
        Individual i;
        i.id = k;
        i.encoding = e;
        i.objectives = ObjectiveVector{2.0 - 0.1 * k, 0.3 + 0.05 * k};
        i.status = EvalStatus::Ok;
        front.push_back(i);
    }
    auto motifs = mine_motifs(front);
    for (const auto& a : motifs)
        for (const auto& b : motifs) {
            if (&a == &b) continue;
            const bool ge =
                a.correlation >= b.correlation && a.support >= b.support && a.size <= b.size;
            const bool gt = a.correlation > b.correlation || a.support > b.support || a.size < b.size;
            EXPECT_FALSE(ge && gt) << a.str() << " dominates " << b.str();
        }
}

TEST(Motifs, IdenticalEncodingsYieldNothing) {
    std::vector<Individual> front;
    for (int k = 0; k < 6; ++k) {
        auto i = ind(k, "0,1,2,3,4,0", 1.0 - 0.1 * k, 0.3 + 0.1 * k);
        i.encoding.genes[0] = 0;
        front.push_back(i);
    }
    EXPECT_TRUE(mine_motifs(front).empty());
}

TEST(Motifs, TinyFrontReturnsEmpty) {
    std::vector<Individual> front{ind(0, "0,0,0,0,0,0", 1, 0.5), ind(1, "2,2,2,2,2,2", 0.5, 0.9)};
    EXPECT_TRUE(mine_motifs(front).empty());
}

TEST(OperatorFrequencies, SingleAllConvIndividual) {
    auto table = operator_frequencies({ind(0, "0,0,0,0,0,0", 1, 1)});
    EXPECT_EQ(table[0].first, Op::Conv3x3);
    EXPECT_DOUBLE_EQ(table[0].second, 1.0);
}

TEST(OperatorFrequencies, SumToOneAndDescending) {
    std::vector<Individual> front{ind(0, "0,1,2,3,4,0", 1, 1), ind(1, "2,2,4,4,3,0", 0.5, 0.5)};
    auto table = operator_frequencies(front);
    double total = 0;
    for (size_t i = 0; i < table.size(); ++i) {
        total += table[i].second;
        if (i) EXPECT_LE(table[i].second, table[i - 1].second);
    }
    EXPECT_NEAR(total, 1.0, 1e-12);
    EXPECT_THROW(operator_frequencies({}), ValidationError);
}

TEST(Lineage, GenerationZeroTargetIsSingleton) {
    ParetoArchive archive;
    archive.add(ind(0, "0,0,0,0,0,0", 1, 0.5));
    archive.populations_by_generation = {{0}};
    auto tree = lineage(archive, 0);
    ASSERT_EQ(tree.nodes.size(), 1u);
    EXPECT_EQ(tree.nodes[0].id, 0);
    EXPECT_TRUE(tree.nodes[0].pareto_in_own_generation);
}

TEST(Lineage, ClosureMatchesReverseBfsOracle) {
    ParetoArchive archive;
    archive.add(ind(0, "0,0,0,0,0,0", 1.0, 0.2));
    archive.add(ind(1, "1,0,0,0,0,0", 0.9, 0.4));
    archive.add(ind(2, "2,0,0,0,0,0", 0.8, 0.5, 0));
    archive.add(ind(3, "3,0,0,0,0,0", 0.7, 0.6, 1, {0, 1}));
    archive.add(ind(4, "4,0,0,0,0,0", 0.6, 0.7, 1, {1, 2}));
    archive.add(ind(5, "0,1,0,0,0,0", 0.5, 0.8, 2, {3, 4}));
    archive.populations_by_generation = {{0, 1, 2}, {3, 4}, {5}};

    auto tree = lineage(archive, 5);
    std::set<std::int64_t> got;
    for (const auto& n : tree.nodes) got.insert(n.id);
    // reverse BFS oracle
    std::set<std::int64_t> expect;
    std::vector<std::int64_t> stack{5};
    while (!stack.empty()) {
        auto id = stack.back();
        stack.pop_back();
        if (!expect.insert(id).second) continue;
        for (auto p : archive.by_id(id).parent_ids) stack.push_back(p);
    }
    EXPECT_EQ(got, expect);
    for (const auto& n : tree.nodes)
        if (n.generation > 0) {
            EXPECT_GE(n.parent_ids.size(), 1u);
            EXPECT_LE(n.parent_ids.size(), 2u);
        }
}

TEST(GenerationStats, FrontFlagsAndMedians) {
    ParetoArchive archive;
    archive.add(ind(0, "0,0,0,0,0,0", 1.0, 0.2));
    archive.add(ind(1, "1,0,0,0,0,0", 0.5, 0.8));
    archive.add(ind(2, "2,0,0,0,0,0", 0.2, 0.4));  // dominated by 1
    archive.populations_by_generation = {{0, 1, 2}};
    auto stats = generation_stats(archive);
    ASSERT_EQ(stats.size(), 1u);
    EXPECT_EQ(stats[0].population, 3);
    EXPECT_EQ(stats[0].front_size, 2);
    EXPECT_DOUBLE_EQ(stats[0].max_accuracy, 0.8);
    EXPECT_DOUBLE_EQ(stats[0].median_accuracy, 0.4);
    EXPECT_DOUBLE_EQ(stats[0].max_introspectability, 1.0);
    EXPECT_DOUBLE_EQ(stats[0].front_mean_accuracy, 0.5);
}

TEST(Spearman, MatchesRankThenPearsonOracle) {
    Rng rng(62);
    for (int trial = 0; trial < 40; ++trial) {
        const int n = 5 + rng.below_int(30);
        std::vector<double> x(n), y(n);
        for (int i = 0; i < n; ++i) {
            x[i] = rng.below(8);  // integer values force ties
            y[i] = rng.below(8);
        }
        auto got = spearman(x, y);
        const double want = oracles::spearman_ref(x, y);
        if (std::isnan(want)) {
            EXPECT_FALSE(got.has_value());
        } else if (got.has_value()) {
            EXPECT_NEAR(*got, want, 1e-12);
        }
    }
}

TEST(Pca2d, PlanarMeansPreservePairwiseDistances) {
    // class means living exactly in a 2-D affine subspace of R^6
    Rng rng(63);
    std::vector<double> u(6), v(6);
    for (int j = 0; j < 6; ++j) {
        u[j] = rng.normal();
        v[j] = rng.normal();
    }
    ClassActivationProfile p;
    std::vector<std::array<double, 2>> coords{{0, 0}, {1, 0.2}, {-0.4, 1.3}, {0.7, -0.9}};
    for (const auto& [a, b] : coords) {
        std::vector<double> m(6);
        for (int j = 0; j < 6; ++j) m[j] = 3.0 + a * u[j] + b * v[j];
        p.class_means.push_back(m);
    }
    auto proj = pca2d(p);
    auto dist6 = [&](int a, int b) {
        double s = 0;
        for (int j = 0; j < 6; ++j)
            s += (p.class_means[a][j] - p.class_means[b][j]) * (p.class_means[a][j] - p.class_means[b][j]);
        return std::sqrt(s);
    };
    auto dist2 = [&](int a, int b) {
        const double dx = proj.points[a][0] - proj.points[b][0];
        const double dy = proj.points[a][1] - proj.points[b][1];
        return std::sqrt(dx * dx + dy * dy);
    };
    for (int a = 0; a < 4; ++a)
        for (int b = a + 1; b < 4; ++b) EXPECT_NEAR(dist2(a, b), dist6(a, b), 1e-6);
}

TEST(Pca2d, DuplicateMeansProjectTogether) {
    ClassActivationProfile p;
    p.class_means = {{1, 2, 3}, {1, 2, 3}, {4, 0, 1}, {0, 5, 2}};
    auto proj = pca2d(p);
    EXPECT_NEAR(proj.points[0][0], proj.points[1][0], 1e-9);
    EXPECT_NEAR(proj.points[0][1], proj.points[1][1], 1e-9);
}

TEST(Pca2d, TopEigenvalueMatchesJacobiOracle) {
    Rng rng(64);
    ClassActivationProfile p;
    for (int c = 0; c < 6; ++c) {
        std::vector<double> m(5);
        for (auto& v : m) v = rng.normal();
        p.class_means.push_back(m);
    }
    auto proj = pca2d(p);
    // covariance of the centered means, population scaling
    std::vector<double> mean(5, 0.0);
    for (const auto& m : p.class_means)
        for (int j = 0; j < 5; ++j) mean[j] += m[j] / 6.0;
    std::vector<std::vector<double>> cov(5, std::vector<double>(5, 0.0));
    for (const auto& m : p.class_means)
        for (int a = 0; a < 5; ++a)
            for (int b = 0; b < 5; ++b) cov[a][b] += (m[a] - mean[a]) * (m[b] - mean[b]) / 6.0;
    auto eig = oracles::jacobi_eigenvalues(cov);
    EXPECT_NEAR(proj.eigenvalues[0], eig[0], 1e-8);
    EXPECT_NEAR(proj.eigenvalues[1], eig[1], 1e-8);
}

TEST(Pca2d, ComponentsAreOrthonormal) {
    Rng rng(65);
    ClassActivationProfile p;
    for (int c = 0; c < 5; ++c) {
        std::vector<double> m(9);
        for (auto& v : m) v = rng.normal();
        p.class_means.push_back(m);
    }
    auto proj = pca2d(p);
    double n1 = 0, n2 = 0, dot = 0;
    for (int j = 0; j < 9; ++j) {
        n1 += proj.components[0][j] * proj.components[0][j];
        n2 += proj.components[1][j] * proj.components[1][j];
        dot += proj.components[0][j] * proj.components[1][j];
    }
    EXPECT_NEAR(n1, 1.0, 1e-8);
    EXPECT_NEAR(n2, 1.0, 1e-8);
    EXPECT_NEAR(dot, 0.0, 1e-8);
}

TEST(Pca2d, RankDeficientZeroesSecondComponent) {
    ClassActivationProfile p;
    // collinear means: rank-1 covariance
    p.class_means = {{0, 0, 0}, {1, 1, 1}, {2, 2, 2}};
    auto proj = pca2d(p);
    EXPECT_TRUE(proj.rank_deficient);
    for (const auto& pt : proj.points) EXPECT_EQ(pt[1], 0.0);
    EXPECT_THROW(pca2d(ClassActivationProfile{{{1, 2}, {3, 4}}, {}, {}, {}}), ValidationError);
}

TEST(Ablation, SingleIndividualSingleBucketPerObjective) {
    ParetoArchive archive;
    auto i = ind(0, "0,0,0,0,0,0", 1.0, 0.9);
    i.metrics.train_accuracy = 0.95;
    i.metrics.validation_accuracy = 0.9;
    i.metrics.param_count = 123;
    i.metrics.train_seconds = 4.5;
    archive.add(i);
    auto rows = ablation_table(archive);
    ASSERT_EQ(rows.size(), 2u);  // one bucket per objective
    EXPECT_EQ(rows[0].population, 1);
    EXPECT_NEAR(rows[0].median_generalization_gap, 0.05, 1e-12);
    EXPECT_DOUBLE_EQ(rows[0].median_param_count, 123);
}

TEST(Ablation, BucketsPartitionAndMediansMatchSortOracle) {
    ParetoArchive archive;
    Rng rng(66);
    for (int k = 0; k < 23; ++k) {
        Encoding e;
        e.genes = {static_cast<std::uint8_t>(k % 5), static_cast<std::uint8_t>((k / 5) % 5), 0, 0, 0, 0};
        Individual i;
        i.id = k;
        i.encoding = e;
        i.objectives = ObjectiveVector{rng.uniform(0, 2), rng.uniform()};
        i.metrics.train_accuracy = rng.uniform();
        i.metrics.validation_accuracy = rng.uniform();
        i.metrics.param_count = 100 + rng.below_int(1000);
        i.metrics.train_seconds = rng.uniform(0, 30);
        i.status = EvalStatus::Ok;
        archive.add(i);
    }
    auto rows = ablation_table(archive);
    int accuracy_total = 0, intros_total = 0;
    for (const auto& row : rows) {
        if (row.bucket.rfind("accuracy", 0) == 0) accuracy_total += row.population;
        else intros_total += row.population;
    }
    EXPECT_EQ(accuracy_total, 23);
    EXPECT_EQ(intros_total, 23);

    // check one bucket's median against a sort-based oracle
    std::vector<const Individual*> by_acc;
    for (const auto& i : archive.individuals) by_acc.push_back(&i);
    std::sort(by_acc.begin(), by_acc.end(), [](const Individual* a, const Individual* b) {
        return a->obj().accuracy < b->obj().accuracy;
    });
    std::vector<double> gaps;
    for (size_t r = 0; r < by_acc.size(); ++r)
        if (static_cast<int>(r * 4 / by_acc.size()) == 0)
            gaps.push_back(by_acc[r]->metrics.generalization_gap());
    std::sort(gaps.begin(), gaps.end());
    const double want = gaps.size() % 2 ? gaps[gaps.size() / 2]
                                        : 0.5 * (gaps[gaps.size() / 2 - 1] + gaps[gaps.size() / 2]);
    for (const auto& row : rows)
        if (row.bucket == "accuracy_q1") EXPECT_NEAR(row.median_generalization_gap, want, 1e-12);
}
