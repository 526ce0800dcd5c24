#include "evonas/search.hpp"

#include <gtest/gtest.h>

#include <set>

using namespace evonas;

namespace {

// Fast deterministic stand-in for the trainer: objectives are pure functions
// of the encoding, so search-loop behavior can be tested in isolation.
EvalOutcome fake_eval(const EvalJob& job) {
    EvalOutcome out;
    out.job_id = job.job_id;
    out.individual_id = job.individual_id;
    out.ok = true;
    const auto [conv, pool] = layer_counts(job.encoding);
    const double h = static_cast<double>(mix64(EncodingHash{}(job.encoding)) % 1000) / 10000.0;
    out.objectives.introspectability = pool / 6.0 + h;
    out.objectives.accuracy = std::min(1.0, conv / 6.0 + h);
    out.metrics.validation_accuracy = out.objectives.accuracy;
    out.metrics.train_accuracy = std::min(1.0, out.objectives.accuracy + 0.05);
    out.metrics.param_count = 100 + conv * 50;
    out.metrics.train_seconds = 0.01 * (1 + conv);
    return out;
}

EvaluateFn fake_evaluator() {
    return [](const std::vector<EvalJob>& jobs) {
        std::vector<EvalOutcome> out;
        for (const auto& j : jobs) out.push_back(fake_eval(j));
        return out;
    };
}

SearchConfig tiny_config(std::uint64_t seed = 1, int pop = 8, int gens = 3) {
    SearchConfig cfg;
    cfg.population_size = pop;
    cfg.generations = gens;
    cfg.seed = seed;
    cfg.search_id = "t" + std::to_string(seed);
    cfg.eval.arch.classes = 4;
    cfg.eval.synthetic.classes = 4;
    return cfg;
}

}  // namespace

TEST(RunSearch, GenerationZeroIsConnectedAndUnique) {
    auto result = run_search(tiny_config(), fake_evaluator());
    const auto& archive = result.archive;
    ASSERT_GE(archive.size(), 8u);
    std::set<std::string> seen;
    for (const auto& ind : archive.individuals) {
        EXPECT_TRUE(is_connected(ind.encoding)) << ind.encoding.str();
        EXPECT_TRUE(seen.insert(ind.encoding.str()).second) << "duplicate " << ind.encoding.str();
        if (ind.generation == 0) EXPECT_TRUE(ind.parent_ids.empty());
        else {
            EXPECT_GE(ind.parent_ids.size(), 1u);
            EXPECT_LE(ind.parent_ids.size(), 2u);
            for (auto p : ind.parent_ids) EXPECT_LT(p, ind.id);
        }
    }
}

TEST(RunSearch, ArchiveGrowsByPopulationSizeEachGeneration) {
    const auto cfg = tiny_config(2, 8, 3);
    auto result = run_search(cfg, fake_evaluator());
    EXPECT_EQ(result.archive.size(), 8u * 4u);  // gen0 + 3 offspring batches
    ASSERT_EQ(result.archive.populations_by_generation.size(), 4u);
    for (const auto& pop : result.archive.populations_by_generation) EXPECT_EQ(pop.size(), 8u);
}

TEST(RunSearch, HypervolumeNonDecreasing) {
    auto result = run_search(tiny_config(3, 10, 5), fake_evaluator());
    ASSERT_EQ(result.hypervolume_by_generation.size(), 6u);
    for (size_t g = 1; g < result.hypervolume_by_generation.size(); ++g)
        EXPECT_GE(result.hypervolume_by_generation[g], result.hypervolume_by_generation[g - 1]);
}

TEST(RunSearch, DeterministicArchiveBytes) {
    const auto cfg = tiny_config(4, 8, 4);
    auto a = run_search(cfg, fake_evaluator());
    auto b = run_search(cfg, fake_evaluator());
    EXPECT_EQ(archive_csv(a.archive), archive_csv(b.archive));
    EXPECT_EQ(populations_csv(a.archive), populations_csv(b.archive));
    auto c = run_search(tiny_config(5, 8, 4), fake_evaluator());
    EXPECT_NE(archive_csv(a.archive), archive_csv(c.archive));
}

TEST(RunSearch, FailedEvaluationsGetWorstObjectivesAndSearchContinues) {
    auto evaluator = [](const std::vector<EvalJob>& jobs) {
        std::vector<EvalOutcome> out;
        for (const auto& j : jobs) {
            auto o = fake_eval(j);
            if (j.individual_id % 3 == 0) {  // fail a third of them
                o.ok = false;
                o.objectives = {};
            }
            out.push_back(o);
        }
        return out;
    };
    auto result = run_search(tiny_config(6, 8, 3), evaluator);
    size_t failed = 0;
    for (const auto& ind : result.archive.individuals) {
        ASSERT_TRUE(ind.evaluated());
        if (ind.status == EvalStatus::Failed) {
            ++failed;
            EXPECT_EQ(ind.obj().introspectability, 0.0);
            EXPECT_EQ(ind.obj().accuracy, 0.0);
        }
    }
    EXPECT_GT(failed, 0u);
    EXPECT_EQ(result.archive.size(), 8u * 4u);
}

TEST(RunSearch, ArchiveWideFrontIsGloballyNonDominated) {
    auto result = run_search(tiny_config(7, 8, 4), fake_evaluator());
    const auto& archive = result.archive;
    ASSERT_FALSE(archive.fronts.empty());
    std::set<std::int64_t> front0(archive.fronts[0].begin(), archive.fronts[0].end());
    size_t total = 0;
    for (const auto& f : archive.fronts) total += f.size();
    EXPECT_EQ(total, archive.size());  // fronts partition the archive
    for (auto id : front0)
        for (const auto& other : archive.individuals)
            EXPECT_FALSE(dominates(other.obj(), archive.by_id(id).obj()))
                << other.id << " dominates front-0 member " << id;
}

TEST(RunSearch, AccuracyOnlyModeRuns) {
    auto cfg = tiny_config(8, 8, 3);
    cfg.objective_mode = ObjectiveMode::AccuracyOnly;
    auto result = run_search(cfg, fake_evaluator());
    EXPECT_EQ(result.archive.size(), 8u * 4u);
    // introspectability is still recorded
    for (const auto& ind : result.archive.individuals)
        if (ind.status == EvalStatus::Ok) EXPECT_GE(ind.obj().introspectability, 0.0);
}

TEST(MakeOffspring, ExhaustsBudgetOnDegenerateOperators) {
    // Identical parents, crossover and mutation disabled: every child collides
    // with the archive.
    SearchConfig cfg = tiny_config(9, 4, 1);
    cfg.crossover.p = 0.0;
    cfg.mutation.p = 0.0;
    Encoding e;
    e.genes = {0, 0, 0, 0, 0, 0};
    ParetoArchive archive;
    std::vector<Individual> pop;
    for (int i = 0; i < 4; ++i) {
        Individual ind;
        ind.id = i;
        Encoding variant = e;
        variant.genes[0] = static_cast<std::uint8_t>(i);  // distinct archive entries
        ind.encoding = i == 0 ? e : variant;
        ind.objectives = ObjectiveVector{0.5, 0.5};
        ind.status = EvalStatus::Ok;
        archive.add(ind);
        pop.push_back(ind);
    }
    Rng rng(9);
    EXPECT_THROW(make_offspring(pop, archive, rng, cfg, 1, 100), SearchError);
}

TEST(RunSearch, EndToEndWithRealEvaluator) {
    // Micro configuration: 2 classes, 8x8, F=2, one epoch.
    SearchConfig cfg;
    cfg.population_size = 4;
    cfg.generations = 1;
    cfg.seed = 10;
    cfg.search_id = "micro";
    cfg.eval.synthetic = SyntheticSpec{2, 40, 8, 8, 1, 0.1, 10};
    cfg.eval.arch.classes = 2;
    cfg.eval.arch.in_channels = 1;
    cfg.eval.arch.height = 8;
    cfg.eval.arch.width = 8;
    cfg.eval.arch.filters = 2;
    cfg.eval.arch.cells_per_stack = 1;
    cfg.eval.train.epochs = 1;
    cfg.eval.train.batch_size = 8;
    LocalEvaluator evaluator(cfg.eval, cfg.search_id, "", 2);
    auto result =
        run_search(cfg, [&](const std::vector<EvalJob>& jobs) { return evaluator(jobs); });
    EXPECT_EQ(result.archive.size(), 8u);
    int ok = 0;
    for (const auto& ind : result.archive.individuals)
        if (ind.status == EvalStatus::Ok) ++ok;
    EXPECT_GT(ok, 0);
}
