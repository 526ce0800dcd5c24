#include <gtest/gtest.h>

#include "evonas/archive.hpp"
#include "evonas/config.hpp"

using namespace evonas;

namespace {

Individual sample_individual(std::int64_t id) {
    Individual ind;
    ind.id = id;
    ind.generation = 2;
    ind.parent_ids = {3, 7};
    ind.encoding = Encoding::parse("0,2,3,1,4,0");
    ind.encoding.genes[5] = static_cast<std::uint8_t>(id % 5);
    ind.objectives = ObjectiveVector{1.04719, 0.9375};
    ind.metrics.train_accuracy = 0.975;
    ind.metrics.validation_accuracy = 0.9375;
    ind.metrics.param_count = 39284;
    ind.metrics.train_seconds = 13.245;
    ind.status = EvalStatus::Ok;
    return ind;
}

}  // namespace

TEST(ArchiveCsv, RoundTrip) {
    ParetoArchive archive;
    archive.add(sample_individual(10));
    archive.add(sample_individual(11));
    Individual failed;
    failed.id = 12;
    failed.generation = 0;
    failed.encoding = Encoding::parse("3,3,0,3,3,0");
    failed.objectives = ObjectiveVector{0, 0};
    failed.status = EvalStatus::Failed;
    archive.add(failed);

    const auto text = archive_csv(archive);
    const auto back = parse_archive_csv(text);
    ASSERT_EQ(back.size(), 3u);
    EXPECT_EQ(back.by_id(10).encoding.str(), "0,2,3,1,4,0");
    EXPECT_EQ(back.by_id(10).parent_ids, (std::vector<std::int64_t>{3, 7}));
    EXPECT_NEAR(back.by_id(10).obj().introspectability, 1.04719, 1e-5);
    EXPECT_EQ(back.by_id(12).status, EvalStatus::Failed);
    EXPECT_EQ(archive_csv(back), text);  // stable bytes
}

TEST(ArchiveCsv, ParseErrorsCarryLineNumbers) {
    const std::string good = std::string(kArchiveHeader) + "\n";
    try {
        parse_archive_csv(good + "1,0,,\"0,0,0,0,0,0\",x,0,0,0,0,ok\n");
        FAIL() << "expected ParseError";
    } catch (const ParseError& ex) {
        EXPECT_NE(std::string(ex.what()).find("line 2"), std::string::npos);
    }
    EXPECT_THROW(parse_archive_csv("id,generation\n"), ParseError);
    EXPECT_THROW(parse_archive_csv(good + "1,0,,\"0,0,0,0,0,0\",0,0,0,0,0\n"), ParseError);
}

TEST(ArchiveCsv, DuplicateEncodingRejected) {
    ParetoArchive archive;
    archive.add(sample_individual(1));
    auto dup = sample_individual(2);
    dup.encoding = archive.by_id(1).encoding;
    EXPECT_THROW(archive.add(dup), ValidationError);
}

TEST(PopulationsCsv, RoundTrip) {
    ParetoArchive archive;
    archive.populations_by_generation = {{0, 1, 2}, {1, 2, 3}};
    const auto text = populations_csv(archive);
    EXPECT_EQ(parse_populations_csv(text), archive.populations_by_generation);
}

TEST(KvFile, ParseAndDefaults) {
    const auto kv = KvFile::parse("a = 1\n# comment\nb=two\n  c  =  3.5  # tail\n");
    EXPECT_EQ(kv.get_int("a", 0), 1);
    EXPECT_EQ(kv.get("b", ""), "two");
    EXPECT_DOUBLE_EQ(kv.get_double("c", 0), 3.5);
    EXPECT_EQ(kv.get_int("missing", 42), 42);
    EXPECT_THROW(KvFile::parse("novalue\n"), ValidationError);
    EXPECT_THROW(kv.get_bool("b", false), ValidationError);
}

TEST(SearchConfig, PaperDefaults) {
    const auto cfg = parse_search_config(KvFile::parse(""));
    EXPECT_EQ(cfg.population_size, 64);
    EXPECT_DOUBLE_EQ(cfg.crossover.p, 0.9);
    EXPECT_DOUBLE_EQ(cfg.crossover.eta, 3.0);
    EXPECT_NEAR(cfg.mutation.p, 1.0 / 6.0, 1e-12);
    EXPECT_DOUBLE_EQ(cfg.mutation.eta, 3.0);
    EXPECT_EQ(cfg.objective_mode, ObjectiveMode::Multi);
    EXPECT_DOUBLE_EQ(cfg.eval.train.learning_rate, 0.1);
    EXPECT_DOUBLE_EQ(cfg.eval.train.momentum, 0.9);
    EXPECT_TRUE(cfg.eval.train.nesterov);
    EXPECT_DOUBLE_EQ(cfg.eval.train.weight_decay, 5e-4);
    EXPECT_DOUBLE_EQ(cfg.eval.train.reg_lambda, 0.0);
    // default reference point (0, 1/N_C)
    EXPECT_DOUBLE_EQ(cfg.hv().acc_ref, 0.25);
    EXPECT_DOUBLE_EQ(cfg.hv().intros_ref, 0.0);
}

TEST(SearchConfig, RegularizerModeEnablesLambda) {
    const auto cfg = parse_search_config(KvFile::parse("objective_mode = multi_reg\n"));
    EXPECT_DOUBLE_EQ(cfg.eval.train.reg_lambda, 0.5);
    const auto plain = parse_search_config(KvFile::parse("objective_mode = multi\nreg_lambda = 0.7\n"));
    EXPECT_DOUBLE_EQ(plain.eval.train.reg_lambda, 0.0);
}

TEST(SearchConfig, FieldLevelValidationErrors) {
    auto expect_message = [](const std::string& text, const std::string& needle) {
        try {
            parse_search_config(KvFile::parse(text));
            FAIL() << "expected ValidationError for " << text;
        } catch (const ValidationError& ex) {
            EXPECT_NE(std::string(ex.what()).find(needle), std::string::npos) << ex.what();
        }
    };
    expect_message("population_size = 1\n", "population_size");
    expect_message("crossover_p = 1.5\n", "crossover_p");
    expect_message("objective_mode = magic\n", "objective_mode");
    expect_message("dataset = tarot\n", "dataset");
    expect_message("hv_reference = 0\n", "hv_reference");
    expect_message("hv_reference = 0,1.0\n", "hv_reference");
    expect_message("epochs = -1\n", "epochs");
    expect_message("introspectability_metric = wordnet\n", "hierarchy");
}

TEST(SearchConfig, SnapshotRoundTrips) {
    const auto cfg = parse_search_config(KvFile::parse(
        "population_size = 16\ngenerations = 8\nseed = 5\nobjective_mode = accuracy_only\n"
        "classes = 3\nsamples = 99\nnoise = 0.125\nepochs = 2\n"));
    const auto kv = search_config_kv(cfg);
    const auto back = parse_search_config(KvFile::parse(kv.serialize()));
    EXPECT_EQ(back.population_size, 16);
    EXPECT_EQ(back.generations, 8);
    EXPECT_EQ(back.objective_mode, ObjectiveMode::AccuracyOnly);
    EXPECT_EQ(back.eval.synthetic.classes, 3);
    EXPECT_EQ(back.eval.synthetic.samples, 99);
    EXPECT_DOUBLE_EQ(back.eval.synthetic.noise, 0.125);
    EXPECT_EQ(search_config_kv(back).serialize(), kv.serialize());
}

TEST(ConfigHash, PinsEvaluatorBehaviorOnly) {
    auto base = parse_search_config(KvFile::parse("seed = 1\n"));
    auto same_eval = parse_search_config(KvFile::parse("seed = 2\ngenerations = 99\n"));
    EXPECT_EQ(config_hash(base), config_hash(same_eval));  // search knobs don't matter
    auto diff_epochs = parse_search_config(KvFile::parse("epochs = 9\n"));
    EXPECT_NE(config_hash(base), config_hash(diff_epochs));
    auto diff_noise = parse_search_config(KvFile::parse("noise = 0.111\n"));
    EXPECT_NE(config_hash(base), config_hash(diff_noise));
    EXPECT_EQ(config_hash_hex(base).size(), 16u);
}

TEST(Manifest, ConfigSnapshotIsParseable) {
    const auto cfg = parse_search_config(KvFile::parse("seed = 3\npopulation_size = 8\n"));
    const auto text = manifest_text(cfg, "2026-01-01T00:00:00", "2026-01-01T00:05:00", 300.0, "out");
    const auto back = parse_search_config(KvFile::parse(text));
    EXPECT_EQ(back.population_size, 8);
    EXPECT_EQ(back.seed, 3u);
    EXPECT_EQ(config_hash(back), config_hash(cfg));
}
