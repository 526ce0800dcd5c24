#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "evonas/analysis.hpp"
#include "evonas/calibration.hpp"
#include "evonas/evaluator.hpp"
#include "evonas/svg.hpp"

namespace evonas {

// ---------------------------------------------------------------------------
// Search report: front, hypervolume, motifs, frequencies, ablation, evolution
// curves, lineages, scatter, PCA projections for the extreme front members.
// ---------------------------------------------------------------------------

struct ReportResult {
    double hypervolume = 0.0;
    std::vector<std::int64_t> front_ids;
    std::vector<std::filesystem::path> written;
};

inline std::string front_csv(const ParetoArchive& archive, const std::vector<std::int64_t>& front) {
    std::string out = "id,encoding,introspectability,accuracy,conv_count,pool_count\n";
    for (auto id : front) {
        const auto& ind = archive.by_id(id);
        const auto [conv, pool] = layer_counts(ind.encoding);
        out += std::to_string(id) + ',' + csv_field(ind.encoding.str()) + ',' +
               fmt_g(ind.obj().introspectability) + ',' + fmt_g(ind.obj().accuracy) + ',' +
               std::to_string(conv) + ',' + std::to_string(pool) + '\n';
    }
    return out;
}

inline std::string fronts_csv(const ParetoArchive& archive) {
    std::string out = "rank,id\n";
    for (size_t r = 0; r < archive.fronts.size(); ++r)
        for (auto id : archive.fronts[r]) out += std::to_string(r) + ',' + std::to_string(id) + '\n';
    return out;
}

inline ReportResult write_report(const ParetoArchive& archive, const HypervolumeConfig& hv_cfg,
                                 const std::filesystem::path& out_dir,
                                 const std::filesystem::path& results_dir = {},
                                 const std::string& search_id = {}) {
    ReportResult result;
    auto emit = [&](const std::filesystem::path& rel, const std::string& content) {
        const auto path = out_dir / rel;
        write_file(path, content);
        result.written.push_back(path);
    };

    std::vector<Individual> evaluated;
    std::vector<ObjectiveVector> all_objs;
    for (const auto& ind : archive.individuals)
        if (ind.evaluated()) {
            evaluated.push_back(ind);
            all_objs.push_back(ind.obj());
        }
    if (evaluated.empty()) throw ValidationError("report: archive has no evaluated individuals");

    auto fronts = nondominated_sort(evaluated);
    result.front_ids = fronts[0];
    std::vector<Individual> front;
    std::vector<ObjectiveVector> front_objs;
    for (auto id : result.front_ids) {
        front.push_back(archive.by_id(id));
        front_objs.push_back(archive.by_id(id).obj());
    }
    result.hypervolume = hypervolume(front_objs, hv_cfg);

    emit("front.csv", front_csv(archive, result.front_ids));
    emit("hypervolume.txt", fmt_g(result.hypervolume, 12) + "\n");

    {
        std::string csv = "motif,size,support,correlation\n";
        for (const auto& m : mine_motifs(front))
            csv += csv_field(m.str()) + ',' + std::to_string(m.size) + ',' + std::to_string(m.support) +
                   ',' + fmt_g(m.correlation) + '\n';
        emit("motifs.csv", csv);
    }
    {
        std::string csv = "operation,normalized_frequency\n";
        for (const auto& [op, freq] : operator_frequencies(front))
            csv += std::string(op_name(op)) + ',' + fmt_g(freq) + '\n';
        emit("operator_frequencies.csv", csv);
    }
    {
        std::string csv = "bucket,population,median_generalization_gap,median_param_count,median_train_seconds\n";
        for (const auto& row : ablation_table(archive))
            csv += row.bucket + ',' + std::to_string(row.population) + ',' +
                   fmt_g(row.median_generalization_gap) + ',' + fmt_g(row.median_param_count) + ',' +
                   fmt_g(row.median_train_seconds) + '\n';
        emit("ablation.csv", csv);
    }
    if (!archive.populations_by_generation.empty()) {
        std::string csv =
            "generation,population,front_size,max_accuracy,median_accuracy,"
            "max_introspectability,median_introspectability,front_mean_accuracy,"
            "front_ci95_accuracy,front_mean_introspectability,front_ci95_introspectability\n";
        for (const auto& s : generation_stats(archive))
            csv += std::to_string(s.generation) + ',' + std::to_string(s.population) + ',' +
                   std::to_string(s.front_size) + ',' + fmt_g(s.max_accuracy) + ',' +
                   fmt_g(s.median_accuracy) + ',' + fmt_g(s.max_introspectability) + ',' +
                   fmt_g(s.median_introspectability) + ',' + fmt_g(s.front_mean_accuracy) + ',' +
                   fmt_g(s.front_ci95_accuracy) + ',' + fmt_g(s.front_mean_introspectability) + ',' +
                   fmt_g(s.front_ci95_introspectability) + '\n';
        emit("evolution.csv", csv);

        std::string csv2 = "target_id,id,generation,parent_ids,introspectability,accuracy,pareto_in_own_generation\n";
        for (auto target : result.front_ids) {
            for (const auto& node : lineage(archive, target).nodes) {
                std::string parents;
                for (size_t i = 0; i < node.parent_ids.size(); ++i) {
                    if (i) parents += ';';
                    parents += std::to_string(node.parent_ids[i]);
                }
                csv2 += std::to_string(target) + ',' + std::to_string(node.id) + ',' +
                        std::to_string(node.generation) + ',' + parents + ',' +
                        fmt_g(node.objectives.introspectability) + ',' + fmt_g(node.objectives.accuracy) +
                        ',' + (node.pareto_in_own_generation ? "1" : "0") + '\n';
            }
        }
        emit("lineage.csv", csv2);
    }
    emit("pareto.svg", pareto_svg(all_objs, front_objs, hv_cfg));

    // PCA of the class means for the extreme-introspectability front members,
    // when their activation profiles were saved.
    if (!results_dir.empty()) {
        auto by_intros = [&](bool highest) {
            std::int64_t best = result.front_ids[0];
            for (auto id : result.front_ids) {
                const double v = archive.by_id(id).obj().introspectability;
                const double c = archive.by_id(best).obj().introspectability;
                if (highest ? v > c : v < c) best = id;
            }
            return best;
        };
        for (bool highest : {true, false}) {
            const auto id = by_intros(highest);
            const auto profile_path = artifact_dir(results_dir, search_id, id) / "profile.csv";
            if (!std::filesystem::exists(profile_path)) continue;
            auto profile = parse_profile_csv(read_file(profile_path));
            if (profile.classes() < 3) continue;
            auto proj = pca2d(profile);
            std::string csv = "class,x,y\n";
            for (int c = 0; c < profile.classes(); ++c)
                csv += std::to_string(c) + ',' + fmt_g(proj.points[c][0]) + ',' +
                       fmt_g(proj.points[c][1]) + '\n';
            emit(highest ? "pca_highest_introspectability.csv" : "pca_lowest_introspectability.csv",
                 csv);
        }
    }
    return result;
}

// ---------------------------------------------------------------------------
// Debugging session over a trained model from a finished run.
// ---------------------------------------------------------------------------

struct DebugOptions {
    double corruption_rate = 20.0;  // percent
    std::vector<double> percentiles;  // default 0,5,...,95
    bool run_repair = true;
    std::pair<int, int> repair_pair{-1, -1};  // default: top-ranked confounded pair
    double repair_weight = 25.0;
    double repair_lambda = 0.5;
    double repair_lr = 0.001;
    int repair_epochs = 5;
    std::uint64_t seed = 1;

    std::vector<double> effective_percentiles() const {
        if (!percentiles.empty()) return percentiles;
        std::vector<double> out;
        for (int p = 0; p < 100; p += 5) out.push_back(p);
        return out;
    }
};

/// Flips `rate` percent of the labels (seeded choice of samples) uniformly to
/// a different class. Returns the corrupted labels and the mask.
inline std::pair<std::vector<int>, std::vector<char>> corrupt_labels(const std::vector<int>& labels,
                                                                     int classes, double rate_percent,
                                                                     std::uint64_t seed) {
    std::vector<int> corrupted = labels;
    std::vector<char> mask(labels.size(), 0);
    const auto n_corrupt = static_cast<size_t>(labels.size() * rate_percent / 100.0);
    std::vector<size_t> idx(labels.size());
    std::iota(idx.begin(), idx.end(), size_t{0});
    Rng rng(mix64(seed ^ 0xc0bb1edull));
    rng.shuffle(idx.begin(), idx.end());
    for (size_t i = 0; i < n_corrupt && i < idx.size(); ++i) {
        const size_t s = idx[i];
        const int offset = 1 + rng.below_int(classes - 1);
        corrupted[s] = (labels[s] + offset) % classes;
        mask[s] = 1;
    }
    return {corrupted, mask};
}

inline std::string reliability_csv(const CalibrationReport& r) {
    std::string out = "bin_lo,bin_hi,count,mean_confidence,accuracy\n";
    for (int b = 0; b < kCalibrationBins; ++b) {
        const auto& bin = r.bins[b];
        out += fmt_g(static_cast<double>(b) / kCalibrationBins) + ',' +
               fmt_g(static_cast<double>(b + 1) / kCalibrationBins) + ',' + std::to_string(bin.count) +
               ',' + (bin.count ? fmt_g(bin.mean_confidence) : "") + ',' +
               (bin.count ? fmt_g(bin.accuracy) : "") + '\n';
    }
    return out;
}

inline std::string curve_csv(const std::vector<PercentilePoint>& pts, const char* value_name) {
    std::string out = std::string("percentile,") + value_name + "\n";
    for (const auto& p : pts) out += fmt_g(p.percentile) + ',' + fmt_g(p.value) + '\n';
    return out;
}

struct DebugResult {
    CalibrationReport activation_report, softmax_report;
    BugLocalization localization;
    std::optional<RepairReport> repair_report;
    std::pair<int, int> repaired_pair{-1, -1};
    std::vector<std::filesystem::path> written;
};

/// Runs the full data/model debugging pipeline against the model stored for
/// `individual_id`: both calibration methods on the held-out test split,
/// misprediction and corrupted-label curves, confusion-vs-distance
/// localization, and (optionally) targeted repair.
inline DebugResult run_debug_session(const SearchConfig& cfg, const std::filesystem::path& run_dir,
                                     std::int64_t individual_id, const DebugOptions& opts) {
    const auto model_path =
        artifact_dir(run_dir / "results", cfg.search_id, individual_id) / "model.bin";
    if (!std::filesystem::exists(model_path))
        throw IoError("missing model file " + model_path.string());

    Dataset ds = build_dataset(cfg.eval);
    ArchConfig arch = cfg.eval.arch;
    arch.classes = ds.classes;
    arch.in_channels = ds.channels;
    arch.height = ds.height;
    arch.width = ds.width;
    Model<float> model = deserialize_model<float>(read_file(model_path), arch);

    DebugResult result;
    const auto out_dir = run_dir / ("debug_" + std::to_string(individual_id));
    auto emit = [&](const std::string& name, const std::string& content) {
        const auto path = out_dir / name;
        write_file(path, content);
        result.written.push_back(path);
    };

    // Train-split class means; held-out per-sample activations and softmax.
    auto train_profile = capture_activations(model, ds.train_x, ds.train_y, ds.classes, false);
    auto test_profile = capture_activations(model, ds.test_x, ds.test_y, ds.classes, true);

    std::vector<int> predictions;
    std::vector<std::vector<double>> probabilities;
    {
        Tensor<float> batch;
        for (int start = 0; start < ds.test_x.n; start += 64) {
            const int n = std::min(64, ds.test_x.n - start);
            batch.resize(n, ds.channels, ds.height, ds.width);
            std::copy_n(ds.test_x.data() + static_cast<size_t>(start) * ds.test_x.sample_size(),
                        batch.v.size(), batch.data());
            const auto& logits = model.forward(batch, false);
            Tensor<float> probs;
            std::vector<int> dummy(n, 0);
            SoftmaxXent<float>::forward(logits, dummy, probs);
            auto pred = model.predict_labels();
            predictions.insert(predictions.end(), pred.begin(), pred.end());
            for (int i = 0; i < n; ++i)
                probabilities.emplace_back(probs.data() + static_cast<size_t>(i) * probs.c,
                                           probs.data() + static_cast<size_t>(i + 1) * probs.c);
        }
    }

    result.activation_report = activation_calibration(train_profile.class_means,
                                                      test_profile.sample_rows, predictions, ds.test_y);
    result.softmax_report = softmax_calibration(probabilities, predictions, ds.test_y);
    emit("calibration_activation.csv", reliability_csv(result.activation_report));
    emit("calibration_softmax.csv", reliability_csv(result.softmax_report));

    const auto percentiles = opts.effective_percentiles();
    emit("misprediction_delta.csv",
         curve_csv(identify_mispredictions(result.activation_report, percentiles), "accuracy_delta"));

    auto [corrupted_labels, mask] = corrupt_labels(ds.test_y, ds.classes, opts.corruption_rate, opts.seed);
    auto corruption_report = activation_calibration(train_profile.class_means,
                                                    test_profile.sample_rows, corrupted_labels, ds.test_y);
    emit("corruption_detection.csv",
         curve_csv(detect_corrupted_labels(corruption_report, mask, percentiles), "detection_rate"));

    const auto folded = fold_confusion(confusion_matrix(predictions, ds.test_y, ds.classes));
    result.localization = localize_bugs(test_profile, folded);
    {
        std::string csv = "class_a,class_b,negated_distance,folded_confusion\n";
        for (const auto& p : result.localization.ranked)
            csv += std::to_string(p.a) + ',' + std::to_string(p.b) + ',' + fmt_g(p.negated_distance) +
                   ',' + std::to_string(p.confusion_count) + '\n';
        emit("localization.csv", csv);
    }
    {
        auto dist = pairwise_distance_matrix(test_profile);
        std::string csv = "class";
        for (int c = 0; c < ds.classes; ++c) csv += ',' + std::to_string(c);
        csv += '\n';
        for (int c = 0; c < ds.classes; ++c) {
            csv += std::to_string(c);
            for (int k = 0; k < ds.classes; ++k) csv += ',' + fmt_g(dist[c][k]);
            csv += '\n';
        }
        emit("pairwise_distances.csv", csv);
        std::string fcsv = "class";
        for (int c = 0; c < ds.classes; ++c) fcsv += ',' + std::to_string(c);
        fcsv += '\n';
        for (int c = 0; c < ds.classes; ++c) {
            fcsv += std::to_string(c);
            for (int k = 0; k < ds.classes; ++k) fcsv += ',' + std::to_string(folded.counts[c][k]);
            fcsv += '\n';
        }
        emit("folded_confusion.csv", fcsv);
    }

    if (opts.run_repair) {
        RepairConfig rc;
        rc.lambda = opts.repair_lambda;
        rc.learning_rate = opts.repair_lr;
        rc.epochs = opts.repair_epochs;
        rc.target_weight = opts.repair_weight;
        rc.target_pair = opts.repair_pair;
        if (rc.target_pair.first < 0 && !result.localization.ranked.empty())
            rc.target_pair = {result.localization.ranked[0].a, result.localization.ranked[0].b};
        result.repaired_pair = rc.target_pair;
        result.repair_report = repair(model, ds, cfg.eval.train, rc, opts.seed);
        const auto& rr = *result.repair_report;
        const auto [a, b] = rc.target_pair;
        std::string csv =
            "metric,before,after\n"
            "target_pair_distance," +
            fmt_g(rr.distance_before[a][b]) + ',' + fmt_g(rr.distance_after[a][b]) + '\n' +
            "target_pair_folded_confusion," + std::to_string(rr.confusion_before.counts[a][b]) + ',' +
            std::to_string(rr.confusion_after.counts[a][b]) + '\n' + "validation_accuracy," +
            fmt_g(rr.accuracy_before) + ',' + fmt_g(rr.accuracy_after) + '\n';
        emit("repair_report.csv", csv);
        emit("model_repaired.bin", serialize_model(model));
    }

    std::string summary;
    summary += "samples = " + std::to_string(result.activation_report.samples()) + "\n";
    summary += "test_accuracy = " + fmt_g(result.activation_report.overall_accuracy()) + "\n";
    auto opt_str = [](const std::optional<double>& v) { return v ? fmt_g(*v) : std::string("undefined"); };
    summary += "activation_pearson = " + opt_str(result.activation_report.pearson_r) + "\n";
    summary += "activation_spearman = " + opt_str(result.activation_report.spearman_r) + "\n";
    summary += "softmax_pearson = " + opt_str(result.softmax_report.pearson_r) + "\n";
    summary += "softmax_spearman = " + opt_str(result.softmax_report.spearman_r) + "\n";
    summary += "localization_correlation = " + opt_str(result.localization.correlation) + "\n";
    if (result.repair_report) {
        summary += "repaired_pair = " + std::to_string(result.repaired_pair.first) + "," +
                   std::to_string(result.repaired_pair.second) + "\n";
        summary += "repair_accuracy_delta = " +
                   fmt_g(result.repair_report->accuracy_after - result.repair_report->accuracy_before) +
                   "\n";
    }
    emit("summary.txt", summary);
    return result;
}

}  // namespace evonas
