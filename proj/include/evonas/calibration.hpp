#pragma once

#include <algorithm>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "evonas/metrics.hpp"
#include "evonas/stats.hpp"
#include "evonas/train.hpp"

namespace evonas {

constexpr int kCalibrationBins = 50;

struct CalibrationBin {
    int count = 0;
    double accuracy = 0.0;
    double mean_confidence = 0.0;
};

/// Reliability report: per-sample confidences in [0,1] with correctness, 50
/// equal-width bins (final bin right-closed), and the correlations of per-bin
/// mean confidence vs per-bin accuracy over non-empty bins. Correlations are
/// undefined (nullopt) with fewer than two non-empty bins.
struct CalibrationReport {
    std::string method;  // "activation" or "softmax"
    std::vector<double> confidence;
    std::vector<char> correct;
    std::vector<CalibrationBin> bins;
    std::optional<double> pearson_r;
    std::optional<double> spearman_r;

    int samples() const { return static_cast<int>(confidence.size()); }
    double overall_accuracy() const {
        if (correct.empty()) return 0.0;
        return static_cast<double>(std::count(correct.begin(), correct.end(), char(1))) /
               correct.size();
    }
};

inline int confidence_bin(double conf) {
    int b = static_cast<int>(conf * kCalibrationBins);
    return std::clamp(b, 0, kCalibrationBins - 1);
}

inline CalibrationReport build_calibration_report(std::string method, std::vector<double> confidence,
                                                  std::vector<char> correct) {
    if (confidence.size() != correct.size())
        throw ValidationError("calibration: confidence/correctness size mismatch");
    for (double c : confidence)
        if (!(c >= 0.0 && c <= 1.0))
            throw ValidationError("calibration: confidence outside [0,1]");
    CalibrationReport r;
    r.method = std::move(method);
    r.confidence = std::move(confidence);
    r.correct = std::move(correct);
    r.bins.assign(kCalibrationBins, {});
    for (size_t i = 0; i < r.confidence.size(); ++i) {
        auto& bin = r.bins[confidence_bin(r.confidence[i])];
        ++bin.count;
        bin.mean_confidence += r.confidence[i];
        bin.accuracy += r.correct[i] ? 1.0 : 0.0;
    }
    std::vector<double> xs, ys;
    for (auto& bin : r.bins) {
        if (bin.count == 0) continue;
        bin.mean_confidence /= bin.count;
        bin.accuracy /= bin.count;
        xs.push_back(bin.mean_confidence);
        ys.push_back(bin.accuracy);
    }
    r.pearson_r = pearson(xs, ys);
    r.spearman_r = spearman(xs, ys);
    return r;
}

/// Activation-based calibration: the confidence of a sample is derived from
/// the cosine distance between its activations and the train-split mean
/// activations of its predicted class, mapped onto [0,1] via 1 - D/2.
inline CalibrationReport activation_calibration(const std::vector<std::vector<double>>& train_means,
                                                const std::vector<std::vector<double>>& sample_rows,
                                                const std::vector<int>& predictions,
                                                const std::vector<int>& true_labels) {
    if (sample_rows.size() != predictions.size() || sample_rows.size() != true_labels.size())
        throw ValidationError("activation_calibration: input size mismatch");
    std::vector<double> conf(sample_rows.size());
    std::vector<char> correct(sample_rows.size());
    for (size_t i = 0; i < sample_rows.size(); ++i) {
        const int pred = predictions[i];
        if (pred < 0 || pred >= static_cast<int>(train_means.size()))
            throw ValidationError("activation_calibration: prediction out of range");
        conf[i] = 1.0 - cosine_distance(sample_rows[i], train_means[pred]) / 2.0;
        correct[i] = predictions[i] == true_labels[i] ? 1 : 0;
    }
    return build_calibration_report("activation", std::move(conf), std::move(correct));
}

/// Softmax calibration: confidence is the maximum softmax probability.
inline CalibrationReport softmax_calibration(const std::vector<std::vector<double>>& probabilities,
                                             const std::vector<int>& predictions,
                                             const std::vector<int>& true_labels) {
    if (probabilities.size() != predictions.size() || probabilities.size() != true_labels.size())
        throw ValidationError("softmax_calibration: input size mismatch");
    std::vector<double> conf(probabilities.size());
    std::vector<char> correct(probabilities.size());
    for (size_t i = 0; i < probabilities.size(); ++i) {
        conf[i] = *std::max_element(probabilities[i].begin(), probabilities[i].end());
        correct[i] = predictions[i] == true_labels[i] ? 1 : 0;
    }
    return build_calibration_report("softmax", std::move(conf), std::move(correct));
}

/// Sample order by ascending confidence, index-stable. "Bottom p%" everywhere
/// means the first floor(N * p / 100) entries of this order.
inline std::vector<size_t> confidence_order(const CalibrationReport& r) {
    std::vector<size_t> order(r.confidence.size());
    std::iota(order.begin(), order.end(), size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](size_t a, size_t b) { return r.confidence[a] < r.confidence[b]; });
    return order;
}

struct PercentilePoint {
    double percentile = 0.0;
    double value = 0.0;
};

/// Accuracy gain from dropping the lowest-confidence samples: for each
/// percentile p, accuracy(remaining) - accuracy(all). Percentiles that would
/// remove every sample are omitted.
inline std::vector<PercentilePoint> identify_mispredictions(const CalibrationReport& report,
                                                            const std::vector<double>& percentiles) {
    const auto order = confidence_order(report);
    const size_t n = order.size();
    const double base = report.overall_accuracy();
    std::vector<PercentilePoint> out;
    for (double p : percentiles) {
        const size_t drop = static_cast<size_t>(n * p / 100.0);
        if (drop >= n) continue;
        size_t kept_correct = 0;
        for (size_t i = drop; i < n; ++i)
            if (report.correct[order[i]]) ++kept_correct;
        out.push_back({p, static_cast<double>(kept_correct) / (n - drop) - base});
    }
    return out;
}

/// Fraction of corrupted samples found in the bottom p% by confidence.
inline std::vector<PercentilePoint> detect_corrupted_labels(const CalibrationReport& report,
                                                            const std::vector<char>& corruption_mask,
                                                            const std::vector<double>& percentiles) {
    if (corruption_mask.size() != report.confidence.size())
        throw ValidationError("detect_corrupted_labels: mask size mismatch");
    const auto total =
        static_cast<size_t>(std::count(corruption_mask.begin(), corruption_mask.end(), char(1)));
    if (total == 0) throw ValidationError("detect_corrupted_labels: empty corruption mask");
    const auto order = confidence_order(report);
    std::vector<PercentilePoint> out;
    for (double p : percentiles) {
        const size_t drop = static_cast<size_t>(order.size() * p / 100.0);
        size_t hit = 0;
        for (size_t i = 0; i < drop && i < order.size(); ++i)
            if (corruption_mask[order[i]]) ++hit;
        out.push_back({p, static_cast<double>(hit) / total});
    }
    return out;
}

// ---------------------------------------------------------------------------
// Confusion matrices.
// ---------------------------------------------------------------------------

struct FoldedConfusion {
    std::vector<std::vector<std::int64_t>> counts;  // upper triangle holds i<j sums

    int classes() const { return static_cast<int>(counts.size()); }
    std::int64_t total() const {
        std::int64_t t = 0;
        for (const auto& row : counts)
            for (auto v : row) t += v;
        return t;
    }
};

inline std::vector<std::vector<std::int64_t>> confusion_matrix(const std::vector<int>& predictions,
                                                               const std::vector<int>& labels,
                                                               int classes) {
    std::vector<std::vector<std::int64_t>> m(classes, std::vector<std::int64_t>(classes, 0));
    for (size_t i = 0; i < labels.size(); ++i) ++m[labels[i]][predictions[i]];
    return m;
}

/// Folds a confusion matrix along the diagonal: entry (i,j), i<j becomes
/// x_ij + x_ji; the diagonal (true positives) is preserved.
inline FoldedConfusion fold_confusion(const std::vector<std::vector<std::int64_t>>& confusion) {
    const int nc = static_cast<int>(confusion.size());
    for (const auto& row : confusion)
        if (static_cast<int>(row.size()) != nc)
            throw ValidationError("fold_confusion: matrix is not square");
    FoldedConfusion f;
    f.counts.assign(nc, std::vector<std::int64_t>(nc, 0));
    for (int i = 0; i < nc; ++i) {
        f.counts[i][i] = confusion[i][i];
        for (int j = i + 1; j < nc; ++j) f.counts[i][j] = confusion[i][j] + confusion[j][i];
    }
    return f;
}

// ---------------------------------------------------------------------------
// Bug localization: class pairs ranked by how close their mean activations
// are; the negated pairwise distances correlate with folded confusion counts.
// ---------------------------------------------------------------------------

struct ConfoundedPair {
    int a = 0, b = 0;
    double negated_distance = 0.0;
    std::int64_t confusion_count = 0;
};

struct BugLocalization {
    std::vector<ConfoundedPair> ranked;  // most confounded candidate first
    std::optional<double> correlation;
};

inline BugLocalization localize_bugs(const ClassActivationProfile& profile,
                                     const FoldedConfusion& folded) {
    const int nc = profile.classes();
    if (folded.classes() != nc) throw ValidationError("localize_bugs: class count mismatch");
    BugLocalization out;
    std::vector<double> xs, ys;
    for (int a = 0; a < nc; ++a)
        for (int b = a + 1; b < nc; ++b) {
            ConfoundedPair p;
            p.a = a;
            p.b = b;
            p.negated_distance = -cosine_distance(profile.class_means[a], profile.class_means[b]);
            p.confusion_count = folded.counts[a][b];
            xs.push_back(p.negated_distance);
            ys.push_back(static_cast<double>(p.confusion_count));
            out.ranked.push_back(p);
        }
    std::stable_sort(out.ranked.begin(), out.ranked.end(), [](const auto& l, const auto& r) {
        return l.negated_distance > r.negated_distance;
    });
    out.correlation = pearson(xs, ys);
    return out;
}

// ---------------------------------------------------------------------------
// Targeted repair: fine-tune with the pairwise-weighted regularizer to push
// confounded class representations apart.
// ---------------------------------------------------------------------------

struct RepairConfig {
    double lambda = 0.5;
    double learning_rate = 0.001;
    int epochs = 5;
    int batch_size = 32;
    std::pair<int, int> target_pair{-1, -1};  // negative = untargeted
    double target_weight = 25.0;
};

struct RepairReport {
    std::vector<std::vector<double>> distance_before, distance_after;
    FoldedConfusion confusion_before, confusion_after;
    double accuracy_before = 0.0, accuracy_after = 0.0;
};

/// Constant-rate fine-tuning pass with the regularized loss; no re-init, no
/// schedule. Fresh momentum state.
template <class S>
void fine_tune(Model<S>& model, const Dataset& ds, const TrainConfig& base, double lambda,
               const std::vector<std::vector<double>>& pair_weights, double lr, int epochs,
               std::uint64_t seed) {
    Rng rng(mix64(seed ^ 0xf1ea5edull));
    auto params = model.param_blocks();
    for (auto* p : params) std::fill(p->velocity.begin(), p->velocity.end(), S(0));
    validate_pair_weights(pair_weights, ds.classes);
    const int train_n = ds.train_x.n;
    std::vector<int> order(train_n);
    std::iota(order.begin(), order.end(), 0);
    Tensor<S> batch;
    std::vector<int> labels;
    for (int epoch = 0; epoch < epochs; ++epoch) {
        rng.shuffle(order.begin(), order.end());
        for (int start = 0; start < train_n; start += base.batch_size) {
            const int n = std::min(base.batch_size, train_n - start);
            batch.resize(n, ds.channels, ds.height, ds.width);
            labels.resize(n);
            for (int i = 0; i < n; ++i) {
                const int src = order[start + i];
                for (size_t j = 0; j < ds.train_x.sample_size(); ++j)
                    batch.v[static_cast<size_t>(i) * ds.train_x.sample_size() + j] =
                        static_cast<S>(ds.train_x.v[static_cast<size_t>(src) * ds.train_x.sample_size() + j]);
                labels[i] = ds.train_y[src];
            }
            const auto& logits = model.forward(batch, /*train=*/true);
            Tensor<S> captured;
            if (lambda > 0) captured = model.capture_activations_batch();
            auto loss = regularized_loss(logits, labels, captured, lambda, ds.classes, pair_weights);
            if (!std::isfinite(loss.loss)) return;  // leave weights as-is on divergence
            model.zero_grad();
            model.backward(loss.dlogits, loss.dactivations.v.empty() ? nullptr : &loss.dactivations);
            sgd_step(params, lr, base.momentum, base.nesterov, base.weight_decay);
        }
    }
}

template <class S>
RepairReport repair(Model<S>& model, const Dataset& ds, const TrainConfig& base,
                    const RepairConfig& cfg, std::uint64_t seed) {
    auto weights = uniform_pair_weights(ds.classes);
    if (cfg.target_pair.first >= 0) {
        const auto [a, b] = cfg.target_pair;
        if (a < 0 || b < 0 || a >= ds.classes || b >= ds.classes || a == b)
            throw ValidationError("repair: target pair out of range");
        weights[a][b] = weights[b][a] = cfg.target_weight;
    }
    RepairReport report;
    auto snapshot = [&](std::vector<std::vector<double>>& dist, FoldedConfusion& folded, double& acc) {
        auto profile = capture_activations(model, ds.val_x, ds.val_y, ds.classes, false);
        dist = pairwise_distance_matrix(profile);
        acc = accuracy_on(model, ds.val_x, ds.val_y);
        std::vector<int> preds;
        Tensor<S> batch;
        for (int start = 0; start < ds.val_x.n; start += 64) {
            const int n = std::min(64, ds.val_x.n - start);
            batch.resize(n, ds.channels, ds.height, ds.width);
            for (size_t i = 0; i < batch.v.size(); ++i)
                batch.v[i] = static_cast<S>(
                    ds.val_x.v[static_cast<size_t>(start) * ds.val_x.sample_size() + i]);
            model.forward(batch, false);
            auto p = model.predict_labels();
            preds.insert(preds.end(), p.begin(), p.end());
        }
        folded = fold_confusion(confusion_matrix(preds, ds.val_y, ds.classes));
    };
    snapshot(report.distance_before, report.confusion_before, report.accuracy_before);
    fine_tune(model, ds, base, cfg.lambda, weights, cfg.learning_rate, cfg.epochs, seed);
    snapshot(report.distance_after, report.confusion_after, report.accuracy_after);
    return report;
}

}  // namespace evonas
