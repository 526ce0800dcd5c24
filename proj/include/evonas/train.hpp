#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

#include "evonas/dataset.hpp"
#include "evonas/metrics.hpp"
#include "evonas/network.hpp"

namespace evonas {

struct TrainConfig {
    int epochs = 5;
    int batch_size = 32;
    double learning_rate = 0.1;
    double momentum = 0.9;
    bool nesterov = true;
    double weight_decay = 5e-4;
    bool augment_data = false;
    /// Regularizer weight; 0 disables the loss term entirely.
    double reg_lambda = 0.0;
    /// Pairwise regularizer weights, symmetric, indexed [c][k]; empty = all 1.
    std::vector<std::vector<double>> reg_weights;
};

/// Learning rate at a given optimizer step: linear warmup from 0 to the base
/// rate over the first half epoch, then cosine decay reaching exactly 0 on the
/// final step.
inline double lr_at_step(int step, int total_steps, int warmup_steps, double base_lr) {
    if (total_steps <= 0) return 0.0;
    if (step < warmup_steps) return base_lr * (step + 1) / warmup_steps;
    const int last = total_steps - 1;
    if (last <= warmup_steps) return 0.0;
    const double progress = static_cast<double>(step - warmup_steps) / (last - warmup_steps);
    return base_lr * 0.5 * (1.0 + std::cos(3.14159265358979323846 * progress));
}

template <class S>
void sgd_step(std::vector<ParamBlock<S>*>& params, double lr, double momentum, bool nesterov,
              double weight_decay) {
    for (auto* p : params) {
        for (size_t i = 0; i < p->value.size(); ++i) {
            const double g = static_cast<double>(p->grad[i]) + weight_decay * p->value[i];
            const double v = momentum * p->velocity[i] + g;
            p->velocity[i] = static_cast<S>(v);
            const double step = nesterov ? g + momentum * v : v;
            p->value[i] = static_cast<S>(p->value[i] - lr * step);
        }
    }
}

// ---------------------------------------------------------------------------
// Introspectability regularizer: -(1/C(N_C,2)) * sum_{c<k} D(mean_c, mean_k)
// * w_{c,k} over the within-batch class means of the concatenated activations.
// Gradients flow through the class-mean accumulation. Adding this term to the
// loss pushes class representations apart; with all weights 1 it is the plain
// untargeted regularizer.
// ---------------------------------------------------------------------------

template <class S>
struct RegTerm {
    double value = 0.0;
    Tensor<S> grad;          // d(term)/d(activations), same shape as input
    bool applied = false;    // false when fewer than two classes are present
};

inline std::vector<std::vector<double>> uniform_pair_weights(int classes) {
    return std::vector<std::vector<double>>(classes, std::vector<double>(classes, 1.0));
}

inline void validate_pair_weights(const std::vector<std::vector<double>>& w, int classes) {
    if (static_cast<int>(w.size()) != classes) throw ValidationError("pair weight matrix size mismatch");
    for (int c = 0; c < classes; ++c) {
        if (static_cast<int>(w[c].size()) != classes)
            throw ValidationError("pair weight matrix is not square");
        for (int k = 0; k < classes; ++k) {
            if (w[c][k] < 0) throw ValidationError("pair weights must be nonnegative");
            if (std::abs(w[c][k] - w[k][c]) > 1e-12)
                throw ValidationError("pair weight matrix must be symmetric");
        }
    }
}

/// activations: (n, dim, 1, 1) rows; labels in [0, classes).
template <class S>
RegTerm<S> introspectability_reg(const Tensor<S>& activations, const std::vector<int>& labels,
                                 int classes, const std::vector<std::vector<double>>& pair_weights) {
    RegTerm<S> out;
    out.grad.resize_like(activations);
    const int dim = activations.c;
    const int n = activations.n;

    std::vector<int> count(classes, 0);
    for (int i = 0; i < n; ++i) ++count[labels[i]];
    std::vector<int> present;
    for (int c = 0; c < classes; ++c)
        if (count[c] > 0) present.push_back(c);
    if (present.size() < 2) return out;  // term 0, caller may warn
    out.applied = true;

    std::vector<std::vector<double>> means(classes, std::vector<double>(dim, 0.0));
    for (int i = 0; i < n; ++i) {
        const S* row = activations.data() + static_cast<size_t>(i) * dim;
        auto& m = means[labels[i]];
        for (int j = 0; j < dim; ++j) m[j] += row[j];
    }
    for (int c : present) {
        const double inv = 1.0 / count[c];
        for (auto& v : means[c]) v *= inv;
    }

    const double pairs = 0.5 * classes * (classes - 1);
    std::vector<std::vector<double>> mean_grad(classes, std::vector<double>(dim, 0.0));
    for (size_t a = 0; a < present.size(); ++a) {
        for (size_t b = a + 1; b < present.size(); ++b) {
            const int c = present[a], k = present[b];
            const auto& u = means[c];
            const auto& v = means[k];
            double dot = 0, nu = 0, nv = 0;
            for (int j = 0; j < dim; ++j) {
                dot += u[j] * v[j];
                nu += u[j] * u[j];
                nv += v[j] * v[j];
            }
            const double w = pair_weights.empty() ? 1.0 : pair_weights[c][k];
            if (nu == 0.0 || nv == 0.0) {
                out.value += -w / pairs;  // distance defined as 1, gradient 0
                continue;
            }
            const double norm_u = std::sqrt(nu), norm_v = std::sqrt(nv);
            const double cos_sim = dot / (norm_u * norm_v);
            out.value += -(1.0 - cos_sim) * w / pairs;
            // d(-D)/du = dcos/du = v/(|u||v|) - cos * u/|u|^2, scaled by w/pairs
            const double scale = w / pairs;
            for (int j = 0; j < dim; ++j) {
                mean_grad[c][j] += scale * (v[j] / (norm_u * norm_v) - cos_sim * u[j] / nu);
                mean_grad[k][j] += scale * (u[j] / (norm_u * norm_v) - cos_sim * v[j] / nv);
            }
        }
    }
    for (int i = 0; i < n; ++i) {
        const int c = labels[i];
        S* g = out.grad.data() + static_cast<size_t>(i) * dim;
        const double inv = 1.0 / count[c];
        for (int j = 0; j < dim; ++j) g[j] = static_cast<S>(mean_grad[c][j] * inv);
    }
    return out;
}

/// Combined training loss: cross entropy plus lambda times the regularizer.
/// Returns the scalar loss, the cross-entropy logits gradient, and the
/// lambda-scaled activation gradient to seed into the capture blocks.
template <class S>
struct RegularizedLoss {
    double loss = 0.0;
    Tensor<S> dlogits;
    Tensor<S> dactivations;  // empty when lambda == 0 or the term was inert
    bool reg_applied = false;
};

template <class S>
RegularizedLoss<S> regularized_loss(const Tensor<S>& logits, const std::vector<int>& labels,
                                    const Tensor<S>& activations, double lambda, int classes,
                                    const std::vector<std::vector<double>>& pair_weights) {
    if (lambda < 0) throw ValidationError("regularizer weight must be >= 0");
    RegularizedLoss<S> out;
    Tensor<S> probs;
    out.loss = SoftmaxXent<S>::forward(logits, labels, probs);
    SoftmaxXent<S>::backward(probs, labels, out.dlogits);
    if (lambda == 0.0) return out;
    auto reg = introspectability_reg(activations, labels, classes, pair_weights);
    out.reg_applied = reg.applied;
    out.loss += lambda * reg.value;
    out.dactivations.resize_like(reg.grad);
    for (size_t i = 0; i < reg.grad.v.size(); ++i)
        out.dactivations.v[i] = static_cast<S>(lambda * reg.grad.v[i]);
    return out;
}

// ---------------------------------------------------------------------------
// Activation capture over a dataset split (eval mode).
// ---------------------------------------------------------------------------

template <class S>
ClassActivationProfile capture_activations(Model<S>& model, const Tensor<float>& x,
                                           const std::vector<int>& labels, int classes,
                                           bool keep_sample_rows, int batch_size = 64) {
    ClassActivationProfile profile;
    profile.block_map = model.plan.capture_blocks;
    const int dim = model.plan.capture_dim();
    profile.class_means.assign(classes, std::vector<double>(dim, 0.0));
    std::vector<int> count(classes, 0);
    Tensor<S> batch;
    for (int start = 0; start < x.n; start += batch_size) {
        const int n = std::min(batch_size, x.n - start);
        batch.resize(n, x.c, x.h, x.w);
        for (size_t i = 0; i < batch.v.size(); ++i)
            batch.v[i] = static_cast<S>(x.v[static_cast<size_t>(start) * x.sample_size() + i]);
        model.forward(batch, /*train=*/false);
        Tensor<S> rows = model.capture_activations_batch();
        for (int i = 0; i < n; ++i) {
            const int label = labels[start + i];
            ++count[label];
            const S* row = rows.data() + static_cast<size_t>(i) * dim;
            auto& mean = profile.class_means[label];
            for (int j = 0; j < dim; ++j) mean[j] += row[j];
            if (keep_sample_rows) {
                profile.sample_rows.emplace_back(row, row + dim);
                profile.sample_labels.push_back(label);
            }
        }
    }
    std::string missing;
    for (int c = 0; c < classes; ++c) {
        if (count[c] == 0) {
            if (!missing.empty()) missing += ", ";
            missing += std::to_string(c);
        } else {
            const double inv = 1.0 / count[c];
            for (auto& v : profile.class_means[c]) v *= inv;
        }
    }
    if (!missing.empty())
        throw ValidationError("classes absent from split: " + missing);
    return profile;
}

// ---------------------------------------------------------------------------
// Full training run.
// ---------------------------------------------------------------------------

struct EvalResult {
    double validation_accuracy = 0.0;
    double introspectability = 0.0;
    double train_accuracy = 0.0;
    double generalization_gap = 0.0;
    std::int64_t param_count = 0;
    double train_seconds = 0.0;  // deterministic GMAC cost, see archive.hpp
    std::vector<double> epoch_losses;  // mean training loss per epoch
    ClassActivationProfile profile;
    bool failed = false;
};

template <class S>
double accuracy_on(Model<S>& model, const Tensor<float>& x, const std::vector<int>& labels,
                   int batch_size = 64) {
    if (x.n == 0) return 0.0;
    int correct = 0;
    Tensor<S> batch;
    for (int start = 0; start < x.n; start += batch_size) {
        const int n = std::min(batch_size, x.n - start);
        batch.resize(n, x.c, x.h, x.w);
        for (size_t i = 0; i < batch.v.size(); ++i)
            batch.v[i] = static_cast<S>(x.v[static_cast<size_t>(start) * x.sample_size() + i]);
        model.forward(batch, /*train=*/false);
        auto pred = model.predict_labels();
        for (int i = 0; i < n; ++i)
            if (pred[i] == labels[start + i]) ++correct;
    }
    return static_cast<double>(correct) / x.n;
}

/// Trains a freshly initialized model for the plan and evaluates it.
/// Deterministic given the seed; NaN loss marks the evaluation failed.
template <class S = float>
EvalResult train_and_eval(Model<S>& model, const Dataset& ds, const TrainConfig& cfg,
                          std::uint64_t seed) {
    Rng rng(mix64(seed));
    model.init_params(rng);
    EvalResult result;
    result.param_count = model.param_count();

    const int train_n = ds.train_x.n;
    auto params = model.param_blocks();
    const int steps_per_epoch = train_n > 0 ? (train_n + cfg.batch_size - 1) / cfg.batch_size : 0;
    const int total_steps = steps_per_epoch * cfg.epochs;
    const int warmup = std::max(1, steps_per_epoch / 2);
    result.train_seconds = static_cast<double>(model.plan.forward_macs_per_sample) * 3.0 * train_n *
                           cfg.epochs / 1e9;

    std::vector<std::vector<double>> pair_weights = cfg.reg_weights;
    if (cfg.reg_lambda > 0 && pair_weights.empty()) pair_weights = uniform_pair_weights(ds.classes);
    if (cfg.reg_lambda > 0) validate_pair_weights(pair_weights, ds.classes);

    std::vector<int> order(train_n);
    for (int i = 0; i < train_n; ++i) order[i] = i;
    Tensor<S> batch;
    Tensor<float> batch_f;
    std::vector<int> batch_labels;
    int step = 0;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        rng.shuffle(order.begin(), order.end());
        double epoch_loss = 0;
        int epoch_batches = 0;
        for (int start = 0; start < train_n; start += cfg.batch_size, ++step) {
            const int n = std::min(cfg.batch_size, train_n - start);
            batch_f.resize(n, ds.channels, ds.height, ds.width);
            batch_labels.resize(n);
            for (int i = 0; i < n; ++i) {
                const int src = order[start + i];
                std::copy_n(ds.train_x.data() + static_cast<size_t>(src) * ds.train_x.sample_size(),
                            ds.train_x.sample_size(),
                            batch_f.data() + static_cast<size_t>(i) * ds.train_x.sample_size());
                batch_labels[i] = ds.train_y[src];
            }
            if (cfg.augment_data) augment(batch_f, rng);
            batch.resize(n, ds.channels, ds.height, ds.width);
            for (size_t i = 0; i < batch.v.size(); ++i) batch.v[i] = static_cast<S>(batch_f.v[i]);

            const auto& logits = model.forward(batch, /*train=*/true);
            Tensor<S> captured;
            if (cfg.reg_lambda > 0) captured = model.capture_activations_batch();
            auto loss = regularized_loss(logits, batch_labels, captured, cfg.reg_lambda, ds.classes,
                                         pair_weights);
            if (!std::isfinite(loss.loss)) {
                result.failed = true;
                return result;
            }
            model.zero_grad();
            model.backward(loss.dlogits,
                           loss.dactivations.v.empty() ? nullptr : &loss.dactivations);
            const double lr = lr_at_step(step, total_steps, warmup, cfg.learning_rate);
            sgd_step(params, lr, cfg.momentum, cfg.nesterov, cfg.weight_decay);
            epoch_loss += loss.loss;
            ++epoch_batches;
        }
        if (epoch_batches) result.epoch_losses.push_back(epoch_loss / epoch_batches);
    }

    result.train_accuracy = accuracy_on(model, ds.train_x, ds.train_y);
    result.validation_accuracy = accuracy_on(model, ds.val_x, ds.val_y);
    result.generalization_gap = result.train_accuracy - result.validation_accuracy;
    result.profile = capture_activations(model, ds.val_x, ds.val_y, ds.classes,
                                         /*keep_sample_rows=*/false);
    result.introspectability = introspectability(result.profile);
    return result;
}

}  // namespace evonas
