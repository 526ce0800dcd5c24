#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "evonas/dataset.hpp"
#include "evonas/hypervolume.hpp"
#include "evonas/io.hpp"
#include "evonas/metrics.hpp"
#include "evonas/network.hpp"
#include "evonas/nsga2.hpp"
#include "evonas/train.hpp"

namespace evonas {

/// Ordered key = value text file; '#' starts a comment.
class KvFile {
public:
    static KvFile parse(const std::string& text) {
        KvFile kv;
        int lineno = 0;
        for (const auto& raw : to_lines(text)) {
            ++lineno;
            std::string line = trim(raw.substr(0, raw.find('#')));
            if (line.empty()) continue;
            const auto eq = line.find('=');
            if (eq == std::string::npos)
                throw ValidationError("config line " + std::to_string(lineno) + ": expected key = value");
            kv.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
        }
        return kv;
    }

    static KvFile parse_file(const std::filesystem::path& path) { return parse(read_file(path)); }

    void set(const std::string& key, const std::string& value) {
        auto it = index_.find(key);
        if (it == index_.end()) {
            index_[key] = entries_.size();
            entries_.emplace_back(key, value);
        } else {
            entries_[it->second].second = value;
        }
    }

    bool has(const std::string& key) const { return index_.count(key) > 0; }

    std::string get(const std::string& key, const std::string& fallback) const {
        auto it = index_.find(key);
        return it == index_.end() ? fallback : entries_[it->second].second;
    }

    std::string require(const std::string& key) const {
        auto it = index_.find(key);
        if (it == index_.end()) throw ValidationError("config: missing required key '" + key + "'");
        return entries_[it->second].second;
    }

    long long get_int(const std::string& key, long long fallback) const {
        if (!has(key)) return fallback;
        try {
            return parse_int(get(key, ""), key);
        } catch (const ParseError& e) {
            throw ValidationError(std::string("config field '") + key + "': " + e.what());
        }
    }

    double get_double(const std::string& key, double fallback) const {
        if (!has(key)) return fallback;
        try {
            return parse_double(get(key, ""), key);
        } catch (const ParseError& e) {
            throw ValidationError(std::string("config field '") + key + "': " + e.what());
        }
    }

    bool get_bool(const std::string& key, bool fallback) const {
        if (!has(key)) return fallback;
        const std::string v = get(key, "");
        if (v == "true" || v == "1" || v == "yes") return true;
        if (v == "false" || v == "0" || v == "no") return false;
        throw ValidationError("config field '" + key + "': expected a boolean, got '" + v + "'");
    }

    std::string serialize() const {
        std::string out;
        for (const auto& [k, v] : entries_) out += k + " = " + v + "\n";
        return out;
    }

    const std::vector<std::pair<std::string, std::string>>& entries() const { return entries_; }

private:
    std::vector<std::pair<std::string, std::string>> entries_;
    std::map<std::string, size_t> index_;
};

enum class DatasetKind { Synthetic, Idx };
enum class IntrospectabilityMetric { Cosine, WordNet };

/// Everything a worker needs to evaluate an encoding. Hashed into config_hash
/// so mismatched workers are rejected.
struct EvalConfig {
    ArchConfig arch;  // classes/height/width/channels filled from the dataset
    TrainConfig train;
    DatasetKind dataset_kind = DatasetKind::Synthetic;
    SyntheticSpec synthetic;
    std::filesystem::path idx_images, idx_labels;
    IntrospectabilityMetric metric = IntrospectabilityMetric::Cosine;
    std::filesystem::path hierarchy_path;
};

struct SearchConfig {
    int population_size = 64;
    int generations = 20;
    std::uint64_t seed = 1;
    ObjectiveMode objective_mode = ObjectiveMode::Multi;
    SbxParams crossover;
    MutationParams mutation;
    std::optional<HypervolumeConfig> hv_reference;  // default (0, 1/N_C)
    std::string search_id;
    int eval_threads = 0;  // 0 = hardware concurrency
    EvalConfig eval;

    HypervolumeConfig hv() const {
        return hv_reference ? *hv_reference : HypervolumeConfig::for_classes(eval.arch.classes);
    }
};

inline const char* to_string(ObjectiveMode m) {
    switch (m) {
        case ObjectiveMode::Multi: return "multi";
        case ObjectiveMode::AccuracyOnly: return "accuracy_only";
        case ObjectiveMode::MultiRegularized: return "multi_reg";
    }
    return "?";
}

inline ObjectiveMode parse_objective_mode(const std::string& s) {
    if (s == "multi") return ObjectiveMode::Multi;
    if (s == "accuracy_only") return ObjectiveMode::AccuracyOnly;
    if (s == "multi_reg") return ObjectiveMode::MultiRegularized;
    throw ValidationError("config field 'objective_mode': expected multi|accuracy_only|multi_reg, got '" +
                          s + "'");
}

inline SearchConfig parse_search_config(const KvFile& kv) {
    SearchConfig cfg;
    cfg.population_size = static_cast<int>(kv.get_int("population_size", 64));
    if (cfg.population_size < 2) throw ValidationError("config field 'population_size': must be >= 2");
    cfg.generations = static_cast<int>(kv.get_int("generations", 20));
    if (cfg.generations < 0) throw ValidationError("config field 'generations': must be >= 0");
    cfg.seed = static_cast<std::uint64_t>(kv.get_int("seed", 1));
    cfg.objective_mode = parse_objective_mode(kv.get("objective_mode", "multi"));
    cfg.crossover.p = kv.get_double("crossover_p", 0.9);
    cfg.crossover.eta = kv.get_double("crossover_eta", 3.0);
    cfg.mutation.p = kv.get_double("mutation_p", 1.0 / 6.0);
    cfg.mutation.eta = kv.get_double("mutation_eta", 3.0);
    if (cfg.crossover.p < 0 || cfg.crossover.p > 1)
        throw ValidationError("config field 'crossover_p': must be in [0,1]");
    if (cfg.mutation.p < 0 || cfg.mutation.p > 1)
        throw ValidationError("config field 'mutation_p': must be in [0,1]");
    if (kv.has("hv_reference")) {
        auto parts = split(kv.get("hv_reference", ""), ',');
        if (parts.size() != 2)
            throw ValidationError("config field 'hv_reference': expected '<introspectability>,<accuracy>'");
        HypervolumeConfig hv;
        hv.intros_ref = parse_double(trim(parts[0]), "hv_reference");
        hv.acc_ref = parse_double(trim(parts[1]), "hv_reference");
        if (hv.acc_ref < 0 || hv.acc_ref >= 1)
            throw ValidationError("config field 'hv_reference': accuracy component must be in [0,1)");
        cfg.hv_reference = hv;
    }
    cfg.eval_threads = static_cast<int>(kv.get_int("eval_threads", 0));

    auto& ev = cfg.eval;
    const std::string kind = kv.get("dataset", "synthetic");
    if (kind == "synthetic") {
        ev.dataset_kind = DatasetKind::Synthetic;
        ev.synthetic.classes = static_cast<int>(kv.get_int("classes", 4));
        ev.synthetic.samples = static_cast<int>(kv.get_int("samples", 320));
        ev.synthetic.height = static_cast<int>(kv.get_int("height", 16));
        ev.synthetic.width = static_cast<int>(kv.get_int("width", 16));
        ev.synthetic.channels = static_cast<int>(kv.get_int("channels", 1));
        ev.synthetic.noise = kv.get_double("noise", 0.05);
        ev.synthetic.seed = static_cast<std::uint64_t>(kv.get_int("data_seed", 7));
        ev.arch.classes = ev.synthetic.classes;
        ev.arch.in_channels = ev.synthetic.channels;
        ev.arch.height = ev.synthetic.height;
        ev.arch.width = ev.synthetic.width;
    } else if (kind == "idx") {
        ev.dataset_kind = DatasetKind::Idx;
        ev.idx_images = kv.require("idx_images");
        ev.idx_labels = kv.require("idx_labels");
    } else {
        throw ValidationError("config field 'dataset': expected synthetic|idx, got '" + kind + "'");
    }
    ev.arch.filters = static_cast<int>(kv.get_int("filters", 8));
    ev.arch.cells_per_stack = static_cast<int>(kv.get_int("cells_per_stack", 2));
    if (ev.arch.filters < 1) throw ValidationError("config field 'filters': must be >= 1");
    if (ev.arch.cells_per_stack < 1)
        throw ValidationError("config field 'cells_per_stack': must be >= 1");

    ev.train.epochs = static_cast<int>(kv.get_int("epochs", 5));
    ev.train.batch_size = static_cast<int>(kv.get_int("batch_size", 32));
    ev.train.learning_rate = kv.get_double("learning_rate", 0.1);
    ev.train.momentum = kv.get_double("momentum", 0.9);
    ev.train.nesterov = kv.get_bool("nesterov", true);
    ev.train.weight_decay = kv.get_double("weight_decay", 5e-4);
    ev.train.augment_data = kv.get_bool("augment", false);
    if (ev.train.epochs < 0) throw ValidationError("config field 'epochs': must be >= 0");
    if (ev.train.batch_size < 1) throw ValidationError("config field 'batch_size': must be >= 1");
    ev.train.reg_lambda =
        cfg.objective_mode == ObjectiveMode::MultiRegularized ? kv.get_double("reg_lambda", 0.5) : 0.0;
    if (ev.train.reg_lambda < 0) throw ValidationError("config field 'reg_lambda': must be >= 0");

    const std::string metric = kv.get("introspectability_metric", "cosine");
    if (metric == "cosine") ev.metric = IntrospectabilityMetric::Cosine;
    else if (metric == "wordnet") {
        ev.metric = IntrospectabilityMetric::WordNet;
        ev.hierarchy_path = kv.require("hierarchy");
    } else {
        throw ValidationError("config field 'introspectability_metric': expected cosine|wordnet");
    }

    cfg.search_id = kv.get("search_id", "s" + std::to_string(cfg.seed));
    return cfg;
}

/// The effective configuration, normalized; used for manifests and hashing.
inline KvFile search_config_kv(const SearchConfig& cfg) {
    KvFile kv;
    kv.set("population_size", std::to_string(cfg.population_size));
    kv.set("generations", std::to_string(cfg.generations));
    kv.set("seed", std::to_string(cfg.seed));
    kv.set("objective_mode", to_string(cfg.objective_mode));
    kv.set("crossover_p", fmt_g(cfg.crossover.p, 12));
    kv.set("crossover_eta", fmt_g(cfg.crossover.eta, 12));
    kv.set("mutation_p", fmt_g(cfg.mutation.p, 12));
    kv.set("mutation_eta", fmt_g(cfg.mutation.eta, 12));
    const auto hv = cfg.hv();
    kv.set("hv_reference", fmt_g(hv.intros_ref, 12) + "," + fmt_g(hv.acc_ref, 12));
    kv.set("search_id", cfg.search_id);
    const auto& ev = cfg.eval;
    kv.set("dataset", ev.dataset_kind == DatasetKind::Synthetic ? "synthetic" : "idx");
    if (ev.dataset_kind == DatasetKind::Synthetic) {
        kv.set("classes", std::to_string(ev.synthetic.classes));
        kv.set("samples", std::to_string(ev.synthetic.samples));
        kv.set("height", std::to_string(ev.synthetic.height));
        kv.set("width", std::to_string(ev.synthetic.width));
        kv.set("channels", std::to_string(ev.synthetic.channels));
        kv.set("noise", fmt_g(ev.synthetic.noise, 12));
        kv.set("data_seed", std::to_string(ev.synthetic.seed));
    } else {
        kv.set("idx_images", ev.idx_images.string());
        kv.set("idx_labels", ev.idx_labels.string());
    }
    kv.set("filters", std::to_string(ev.arch.filters));
    kv.set("cells_per_stack", std::to_string(ev.arch.cells_per_stack));
    kv.set("epochs", std::to_string(ev.train.epochs));
    kv.set("batch_size", std::to_string(ev.train.batch_size));
    kv.set("learning_rate", fmt_g(ev.train.learning_rate, 12));
    kv.set("momentum", fmt_g(ev.train.momentum, 12));
    kv.set("nesterov", ev.train.nesterov ? "true" : "false");
    kv.set("weight_decay", fmt_g(ev.train.weight_decay, 12));
    kv.set("augment", ev.train.augment_data ? "true" : "false");
    kv.set("reg_lambda", fmt_g(ev.train.reg_lambda, 12));
    kv.set("introspectability_metric",
           ev.metric == IntrospectabilityMetric::Cosine ? "cosine" : "wordnet");
    if (ev.metric == IntrospectabilityMetric::WordNet)
        kv.set("hierarchy", ev.hierarchy_path.string());
    return kv;
}

inline std::uint64_t fnv1a(std::string_view s, std::uint64_t h = 0xcbf29ce484222325ull) {
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

/// Hash pinning the evaluator behavior: a worker whose hash differs is
/// rejected. Covers dataset, architecture, training recipe and the metric
/// (including hierarchy file content when the WordNet variant is active).
inline std::uint64_t config_hash(const SearchConfig& cfg) {
    const auto kv = search_config_kv(cfg);
    std::string material = "evonas-eval-v1\n";
    static const char* keys[] = {"dataset", "classes", "samples", "height", "width", "channels",
                                 "noise", "data_seed", "idx_images", "idx_labels", "filters",
                                 "cells_per_stack", "epochs", "batch_size", "learning_rate",
                                 "momentum", "nesterov", "weight_decay", "augment", "reg_lambda",
                                 "introspectability_metric"};
    for (const char* k : keys)
        if (kv.has(k)) material += std::string(k) + "=" + kv.get(k, "") + "\n";
    if (cfg.eval.metric == IntrospectabilityMetric::WordNet)
        material += "hierarchy-content=" + read_file(cfg.eval.hierarchy_path) + "\n";
    return fnv1a(material);
}

inline std::string config_hash_hex(const SearchConfig& cfg) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(config_hash(cfg)));
    return buf;
}

/// Builds the (normalized) dataset the evaluator trains on.
inline Dataset build_dataset(const EvalConfig& cfg) {
    Dataset ds;
    if (cfg.dataset_kind == DatasetKind::Synthetic) {
        ds = make_synthetic_dataset(cfg.synthetic);
    } else {
        ds = load_idx(cfg.idx_images, cfg.idx_labels);
        // Single-file IDX input is split 70/15/15 in stratified round-robin order.
        Dataset full = std::move(ds);
        ds = Dataset{};
        ds.classes = full.classes;
        ds.height = full.height;
        ds.width = full.width;
        ds.channels = full.channels;
        std::vector<std::vector<size_t>> per_class(full.classes);
        for (int i = 0; i < full.train_x.n; ++i) per_class[full.train_y[i]].push_back(i);
        std::vector<size_t> tr, va, te;
        for (auto& members : per_class) {
            const size_t n_train = (members.size() * 70 + 50) / 100;
            const size_t n_val = (members.size() * 15 + 50) / 100;
            for (size_t i = 0; i < members.size(); ++i) {
                if (i < n_train) tr.push_back(members[i]);
                else if (i < n_train + n_val) va.push_back(members[i]);
                else te.push_back(members[i]);
            }
        }
        auto copy_split = [&](Tensor<float>& x, std::vector<int>& y, const std::vector<size_t>& idx) {
            x.resize(static_cast<int>(idx.size()), full.channels, full.height, full.width);
            y.resize(idx.size());
            for (size_t i = 0; i < idx.size(); ++i) {
                y[i] = full.train_y[idx[i]];
                std::copy_n(full.train_x.data() + idx[i] * full.train_x.sample_size(),
                            full.train_x.sample_size(), x.data() + i * full.train_x.sample_size());
            }
        };
        copy_split(ds.train_x, ds.train_y, tr);
        copy_split(ds.val_x, ds.val_y, va);
        copy_split(ds.test_x, ds.test_y, te);
    }
    ds.normalize();
    return ds;
}

inline std::string manifest_text(const SearchConfig& cfg, const std::string& started,
                                 const std::string& finished, double wall_seconds,
                                 const std::filesystem::path& out_dir) {
    KvFile kv;
    kv.set("search_id", cfg.search_id);
    kv.set("config_hash", config_hash_hex(cfg));
    kv.set("started", started);
    kv.set("finished", finished);
    kv.set("wall_seconds", fmt_g(wall_seconds, 6));
    kv.set("archive", (out_dir / "archive.csv").string());
    kv.set("populations", (out_dir / "populations.csv").string());
    kv.set("results_dir", (out_dir / "results").string());
    std::string out = kv.serialize();
    out += "# config snapshot\n";
    out += search_config_kv(cfg).serialize();
    return out;
}

}  // namespace evonas
