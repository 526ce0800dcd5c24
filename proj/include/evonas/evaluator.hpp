#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "evonas/config.hpp"

namespace evonas {

struct EvalJob {
    std::int64_t job_id = -1;
    std::int64_t individual_id = -1;
    Encoding encoding;
    std::uint64_t rng_seed = 0;
};

struct EvalOutcome {
    std::int64_t job_id = -1;
    std::int64_t individual_id = -1;
    bool ok = false;
    ObjectiveVector objectives;
    EvalMetrics metrics;
    std::string profile_ref;  // opaque artifact reference (path), may be empty
};

/// Batch evaluation interface used by the search loop. Implementations must
/// return exactly one outcome per job, in any order; the loop keys by id.
using EvaluateFn = std::function<std::vector<EvalOutcome>(const std::vector<EvalJob>&)>;

/// Artifact layout: results/<search_id>/<individual_id>/{profile.csv,model.bin}.
inline std::filesystem::path artifact_dir(const std::filesystem::path& results_root,
                                          const std::string& search_id, std::int64_t individual_id) {
    return results_root / search_id / std::to_string(individual_id);
}

/// Trains and scores one encoding. Single-threaded and deterministic given the
/// job seed. Any exception or NaN divergence yields a failed outcome with
/// worst-case objectives (0, 0).
class EvalTask {
public:
    EvalTask(const EvalConfig& cfg, std::string search_id, std::filesystem::path results_root)
        : cfg_(cfg),
          search_id_(std::move(search_id)),
          results_root_(std::move(results_root)),
          dataset_(build_dataset(cfg)) {
        if (cfg_.metric == IntrospectabilityMetric::WordNet)
            hierarchy_ = load_hierarchy_file(cfg_.hierarchy_path);
        arch_ = cfg_.arch;
        arch_.classes = dataset_.classes;
        arch_.in_channels = dataset_.channels;
        arch_.height = dataset_.height;
        arch_.width = dataset_.width;
    }

    const Dataset& dataset() const { return dataset_; }
    const ArchConfig& arch() const { return arch_; }

    EvalOutcome run(const EvalJob& job) const {
        EvalOutcome out;
        out.job_id = job.job_id;
        out.individual_id = job.individual_id;
        try {
            Model<float> model(compile(job.encoding, arch_));
            EvalResult res = train_and_eval(model, dataset_, cfg_.train, job.rng_seed);
            if (res.failed) return out;  // ok = false, objectives (0,0)
            double intros = res.introspectability;
            if (hierarchy_) intros = introspectability_wordnet(res.profile, *hierarchy_);
            out.ok = true;
            out.objectives = {intros, res.validation_accuracy};
            out.metrics.train_accuracy = res.train_accuracy;
            out.metrics.validation_accuracy = res.validation_accuracy;
            out.metrics.param_count = res.param_count;
            out.metrics.train_seconds = res.train_seconds;
            if (!results_root_.empty()) {
                const auto dir = artifact_dir(results_root_, search_id_, job.individual_id);
                write_file(dir / "profile.csv", profile_csv(res.profile));
                write_file(dir / "model.bin", serialize_model(model));
                out.profile_ref = (dir / "profile.csv").string();
            }
        } catch (const std::exception&) {
            out.ok = false;
            out.objectives = {};
        }
        return out;
    }

private:
    EvalConfig cfg_;
    std::string search_id_;
    std::filesystem::path results_root_;
    Dataset dataset_;
    std::optional<SemanticHierarchy> hierarchy_;
    ArchConfig arch_;
};

/// In-process evaluator: a fixed pool of worker threads draining the job list.
/// Each evaluation is internally single-threaded; outcomes land in a buffer
/// indexed by job position, so scheduling order cannot affect results.
class LocalEvaluator {
public:
    LocalEvaluator(const EvalConfig& cfg, std::string search_id, std::filesystem::path results_root,
                   int threads = 0)
        : task_(cfg, std::move(search_id), std::move(results_root)),
          threads_(threads > 0 ? threads
                               : std::max(1u, std::thread::hardware_concurrency())) {}

    const EvalTask& task() const { return task_; }

    std::vector<EvalOutcome> operator()(const std::vector<EvalJob>& jobs) const {
        std::vector<EvalOutcome> outcomes(jobs.size());
        std::atomic<size_t> next{0};
        auto worker = [&] {
            for (;;) {
                const size_t i = next.fetch_add(1);
                if (i >= jobs.size()) return;
                outcomes[i] = task_.run(jobs[i]);
            }
        };
        const int n = std::min<int>(threads_, static_cast<int>(jobs.size()));
        if (n <= 1) {
            worker();
        } else {
            std::vector<std::thread> pool;
            pool.reserve(n);
            for (int t = 0; t < n; ++t) pool.emplace_back(worker);
            for (auto& t : pool) t.join();
        }
        return outcomes;
    }

private:
    EvalTask task_;
    int threads_;
};

}  // namespace evonas
