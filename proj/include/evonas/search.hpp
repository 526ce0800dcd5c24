#pragma once

#include <iostream>
#include <map>
#include <set>
#include <unordered_set>

#include "evonas/evaluator.hpp"
#include "evonas/hypervolume.hpp"
#include "evonas/nsga2.hpp"

namespace evonas {

struct SearchResult {
    ParetoArchive archive;
    std::vector<double> hypervolume_by_generation;  // archive-front value after each generation
};

namespace detail {

constexpr int kMatingBudget = 10000;

inline Encoding sample_connected_unique(Rng& rng, const ParetoArchive& archive,
                                        const std::unordered_set<Encoding, EncodingHash>& batch) {
    for (int attempt = 0; attempt < kMatingBudget; ++attempt) {
        Encoding e;
        for (int g = 0; g < kNumGenes; ++g) e.genes[g] = static_cast<std::uint8_t>(rng.below(kNumOps));
        if (!is_connected(e)) continue;
        if (archive.contains_encoding(e) || batch.count(e)) continue;
        return e;
    }
    throw SearchError("sampling budget exhausted: could not draw a fresh connected encoding");
}

}  // namespace detail

/// Binary-tournament mating producing `population_size` connected, never-seen
/// offspring. A child duplicating any archive encoding or a sibling in the
/// batch is discarded and the mating retried; the retry budget caps at 10,000
/// matings, after which the search space is presumed exhausted.
inline std::vector<Individual> make_offspring(const std::vector<Individual>& population,
                                              const ParetoArchive& archive, Rng& rng,
                                              const SearchConfig& cfg, int generation,
                                              std::int64_t first_id) {
    auto ranked = RankedPopulation::build(population, cfg.objective_mode);
    std::vector<Individual> offspring;
    std::unordered_set<Encoding, EncodingHash> batch;
    std::int64_t next_id = first_id;
    int attempts = 0;
    while (offspring.size() < static_cast<size_t>(cfg.population_size)) {
        if (attempts >= detail::kMatingBudget)
            throw SearchError("re-mating budget exhausted after " +
                              std::to_string(detail::kMatingBudget) +
                              " attempts; the search space may be exhausted");
        ++attempts;
        const size_t p1 = ranked.tournament(rng);
        const size_t p2 = ranked.tournament(rng);
        auto [c1, c2] = sbx_crossover(ranked.members[p1].encoding, ranked.members[p2].encoding, rng,
                                      cfg.crossover);
        for (Encoding child : {c1, c2}) {
            if (offspring.size() >= static_cast<size_t>(cfg.population_size)) break;
            child = polynomial_mutation(child, rng, cfg.mutation);
            if (!is_connected(child)) continue;
            if (archive.contains_encoding(child) || batch.count(child)) continue;
            Individual ind;
            ind.id = next_id++;
            ind.encoding = child;
            ind.generation = generation;
            ind.parent_ids = {ranked.members[p1].id};
            if (ranked.members[p2].id != ranked.members[p1].id)
                ind.parent_ids.push_back(ranked.members[p2].id);
            batch.insert(child);
            offspring.push_back(std::move(ind));
        }
    }
    return offspring;
}

/// The NSGA-II loop. Single-threaded and deterministic given the seed and a
/// deterministic evaluator; only `evaluate` may run work concurrently.
/// Evaluation failures are logged and scored (0, 0) so generations stay full.
inline SearchResult run_search(const SearchConfig& cfg, const EvaluateFn& evaluate,
                               std::ostream* log = nullptr) {
    Rng rng(mix64(cfg.seed));
    SearchResult result;
    auto& archive = result.archive;
    const auto hv_cfg = cfg.hv();

    auto evaluate_into = [&](std::vector<Individual>& batch) {
        std::vector<EvalJob> jobs;
        jobs.reserve(batch.size());
        for (const auto& ind : batch)
            jobs.push_back({ind.id, ind.id, ind.encoding, seed_for_individual(cfg.seed, ind.id)});
        auto outcomes = evaluate(jobs);
        if (outcomes.size() != jobs.size())
            throw SearchError("evaluator returned " + std::to_string(outcomes.size()) +
                              " outcomes for " + std::to_string(jobs.size()) + " jobs");
        std::map<std::int64_t, const EvalOutcome*> by_id;
        for (const auto& o : outcomes) by_id[o.individual_id] = &o;
        for (auto& ind : batch) {
            auto it = by_id.find(ind.id);
            if (it == by_id.end())
                throw SearchError("evaluator returned no outcome for individual " +
                                  std::to_string(ind.id));
            const auto& o = *it->second;
            if (o.ok) {
                ind.objectives = o.objectives;
                ind.metrics = o.metrics;
                ind.status = EvalStatus::Ok;
            } else {
                ind.objectives = ObjectiveVector{0.0, 0.0};
                ind.status = EvalStatus::Failed;
                if (log)
                    *log << "evaluation failed for individual " << ind.id << " (" << ind.encoding.str()
                         << "); assigned objectives (0,0)\n";
            }
        }
    };

    // Generation 0: uniform sampling over the 6 genes, resampling until each
    // candidate is connected and unseen.
    std::vector<Individual> population;
    {
        std::unordered_set<Encoding, EncodingHash> batch;
        for (int i = 0; i < cfg.population_size; ++i) {
            Individual ind;
            ind.id = i;
            ind.generation = 0;
            ind.encoding = detail::sample_connected_unique(rng, archive, batch);
            batch.insert(ind.encoding);
            population.push_back(std::move(ind));
        }
        evaluate_into(population);
        for (const auto& ind : population) archive.add(ind);
    }
    auto record_generation = [&](const std::vector<Individual>& pop) {
        std::vector<std::int64_t> ids;
        ids.reserve(pop.size());
        for (const auto& ind : pop) ids.push_back(ind.id);
        archive.populations_by_generation.push_back(ids);
        archive.population = std::move(ids);
        result.hypervolume_by_generation.push_back(archive_front_hypervolume(archive, hv_cfg));
        if (log)
            *log << "generation " << archive.populations_by_generation.size() - 1 << ": archive "
                 << archive.size() << ", front hypervolume "
                 << fmt_g(result.hypervolume_by_generation.back()) << "\n";
    };
    record_generation(population);

    std::int64_t next_id = cfg.population_size;
    for (int gen = 1; gen <= cfg.generations; ++gen) {
        auto offspring = make_offspring(population, archive, rng, cfg, gen, next_id);
        next_id += static_cast<std::int64_t>(offspring.size());
        evaluate_into(offspring);
        for (const auto& ind : offspring) archive.add(ind);

        std::vector<Individual> pool = population;
        pool.insert(pool.end(), offspring.begin(), offspring.end());
        population = survive(pool, static_cast<size_t>(cfg.population_size), cfg.objective_mode);
        record_generation(population);
    }

    // Archive-wide ranked fronts; front 0 is globally non-dominated.
    archive.fronts = nondominated_sort(archive.individuals, ObjectiveMode::Multi);
    return result;
}

}  // namespace evonas
