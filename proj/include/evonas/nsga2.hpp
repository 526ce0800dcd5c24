#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include "evonas/archive.hpp"
#include "evonas/rng.hpp"

namespace evonas {

constexpr int kNumObjectives = 2;

/// Which objectives drive selection. Multi uses both; AccuracyOnly reduces the
/// engine to a single-objective elitist GA (introspectability is still
/// recorded, just ignored by dominance/crowding). MultiRegularized selects like
/// Multi but trains candidates with the introspectability regularizer.
enum class ObjectiveMode { Multi, AccuracyOnly, MultiRegularized };

inline bool selection_uses_introspectability(ObjectiveMode m) {
    return m != ObjectiveMode::AccuracyOnly;
}

/// Standard Pareto dominance: no worse in every objective, strictly better in
/// at least one.
inline bool dominates(const ObjectiveVector& a, const ObjectiveVector& b,
                      ObjectiveMode mode = ObjectiveMode::Multi) {
    bool better = false;
    if (selection_uses_introspectability(mode)) {
        if (a.introspectability < b.introspectability) return false;
        if (a.introspectability > b.introspectability) better = true;
    }
    if (a.accuracy < b.accuracy) return false;
    if (a.accuracy > b.accuracy) better = true;
    return better;
}

/// Deb's fast non-dominated sort. Returns fronts as indices into `objs`;
/// F_k is the non-dominated set after removing F_0..F_{k-1}.
inline std::vector<std::vector<size_t>> nondominated_sort_indices(
    const std::vector<ObjectiveVector>& objs, ObjectiveMode mode = ObjectiveMode::Multi) {
    const size_t n = objs.size();
    std::vector<std::vector<size_t>> dominated(n);
    std::vector<int> dom_count(n, 0);
    for (size_t i = 0; i < n; ++i) {
        for (size_t j = i + 1; j < n; ++j) {
            if (dominates(objs[i], objs[j], mode)) {
                dominated[i].push_back(j);
                ++dom_count[j];
            } else if (dominates(objs[j], objs[i], mode)) {
                dominated[j].push_back(i);
                ++dom_count[i];
            }
        }
    }
    std::vector<std::vector<size_t>> fronts;
    std::vector<size_t> current;
    for (size_t i = 0; i < n; ++i)
        if (dom_count[i] == 0) current.push_back(i);
    while (!current.empty()) {
        fronts.push_back(current);
        std::vector<size_t> next;
        for (size_t i : current)
            for (size_t j : dominated[i])
                if (--dom_count[j] == 0) next.push_back(j);
        std::sort(next.begin(), next.end());
        current = std::move(next);
    }
    return fronts;
}

inline std::vector<std::vector<std::int64_t>> nondominated_sort(
    const std::vector<Individual>& population, ObjectiveMode mode = ObjectiveMode::Multi) {
    std::vector<ObjectiveVector> objs;
    objs.reserve(population.size());
    for (const auto& ind : population) objs.push_back(ind.obj());
    auto fronts = nondominated_sort_indices(objs, mode);
    std::vector<std::vector<std::int64_t>> out(fronts.size());
    for (size_t f = 0; f < fronts.size(); ++f)
        for (size_t i : fronts[f]) out[f].push_back(population[i].id);
    return out;
}

/// Crowding distance within one front. Boundary members per objective get
/// +infinity; interior members accumulate (next - prev) / (max - min) per
/// objective; an objective with max == min contributes nothing.
inline std::vector<double> crowding_distance(const std::vector<ObjectiveVector>& front,
                                             ObjectiveMode mode = ObjectiveMode::Multi) {
    const size_t n = front.size();
    std::vector<double> dist(n, 0.0);
    if (n == 0) return dist;
    if (n <= 2) {
        std::fill(dist.begin(), dist.end(), std::numeric_limits<double>::infinity());
        return dist;
    }
    std::vector<size_t> order(n);
    for (int m = 0; m < kNumObjectives; ++m) {
        if (m == 0 && !selection_uses_introspectability(mode)) continue;
        std::iota(order.begin(), order.end(), size_t{0});
        std::stable_sort(order.begin(), order.end(),
                         [&](size_t a, size_t b) { return front[a][m] < front[b][m]; });
        const double span = front[order[n - 1]][m] - front[order[0]][m];
        dist[order[0]] = std::numeric_limits<double>::infinity();
        dist[order[n - 1]] = std::numeric_limits<double>::infinity();
        if (span <= 0.0) continue;
        for (size_t k = 1; k + 1 < n; ++k)
            dist[order[k]] += (front[order[k + 1]][m] - front[order[k - 1]][m]) / span;
    }
    return dist;
}

struct SbxParams {
    double p = 0.9;
    double eta = 3.0;
};

struct MutationParams {
    double p = 1.0 / 6.0;
    double eta = 3.0;
};

namespace detail {

constexpr double kGeneLo = 0.0;
constexpr double kGeneHi = 4.0;

inline std::uint8_t round_clamp(double y) {
    const double r = std::nearbyint(y);
    return static_cast<std::uint8_t>(std::clamp(r, kGeneLo, kGeneHi));
}

}  // namespace detail

/// Simulated binary crossover (Deb & Agrawal) on the integer genome: the
/// bounded real-coded operator applied per gene, children rounded to the
/// nearest integer and clamped to [0, 4].
inline std::pair<Encoding, Encoding> sbx_crossover(const Encoding& p1, const Encoding& p2, Rng& rng,
                                                   const SbxParams& params = {}) {
    validate(p1);
    validate(p2);
    Encoding c1 = p1, c2 = p2;
    if (rng.uniform() > params.p) return {c1, c2};
    for (int i = 0; i < kNumGenes; ++i) {
        if (rng.uniform() > 0.5) continue;
        double y1 = p1.genes[i], y2 = p2.genes[i];
        if (std::abs(y1 - y2) < 1e-14) continue;
        if (y1 > y2) std::swap(y1, y2);
        const double u = rng.uniform();
        const double exp = 1.0 / (params.eta + 1.0);
        auto spread = [&](double beta_bound) {
            const double alpha = 2.0 - std::pow(beta_bound, -(params.eta + 1.0));
            if (u <= 1.0 / alpha) return std::pow(u * alpha, exp);
            return std::pow(1.0 / (2.0 - u * alpha), exp);
        };
        const double bq1 = spread(1.0 + 2.0 * (y1 - detail::kGeneLo) / (y2 - y1));
        const double bq2 = spread(1.0 + 2.0 * (detail::kGeneHi - y2) / (y2 - y1));
        double a = 0.5 * ((y1 + y2) - bq1 * (y2 - y1));
        double b = 0.5 * ((y1 + y2) + bq2 * (y2 - y1));
        if (rng.uniform() <= 0.5) std::swap(a, b);
        c1.genes[i] = detail::round_clamp(a);
        c2.genes[i] = detail::round_clamp(b);
    }
    return {c1, c2};
}

/// Polynomial mutation (Deb), bounded form, rounded back to integers.
/// `mutated_count` reports how many genes the operator was applied to
/// (rounding may leave an applied gene unchanged).
inline Encoding polynomial_mutation(const Encoding& x, Rng& rng, const MutationParams& params = {},
                                    int* mutated_count = nullptr) {
    validate(x);
    Encoding out = x;
    int applied = 0;
    const double range = detail::kGeneHi - detail::kGeneLo;
    for (int i = 0; i < kNumGenes; ++i) {
        if (rng.uniform() > params.p) continue;
        ++applied;
        const double y = out.genes[i];
        const double d1 = (y - detail::kGeneLo) / range;
        const double d2 = (detail::kGeneHi - y) / range;
        const double u = rng.uniform();
        const double mpow = 1.0 / (params.eta + 1.0);
        double dq;
        if (u <= 0.5) {
            const double xy = 1.0 - d1;
            dq = std::pow(2.0 * u + (1.0 - 2.0 * u) * std::pow(xy, params.eta + 1.0), mpow) - 1.0;
        } else {
            const double xy = 1.0 - d2;
            dq = 1.0 - std::pow(2.0 * (1.0 - u) + 2.0 * (u - 0.5) * std::pow(xy, params.eta + 1.0), mpow);
        }
        out.genes[i] = detail::round_clamp(y + dq * range);
    }
    if (mutated_count) *mutated_count = applied;
    return out;
}

/// Rank + crowding view of a population, used by tournament selection and
/// elitist survival. Ties everywhere break on ascending id for determinism.
struct RankedPopulation {
    std::vector<Individual> members;
    std::vector<int> rank;               // per member
    std::vector<double> crowding;        // per member
    std::vector<std::vector<size_t>> fronts;

    static RankedPopulation build(std::vector<Individual> population, ObjectiveMode mode) {
        RankedPopulation rp;
        rp.members = std::move(population);
        std::vector<ObjectiveVector> objs;
        objs.reserve(rp.members.size());
        for (const auto& ind : rp.members) objs.push_back(ind.obj());
        rp.fronts = nondominated_sort_indices(objs, mode);
        rp.rank.assign(rp.members.size(), 0);
        rp.crowding.assign(rp.members.size(), 0.0);
        for (size_t f = 0; f < rp.fronts.size(); ++f) {
            std::vector<ObjectiveVector> front_objs;
            front_objs.reserve(rp.fronts[f].size());
            for (size_t i : rp.fronts[f]) front_objs.push_back(objs[i]);
            auto cd = crowding_distance(front_objs, mode);
            for (size_t k = 0; k < rp.fronts[f].size(); ++k) {
                rp.rank[rp.fronts[f][k]] = static_cast<int>(f);
                rp.crowding[rp.fronts[f][k]] = cd[k];
            }
        }
        return rp;
    }

    /// a beats b on (rank, crowding, id).
    bool preferred(size_t a, size_t b) const {
        if (rank[a] != rank[b]) return rank[a] < rank[b];
        if (crowding[a] != crowding[b]) return crowding[a] > crowding[b];
        return members[a].id < members[b].id;
    }

    size_t tournament(Rng& rng) const {
        const size_t a = rng.below(members.size());
        const size_t b = rng.below(members.size());
        return preferred(a, b) ? a : b;
    }
};

/// NSGA-II elitist survival over an evaluated pool (parents + offspring):
/// fill whole fronts, truncate the last admitted front by descending crowding
/// distance (ascending id on ties).
inline std::vector<Individual> survive(const std::vector<Individual>& pool, size_t population_size,
                                       ObjectiveMode mode = ObjectiveMode::Multi) {
    auto rp = RankedPopulation::build(pool, mode);
    std::vector<size_t> chosen;
    chosen.reserve(population_size);
    for (const auto& front : rp.fronts) {
        if (chosen.size() >= population_size) break;
        std::vector<size_t> members = front;
        std::sort(members.begin(), members.end(), [&](size_t a, size_t b) {
            if (rp.crowding[a] != rp.crowding[b]) return rp.crowding[a] > rp.crowding[b];
            return rp.members[a].id < rp.members[b].id;
        });
        for (size_t i : members) {
            if (chosen.size() >= population_size) break;
            chosen.push_back(i);
        }
    }
    std::vector<Individual> survivors;
    survivors.reserve(chosen.size());
    for (size_t i : chosen) survivors.push_back(rp.members[i]);
    std::sort(survivors.begin(), survivors.end(),
              [](const Individual& a, const Individual& b) { return a.id < b.id; });
    return survivors;
}

}  // namespace evonas
