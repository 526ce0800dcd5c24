#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "evonas/archive.hpp"
#include "evonas/metrics.hpp"
#include "evonas/nsga2.hpp"
#include "evonas/stats.hpp"

namespace evonas {

// ---------------------------------------------------------------------------
// Motif mining over the Pareto front.
// ---------------------------------------------------------------------------

/// Wildcard pattern over the 6-gene encoding; -1 matches any operator.
struct Motif {
    std::array<std::int8_t, kNumGenes> pattern{};
    int size = 0;          // non-wildcard slots, 1..5
    int support = 0;       // front members matching the pattern
    double correlation = 0.0;  // |Spearman rho| vs front rank order

    std::string str() const {
        std::string s = "[";
        for (int i = 0; i < kNumGenes; ++i) {
            if (i) s += ' ';
            s += pattern[i] < 0 ? std::string("*") : std::to_string(int(pattern[i]));
        }
        return s + "]";
    }

    bool matches(const Encoding& e) const {
        for (int i = 0; i < kNumGenes; ++i)
            if (pattern[i] >= 0 && pattern[i] != static_cast<std::int8_t>(e.genes[i])) return false;
        return true;
    }

    /// The uniform operator code when all non-wildcard slots agree, else -1.
    int uniform_op() const {
        int op = -1;
        for (int i = 0; i < kNumGenes; ++i) {
            if (pattern[i] < 0) continue;
            if (op < 0) op = pattern[i];
            else if (op != pattern[i]) return -1;
        }
        return op;
    }
};

/// Front members in motif-rank order: ascending accuracy, ties by descending
/// introspectability, then ascending id.
inline std::vector<Individual> motif_rank_order(std::vector<Individual> front) {
    std::stable_sort(front.begin(), front.end(), [](const Individual& a, const Individual& b) {
        if (a.obj().accuracy != b.obj().accuracy) return a.obj().accuracy < b.obj().accuracy;
        if (a.obj().introspectability != b.obj().introspectability)
            return a.obj().introspectability > b.obj().introspectability;
        return a.id < b.id;
    });
    return front;
}

/// Every motif of size 1..5 an encoding carries: 62 per encoding.
inline std::vector<std::array<std::int8_t, kNumGenes>> motifs_of(const Encoding& e) {
    std::vector<std::array<std::int8_t, kNumGenes>> out;
    for (int mask = 1; mask < (1 << kNumGenes) - 1; ++mask) {
        std::array<std::int8_t, kNumGenes> pat;
        for (int i = 0; i < kNumGenes; ++i)
            pat[i] = (mask >> i) & 1 ? static_cast<std::int8_t>(e.genes[i]) : std::int8_t(-1);
        out.push_back(pat);
    }
    return out;
}

/// Motif discovery: enumerate the wildcard motifs carried by the front, score
/// each by |Spearman| between the front rank order and the motif signal (the
/// match indicator, or the operator count when all motif slots name the same
/// operator), drop weak motifs (support < 3 or correlation < 0.2), and return
/// the Pareto set over (correlation up, support up, size down), strongest
/// correlation first. `scored_out`, when given, receives the filtered list
/// before the Pareto reduction.
inline std::vector<Motif> mine_motifs(const std::vector<Individual>& front_in,
                                      std::vector<Motif>* scored_out = nullptr) {
    if (front_in.size() < 3) return {};
    const auto front = motif_rank_order(front_in);
    const size_t n = front.size();
    std::vector<double> ranks(n);
    for (size_t i = 0; i < n; ++i) ranks[i] = static_cast<double>(i);

    std::set<std::array<std::int8_t, kNumGenes>> seen;
    std::vector<Motif> scored;
    for (const auto& member : front) {
        for (const auto& pat : motifs_of(member.encoding)) {
            if (!seen.insert(pat).second) continue;
            Motif m;
            m.pattern = pat;
            for (int i = 0; i < kNumGenes; ++i)
                if (pat[i] >= 0) ++m.size;
            std::vector<double> signal(n);
            const int op = m.uniform_op();
            for (size_t i = 0; i < n; ++i) {
                if (op >= 0) {
                    int count = 0;
                    for (auto g : front[i].encoding.genes)
                        if (g == op) ++count;
                    signal[i] = count;
                } else {
                    signal[i] = m.matches(front[i].encoding) ? 1.0 : 0.0;
                }
                if (m.matches(front[i].encoding)) ++m.support;
            }
            m.correlation = std::abs(spearman(ranks, signal).value_or(0.0));
            if (m.support < 3 || m.correlation < 0.2) continue;
            scored.push_back(m);
        }
    }
    if (scored_out) *scored_out = scored;

    // Pareto filter on (correlation, support, -size).
    auto dominates_motif = [](const Motif& a, const Motif& b) {
        const bool ge = a.correlation >= b.correlation && a.support >= b.support && a.size <= b.size;
        const bool gt = a.correlation > b.correlation || a.support > b.support || a.size < b.size;
        return ge && gt;
    };
    std::vector<Motif> out;
    for (const auto& m : scored) {
        bool dominated = false;
        for (const auto& other : scored)
            if (dominates_motif(other, m)) {
                dominated = true;
                break;
            }
        if (!dominated) out.push_back(m);
    }
    std::stable_sort(out.begin(), out.end(), [](const Motif& a, const Motif& b) {
        if (a.correlation != b.correlation) return a.correlation > b.correlation;
        if (a.support != b.support) return a.support > b.support;
        if (a.size != b.size) return a.size < b.size;
        return a.pattern < b.pattern;
    });
    return out;
}

/// Per-operator frequency over the front, normalized by total cell operations
/// (6 per member), descending.
inline std::vector<std::pair<Op, double>> operator_frequencies(const std::vector<Individual>& front) {
    if (front.empty()) throw ValidationError("operator_frequencies: empty front");
    std::array<int, kNumOps> counts{};
    for (const auto& ind : front)
        for (auto g : ind.encoding.genes) ++counts[g];
    const double total = static_cast<double>(kNumGenes) * front.size();
    std::vector<std::pair<Op, double>> out;
    for (int op = 0; op < kNumOps; ++op) out.emplace_back(static_cast<Op>(op), counts[op] / total);
    std::stable_sort(out.begin(), out.end(),
                     [](const auto& a, const auto& b) { return a.second > b.second; });
    return out;
}

// ---------------------------------------------------------------------------
// Lineage (phylogenetic) extraction.
// ---------------------------------------------------------------------------

struct LineageNode {
    std::int64_t id = -1;
    int generation = 0;
    std::vector<std::int64_t> parent_ids;
    ObjectiveVector objectives;
    bool pareto_in_own_generation = false;
};

struct LineageTree {
    std::int64_t target = -1;
    std::vector<LineageNode> nodes;  // ancestor closure, ascending id
};

/// Ids of the generation-g population's non-dominated members.
inline std::set<std::int64_t> generation_front_ids(const ParetoArchive& archive, int generation) {
    std::set<std::int64_t> out;
    if (generation < 0 || generation >= static_cast<int>(archive.populations_by_generation.size()))
        return out;
    std::vector<Individual> pop;
    for (auto id : archive.populations_by_generation[generation]) pop.push_back(archive.by_id(id));
    if (pop.empty()) return out;
    auto fronts = nondominated_sort(pop);
    for (auto id : fronts[0]) out.insert(id);
    return out;
}

/// Ancestor closure of the target with per-generation Pareto flags.
inline LineageTree lineage(const ParetoArchive& archive, std::int64_t target_id) {
    LineageTree tree;
    tree.target = target_id;
    std::set<std::int64_t> closure;
    std::vector<std::int64_t> stack{target_id};
    while (!stack.empty()) {
        const auto id = stack.back();
        stack.pop_back();
        if (!closure.insert(id).second) continue;
        for (auto p : archive.by_id(id).parent_ids) stack.push_back(p);
    }
    std::map<int, std::set<std::int64_t>> front_cache;
    for (auto id : closure) {
        const auto& ind = archive.by_id(id);
        auto [it, fresh] = front_cache.try_emplace(ind.generation);
        if (fresh) it->second = generation_front_ids(archive, ind.generation);
        LineageNode node;
        node.id = id;
        node.generation = ind.generation;
        node.parent_ids = ind.parent_ids;
        node.objectives = ind.obj();
        node.pareto_in_own_generation = it->second.count(id) > 0;
        tree.nodes.push_back(node);
    }
    std::sort(tree.nodes.begin(), tree.nodes.end(),
              [](const LineageNode& a, const LineageNode& b) { return a.id < b.id; });
    return tree;
}

// ---------------------------------------------------------------------------
// Per-generation population statistics and front evolution curves.
// ---------------------------------------------------------------------------

struct GenerationStats {
    int generation = 0;
    int population = 0;
    int front_size = 0;
    double max_accuracy = 0, median_accuracy = 0;
    double max_introspectability = 0, median_introspectability = 0;
    double front_mean_accuracy = 0, front_ci95_accuracy = 0;
    double front_mean_introspectability = 0, front_ci95_introspectability = 0;
};

inline std::vector<GenerationStats> generation_stats(const ParetoArchive& archive) {
    std::vector<GenerationStats> out;
    for (size_t g = 0; g < archive.populations_by_generation.size(); ++g) {
        GenerationStats s;
        s.generation = static_cast<int>(g);
        std::vector<double> acc, intros, facc, fintros;
        const auto front = generation_front_ids(archive, static_cast<int>(g));
        for (auto id : archive.populations_by_generation[g]) {
            const auto& obj = archive.by_id(id).obj();
            acc.push_back(obj.accuracy);
            intros.push_back(obj.introspectability);
            if (front.count(id)) {
                facc.push_back(obj.accuracy);
                fintros.push_back(obj.introspectability);
            }
        }
        s.population = static_cast<int>(acc.size());
        s.front_size = static_cast<int>(facc.size());
        if (!acc.empty()) {
            s.max_accuracy = *std::max_element(acc.begin(), acc.end());
            s.median_accuracy = median(acc);
            s.max_introspectability = *std::max_element(intros.begin(), intros.end());
            s.median_introspectability = median(intros);
            s.front_mean_accuracy = mean(facc);
            s.front_ci95_accuracy = ci95_halfwidth(facc);
            s.front_mean_introspectability = mean(fintros);
            s.front_ci95_introspectability = ci95_halfwidth(fintros);
        }
        out.push_back(s);
    }
    return out;
}

// ---------------------------------------------------------------------------
// 2-D PCA of class means via power iteration with deflation.
// ---------------------------------------------------------------------------

struct Pca2d {
    std::vector<std::array<double, 2>> points;  // one per class
    std::array<double, 2> eigenvalues{};
    std::vector<std::vector<double>> components;  // 2 x dim, orthonormal rows
    bool rank_deficient = false;
};

namespace detail {

/// Leading eigenpair of the (implicit) covariance C = Xc^T Xc / n.
/// `deflate` removes a previously found eigenpair.
inline std::pair<double, std::vector<double>> power_iteration(
    const std::vector<std::vector<double>>& xc, const std::vector<double>* deflate_v,
    double deflate_lambda, double tol = 1e-9, int max_iters = 10000) {
    const size_t n = xc.size(), d = xc[0].size();
    std::vector<double> v(d);
    Rng rng(0x9ca2d);
    for (auto& x : v) x = rng.normal();
    auto normalize = [&](std::vector<double>& u) {
        double norm = 0;
        for (double x : u) norm += x * x;
        norm = std::sqrt(norm);
        if (norm > 0)
            for (double& x : u) x /= norm;
        return norm;
    };
    normalize(v);
    double lambda = 0;
    for (int it = 0; it < max_iters; ++it) {
        // w = C v = Xc^T (Xc v) / n, minus the deflated component.
        std::vector<double> xv(n, 0.0);
        for (size_t i = 0; i < n; ++i)
            for (size_t j = 0; j < d; ++j) xv[i] += xc[i][j] * v[j];
        std::vector<double> w(d, 0.0);
        for (size_t i = 0; i < n; ++i)
            for (size_t j = 0; j < d; ++j) w[j] += xc[i][j] * xv[i];
        for (auto& x : w) x /= static_cast<double>(n);
        if (deflate_v) {
            double proj = 0;
            for (size_t j = 0; j < d; ++j) proj += (*deflate_v)[j] * v[j];
            for (size_t j = 0; j < d; ++j) w[j] -= deflate_lambda * proj * (*deflate_v)[j];
        }
        const double new_lambda = normalize(w);
        double diff = 0;
        for (size_t j = 0; j < d; ++j) diff = std::max(diff, std::abs(w[j] - v[j]));
        // Sign flips oscillate for negative-definite directions; compare both.
        double diff_neg = 0;
        for (size_t j = 0; j < d; ++j) diff_neg = std::max(diff_neg, std::abs(w[j] + v[j]));
        v = w;
        lambda = new_lambda;
        if (std::min(diff, diff_neg) < tol) break;
    }
    // Deterministic sign: largest-magnitude component positive.
    size_t arg = 0;
    for (size_t j = 1; j < v.size(); ++j)
        if (std::abs(v[j]) > std::abs(v[arg])) arg = j;
    if (v[arg] < 0)
        for (auto& x : v) x = -x;
    return {lambda, v};
}

}  // namespace detail

/// Projects the centered class means onto their top-2 principal directions.
/// A rank-deficient covariance zeroes the second component.
inline Pca2d pca2d(const ClassActivationProfile& profile) {
    const int nc = profile.classes();
    if (nc < 3) throw ValidationError("pca2d needs at least 3 class means");
    const int d = profile.dim();
    std::vector<std::vector<double>> xc(profile.class_means);
    std::vector<double> center(d, 0.0);
    for (const auto& row : xc)
        for (int j = 0; j < d; ++j) center[j] += row[j];
    for (auto& c : center) c /= nc;
    for (auto& row : xc)
        for (int j = 0; j < d; ++j) row[j] -= center[j];

    auto [l1, v1] = detail::power_iteration(xc, nullptr, 0.0);
    auto [l2, v2] = detail::power_iteration(xc, &v1, l1);
    Pca2d out;
    out.eigenvalues = {l1, l2};
    if (l1 <= 0 || l2 / std::max(l1, 1e-300) < 1e-12) {
        out.rank_deficient = true;
        l2 = 0;
        std::fill(v2.begin(), v2.end(), 0.0);
        out.eigenvalues[1] = 0;
    }
    out.components = {v1, v2};
    for (int c = 0; c < nc; ++c) {
        double p0 = 0, p1 = 0;
        for (int j = 0; j < d; ++j) {
            p0 += xc[c][j] * v1[j];
            p1 += xc[c][j] * v2[j];
        }
        out.points.push_back({p0, p1});
    }
    return out;
}

// ---------------------------------------------------------------------------
// Objective-vs-cost ablation: rank-quantile buckets per objective with median
// generalization gap, parameter count and train cost.
// ---------------------------------------------------------------------------

struct AblationRow {
    std::string bucket;  // e.g. "accuracy_q2"
    int population = 0;
    double median_generalization_gap = 0.0;
    double median_param_count = 0.0;
    double median_train_seconds = 0.0;
};

inline std::vector<AblationRow> ablation_table(const ParetoArchive& archive, int buckets = 4) {
    std::vector<const Individual*> evaluated;
    for (const auto& ind : archive.individuals)
        if (ind.status == EvalStatus::Ok) evaluated.push_back(&ind);
    std::vector<AblationRow> rows;
    if (evaluated.empty()) return rows;
    const size_t n = evaluated.size();
    for (int objective = 0; objective < 2; ++objective) {
        std::vector<size_t> order(n);
        std::iota(order.begin(), order.end(), size_t{0});
        std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
            return evaluated[a]->obj()[objective] < evaluated[b]->obj()[objective];
        });
        std::vector<std::vector<double>> gap(buckets), params(buckets), secs(buckets);
        for (size_t r = 0; r < n; ++r) {
            const int b = std::min<int>(buckets - 1, static_cast<int>(r * buckets / n));
            const auto* ind = evaluated[order[r]];
            gap[b].push_back(ind->metrics.generalization_gap());
            params[b].push_back(static_cast<double>(ind->metrics.param_count));
            secs[b].push_back(ind->metrics.train_seconds);
        }
        for (int b = 0; b < buckets; ++b) {
            if (gap[b].empty()) continue;
            AblationRow row;
            row.bucket = std::string(objective == 0 ? "introspectability" : "accuracy") + "_q" +
                         std::to_string(b + 1);
            row.population = static_cast<int>(gap[b].size());
            row.median_generalization_gap = median(gap[b]);
            row.median_param_count = median(params[b]);
            row.median_train_seconds = median(secs[b]);
            rows.push_back(row);
        }
    }
    return rows;
}

}  // namespace evonas
