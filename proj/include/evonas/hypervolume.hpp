#pragma once

#include <algorithm>
#include <vector>

#include "evonas/nsga2.hpp"

namespace evonas {

/// Reference point for the 2-D hypervolume. Default matches the random-guess
/// floor on accuracy: (0, 1/N_C).
struct HypervolumeConfig {
    double intros_ref = 0.0;
    double acc_ref = 0.0;

    static HypervolumeConfig for_classes(int num_classes) {
        return {0.0, num_classes > 0 ? 1.0 / num_classes : 0.0};
    }
};

/// Exact 2-D hypervolume: area of the union of rectangles spanned by each
/// point and the reference. Points that do not dominate the reference are
/// dropped (they would reward models that never learned the task); an empty
/// effective front gives 0. `dropped`, when given, receives the drop count.
inline double hypervolume(std::vector<ObjectiveVector> points, const HypervolumeConfig& cfg,
                          size_t* dropped = nullptr) {
    ObjectiveVector ref{cfg.intros_ref, cfg.acc_ref};
    size_t kept = 0;
    for (const auto& p : points)
        if (dominates(p, ref)) points[kept++] = p;
    if (dropped) *dropped = points.size() - kept;
    points.resize(kept);
    if (points.empty()) return 0.0;
    // Sweep by descending introspectability; each point adds the strip between
    // its accuracy and the best accuracy seen so far.
    std::sort(points.begin(), points.end(), [](const ObjectiveVector& a, const ObjectiveVector& b) {
        if (a.introspectability != b.introspectability) return a.introspectability > b.introspectability;
        return a.accuracy > b.accuracy;
    });
    double area = 0.0;
    double best_acc = cfg.acc_ref;
    for (const auto& p : points) {
        if (p.accuracy > best_acc) {
            area += (p.introspectability - cfg.intros_ref) * (p.accuracy - best_acc);
            best_acc = p.accuracy;
        }
    }
    return area;
}

/// Hypervolume of the non-dominated subset of all evaluated archive members.
/// The archive front only grows, so this value is non-decreasing over a search.
inline double archive_front_hypervolume(const ParetoArchive& archive, const HypervolumeConfig& cfg) {
    std::vector<ObjectiveVector> objs;
    for (const auto& ind : archive.individuals)
        if (ind.evaluated()) objs.push_back(ind.obj());
    if (objs.empty()) return 0.0;
    auto fronts = nondominated_sort_indices(objs);
    std::vector<ObjectiveVector> front;
    for (size_t i : fronts[0]) front.push_back(objs[i]);
    return hypervolume(std::move(front), cfg);
}

}  // namespace evonas
