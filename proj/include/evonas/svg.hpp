#pragma once

#include <algorithm>
#include <string>
#include <vector>

#include "evonas/hypervolume.hpp"
#include "evonas/io.hpp"

namespace evonas {

/// Minimal Pareto-front scatter: all evaluated points, front points
/// highlighted, the dominated region above the reference point shaded.
inline std::string pareto_svg(const std::vector<ObjectiveVector>& all,
                              const std::vector<ObjectiveVector>& front,
                              const HypervolumeConfig& ref) {
    const double w = 480, h = 360, margin = 48;
    double max_x = ref.intros_ref, max_y = 1.0;
    for (const auto& p : all) max_x = std::max(max_x, p.introspectability);
    max_x = std::max(max_x * 1.05, ref.intros_ref + 1e-9);
    const double min_x = 0.0, min_y = 0.0;
    auto sx = [&](double v) { return margin + (v - min_x) / (max_x - min_x) * (w - 2 * margin); };
    auto sy = [&](double v) { return h - margin - (v - min_y) / (max_y - min_y) * (h - 2 * margin); };

    std::string svg = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + fmt_g(w) +
                      "\" height=\"" + fmt_g(h) + "\">\n";
    svg += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";

    // Hypervolume staircase polygon.
    std::vector<ObjectiveVector> pts;
    for (const auto& p : front)
        if (dominates(p, {ref.intros_ref, ref.acc_ref})) pts.push_back(p);
    if (!pts.empty()) {
        std::sort(pts.begin(), pts.end(), [](const ObjectiveVector& a, const ObjectiveVector& b) {
            if (a.introspectability != b.introspectability)
                return a.introspectability > b.introspectability;
            return a.accuracy > b.accuracy;
        });
        std::string poly = fmt_g(sx(ref.intros_ref)) + "," + fmt_g(sy(ref.acc_ref));
        double best_acc = ref.acc_ref;
        for (const auto& p : pts) {
            if (p.accuracy <= best_acc) continue;
            poly += " " + fmt_g(sx(p.introspectability)) + "," + fmt_g(sy(best_acc));
            poly += " " + fmt_g(sx(p.introspectability)) + "," + fmt_g(sy(p.accuracy));
            best_acc = p.accuracy;
        }
        poly += " " + fmt_g(sx(ref.intros_ref)) + "," + fmt_g(sy(best_acc));
        svg += "<polygon points=\"" + poly + "\" fill=\"#9ecae1\" fill-opacity=\"0.5\" stroke=\"none\"/>\n";
    }

    // Axes.
    svg += "<line x1=\"" + fmt_g(margin) + "\" y1=\"" + fmt_g(h - margin) + "\" x2=\"" + fmt_g(w - margin) +
           "\" y2=\"" + fmt_g(h - margin) + "\" stroke=\"black\"/>\n";
    svg += "<line x1=\"" + fmt_g(margin) + "\" y1=\"" + fmt_g(margin) + "\" x2=\"" + fmt_g(margin) +
           "\" y2=\"" + fmt_g(h - margin) + "\" stroke=\"black\"/>\n";
    svg += "<text x=\"" + fmt_g(w / 2) + "\" y=\"" + fmt_g(h - 12) +
           "\" text-anchor=\"middle\" font-size=\"12\">introspectability</text>\n";
    svg += "<text x=\"14\" y=\"" + fmt_g(h / 2) + "\" text-anchor=\"middle\" font-size=\"12\" transform=\"rotate(-90 14 " +
           fmt_g(h / 2) + ")\">accuracy</text>\n";

    for (const auto& p : all)
        svg += "<circle cx=\"" + fmt_g(sx(p.introspectability)) + "\" cy=\"" + fmt_g(sy(p.accuracy)) +
               "\" r=\"2.5\" fill=\"#bbbbbb\"/>\n";
    for (const auto& p : front)
        svg += "<circle cx=\"" + fmt_g(sx(p.introspectability)) + "\" cy=\"" + fmt_g(sy(p.accuracy)) +
               "\" r=\"3.5\" fill=\"#d62728\"/>\n";
    svg += "</svg>\n";
    return svg;
}

}  // namespace evonas
