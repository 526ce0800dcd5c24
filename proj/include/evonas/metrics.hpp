#pragma once

#include <cmath>
#include <deque>
#include <map>
#include <string>
#include <vector>

#include "evonas/errors.hpp"
#include "evonas/io.hpp"

namespace evonas {

/// Cosine distance 1 - u.v/(|u||v|), range [0,2]. A zero vector is defined to
/// be at distance 1 from anything (the orthogonal-equivalent), which keeps
/// dead-ReLU profiles finite without biasing toward 0 or 2.
inline double cosine_distance(const std::vector<double>& u, const std::vector<double>& v) {
    if (u.size() != v.size()) throw ValidationError("cosine_distance: length mismatch");
    double dot = 0, nu = 0, nv = 0;
    for (size_t i = 0; i < u.size(); ++i) {
        dot += u[i] * v[i];
        nu += u[i] * u[i];
        nv += v[i] * v[i];
    }
    if (nu == 0.0 || nv == 0.0) return 1.0;
    // sqrt(nu*nv) keeps the identity cases exact: for v == u the ratio is
    // dot/sqrt(dot*dot) == 1, so the distance is exactly 0 (and exactly 2 for
    // v == -u).
    double d = 1.0 - dot / std::sqrt(nu * nv);
    return std::min(std::max(d, 0.0), 2.0);
}

/// Per-class mean activation vectors plus (optionally) the per-sample rows
/// they were averaged from, and the block-boundary map of the capture layout.
struct ClassActivationProfile {
    std::vector<std::vector<double>> class_means;            // [class][dim]
    std::vector<std::pair<std::string, int>> block_map;      // block name -> width
    std::vector<std::vector<double>> sample_rows;            // optional
    std::vector<int> sample_labels;                          // labels for sample_rows

    int classes() const { return static_cast<int>(class_means.size()); }
    int dim() const { return class_means.empty() ? 0 : static_cast<int>(class_means[0].size()); }
};

/// Mean cosine distance over all unordered class pairs.
inline double introspectability(const ClassActivationProfile& profile) {
    const int nc = profile.classes();
    if (nc < 2) throw ValidationError("introspectability needs at least 2 classes");
    double sum = 0;
    for (int c = 0; c < nc; ++c)
        for (int k = c + 1; k < nc; ++k)
            sum += cosine_distance(profile.class_means[c], profile.class_means[k]);
    return sum / (0.5 * nc * (nc - 1));
}

/// Full pairwise distance matrix D(mean_c, mean_k); diagonal 0.
inline std::vector<std::vector<double>> pairwise_distance_matrix(const ClassActivationProfile& p) {
    const int nc = p.classes();
    std::vector<std::vector<double>> d(nc, std::vector<double>(nc, 0.0));
    for (int c = 0; c < nc; ++c)
        for (int k = c + 1; k < nc; ++k)
            d[c][k] = d[k][c] = cosine_distance(p.class_means[c], p.class_means[k]);
    return d;
}

// ---------------------------------------------------------------------------
// Semantic label hierarchy: a hypernym DAG (child -> parent edges) plus a
// label-index -> node-name mapping. Path similarity follows the undirected
// shortest path: sim = 1 / (hops + 1).
// ---------------------------------------------------------------------------

class SemanticHierarchy {
public:
    void add_edge(const std::string& child, const std::string& parent) {
        const int c = intern(child), p = intern(parent);
        children_to_parent_.emplace_back(c, p);
        undirected_[c].push_back(p);
        undirected_[p].push_back(c);
    }

    void map_label(int label, const std::string& node) {
        auto it = ids_.find(node);
        if (it == ids_.end())
            throw ParseError("label " + std::to_string(label) + " maps to unknown node '" + node + "'");
        if (label_to_node_.count(label))
            throw ParseError("label " + std::to_string(label) + " mapped twice");
        label_to_node_[label] = it->second;
    }

    /// Validates: DAG on the directed child->parent edges, every node
    /// reachable from every other when edges are undirected.
    void validate() const {
        // Kahn's algorithm over child->parent edges.
        std::vector<int> out_deg(names_.size(), 0);
        std::vector<std::vector<int>> rev(names_.size());
        for (auto [c, p] : children_to_parent_) {
            ++out_deg[c];
            rev[p].push_back(c);
        }
        std::deque<int> q;
        for (size_t i = 0; i < names_.size(); ++i)
            if (out_deg[i] == 0) q.push_back(static_cast<int>(i));
        size_t seen = 0;
        while (!q.empty()) {
            const int n = q.front();
            q.pop_front();
            ++seen;
            for (int c : rev[n])
                if (--out_deg[c] == 0) q.push_back(c);
        }
        if (seen != names_.size()) throw ParseError("hierarchy contains a cycle");
        if (!names_.empty()) {
            const auto dists = bfs(0);
            for (size_t i = 0; i < dists.size(); ++i)
                if (dists[i] < 0)
                    throw ParseError("hierarchy is not connected: node '" + names_[i] + "' unreachable");
        }
    }

    int node_of_label(int label) const {
        auto it = label_to_node_.find(label);
        if (it == label_to_node_.end())
            throw ValidationError("label " + std::to_string(label) + " is not mapped in the hierarchy");
        return it->second;
    }

    /// Undirected hop count between the nodes of two labels.
    int shortest_path(int label_a, int label_b) const {
        const int a = node_of_label(label_a), b = node_of_label(label_b);
        if (a == b) return 0;
        const auto dists = bfs(a);
        if (dists[b] < 0) throw ValidationError("labels are in disconnected hierarchy components");
        return dists[b];
    }

    size_t node_count() const { return names_.size(); }
    size_t label_count() const { return label_to_node_.size(); }

private:
    int intern(const std::string& name) {
        auto it = ids_.find(name);
        if (it != ids_.end()) return it->second;
        const int id = static_cast<int>(names_.size());
        ids_.emplace(name, id);
        names_.push_back(name);
        undirected_.emplace_back();
        return id;
    }

    std::vector<int> bfs(int start) const {
        std::vector<int> dist(names_.size(), -1);
        std::deque<int> q{start};
        dist[start] = 0;
        while (!q.empty()) {
            const int n = q.front();
            q.pop_front();
            for (int m : undirected_[n])
                if (dist[m] < 0) {
                    dist[m] = dist[n] + 1;
                    q.push_back(m);
                }
        }
        return dist;
    }

    std::map<std::string, int> ids_;
    std::vector<std::string> names_;
    std::vector<std::pair<int, int>> children_to_parent_;
    std::vector<std::vector<int>> undirected_;
    std::map<int, int> label_to_node_;
};

inline double path_sim(int label_a, int label_b, const SemanticHierarchy& h) {
    return 1.0 / (h.shortest_path(label_a, label_b) + 1.0);
}

/// Introspectability with each pairwise term weighted by label path
/// similarity, normalized by the mean similarity over the same label pairs so
/// the range stays comparable to the unweighted score.
inline double introspectability_wordnet(const ClassActivationProfile& profile,
                                        const SemanticHierarchy& hierarchy) {
    const int nc = profile.classes();
    if (nc < 2) throw ValidationError("introspectability needs at least 2 classes");
    double weighted = 0, sim_sum = 0;
    const double pairs = 0.5 * nc * (nc - 1);
    for (int c = 0; c < nc; ++c)
        for (int k = c + 1; k < nc; ++k) {
            const double s = path_sim(c, k, hierarchy);
            weighted += cosine_distance(profile.class_means[c], profile.class_means[k]) * s;
            sim_sum += s;
        }
    const double mean_sim = sim_sum / pairs;
    return (weighted / pairs) / mean_sim;
}

/// Hierarchy file: `[edges]` section of child<TAB>parent lines, then a
/// `[labels]` section of label<TAB>node lines. '#' starts a comment.
inline SemanticHierarchy load_hierarchy(const std::string& text) {
    SemanticHierarchy h;
    enum class Section { None, Edges, Labels } section = Section::None;
    std::vector<std::pair<int, std::string>> pending_labels;
    int lineno = 0;
    for (const auto& raw : to_lines(text)) {
        ++lineno;
        std::string line = trim(raw.substr(0, raw.find('#')));
        if (line.empty()) continue;
        if (line == "[edges]") { section = Section::Edges; continue; }
        if (line == "[labels]") { section = Section::Labels; continue; }
        auto tab = line.find('\t');
        if (tab == std::string::npos)
            throw ParseError("hierarchy line " + std::to_string(lineno) + ": expected two TAB-separated fields");
        const std::string a = trim(line.substr(0, tab)), b = trim(line.substr(tab + 1));
        if (section == Section::Edges) h.add_edge(a, b);
        else if (section == Section::Labels)
            pending_labels.emplace_back(static_cast<int>(parse_int(a, "label index")), b);
        else
            throw ParseError("hierarchy line " + std::to_string(lineno) + ": content before a section header");
    }
    for (auto& [label, node] : pending_labels) h.map_label(label, node);
    h.validate();
    return h;
}

inline SemanticHierarchy load_hierarchy_file(const std::filesystem::path& path) {
    return load_hierarchy(read_file(path));
}

// ---------------------------------------------------------------------------
// Activation profile CSV: header "class,<block:width>...", one row per class
// mean, values with 6 significant digits.
// ---------------------------------------------------------------------------

inline std::string profile_csv(const ClassActivationProfile& p) {
    std::string out = "class";
    for (const auto& [name, width] : p.block_map) out += ',' + name + ':' + std::to_string(width);
    out += '\n';
    for (int c = 0; c < p.classes(); ++c) {
        out += std::to_string(c);
        for (double v : p.class_means[c]) out += ',' + fmt_g(v);
        out += '\n';
    }
    return out;
}

inline ClassActivationProfile parse_profile_csv(const std::string& text) {
    auto lines = to_lines(text);
    if (lines.empty()) throw ParseError("empty profile csv");
    ClassActivationProfile p;
    auto header = split(lines[0], ',');
    if (header.empty() || header[0] != "class") throw ParseError("profile csv: bad header");
    int dim = 0;
    for (size_t i = 1; i < header.size(); ++i) {
        auto colon = header[i].rfind(':');
        if (colon == std::string::npos) throw ParseError("profile csv: bad block '" + header[i] + "'");
        const int width = static_cast<int>(parse_int(header[i].substr(colon + 1), "block width"));
        p.block_map.emplace_back(header[i].substr(0, colon), width);
        dim += width;
    }
    for (size_t i = 1; i < lines.size(); ++i) {
        if (lines[i].empty()) continue;
        auto f = split(lines[i], ',');
        if (static_cast<int>(f.size()) != dim + 1)
            throw ParseError("profile csv line " + std::to_string(i + 1) + ": wrong field count");
        std::vector<double> row(dim);
        for (int j = 0; j < dim; ++j) row[j] = parse_double(f[j + 1], "activation");
        p.class_means.push_back(std::move(row));
    }
    return p;
}

}  // namespace evonas
