#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "evonas/errors.hpp"
#include "evonas/io.hpp"

namespace evonas {

/// Cell edge operators.
enum class Op : std::uint8_t {
    Conv3x3 = 0,
    Conv1x1 = 1,
    AvgPool3x3 = 2,
    Zeroize = 3,
    Skip = 4,
};

constexpr int kNumOps = 5;
constexpr int kNumGenes = 6;
constexpr int kNumNodes = 4;

inline const char* op_name(Op op) {
    switch (op) {
        case Op::Conv3x3: return "conv3x3";
        case Op::Conv1x1: return "conv1x1";
        case Op::AvgPool3x3: return "avgpool3x3";
        case Op::Zeroize: return "zeroize";
        case Op::Skip: return "skip";
    }
    return "?";
}

/// Gene position -> cell edge, ordered by target node then source node.
constexpr std::array<std::pair<int, int>, kNumGenes> kEdgeOrder = {{
    {0, 1}, {0, 2}, {1, 2}, {0, 3}, {1, 3}, {2, 3},
}};

/// Fixed 6-gene integer genome naming the operator on each cell edge.
struct Encoding {
    std::array<std::uint8_t, kNumGenes> genes{};

    bool operator==(const Encoding&) const = default;
    auto operator<=>(const Encoding&) const = default;

    Op op(int gene) const { return static_cast<Op>(genes[gene]); }

    bool valid() const {
        return std::all_of(genes.begin(), genes.end(), [](std::uint8_t g) { return g < kNumOps; });
    }

    /// Comma-separated form used in every file and wire message, e.g. "0,2,3,1,4,0".
    std::string str() const {
        std::string s;
        for (int i = 0; i < kNumGenes; ++i) {
            if (i) s += ',';
            s += static_cast<char>('0' + genes[i]);
        }
        return s;
    }

    static Encoding parse(std::string_view text) {
        auto parts = split(text, ',');
        if (parts.size() != kNumGenes)
            throw ValidationError("encoding must have 6 genes, got '" + std::string(text) + "'");
        Encoding e;
        for (int i = 0; i < kNumGenes; ++i) {
            const long long v = parse_int(trim(parts[i]), "gene");
            if (v < 0 || v >= kNumOps)
                throw ValidationError("gene out of range [0..4]: " + std::string(text));
            e.genes[i] = static_cast<std::uint8_t>(v);
        }
        return e;
    }
};

struct EncodingHash {
    size_t operator()(const Encoding& e) const {
        size_t h = 0;
        for (auto g : e.genes) h = h * 5 + g;
        return h;
    }
};

/// Decoded cell: 4 ranked data nodes, 6 directed operator edges (source < target).
struct CellGraph {
    struct Edge {
        int source;
        int target;
        Op op;
    };
    std::array<Edge, kNumGenes> edges{};

    bool operator==(const CellGraph&) const = default;
};

inline void validate(const Encoding& e) {
    if (!e.valid()) throw ValidationError("encoding gene out of range [0..4]");
}

inline CellGraph decode(const Encoding& e) {
    validate(e);
    CellGraph g;
    for (int i = 0; i < kNumGenes; ++i)
        g.edges[i] = {kEdgeOrder[i].first, kEdgeOrder[i].second, e.op(i)};
    return g;
}

/// True iff the output node is reachable from the input node via non-zeroize edges.
inline bool is_connected(const CellGraph& cell) {
    std::array<bool, kNumNodes> reach{};
    reach[0] = true;
    // Edges are sorted by target, so one forward pass settles reachability.
    for (const auto& edge : cell.edges)
        if (edge.op != Op::Zeroize && reach[edge.source]) reach[edge.target] = true;
    return reach[kNumNodes - 1];
}

inline bool is_connected(const Encoding& e) { return is_connected(decode(e)); }

/// All 5^6 = 15,625 encodings in lexicographic gene order.
inline std::vector<Encoding> enumerate_space() {
    std::vector<Encoding> all;
    all.reserve(15625);
    Encoding e;
    for (int a = 0; a < kNumOps; ++a)
        for (int b = 0; b < kNumOps; ++b)
            for (int c = 0; c < kNumOps; ++c)
                for (int d = 0; d < kNumOps; ++d)
                    for (int f = 0; f < kNumOps; ++f)
                        for (int g = 0; g < kNumOps; ++g) {
                            e.genes = {static_cast<std::uint8_t>(a), static_cast<std::uint8_t>(b),
                                       static_cast<std::uint8_t>(c), static_cast<std::uint8_t>(d),
                                       static_cast<std::uint8_t>(f), static_cast<std::uint8_t>(g)};
                            all.push_back(e);
                        }
    return all;
}

/// Canonical byte string identifying the cell computation up to the
/// zeroize/skip-connect isomorphisms.
///
/// Each node is serialized as the '+'-join of its sorted term strings:
///   - a zeroize edge contributes the zero marker "#";
///   - a real operator applied to a node whose whole expression is "#"
///     also collapses to "#" (its input is the zero tensor);
///   - a skip-connect edge substitutes the source node's expression as a
///     single term (the sum it carries is spliced in textually);
///   - any other operator contributes "(<source expr>)@<op name>".
/// The key is the output node's expression. Cells whose computations are
/// identical under these reductions share a key; the full space partitions
/// into 6,466 classes.
using TopologyKey = std::string;

inline TopologyKey topology_key(const Encoding& e) {
    validate(e);
    std::array<std::string, kNumNodes> expr;
    expr[0] = "0";
    for (int node = 1; node < kNumNodes; ++node) {
        std::vector<std::string> terms;
        for (int i = 0; i < kNumGenes; ++i) {
            if (kEdgeOrder[i].second != node) continue;
            const auto& src = expr[kEdgeOrder[i].first];
            switch (e.op(i)) {
                case Op::Zeroize: terms.emplace_back("#"); break;
                case Op::Skip: terms.push_back(src); break;
                default:
                    if (src == "#") terms.emplace_back("#");
                    else terms.push_back("(" + src + ")@" + op_name(e.op(i)));
            }
        }
        std::sort(terms.begin(), terms.end());
        std::string joined;
        for (size_t t = 0; t < terms.size(); ++t) {
            if (t) joined += '+';
            joined += terms[t];
        }
        expr[node] = std::move(joined);
    }
    return expr[kNumNodes - 1];
}

/// Number of genes holding convolution operators and pooling operators.
inline std::pair<int, int> layer_counts(const Encoding& e) {
    int conv = 0, pool = 0;
    for (auto g : e.genes) {
        if (g == 0 || g == 1) ++conv;
        else if (g == 2) ++pool;
    }
    return {conv, pool};
}

}  // namespace evonas
