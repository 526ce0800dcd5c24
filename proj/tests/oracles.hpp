// Independent reference implementations used as test oracles. Everything here
// is deliberately naive and kept separate from the library code paths it
// checks.
#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <vector>

#include "evonas/archive.hpp"
#include "evonas/rng.hpp"
#include "evonas/tensor.hpp"

namespace oracles {

using evonas::ObjectiveVector;

/// Componentwise dominance (maximization).
inline bool dominates(const ObjectiveVector& a, const ObjectiveVector& b) {
    const bool ge = a.introspectability >= b.introspectability && a.accuracy >= b.accuracy;
    const bool gt = a.introspectability > b.introspectability || a.accuracy > b.accuracy;
    return ge && gt;
}

/// Ranked fronts by iterative stripping of the non-dominated set: O(n^2 m) per
/// front, the textbook definition.
inline std::vector<std::vector<size_t>> strip_fronts(const std::vector<ObjectiveVector>& objs) {
    std::vector<size_t> remaining(objs.size());
    std::iota(remaining.begin(), remaining.end(), size_t{0});
    std::vector<std::vector<size_t>> fronts;
    while (!remaining.empty()) {
        std::vector<size_t> front, rest;
        for (size_t i : remaining) {
            bool dominated = false;
            for (size_t j : remaining)
                if (i != j && oracles::dominates(objs[j], objs[i])) {
                    dominated = true;
                    break;
                }
            (dominated ? rest : front).push_back(i);
        }
        fronts.push_back(front);
        remaining = rest;
    }
    return fronts;
}

/// Crowding distance straight from the definition.
inline std::vector<double> crowding(const std::vector<ObjectiveVector>& front) {
    const size_t n = front.size();
    std::vector<double> d(n, 0.0);
    if (n <= 2) {
        std::fill(d.begin(), d.end(), std::numeric_limits<double>::infinity());
        return d;
    }
    for (int m = 0; m < 2; ++m) {
        std::vector<size_t> order(n);
        std::iota(order.begin(), order.end(), size_t{0});
        std::stable_sort(order.begin(), order.end(),
                         [&](size_t a, size_t b) { return front[a][m] < front[b][m]; });
        d[order[0]] = d[order[n - 1]] = std::numeric_limits<double>::infinity();
        const double span = front[order[n - 1]][m] - front[order[0]][m];
        if (span <= 0) continue;
        for (size_t k = 1; k + 1 < n; ++k)
            d[order[k]] += (front[order[k + 1]][m] - front[order[k - 1]][m]) / span;
    }
    return d;
}

/// Elitist survival directly from the fronts + crowding definitions; ids break
/// ties.
inline std::vector<std::int64_t> survive_ids(const std::vector<evonas::Individual>& pool, size_t n) {
    std::vector<ObjectiveVector> objs;
    for (const auto& ind : pool) objs.push_back(ind.obj());
    auto fronts = strip_fronts(objs);
    std::vector<std::int64_t> out;
    for (const auto& front : fronts) {
        if (out.size() >= n) break;
        std::vector<ObjectiveVector> fo;
        for (size_t i : front) fo.push_back(objs[i]);
        auto cd = crowding(fo);
        std::vector<size_t> order(front.size());
        std::iota(order.begin(), order.end(), size_t{0});
        std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
            if (cd[a] != cd[b]) return cd[a] > cd[b];
            return pool[front[a]].id < pool[front[b]].id;
        });
        for (size_t k : order) {
            if (out.size() >= n) break;
            out.push_back(pool[front[k]].id);
        }
    }
    std::sort(out.begin(), out.end());
    return out;
}

/// Monte-Carlo hypervolume estimate with its standard error.
struct McEstimate {
    double value = 0.0;
    double stderr_ = 0.0;
};

inline McEstimate mc_hypervolume(const std::vector<ObjectiveVector>& pts, double rx, double ry,
                                 size_t samples, std::uint64_t seed) {
    std::vector<ObjectiveVector> front;
    for (const auto& p : pts)
        if (oracles::dominates(p, {rx, ry})) front.push_back(p);
    if (front.empty()) return {};
    double max_x = rx, max_y = ry;
    for (const auto& p : front) {
        max_x = std::max(max_x, p.introspectability);
        max_y = std::max(max_y, p.accuracy);
    }
    const double box = (max_x - rx) * (max_y - ry);
    if (box <= 0) return {};
    // staircase lookup: points by descending x with prefix-max y
    std::sort(front.begin(), front.end(), [](const ObjectiveVector& a, const ObjectiveVector& b) {
        return a.introspectability > b.introspectability;
    });
    std::vector<double> xs, best_y;
    double run = ry;
    for (const auto& p : front) {
        run = std::max(run, p.accuracy);
        xs.push_back(p.introspectability);
        best_y.push_back(run);
    }
    evonas::Rng rng(seed);
    size_t hits = 0;
    for (size_t s = 0; s < samples; ++s) {
        const double x = rx + (max_x - rx) * rng.uniform();
        const double y = ry + (max_y - ry) * rng.uniform();
        // dominated iff some point has px >= x and py >= y
        auto it = std::lower_bound(xs.begin(), xs.end(), x, std::greater<double>());
        // xs is descending; entries [0, idx) have px >= x
        const size_t idx = static_cast<size_t>(it - xs.begin());
        if (idx > 0 && best_y[idx - 1] >= y) ++hits;
    }
    const double p = static_cast<double>(hits) / samples;
    McEstimate est;
    est.value = p * box;
    est.stderr_ = box * std::sqrt(p * (1 - p) / samples);
    return est;
}

/// Central finite differences of a scalar function of a parameter vector.
inline std::vector<double> finite_diff(const std::function<double()>& f, double* x, size_t n,
                                       double eps = 1e-5) {
    std::vector<double> g(n);
    for (size_t i = 0; i < n; ++i) {
        const double keep = x[i];
        x[i] = keep + eps;
        const double fp = f();
        x[i] = keep - eps;
        const double fm = f();
        x[i] = keep;
        g[i] = (fp - fm) / (2 * eps);
    }
    return g;
}

/// Jacobi eigenvalue iteration for small symmetric matrices; eigenvalues
/// descending.
inline std::vector<double> jacobi_eigenvalues(std::vector<std::vector<double>> a) {
    const size_t n = a.size();
    for (int sweep = 0; sweep < 200; ++sweep) {
        double off = 0;
        for (size_t i = 0; i < n; ++i)
            for (size_t j = i + 1; j < n; ++j) off += a[i][j] * a[i][j];
        if (off < 1e-24) break;
        for (size_t p = 0; p < n; ++p)
            for (size_t q = p + 1; q < n; ++q) {
                if (std::abs(a[p][q]) < 1e-18) continue;
                const double theta = (a[q][q] - a[p][p]) / (2 * a[p][q]);
                const double t = (theta >= 0 ? 1.0 : -1.0) /
                                 (std::abs(theta) + std::sqrt(theta * theta + 1));
                const double c = 1.0 / std::sqrt(t * t + 1), s = t * c;
                for (size_t k = 0; k < n; ++k) {
                    const double akp = a[k][p], akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for (size_t k = 0; k < n; ++k) {
                    const double apk = a[p][k], aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
    }
    std::vector<double> eig(n);
    for (size_t i = 0; i < n; ++i) eig[i] = a[i][i];
    std::sort(eig.rbegin(), eig.rend());
    return eig;
}

/// Textbook Pearson, written independently of the library helper.
inline double pearson_ref(const std::vector<double>& x, const std::vector<double>& y) {
    const size_t n = x.size();
    double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
    for (size_t i = 0; i < n; ++i) {
        sx += x[i];
        sy += y[i];
        sxx += x[i] * x[i];
        syy += y[i] * y[i];
        sxy += x[i] * y[i];
    }
    const double num = n * sxy - sx * sy;
    const double den = std::sqrt(n * sxx - sx * sx) * std::sqrt(n * syy - sy * sy);
    return num / den;
}

/// Rank-then-Pearson Spearman with average ranks.
inline double spearman_ref(const std::vector<double>& x, const std::vector<double>& y) {
    auto rank = [](const std::vector<double>& v) {
        const size_t n = v.size();
        std::vector<size_t> order(n);
        std::iota(order.begin(), order.end(), size_t{0});
        std::sort(order.begin(), order.end(), [&](size_t a, size_t b) { return v[a] < v[b]; });
        std::vector<double> r(n);
        size_t i = 0;
        while (i < n) {
            size_t j = i;
            while (j + 1 < n && v[order[j + 1]] == v[order[i]]) ++j;
            for (size_t k = i; k <= j; ++k) r[order[k]] = 0.5 * (i + j) + 1;
            i = j + 1;
        }
        return r;
    };
    return pearson_ref(rank(x), rank(y));
}

/// Nearest-centroid classifier accuracy (centroids from the training split).
inline double nearest_centroid_accuracy(const evonas::Tensor<float>& train_x,
                                        const std::vector<int>& train_y,
                                        const evonas::Tensor<float>& test_x,
                                        const std::vector<int>& test_y, int classes) {
    const size_t dim = train_x.sample_size();
    std::vector<std::vector<double>> centroid(classes, std::vector<double>(dim, 0.0));
    std::vector<int> count(classes, 0);
    for (int i = 0; i < train_x.n; ++i) {
        ++count[train_y[i]];
        for (size_t j = 0; j < dim; ++j) centroid[train_y[i]][j] += train_x.v[i * dim + j];
    }
    for (int c = 0; c < classes; ++c)
        if (count[c])
            for (auto& v : centroid[c]) v /= count[c];
    int correct = 0;
    for (int i = 0; i < test_x.n; ++i) {
        int best = 0;
        double best_d = 1e300;
        for (int c = 0; c < classes; ++c) {
            double d = 0;
            for (size_t j = 0; j < dim; ++j) {
                const double diff = test_x.v[i * dim + j] - centroid[c][j];
                d += diff * diff;
            }
            if (d < best_d) {
                best_d = d;
                best = c;
            }
        }
        if (best == test_y[i]) ++correct;
    }
    return static_cast<double>(correct) / test_x.n;
}

}  // namespace oracles
