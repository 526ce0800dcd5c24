#pragma once

#include <cassert>
#include <cstddef>
#include <vector>

namespace evonas {

/// Dense NCHW tensor. Vectors ride along as (n, c, 1, 1).
template <class S>
struct Tensor {
    int n = 0, c = 0, h = 0, w = 0;
    std::vector<S> v;

    Tensor() = default;
    Tensor(int n_, int c_, int h_, int w_) { resize(n_, c_, h_, w_); }

    void resize(int n_, int c_, int h_, int w_) {
        n = n_; c = c_; h = h_; w = w_;
        v.assign(static_cast<size_t>(n) * c * h * w, S(0));
    }

    void resize_like(const Tensor& o) { resize(o.n, o.c, o.h, o.w); }
    void zero() { std::fill(v.begin(), v.end(), S(0)); }

    size_t size() const { return v.size(); }
    size_t plane() const { return static_cast<size_t>(h) * w; }
    size_t sample_size() const { return static_cast<size_t>(c) * h * w; }

    S* data() { return v.data(); }
    const S* data() const { return v.data(); }

    S* at(int ni, int ci) { return v.data() + (static_cast<size_t>(ni) * c + ci) * plane(); }
    const S* at(int ni, int ci) const {
        return v.data() + (static_cast<size_t>(ni) * c + ci) * plane();
    }

    S& at(int ni, int ci, int y, int x) { return at(ni, ci)[static_cast<size_t>(y) * w + x]; }
    const S& at(int ni, int ci, int y, int x) const {
        return at(ni, ci)[static_cast<size_t>(y) * w + x];
    }

    bool same_shape(const Tensor& o) const { return n == o.n && c == o.c && h == o.h && w == o.w; }
};

template <class S>
void add_into(Tensor<S>& dst, const Tensor<S>& src) {
    assert(dst.same_shape(src));
    for (size_t i = 0; i < dst.v.size(); ++i) dst.v[i] += src.v[i];
}

}  // namespace evonas
