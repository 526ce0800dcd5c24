#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "evonas/rng.hpp"
#include "evonas/tensor.hpp"

namespace evonas {

/// Trainable parameter vector with its gradient and SGD velocity.
template <class S>
struct ParamBlock {
    std::vector<S> value, grad, velocity;

    void init(size_t n, S fill = S(0)) {
        value.assign(n, fill);
        grad.assign(n, S(0));
        velocity.assign(n, S(0));
    }
    void zero_grad() { std::fill(grad.begin(), grad.end(), S(0)); }
    size_t size() const { return value.size(); }
};

inline int same_pad_begin(int in, int k, int stride) {
    const int out = (in + stride - 1) / stride;
    const int total = std::max((out - 1) * stride + k - in, 0);
    return total / 2;  // TF-style SAME: extra padding goes to the end
}

inline int same_out(int in, int stride) { return (in + stride - 1) / stride; }

// ---------------------------------------------------------------------------
// 2-D convolution, SAME padding.
// ---------------------------------------------------------------------------

template <class S>
struct Conv2d {
    int in_ch = 0, out_ch = 0, k = 3, stride = 1;
    ParamBlock<S> w;  // [out_ch][in_ch][k][k]
    ParamBlock<S> b;  // [out_ch]

    void configure(int in_c, int out_c, int kernel, int stride_) {
        in_ch = in_c; out_ch = out_c; k = kernel; stride = stride_;
        w.init(static_cast<size_t>(out_ch) * in_ch * k * k);
        b.init(static_cast<size_t>(out_ch));
    }

    /// Kaiming fan-in normal for weights, zero bias.
    void init_params(Rng& rng) {
        const double fan_in = static_cast<double>(in_ch) * k * k;
        const double std_dev = std::sqrt(2.0 / fan_in);
        for (auto& x : w.value) x = static_cast<S>(rng.normal() * std_dev);
        std::fill(b.value.begin(), b.value.end(), S(0));
    }

    std::int64_t param_count() const {
        return static_cast<std::int64_t>(w.size()) + static_cast<std::int64_t>(b.size());
    }

    std::int64_t macs(int in_h, int in_w) const {
        return static_cast<std::int64_t>(same_out(in_h, stride)) * same_out(in_w, stride) *
               out_ch * in_ch * k * k;
    }

    /// For a fixed kernel tap (ky,kx) the valid output x-range is contiguous,
    /// so the inner loops sweep rows and vectorize.
    void forward(const Tensor<S>& x, Tensor<S>& y) const {
        const int oh = same_out(x.h, stride), ow = same_out(x.w, stride);
        y.resize(x.n, out_ch, oh, ow);
        const int py = same_pad_begin(x.h, k, stride), px = same_pad_begin(x.w, k, stride);
        for (int n = 0; n < x.n; ++n) {
            for (int co = 0; co < out_ch; ++co) {
                S* yp = y.at(n, co);
                const S bias = b.value[co];
                for (size_t i = 0; i < static_cast<size_t>(oh) * ow; ++i) yp[i] = bias;
                for (int ci = 0; ci < in_ch; ++ci) {
                    const S* xp = x.at(n, ci);
                    const S* wp = &w.value[((static_cast<size_t>(co) * in_ch) + ci) * k * k];
                    for (int ky = 0; ky < k; ++ky) {
                        for (int kx = 0; kx < k; ++kx) {
                            const S wv = wp[ky * k + kx];
                            // oy range with iy = oy*stride - py + ky inside [0, x.h)
                            const int oy0 = std::max(0, (py - ky + stride - 1) / stride);
                            const int oy1 = std::min(oh, (x.h - 1 - ky + py) / stride + 1);
                            const int ox0 = std::max(0, (px - kx + stride - 1) / stride);
                            const int ox1 = std::min(ow, (x.w - 1 - kx + px) / stride + 1);
                            for (int oy = oy0; oy < oy1; ++oy) {
                                const int iy = oy * stride - py + ky;
                                const S* xrow = xp + static_cast<size_t>(iy) * x.w - px + kx;
                                S* yrow = yp + static_cast<size_t>(oy) * ow;
                                if (stride == 1) {
                                    for (int ox = ox0; ox < ox1; ++ox) yrow[ox] += wv * xrow[ox];
                                } else {
                                    for (int ox = ox0; ox < ox1; ++ox)
                                        yrow[ox] += wv * xrow[static_cast<size_t>(ox) * stride];
                                }
                            }
                        }
                    }
                }
            }
        }
    }

    void backward(const Tensor<S>& x, const Tensor<S>& gy, Tensor<S>& gx) {
        gx.resize_like(x);
        const int oh = gy.h, ow = gy.w;
        const int py = same_pad_begin(x.h, k, stride), px = same_pad_begin(x.w, k, stride);
        for (int n = 0; n < x.n; ++n) {
            for (int co = 0; co < out_ch; ++co) {
                const S* gyp = gy.at(n, co);
                S gb = S(0);
                for (size_t i = 0; i < static_cast<size_t>(oh) * ow; ++i) gb += gyp[i];
                b.grad[co] += gb;
                for (int ci = 0; ci < in_ch; ++ci) {
                    const S* xp = x.at(n, ci);
                    S* gxp = gx.at(n, ci);
                    const size_t wbase = ((static_cast<size_t>(co) * in_ch) + ci) * k * k;
                    for (int ky = 0; ky < k; ++ky) {
                        for (int kx = 0; kx < k; ++kx) {
                            const S wv = w.value[wbase + ky * k + kx];
                            S gw = S(0);
                            const int oy0 = std::max(0, (py - ky + stride - 1) / stride);
                            const int oy1 = std::min(oh, (x.h - 1 - ky + py) / stride + 1);
                            const int ox0 = std::max(0, (px - kx + stride - 1) / stride);
                            const int ox1 = std::min(ow, (x.w - 1 - kx + px) / stride + 1);
                            for (int oy = oy0; oy < oy1; ++oy) {
                                const int iy = oy * stride - py + ky;
                                const S* xrow = xp + static_cast<size_t>(iy) * x.w - px + kx;
                                S* gxrow = gxp + static_cast<size_t>(iy) * x.w - px + kx;
                                const S* grow = gyp + static_cast<size_t>(oy) * ow;
                                if (stride == 1) {
                                    for (int ox = ox0; ox < ox1; ++ox) {
                                        gw += grow[ox] * xrow[ox];
                                        gxrow[ox] += grow[ox] * wv;
                                    }
                                } else {
                                    for (int ox = ox0; ox < ox1; ++ox) {
                                        gw += grow[ox] * xrow[static_cast<size_t>(ox) * stride];
                                        gxrow[static_cast<size_t>(ox) * stride] += grow[ox] * wv;
                                    }
                                }
                            }
                            w.grad[wbase + ky * k + kx] += gw;
                        }
                    }
                }
            }
        }
    }
};

// ---------------------------------------------------------------------------
// Batch normalization (per channel). Train mode uses batch statistics and
// updates running statistics with momentum 0.9; eval mode uses the running
// statistics. eps = 1e-5. Biased variance throughout.
// ---------------------------------------------------------------------------

template <class S>
struct BatchNorm {
    static constexpr double kEps = 1e-5;
    static constexpr double kMomentum = 0.9;

    int channels = 0;
    ParamBlock<S> gamma, beta;
    std::vector<S> running_mean, running_var;
    // caches from the last train-mode forward
    std::vector<S> mean_, inv_std_;

    void configure(int c) {
        channels = c;
        gamma.init(c, S(1));
        beta.init(c, S(0));
        running_mean.assign(c, S(0));
        running_var.assign(c, S(1));
        mean_.assign(c, S(0));
        inv_std_.assign(c, S(1));
    }

    std::int64_t param_count() const { return 2 * static_cast<std::int64_t>(channels); }

    void forward(const Tensor<S>& x, Tensor<S>& y, bool train) {
        y.resize_like(x);
        const size_t plane = x.plane();
        const double m = static_cast<double>(x.n) * plane;
        for (int c = 0; c < channels; ++c) {
            double mean, var;
            if (train) {
                double sum = 0;
                for (int n = 0; n < x.n; ++n) {
                    const S* xp = x.at(n, c);
                    for (size_t i = 0; i < plane; ++i) sum += xp[i];
                }
                mean = sum / m;
                double sq = 0;
                for (int n = 0; n < x.n; ++n) {
                    const S* xp = x.at(n, c);
                    for (size_t i = 0; i < plane; ++i) {
                        const double d = xp[i] - mean;
                        sq += d * d;
                    }
                }
                var = sq / m;
                running_mean[c] = static_cast<S>(kMomentum * running_mean[c] + (1 - kMomentum) * mean);
                running_var[c] = static_cast<S>(kMomentum * running_var[c] + (1 - kMomentum) * var);
                mean_[c] = static_cast<S>(mean);
                inv_std_[c] = static_cast<S>(1.0 / std::sqrt(var + kEps));
            } else {
                mean = running_mean[c];
                var = running_var[c];
            }
            const S inv = static_cast<S>(1.0 / std::sqrt(var + kEps));
            const S g = gamma.value[c], bb = beta.value[c], mu = static_cast<S>(mean);
            for (int n = 0; n < x.n; ++n) {
                const S* xp = x.at(n, c);
                S* yp = y.at(n, c);
                for (size_t i = 0; i < plane; ++i) yp[i] = g * (xp[i] - mu) * inv + bb;
            }
        }
    }

    void backward(const Tensor<S>& x, const Tensor<S>& gy, Tensor<S>& gx, bool train) {
        gx.resize_like(x);
        const size_t plane = x.plane();
        const double m = static_cast<double>(x.n) * plane;
        for (int c = 0; c < channels; ++c) {
            if (train) {
                const S mu = mean_[c], inv = inv_std_[c];
                double sum_gy = 0, sum_gy_xhat = 0, dgamma = 0;
                for (int n = 0; n < x.n; ++n) {
                    const S* xp = x.at(n, c);
                    const S* gp = gy.at(n, c);
                    for (size_t i = 0; i < plane; ++i) {
                        const double xhat = (xp[i] - mu) * inv;
                        sum_gy += gp[i];
                        sum_gy_xhat += gp[i] * xhat;
                        dgamma += gp[i] * xhat;
                    }
                }
                gamma.grad[c] += static_cast<S>(dgamma);
                beta.grad[c] += static_cast<S>(sum_gy);
                const double g = gamma.value[c];
                const double mean_gy = sum_gy / m, mean_gy_xhat = sum_gy_xhat / m;
                for (int n = 0; n < x.n; ++n) {
                    const S* xp = x.at(n, c);
                    const S* gp = gy.at(n, c);
                    S* op = gx.at(n, c);
                    for (size_t i = 0; i < plane; ++i) {
                        const double xhat = (xp[i] - mu) * inv;
                        op[i] = static_cast<S>(g * inv * (gp[i] - mean_gy - xhat * mean_gy_xhat));
                    }
                }
            } else {
                const S scale = static_cast<S>(
                    gamma.value[c] / std::sqrt(static_cast<double>(running_var[c]) + kEps));
                double dgamma = 0, dbeta = 0;
                const S inv = static_cast<S>(1.0 / std::sqrt(static_cast<double>(running_var[c]) + kEps));
                const S mu = running_mean[c];
                for (int n = 0; n < x.n; ++n) {
                    const S* xp = x.at(n, c);
                    const S* gp = gy.at(n, c);
                    S* op = gx.at(n, c);
                    for (size_t i = 0; i < plane; ++i) {
                        dgamma += gp[i] * (xp[i] - mu) * inv;
                        dbeta += gp[i];
                        op[i] = gp[i] * scale;
                    }
                }
                gamma.grad[c] += static_cast<S>(dgamma);
                beta.grad[c] += static_cast<S>(dbeta);
            }
        }
    }
};

// ---------------------------------------------------------------------------
// ReLU.
// ---------------------------------------------------------------------------

template <class S>
struct Relu {
    void forward(const Tensor<S>& x, Tensor<S>& y) const {
        y.resize_like(x);
        for (size_t i = 0; i < x.v.size(); ++i) y.v[i] = x.v[i] > S(0) ? x.v[i] : S(0);
    }
    void backward(const Tensor<S>& x, const Tensor<S>& gy, Tensor<S>& gx) const {
        gx.resize_like(x);
        for (size_t i = 0; i < x.v.size(); ++i) gx.v[i] = x.v[i] > S(0) ? gy.v[i] : S(0);
    }
};

// ---------------------------------------------------------------------------
// Average pooling, SAME padding; padding cells are excluded from the divisor.
// ---------------------------------------------------------------------------

template <class S>
struct AvgPool {
    int k = 3, stride = 1;

    void forward(const Tensor<S>& x, Tensor<S>& y) const {
        const int oh = same_out(x.h, stride), ow = same_out(x.w, stride);
        y.resize(x.n, x.c, oh, ow);
        const int py = same_pad_begin(x.h, k, stride), px = same_pad_begin(x.w, k, stride);
        for (int n = 0; n < x.n; ++n) {
            for (int c = 0; c < x.c; ++c) {
                const S* xp = x.at(n, c);
                S* yp = y.at(n, c);
                for (int oy = 0; oy < oh; ++oy) {
                    const int y0 = std::max(oy * stride - py, 0);
                    const int y1 = std::min(oy * stride - py + k, x.h);
                    for (int ox = 0; ox < ow; ++ox) {
                        const int x0 = std::max(ox * stride - px, 0);
                        const int x1 = std::min(ox * stride - px + k, x.w);
                        S acc = S(0);
                        for (int iy = y0; iy < y1; ++iy)
                            for (int ix = x0; ix < x1; ++ix) acc += xp[static_cast<size_t>(iy) * x.w + ix];
                        yp[static_cast<size_t>(oy) * ow + ox] =
                            acc / static_cast<S>((y1 - y0) * (x1 - x0));
                    }
                }
            }
        }
    }

    void backward(const Tensor<S>& x, const Tensor<S>& gy, Tensor<S>& gx) const {
        gx.resize_like(x);
        const int oh = gy.h, ow = gy.w;
        const int py = same_pad_begin(x.h, k, stride), px = same_pad_begin(x.w, k, stride);
        for (int n = 0; n < x.n; ++n) {
            for (int c = 0; c < x.c; ++c) {
                S* gxp = gx.at(n, c);
                const S* gp = gy.at(n, c);
                for (int oy = 0; oy < oh; ++oy) {
                    const int y0 = std::max(oy * stride - py, 0);
                    const int y1 = std::min(oy * stride - py + k, x.h);
                    for (int ox = 0; ox < ow; ++ox) {
                        const int x0 = std::max(ox * stride - px, 0);
                        const int x1 = std::min(ox * stride - px + k, x.w);
                        const S g = gp[static_cast<size_t>(oy) * ow + ox] /
                                    static_cast<S>((y1 - y0) * (x1 - x0));
                        for (int iy = y0; iy < y1; ++iy)
                            for (int ix = x0; ix < x1; ++ix) gxp[static_cast<size_t>(iy) * x.w + ix] += g;
                    }
                }
            }
        }
    }
};

// ---------------------------------------------------------------------------
// Global average pooling: (n, c, h, w) -> (n, c, 1, 1).
// ---------------------------------------------------------------------------

template <class S>
struct GlobalAvgPool {
    void forward(const Tensor<S>& x, Tensor<S>& y) const {
        y.resize(x.n, x.c, 1, 1);
        const size_t plane = x.plane();
        for (int n = 0; n < x.n; ++n)
            for (int c = 0; c < x.c; ++c) {
                const S* xp = x.at(n, c);
                S acc = S(0);
                for (size_t i = 0; i < plane; ++i) acc += xp[i];
                y.at(n, c, 0, 0) = acc / static_cast<S>(plane);
            }
    }
    void backward(const Tensor<S>& x, const Tensor<S>& gy, Tensor<S>& gx) const {
        gx.resize_like(x);
        const size_t plane = x.plane();
        for (int n = 0; n < x.n; ++n)
            for (int c = 0; c < x.c; ++c) {
                const S g = gy.at(n, c, 0, 0) / static_cast<S>(plane);
                S* gxp = gx.at(n, c);
                for (size_t i = 0; i < plane; ++i) gxp[i] += g;
            }
    }
};

// ---------------------------------------------------------------------------
// Dense layer over flattened samples: (n, c, h, w) -> (n, out, 1, 1).
// ---------------------------------------------------------------------------

template <class S>
struct Dense {
    int in_dim = 0, out_dim = 0;
    ParamBlock<S> w;  // [out][in]
    ParamBlock<S> b;

    void configure(int in, int out) {
        in_dim = in; out_dim = out;
        w.init(static_cast<size_t>(in) * out);
        b.init(static_cast<size_t>(out));
    }

    /// The classifier head starts at zero: logits begin at chance level, which
    /// keeps the first optimizer steps bounded even when a cell's skip/pool
    /// sums hand the head very large unnormalized features.
    void init_params(Rng&) {
        std::fill(w.value.begin(), w.value.end(), S(0));
        std::fill(b.value.begin(), b.value.end(), S(0));
    }

    std::int64_t param_count() const {
        return static_cast<std::int64_t>(w.size()) + static_cast<std::int64_t>(b.size());
    }

    std::int64_t macs() const { return static_cast<std::int64_t>(in_dim) * out_dim; }

    void forward(const Tensor<S>& x, Tensor<S>& y) const {
        y.resize(x.n, out_dim, 1, 1);
        for (int n = 0; n < x.n; ++n) {
            const S* xp = x.data() + static_cast<size_t>(n) * in_dim;
            for (int o = 0; o < out_dim; ++o) {
                const S* wp = &w.value[static_cast<size_t>(o) * in_dim];
                S acc = b.value[o];
                for (int i = 0; i < in_dim; ++i) acc += wp[i] * xp[i];
                y.at(n, o, 0, 0) = acc;
            }
        }
    }

    void backward(const Tensor<S>& x, const Tensor<S>& gy, Tensor<S>& gx) {
        gx.resize_like(x);
        for (int n = 0; n < x.n; ++n) {
            const S* xp = x.data() + static_cast<size_t>(n) * in_dim;
            S* gxp = gx.data() + static_cast<size_t>(n) * in_dim;
            for (int o = 0; o < out_dim; ++o) {
                const S g = gy.at(n, o, 0, 0);
                b.grad[o] += g;
                S* gwp = &w.grad[static_cast<size_t>(o) * in_dim];
                const S* wp = &w.value[static_cast<size_t>(o) * in_dim];
                for (int i = 0; i < in_dim; ++i) {
                    gwp[i] += g * xp[i];
                    gxp[i] += g * wp[i];
                }
            }
        }
    }
};

// ---------------------------------------------------------------------------
// Softmax cross-entropy over logits (n, classes, 1, 1); mean over the batch.
// ---------------------------------------------------------------------------

template <class S>
struct SoftmaxXent {
    /// Fills `probs` (same shape as logits) and returns the mean loss.
    static double forward(const Tensor<S>& logits, const std::vector<int>& labels, Tensor<S>& probs) {
        probs.resize_like(logits);
        double loss = 0;
        for (int n = 0; n < logits.n; ++n) {
            const S* lp = logits.data() + static_cast<size_t>(n) * logits.c;
            S* pp = probs.data() + static_cast<size_t>(n) * logits.c;
            S mx = lp[0];
            for (int c = 1; c < logits.c; ++c) mx = std::max(mx, lp[c]);
            double denom = 0;
            for (int c = 0; c < logits.c; ++c) denom += std::exp(static_cast<double>(lp[c] - mx));
            const double log_denom = std::log(denom);
            for (int c = 0; c < logits.c; ++c)
                pp[c] = static_cast<S>(std::exp(static_cast<double>(lp[c] - mx) - log_denom));
            loss -= static_cast<double>(lp[labels[n]] - mx) - log_denom;
        }
        return loss / logits.n;
    }

    /// d(mean loss)/d(logits) = (softmax - onehot) / n.
    static void backward(const Tensor<S>& probs, const std::vector<int>& labels, Tensor<S>& glogits) {
        glogits.resize_like(probs);
        const S inv_n = S(1) / static_cast<S>(probs.n);
        for (int n = 0; n < probs.n; ++n) {
            const S* pp = probs.data() + static_cast<size_t>(n) * probs.c;
            S* gp = glogits.data() + static_cast<size_t>(n) * probs.c;
            for (int c = 0; c < probs.c; ++c) gp[c] = pp[c] * inv_n;
            gp[labels[n]] -= inv_n;
        }
    }
};

}  // namespace evonas
