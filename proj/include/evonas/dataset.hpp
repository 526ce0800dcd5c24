#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "evonas/errors.hpp"
#include "evonas/io.hpp"
#include "evonas/rng.hpp"
#include "evonas/tensor.hpp"

namespace evonas {

enum class Split { Train, Validation, Test };

/// Image classification dataset. Raw pixel values live in [0,1]; `normalize()`
/// applies channel-wise z-scoring with statistics from the training split.
struct Dataset {
    int classes = 0;
    int height = 0, width = 0, channels = 0;
    Tensor<float> train_x, val_x, test_x;
    std::vector<int> train_y, val_y, test_y;
    std::vector<double> channel_mean, channel_std;
    bool normalized = false;

    Tensor<float>& x(Split s) { return s == Split::Train ? train_x : s == Split::Validation ? val_x : test_x; }
    const Tensor<float>& x(Split s) const {
        return s == Split::Train ? train_x : s == Split::Validation ? val_x : test_x;
    }
    std::vector<int>& y(Split s) { return s == Split::Train ? train_y : s == Split::Validation ? val_y : test_y; }
    const std::vector<int>& y(Split s) const {
        return s == Split::Train ? train_y : s == Split::Validation ? val_y : test_y;
    }

    void normalize() {
        if (normalized) return;
        channel_mean.assign(channels, 0.0);
        channel_std.assign(channels, 1.0);
        const size_t plane = train_x.plane();
        for (int c = 0; c < channels; ++c) {
            double sum = 0;
            size_t count = 0;
            for (int n = 0; n < train_x.n; ++n) {
                const float* p = train_x.at(n, c);
                for (size_t i = 0; i < plane; ++i) sum += p[i];
                count += plane;
            }
            const double mean = count ? sum / count : 0.0;
            double sq = 0;
            for (int n = 0; n < train_x.n; ++n) {
                const float* p = train_x.at(n, c);
                for (size_t i = 0; i < plane; ++i) sq += (p[i] - mean) * (p[i] - mean);
            }
            double std_dev = count ? std::sqrt(sq / count) : 1.0;
            if (std_dev < 1e-8) std_dev = 1.0;
            channel_mean[c] = mean;
            channel_std[c] = std_dev;
        }
        for (Tensor<float>* t : {&train_x, &val_x, &test_x}) {
            for (int n = 0; n < t->n; ++n)
                for (int c = 0; c < channels; ++c) {
                    float* p = t->at(n, c);
                    for (size_t i = 0; i < t->plane(); ++i)
                        p[i] = static_cast<float>((p[i] - channel_mean[c]) / channel_std[c]);
                }
        }
        normalized = true;
    }
};

// ---------------------------------------------------------------------------
// Synthetic class-conditional generator: blobs, stripes and checkerboards plus
// Gaussian noise. Deterministic per seed; splits 70/15/15, stratified so each
// split is balanced within one sample per class.
// ---------------------------------------------------------------------------

struct SyntheticSpec {
    int classes = 4;
    int samples = 320;
    int height = 16, width = 16, channels = 1;
    double noise = 0.05;
    std::uint64_t seed = 1;

    bool operator==(const SyntheticSpec&) const = default;
};

namespace detail {

/// Base pattern for class k, in [0,1]. Patterns cycle blob / stripes /
/// checkerboard with k-dependent parameters.
inline double class_pattern(int k, int y, int x, int c, int h, int w) {
    const int kind = k % 3;
    const int variant = k / 3;
    const double fy = (y + 0.5) / h, fx = (x + 0.5) / w;
    switch (kind) {
        case 0: {  // blob at a class-dependent position
            const double a = 2.399963229728653 * (variant + 1) + 0.7 * k;  // golden angle
            const double cy = 0.5 + 0.3 * std::sin(a), cx = 0.5 + 0.3 * std::cos(a);
            const double d2 = (fy - cy) * (fy - cy) + (fx - cx) * (fx - cx);
            return std::exp(-d2 / (2 * 0.03));
        }
        case 1: {  // oriented stripes
            const double theta = 0.6 + 0.9 * variant + 0.2 * c;
            const double freq = 3.0 + variant;
            return 0.5 + 0.5 * std::sin(2 * 3.14159265358979323846 * freq *
                                        (fx * std::cos(theta) + fy * std::sin(theta)));
        }
        default: {  // checkerboard
            const int cell = 2 + variant % 3;
            return ((y / cell + x / cell + variant + c) % 2) ? 1.0 : 0.0;
        }
    }
}

inline float quantize255(double v) {
    v = std::min(std::max(v, 0.0), 1.0);
    return static_cast<float>(std::nearbyint(v * 255.0) / 255.0);
}

}  // namespace detail

inline Dataset make_synthetic_dataset(const SyntheticSpec& spec) {
    if (spec.classes < 2) throw ValidationError("synthetic dataset needs at least 2 classes");
    if (spec.samples < spec.classes) throw ValidationError("synthetic dataset needs >= 1 sample per class");
    Dataset ds;
    ds.classes = spec.classes;
    ds.height = spec.height;
    ds.width = spec.width;
    ds.channels = spec.channels;
    Rng rng(mix64(spec.seed ^ 0x5ee7ab1e5ull));

    // Round-robin class assignment, then per-class 70/15/15 split.
    std::vector<std::vector<size_t>> per_class(spec.classes);
    Tensor<float> all(spec.samples, spec.channels, spec.height, spec.width);
    std::vector<int> labels(spec.samples);
    for (int s = 0; s < spec.samples; ++s) {
        const int k = s % spec.classes;
        labels[s] = k;
        per_class[k].push_back(static_cast<size_t>(s));
        for (int c = 0; c < spec.channels; ++c) {
            float* p = all.at(s, c);
            for (int y = 0; y < spec.height; ++y)
                for (int x = 0; x < spec.width; ++x) {
                    const double base = detail::class_pattern(k, y, x, c, spec.height, spec.width);
                    p[static_cast<size_t>(y) * spec.width + x] =
                        detail::quantize255(base + spec.noise * rng.normal());
                }
        }
    }

    auto copy_to = [&](Tensor<float>& dst_x, std::vector<int>& dst_y, const std::vector<size_t>& idx) {
        dst_x.resize(static_cast<int>(idx.size()), spec.channels, spec.height, spec.width);
        dst_y.resize(idx.size());
        for (size_t i = 0; i < idx.size(); ++i) {
            dst_y[i] = labels[idx[i]];
            std::copy_n(all.data() + idx[i] * all.sample_size(), all.sample_size(),
                        dst_x.data() + i * all.sample_size());
        }
    };
    std::vector<size_t> train_idx, val_idx, test_idx;
    for (int k = 0; k < spec.classes; ++k) {
        const auto& members = per_class[k];
        const size_t n_train = (members.size() * 70 + 50) / 100;
        const size_t n_val = (members.size() * 15 + 50) / 100;
        for (size_t i = 0; i < members.size(); ++i) {
            if (i < n_train) train_idx.push_back(members[i]);
            else if (i < n_train + n_val) val_idx.push_back(members[i]);
            else test_idx.push_back(members[i]);
        }
    }
    copy_to(ds.train_x, ds.train_y, train_idx);
    copy_to(ds.val_x, ds.val_y, val_idx);
    copy_to(ds.test_x, ds.test_y, test_idx);
    return ds;
}

// ---------------------------------------------------------------------------
// IDX format (big-endian): magic 0x00000803 for images, 0x00000801 for labels.
// Pixels are scaled by 255 on load.
// ---------------------------------------------------------------------------

namespace detail {

inline std::uint32_t read_be32(const std::string& s, size_t pos, const char* what) {
    if (pos + 4 > s.size()) throw ParseError(std::string("truncated IDX file reading ") + what);
    return (static_cast<std::uint32_t>(static_cast<unsigned char>(s[pos])) << 24) |
           (static_cast<std::uint32_t>(static_cast<unsigned char>(s[pos + 1])) << 16) |
           (static_cast<std::uint32_t>(static_cast<unsigned char>(s[pos + 2])) << 8) |
           static_cast<std::uint32_t>(static_cast<unsigned char>(s[pos + 3]));
}

inline void write_be32(std::string& s, std::uint32_t v) {
    s.push_back(static_cast<char>((v >> 24) & 0xff));
    s.push_back(static_cast<char>((v >> 16) & 0xff));
    s.push_back(static_cast<char>((v >> 8) & 0xff));
    s.push_back(static_cast<char>(v & 0xff));
}

}  // namespace detail

struct IdxImages {
    int count = 0, height = 0, width = 0;
    std::vector<std::uint8_t> pixels;  // count*height*width
};

inline IdxImages parse_idx_images(const std::string& bytes) {
    const auto magic = detail::read_be32(bytes, 0, "image magic");
    if (magic != 0x00000803u) throw ParseError("bad IDX image magic");
    IdxImages out;
    out.count = static_cast<int>(detail::read_be32(bytes, 4, "image count"));
    out.height = static_cast<int>(detail::read_be32(bytes, 8, "image rows"));
    out.width = static_cast<int>(detail::read_be32(bytes, 12, "image cols"));
    const size_t need = 16 + static_cast<size_t>(out.count) * out.height * out.width;
    if (bytes.size() < need) throw ParseError("truncated IDX image data");
    out.pixels.assign(bytes.begin() + 16, bytes.begin() + static_cast<std::ptrdiff_t>(need));
    return out;
}

inline std::vector<std::uint8_t> parse_idx_labels(const std::string& bytes) {
    const auto magic = detail::read_be32(bytes, 0, "label magic");
    if (magic != 0x00000801u) throw ParseError("bad IDX label magic");
    const auto count = detail::read_be32(bytes, 4, "label count");
    if (bytes.size() < 8 + count) throw ParseError("truncated IDX label data");
    return {bytes.begin() + 8, bytes.begin() + 8 + count};
}

inline std::string idx_image_bytes(const Tensor<float>& x) {
    std::string out;
    detail::write_be32(out, 0x00000803u);
    detail::write_be32(out, static_cast<std::uint32_t>(x.n));
    detail::write_be32(out, static_cast<std::uint32_t>(x.h));
    detail::write_be32(out, static_cast<std::uint32_t>(x.w));
    for (int n = 0; n < x.n; ++n) {
        const float* p = x.at(n, 0);
        for (size_t i = 0; i < x.plane(); ++i) {
            const double v = std::min(std::max(static_cast<double>(p[i]), 0.0), 1.0);
            out.push_back(static_cast<char>(static_cast<int>(std::nearbyint(v * 255.0))));
        }
    }
    return out;
}

inline std::string idx_label_bytes(const std::vector<int>& y) {
    std::string out;
    detail::write_be32(out, 0x00000801u);
    detail::write_be32(out, static_cast<std::uint32_t>(y.size()));
    for (int v : y) out.push_back(static_cast<char>(v));
    return out;
}

/// Loads an IDX image/label pair into one split. Raw [0,1] values; call
/// Dataset::normalize() once all splits are in.
inline void load_idx_split(Dataset& ds, Split split, const std::string& image_bytes,
                           const std::string& label_bytes) {
    auto images = parse_idx_images(image_bytes);
    auto labels = parse_idx_labels(label_bytes);
    if (static_cast<size_t>(images.count) != labels.size())
        throw ParseError("IDX image/label count mismatch: " + std::to_string(images.count) + " vs " +
                         std::to_string(labels.size()));
    if (ds.height == 0) {
        ds.height = images.height;
        ds.width = images.width;
        ds.channels = 1;
    } else if (ds.height != images.height || ds.width != images.width) {
        throw ParseError("IDX split has mismatched image size");
    }
    auto& x = ds.x(split);
    auto& y = ds.y(split);
    x.resize(images.count, 1, images.height, images.width);
    y.resize(labels.size());
    for (int n = 0; n < images.count; ++n) {
        float* p = x.at(n, 0);
        for (size_t i = 0; i < x.plane(); ++i)
            p[i] = static_cast<float>(images.pixels[static_cast<size_t>(n) * x.plane() + i] / 255.0);
        y[n] = labels[n];
        ds.classes = std::max(ds.classes, y[n] + 1);
    }
}

inline Dataset load_idx(const std::filesystem::path& images_path,
                        const std::filesystem::path& labels_path) {
    Dataset ds;
    load_idx_split(ds, Split::Train, read_file(images_path), read_file(labels_path));
    return ds;
}

// ---------------------------------------------------------------------------
// Training augmentation: zero padding + random crop, horizontal flip, cutout.
// ---------------------------------------------------------------------------

struct AugmentParams {
    int pad_x = 0, pad_y = 0;        // applied left/right and top/bottom
    int cut_h = 0, cut_w = 0;        // cutout window size
};

inline AugmentParams augment_params(int h, int w) {
    AugmentParams p;
    p.pad_x = (h + 7) / 8;  // ceil(H/8) on the left/right
    p.pad_y = (w + 7) / 8;  // ceil(W/8) on the top/bottom
    p.cut_h = 2 * ((h + 7) / 8);
    p.cut_w = 2 * ((w + 7) / 8);
    return p;
}

/// Deterministic augmentation of one sample: crop the zero-padded image at
/// offset (oy, ox) in [0, 2*pad], optionally flip horizontally, then zero the
/// cutout window centered at (cy, cx) clipped to the image bounds.
/// Offsets equal to the pad with no flip reproduce the input outside the
/// cutout window.
inline void augment_sample(Tensor<float>& batch, int n, const AugmentParams& p, int oy, int ox,
                           bool flip, int cy, int cx) {
    const int ph = batch.h + 2 * p.pad_y, pw = batch.w + 2 * p.pad_x;
    std::vector<float> padded(static_cast<size_t>(ph) * pw);
    for (int c = 0; c < batch.c; ++c) {
        float* img = batch.at(n, c);
        std::fill(padded.begin(), padded.end(), 0.0f);
        for (int y = 0; y < batch.h; ++y)
            std::copy_n(img + static_cast<size_t>(y) * batch.w, batch.w,
                        padded.data() + static_cast<size_t>(y + p.pad_y) * pw + p.pad_x);
        for (int y = 0; y < batch.h; ++y)
            for (int x = 0; x < batch.w; ++x) {
                const int sx = flip ? (batch.w - 1 - x) : x;
                img[static_cast<size_t>(y) * batch.w + x] =
                    padded[static_cast<size_t>(y + oy) * pw + (sx + ox)];
            }
        const int y0 = std::max(cy - p.cut_h / 2, 0), y1 = std::min(cy + (p.cut_h + 1) / 2, batch.h);
        const int x0 = std::max(cx - p.cut_w / 2, 0), x1 = std::min(cx + (p.cut_w + 1) / 2, batch.w);
        for (int y = y0; y < y1; ++y)
            for (int x = x0; x < x1; ++x) img[static_cast<size_t>(y) * batch.w + x] = 0.0f;
    }
}

/// In-place batch augmentation: uniform crop offset, 0.5 flip, random cutout
/// center.
inline void augment(Tensor<float>& batch, Rng& rng) {
    const auto p = augment_params(batch.h, batch.w);
    for (int n = 0; n < batch.n; ++n) {
        const int oy = rng.below_int(2 * p.pad_y + 1);
        const int ox = rng.below_int(2 * p.pad_x + 1);
        const bool flip = rng.bernoulli(0.5);
        const int cy = rng.below_int(batch.h);
        const int cx = rng.below_int(batch.w);
        augment_sample(batch, n, p, oy, ox, flip, cy, cx);
    }
}

}  // namespace evonas
