#pragma once

#include <cstdint>
#include <cstring>
#include <memory>
#include <string>
#include <variant>
#include <vector>

#include "evonas/encoding.hpp"
#include "evonas/errors.hpp"
#include "evonas/ops.hpp"

namespace evonas {

/// Macro-skeleton configuration. Defaults give the reduced skeleton: F=8,
/// two cells per stack, a single stride-2 reduction stage.
struct ArchConfig {
    int filters = 8;
    int cells_per_stack = 2;
    int classes = 4;
    int in_channels = 1;
    int height = 16;
    int width = 16;

    bool operator==(const ArchConfig&) const = default;
};

enum class StepKind : std::uint8_t { Conv, Bn, Relu, Pool, Gap, Dense, Add, ZeroLike };

struct StepDesc {
    StepKind kind{};
    int in_ch = 0, out_ch = 0, k = 0, stride = 1;  // conv/pool/bn/dense geometry
    std::vector<int> inputs;                       // buffer ids
    int output = -1;                               // buffer id
    std::string capture;                           // nonempty marks an activation block
};

struct BufferShape {
    int c = 0, h = 0, w = 0;
    int dim() const { return c * h * w; }
};

/// Deterministic operator graph compiled from an encoding: stem, two cell
/// stacks around one residual reduction block, global average pooling and a
/// dense softmax head. Node fan-in is summed elementwise.
struct NetworkPlan {
    ArchConfig arch;
    Encoding encoding;
    std::vector<StepDesc> steps;
    std::vector<BufferShape> buffers;
    std::vector<std::pair<std::string, int>> capture_blocks;  // name, flattened size
    std::int64_t param_count = 0;
    std::int64_t forward_macs_per_sample = 0;

    int capture_dim() const {
        int d = 0;
        for (const auto& [name, size] : capture_blocks) d += size;
        return d;
    }
};

namespace planner {

struct Builder {
    NetworkPlan plan;

    int add_buffer(BufferShape s) {
        plan.buffers.push_back(s);
        return static_cast<int>(plan.buffers.size()) - 1;
    }

    int conv(int in, int out_ch, int k, int stride, const std::string& cap = "") {
        const BufferShape s = plan.buffers[in];
        StepDesc d{StepKind::Conv, s.c, out_ch, k, stride, {in}, -1, cap};
        d.output = add_buffer({out_ch, same_out(s.h, stride), same_out(s.w, stride)});
        const BufferShape o = plan.buffers[d.output];
        plan.param_count += static_cast<std::int64_t>(out_ch) * s.c * k * k + out_ch;
        plan.forward_macs_per_sample +=
            static_cast<std::int64_t>(o.h) * o.w * out_ch * s.c * k * k;
        plan.steps.push_back(std::move(d));
        return plan.steps.back().output;
    }

    int bn(int in, const std::string& cap = "") {
        const BufferShape s = plan.buffers[in];
        StepDesc d{StepKind::Bn, s.c, s.c, 0, 1, {in}, -1, cap};
        d.output = add_buffer(s);
        plan.param_count += 2 * static_cast<std::int64_t>(s.c);
        plan.steps.push_back(std::move(d));
        return plan.steps.back().output;
    }

    int relu(int in) {
        StepDesc d{StepKind::Relu, 0, 0, 0, 1, {in}, -1, ""};
        d.output = add_buffer(plan.buffers[in]);
        plan.steps.push_back(std::move(d));
        return plan.steps.back().output;
    }

    int pool(int in, int k, int stride) {
        const BufferShape s = plan.buffers[in];
        StepDesc d{StepKind::Pool, 0, 0, k, stride, {in}, -1, ""};
        d.output = add_buffer({s.c, same_out(s.h, stride), same_out(s.w, stride)});
        plan.steps.push_back(std::move(d));
        return plan.steps.back().output;
    }

    int gap(int in, const std::string& cap = "") {
        const BufferShape s = plan.buffers[in];
        StepDesc d{StepKind::Gap, 0, 0, 0, 1, {in}, -1, cap};
        d.output = add_buffer({s.c, 1, 1});
        plan.steps.push_back(std::move(d));
        return plan.steps.back().output;
    }

    int dense(int in, int out_dim, const std::string& cap = "") {
        const BufferShape s = plan.buffers[in];
        StepDesc d{StepKind::Dense, s.dim(), out_dim, 0, 1, {in}, -1, cap};
        d.output = add_buffer({out_dim, 1, 1});
        plan.param_count += static_cast<std::int64_t>(s.dim()) * out_dim + out_dim;
        plan.forward_macs_per_sample += static_cast<std::int64_t>(s.dim()) * out_dim;
        plan.steps.push_back(std::move(d));
        return plan.steps.back().output;
    }

    int add(std::vector<int> inputs, const std::string& cap = "") {
        StepDesc d{StepKind::Add, 0, 0, 0, 1, std::move(inputs), -1, cap};
        d.output = add_buffer(plan.buffers[d.inputs[0]]);
        plan.steps.push_back(std::move(d));
        return plan.steps.back().output;
    }

    int zero_like(int shape_of, const std::string& cap = "") {
        StepDesc d{StepKind::ZeroLike, 0, 0, 0, 1, {shape_of}, -1, cap};
        d.output = add_buffer(plan.buffers[shape_of]);
        plan.steps.push_back(std::move(d));
        return plan.steps.back().output;
    }

    /// Conv block: convolution, ReLU, batch norm.
    int conv_block(int in, int out_ch, int k, int stride) {
        return bn(relu(conv(in, out_ch, k, stride)));
    }

    /// One searched cell over the current tensor; returns the node-3 buffer.
    int cell(int in, const Encoding& e, int channels, const std::string& tag) {
        std::array<int, kNumNodes> node_buf{};
        node_buf[0] = in;
        for (int node = 1; node < kNumNodes; ++node) {
            std::vector<int> contrib;
            for (int g = 0; g < kNumGenes; ++g) {
                if (kEdgeOrder[g].second != node) continue;
                const int src = node_buf[kEdgeOrder[g].first];
                switch (e.op(g)) {
                    case Op::Zeroize: break;
                    case Op::Skip: contrib.push_back(src); break;
                    case Op::Conv3x3: contrib.push_back(conv_block(src, channels, 3, 1)); break;
                    case Op::Conv1x1: contrib.push_back(conv_block(src, channels, 1, 1)); break;
                    case Op::AvgPool3x3: contrib.push_back(pool(src, 3, 1)); break;
                }
            }
            const std::string cap = tag + "n" + std::to_string(node);
            node_buf[node] = contrib.empty() ? zero_like(in, cap) : add(std::move(contrib), cap);
        }
        return node_buf[3];
    }
};

}  // namespace planner

inline NetworkPlan compile(const Encoding& encoding, const ArchConfig& arch) {
    validate(encoding);
    if (!is_connected(encoding))
        throw ValidationError("cannot compile disconnected encoding " + encoding.str());
    planner::Builder b;
    b.plan.arch = arch;
    b.plan.encoding = encoding;
    const int input = b.add_buffer({arch.in_channels, arch.height, arch.width});

    // Stem: 3x3 conv + batch norm.
    int cur = b.bn(b.conv(input, arch.filters, 3, 1), "stem");

    for (int i = 0; i < arch.cells_per_stack; ++i)
        cur = b.cell(cur, encoding, arch.filters, "s0c" + std::to_string(i));

    // Residual reduction: stride-2 main path doubling the filters; shortcut is
    // 2x2 average pooling followed by a 1x1 convolution.
    const int wide = arch.filters * 2;
    {
        const int main1 = b.conv_block(cur, wide, 3, 2);
        const int main2 = b.conv_block(main1, wide, 3, 1);
        const int cut = b.conv(b.pool(cur, 2, 2), wide, 1, 1);
        cur = b.add({main2, cut}, "reduce");
    }

    for (int i = 0; i < arch.cells_per_stack; ++i)
        cur = b.cell(cur, encoding, wide, "s1c" + std::to_string(i));

    const int pooled = b.gap(cur, "gap");
    b.dense(pooled, arch.classes, "logits");

    for (const auto& step : b.plan.steps)
        if (!step.capture.empty())
            b.plan.capture_blocks.emplace_back(step.capture, b.plan.buffers[step.output].dim());
    return b.plan;
}

// ---------------------------------------------------------------------------
// Executable model: instantiated layers plus a flat step program.
// ---------------------------------------------------------------------------

template <class S>
class Model {
public:
    NetworkPlan plan;

    explicit Model(NetworkPlan p) : plan(std::move(p)) {
        for (const auto& d : plan.steps) {
            switch (d.kind) {
                case StepKind::Conv: {
                    Conv2d<S> c;
                    c.configure(d.in_ch, d.out_ch, d.k, d.stride);
                    layers_.emplace_back(std::move(c));
                    break;
                }
                case StepKind::Bn: {
                    BatchNorm<S> bn;
                    bn.configure(d.in_ch);
                    layers_.emplace_back(std::move(bn));
                    break;
                }
                case StepKind::Relu: layers_.emplace_back(Relu<S>{}); break;
                case StepKind::Pool: layers_.emplace_back(AvgPool<S>{d.k, d.stride}); break;
                case StepKind::Gap: layers_.emplace_back(GlobalAvgPool<S>{}); break;
                case StepKind::Dense: {
                    Dense<S> de;
                    de.configure(d.in_ch, d.out_ch);
                    layers_.emplace_back(std::move(de));
                    break;
                }
                case StepKind::Add: layers_.emplace_back(AddTag{}); break;
                case StepKind::ZeroLike: layers_.emplace_back(ZeroTag{}); break;
            }
        }
    }

    void init_params(Rng& rng) {
        for (auto& l : layers_) {
            if (auto* c = std::get_if<Conv2d<S>>(&l)) c->init_params(rng);
            else if (auto* d = std::get_if<Dense<S>>(&l)) d->init_params(rng);
        }
    }

    std::int64_t param_count() const { return plan.param_count; }

    /// All trainable parameter blocks, in step order.
    std::vector<ParamBlock<S>*> param_blocks() {
        std::vector<ParamBlock<S>*> out;
        for (auto& l : layers_) {
            if (auto* c = std::get_if<Conv2d<S>>(&l)) {
                out.push_back(&c->w);
                out.push_back(&c->b);
            } else if (auto* bn = std::get_if<BatchNorm<S>>(&l)) {
                out.push_back(&bn->gamma);
                out.push_back(&bn->beta);
            } else if (auto* d = std::get_if<Dense<S>>(&l)) {
                out.push_back(&d->w);
                out.push_back(&d->b);
            }
        }
        return out;
    }

    std::vector<BatchNorm<S>*> batchnorms() {
        std::vector<BatchNorm<S>*> out;
        for (auto& l : layers_)
            if (auto* bn = std::get_if<BatchNorm<S>>(&l)) out.push_back(bn);
        return out;
    }

    void zero_grad() {
        for (auto* p : param_blocks()) p->zero_grad();
    }

    /// Runs the step program; activations stay resident for backward/capture.
    /// Returns the logits buffer.
    const Tensor<S>& forward(const Tensor<S>& input, bool train) {
        bufs_.resize(plan.buffers.size());
        bufs_[0] = input;
        for (size_t i = 0; i < plan.steps.size(); ++i) {
            const auto& d = plan.steps[i];
            auto& out = bufs_[d.output];
            std::visit(
                [&](auto& layer) {
                    using L = std::decay_t<decltype(layer)>;
                    if constexpr (std::is_same_v<L, Conv2d<S>> || std::is_same_v<L, Relu<S>> ||
                                  std::is_same_v<L, AvgPool<S>> || std::is_same_v<L, GlobalAvgPool<S>> ||
                                  std::is_same_v<L, Dense<S>>) {
                        layer.forward(bufs_[d.inputs[0]], out);
                    } else if constexpr (std::is_same_v<L, BatchNorm<S>>) {
                        layer.forward(bufs_[d.inputs[0]], out, train);
                    } else if constexpr (std::is_same_v<L, AddTag>) {
                        out = bufs_[d.inputs[0]];
                        for (size_t j = 1; j < d.inputs.size(); ++j) add_into(out, bufs_[d.inputs[j]]);
                    } else {  // ZeroTag
                        out.resize_like(bufs_[d.inputs[0]]);
                    }
                },
                layers_[i]);
        }
        return bufs_[plan.steps.back().output];
    }

    /// Backpropagates from the logits gradient; `capture_grads`, when given,
    /// seeds additional gradient into every capture block (one concatenated
    /// row per sample, matching capture_activations layout).
    void backward(const Tensor<S>& glogits, const Tensor<S>* capture_grads = nullptr, bool train = true) {
        grads_.assign(plan.buffers.size(), Tensor<S>{});
        seed_grad(plan.steps.back().output, glogits);
        if (capture_grads) seed_capture_grads(*capture_grads);
        Tensor<S> gx;
        for (size_t i = plan.steps.size(); i-- > 0;) {
            const auto& d = plan.steps[i];
            auto& gout = grads_[d.output];
            if (gout.v.empty()) continue;  // no gradient reached this buffer
            std::visit(
                [&](auto& layer) {
                    using L = std::decay_t<decltype(layer)>;
                    if constexpr (std::is_same_v<L, Conv2d<S>> || std::is_same_v<L, Dense<S>>) {
                        layer.backward(bufs_[d.inputs[0]], gout, gx);
                        accumulate(d.inputs[0], gx);
                    } else if constexpr (std::is_same_v<L, Relu<S>> || std::is_same_v<L, AvgPool<S>> ||
                                         std::is_same_v<L, GlobalAvgPool<S>>) {
                        layer.backward(bufs_[d.inputs[0]], gout, gx);
                        accumulate(d.inputs[0], gx);
                    } else if constexpr (std::is_same_v<L, BatchNorm<S>>) {
                        layer.backward(bufs_[d.inputs[0]], gout, gx, train);
                        accumulate(d.inputs[0], gx);
                    } else if constexpr (std::is_same_v<L, AddTag>) {
                        for (int in : d.inputs) accumulate(in, gout);
                    }
                    // ZeroTag: constant output, no gradient flows.
                },
                layers_[i]);
        }
    }

    /// Per-sample concatenation of every activation block, in plan order.
    /// Shape: (n, capture_dim, 1, 1).
    Tensor<S> capture_activations_batch() const {
        const int dim = plan.capture_dim();
        const int n = bufs_[0].n;
        Tensor<S> out(n, dim, 1, 1);
        int offset = 0;
        for (const auto& d : plan.steps) {
            if (d.capture.empty()) continue;
            const auto& buf = bufs_[d.output];
            const int block = static_cast<int>(buf.sample_size());
            for (int s = 0; s < n; ++s)
                std::copy_n(buf.data() + static_cast<size_t>(s) * block, block,
                            out.data() + static_cast<size_t>(s) * dim + offset);
            offset += block;
        }
        return out;
    }

    const Tensor<S>& buffer(int id) const { return bufs_[id]; }

    std::vector<int> predict_labels() const {
        const auto& logits = bufs_[plan.steps.back().output];
        std::vector<int> out(logits.n);
        for (int s = 0; s < logits.n; ++s) {
            const S* lp = logits.data() + static_cast<size_t>(s) * logits.c;
            int best = 0;
            for (int c = 1; c < logits.c; ++c)
                if (lp[c] > lp[best]) best = c;
            out[s] = best;
        }
        return out;
    }

private:
    struct AddTag {};
    struct ZeroTag {};
    using Layer = std::variant<Conv2d<S>, BatchNorm<S>, Relu<S>, AvgPool<S>, GlobalAvgPool<S>,
                               Dense<S>, AddTag, ZeroTag>;

    void seed_grad(int buffer_id, const Tensor<S>& g) { accumulate(buffer_id, g); }

    void seed_capture_grads(const Tensor<S>& grads) {
        int offset = 0;
        for (const auto& d : plan.steps) {
            if (d.capture.empty()) continue;
            const auto& buf = bufs_[d.output];
            const int block = static_cast<int>(buf.sample_size());
            Tensor<S> g;
            g.resize_like(buf);
            for (int s = 0; s < buf.n; ++s)
                std::copy_n(grads.data() + static_cast<size_t>(s) * grads.c + offset, block,
                            g.data() + static_cast<size_t>(s) * block);
            accumulate(d.output, g);
            offset += block;
        }
    }

    void accumulate(int buffer_id, const Tensor<S>& g) {
        auto& dst = grads_[buffer_id];
        if (dst.v.empty()) dst = g;
        else add_into(dst, g);
    }

    std::vector<Layer> layers_;
    std::vector<Tensor<S>> bufs_;
    std::vector<Tensor<S>> grads_;
};

// ---------------------------------------------------------------------------
// Weight snapshot (binary, little-endian floats in parameter-block order,
// batch-norm running statistics appended per layer).
// ---------------------------------------------------------------------------

inline constexpr char kModelMagic[8] = {'E', 'V', 'O', 'N', 'A', 'S', 'M', '1'};

template <class S>
std::string serialize_model(Model<S>& model) {
    std::string out(kModelMagic, sizeof(kModelMagic));
    auto put_i32 = [&](std::int32_t v) { out.append(reinterpret_cast<const char*>(&v), 4); };
    const auto& a = model.plan.arch;
    put_i32(a.filters);
    put_i32(a.cells_per_stack);
    put_i32(a.classes);
    put_i32(a.in_channels);
    put_i32(a.height);
    put_i32(a.width);
    out.append(reinterpret_cast<const char*>(model.plan.encoding.genes.data()), kNumGenes);
    auto put_vec = [&](const std::vector<S>& v) {
        put_i32(static_cast<std::int32_t>(v.size()));
        for (S x : v) {
            const float f = static_cast<float>(x);
            out.append(reinterpret_cast<const char*>(&f), 4);
        }
    };
    for (auto* p : model.param_blocks()) put_vec(p->value);
    for (auto* bn : model.batchnorms()) {
        put_vec(bn->running_mean);
        put_vec(bn->running_var);
    }
    return out;
}

template <class S>
Model<S> deserialize_model(const std::string& bytes, const ArchConfig& expect_arch) {
    size_t pos = 0;
    auto need = [&](size_t n) {
        if (pos + n > bytes.size()) throw ParseError("model file truncated");
    };
    need(sizeof(kModelMagic));
    if (std::memcmp(bytes.data(), kModelMagic, sizeof(kModelMagic)) != 0)
        throw ParseError("bad model file magic");
    pos = sizeof(kModelMagic);
    auto get_i32 = [&] {
        need(4);
        std::int32_t v;
        std::memcpy(&v, bytes.data() + pos, 4);
        pos += 4;
        return v;
    };
    ArchConfig a;
    a.filters = get_i32();
    a.cells_per_stack = get_i32();
    a.classes = get_i32();
    a.in_channels = get_i32();
    a.height = get_i32();
    a.width = get_i32();
    if (!(a == expect_arch)) throw ParseError("model architecture config mismatch");
    need(kNumGenes);
    Encoding e;
    std::memcpy(e.genes.data(), bytes.data() + pos, kNumGenes);
    pos += kNumGenes;
    Model<S> model(compile(e, a));
    auto get_vec = [&](std::vector<S>& v) {
        const auto n = static_cast<size_t>(get_i32());
        if (n != v.size()) throw ParseError("model parameter block size mismatch");
        need(4 * n);
        for (size_t i = 0; i < n; ++i) {
            float f;
            std::memcpy(&f, bytes.data() + pos, 4);
            pos += 4;
            v[i] = static_cast<S>(f);
        }
    };
    for (auto* p : model.param_blocks()) get_vec(p->value);
    for (auto* bn : model.batchnorms()) {
        get_vec(bn->running_mean);
        get_vec(bn->running_var);
    }
    if (pos != bytes.size()) throw ParseError("model file has trailing bytes");
    return model;
}

}  // namespace evonas
