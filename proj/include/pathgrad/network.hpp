// Minimal rectified-network representation: piecewise-linear layers
// (dense / conv / avg-pool / flatten) with ReLU markers, forward with
// full activation recording, exact reverse-mode gradients, and
// per-neuron interception (gating / freezing) for pathway analysis.
#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace pathgrad {

using Vec = std::vector<double>;

struct TensorShape {
    int c = 1, h = 1, w = 1;
    int size() const { return c * h * w; }
    bool operator==(const TensorShape&) const = default;
};

enum class LayerKind { Dense, Conv2d, AvgPool, Flatten };

inline const char* layer_kind_name(LayerKind k) {
    switch (k) {
        case LayerKind::Dense: return "dense";
        case LayerKind::Conv2d: return "conv2d";
        case LayerKind::AvgPool: return "avgpool";
        case LayerKind::Flatten: return "flatten";
    }
    return "?";
}

// One piecewise-linear layer. `relu` marks a rectifier applied after the
// affine map; rectified layers are the hidden-neuron layers of the network.
struct Layer {
    LayerKind kind = LayerKind::Dense;
    bool relu = false;
    TensorShape in_shape, out_shape;

    // Dense: weights is out x in, row-major. Conv2d: OC x IC x KH x KW.
    Vec weights;
    Vec bias;

    int kernel_h = 0, kernel_w = 0;
    int stride = 1, pad = 0;
    int pool_h = 0, pool_w = 0;

    bool has_params() const {
        return kind == LayerKind::Dense || kind == LayerKind::Conv2d;
    }
};

inline Layer dense_layer(int in, int out, bool relu) {
    Layer l;
    l.kind = LayerKind::Dense;
    l.relu = relu;
    l.in_shape = {1, 1, in};
    l.out_shape = {1, 1, out};
    l.weights.assign(static_cast<size_t>(in) * out, 0.0);
    l.bias.assign(out, 0.0);
    return l;
}

inline Layer conv_layer(TensorShape in, int out_channels, int kh, int kw,
                        int stride, int pad, bool relu) {
    Layer l;
    l.kind = LayerKind::Conv2d;
    l.relu = relu;
    l.in_shape = in;
    l.kernel_h = kh;
    l.kernel_w = kw;
    l.stride = stride;
    l.pad = pad;
    int oh = (in.h + 2 * pad - kh) / stride + 1;
    int ow = (in.w + 2 * pad - kw) / stride + 1;
    l.out_shape = {out_channels, oh, ow};
    l.weights.assign(static_cast<size_t>(out_channels) * in.c * kh * kw, 0.0);
    l.bias.assign(out_channels, 0.0);
    return l;
}

inline Layer avgpool_layer(TensorShape in, int ph, int pw) {
    if (in.h % ph != 0 || in.w % pw != 0)
        throw std::invalid_argument("avgpool window must tile the input");
    Layer l;
    l.kind = LayerKind::AvgPool;
    l.in_shape = in;
    l.pool_h = ph;
    l.pool_w = pw;
    l.out_shape = {in.c, in.h / ph, in.w / pw};
    return l;
}

inline Layer flatten_layer(TensorShape in) {
    Layer l;
    l.kind = LayerKind::Flatten;
    l.in_shape = in;
    l.out_shape = {1, 1, in.size()};
    return l;
}

// Identifies one hidden (rectified) neuron. `layer` indexes the network's
// rectified layers in order (0-based); `unit` is the flattened
// channel-major, then row-major index within that layer.
struct NeuronId {
    int layer = 0;
    int unit = 0;
    auto operator<=>(const NeuronId&) const = default;
};

enum class InterceptKind : uint8_t { Pass, Gate, Freeze };

// Per-neuron forward directives over all N hidden neurons (flat order).
// Gate multiplies the rectified activation by a non-negative factor;
// Freeze pins the activation to a constant that blocks gradient flow.
struct InterceptSpec {
    std::vector<InterceptKind> kind;
    Vec value;

    bool empty() const { return kind.empty(); }

    static InterceptSpec pass_all(size_t n) {
        InterceptSpec s;
        s.kind.assign(n, InterceptKind::Pass);
        s.value.assign(n, 0.0);
        return s;
    }
    void set_gate(size_t flat, double lambda) {
        if (lambda < 0.0) throw std::invalid_argument("gate must be >= 0");
        kind[flat] = InterceptKind::Gate;
        value[flat] = lambda;
    }
    void set_freeze(size_t flat, double constant) {
        kind[flat] = InterceptKind::Freeze;
        value[flat] = constant;
    }
};

class Network {
public:
    Network() : id_(next_id()) {}
    explicit Network(std::vector<Layer> layers) : id_(next_id()) {
        for (auto& l : layers) push_back(std::move(l));
        finalize();
    }

    void push_back(Layer l) {
        if (!layers_.empty() && !(layers_.back().out_shape == l.in_shape))
            throw std::invalid_argument(
                "layer " + std::to_string(layers_.size()) +
                ": input shape does not match previous output shape");
        layers_.push_back(std::move(l));
        finalize();
    }

    // The head must be a non-rectified dense layer: one scalar per class.
    void validate() const {
        if (layers_.empty()) throw std::invalid_argument("empty network");
        const Layer& head = layers_.back();
        if (head.kind != LayerKind::Dense || head.relu)
            throw std::invalid_argument("head must be a linear dense layer");
        for (size_t i = 0; i < layers_.size(); ++i) {
            for (double v : layers_[i].weights)
                if (!std::isfinite(v))
                    throw std::invalid_argument("non-finite weight in layer " +
                                                std::to_string(i));
            for (double v : layers_[i].bias)
                if (!std::isfinite(v))
                    throw std::invalid_argument("non-finite bias in layer " +
                                                std::to_string(i));
        }
    }

    const std::vector<Layer>& layers() const { return layers_; }
    Layer& layer(size_t i) { bump(); return layers_[i]; }
    const Layer& layer(size_t i) const { return layers_[i]; }
    size_t layer_count() const { return layers_.size(); }

    TensorShape input_shape() const { return layers_.front().in_shape; }
    int input_size() const { return layers_.front().in_shape.size(); }
    int class_count() const { return layers_.back().out_shape.size(); }

    // Hidden (rectified) layer bookkeeping.
    int hidden_layer_count() const { return static_cast<int>(hidden_.size()); }
    int hidden_layer_index(int h) const { return hidden_[h]; }
    int hidden_units(int h) const { return layers_[hidden_[h]].out_shape.size(); }
    int hidden_offset(int h) const { return offsets_[h]; }
    int total_hidden() const { return total_hidden_; }

    int flat_index(NeuronId n) const {
        check_neuron(n);
        return offsets_[n.layer] + n.unit;
    }
    NeuronId neuron_at(int flat) const {
        if (flat < 0 || flat >= total_hidden_)
            throw std::out_of_range("neuron index out of range");
        int h = static_cast<int>(std::upper_bound(offsets_.begin(), offsets_.end(), flat) -
                                 offsets_.begin()) - 1;
        return {h, flat - offsets_[h]};
    }
    void check_neuron(NeuronId n) const {
        if (n.layer < 0 || n.layer >= hidden_layer_count() || n.unit < 0 ||
            n.unit >= hidden_units(n.layer))
            throw std::out_of_range("neuron id out of range");
    }

    // Monotone identity used to reject stale activation records.
    uint64_t id() const { return id_; }

    // Weights are stored as float32 in manifests; snapping keeps the
    // in-memory network on the storage grid so save/load round-trips
    // bit-exactly.
    void snap_to_storage() {
        for (auto& l : layers_) {
            for (auto& v : l.weights) v = static_cast<double>(static_cast<float>(v));
            for (auto& v : l.bias) v = static_cast<double>(static_cast<float>(v));
        }
        bump();
    }

private:
    static uint64_t next_id() {
        static std::atomic<uint64_t> counter{1};
        return counter.fetch_add(1);
    }
    void bump() { id_ = next_id(); }
    void finalize() {
        hidden_.clear();
        offsets_.clear();
        total_hidden_ = 0;
        for (size_t i = 0; i < layers_.size(); ++i) {
            if (layers_[i].relu) {
                hidden_.push_back(static_cast<int>(i));
                offsets_.push_back(total_hidden_);
                total_hidden_ += layers_[i].out_shape.size();
            }
        }
        bump();
    }

    std::vector<Layer> layers_;
    std::vector<int> hidden_;   // layer indices with relu
    std::vector<int> offsets_;  // flat neuron offset per hidden layer
    int total_hidden_ = 0;
    uint64_t id_ = 0;
};

// Everything recorded by one forward pass: per hidden layer the
// pre-activations z and the (post-intercept) activations a actually
// propagated downstream, plus all class logits.
struct ActivationRecord {
    Vec input;
    std::vector<Vec> pre;          // z per hidden layer
    std::vector<Vec> act;          // a per hidden layer (effective)
    Vec logits;
    double output = 0.0;           // logits[class_index]
    int class_index = 0;
    uint64_t net_id = 0;

    double activation(const Network& net, NeuronId n) const {
        net.check_neuron(n);
        return act[n.layer][n.unit];
    }
    double pre_activation(const Network& net, NeuronId n) const {
        net.check_neuron(n);
        return pre[n.layer][n.unit];
    }
};

struct GradientRecord {
    Vec input_grad;                // d output / d x
    std::vector<Vec> neuron_grads; // d output / d a per hidden layer
    double at(const Network& net, NeuronId n) const {
        net.check_neuron(n);
        return neuron_grads[n.layer][n.unit];
    }
};

enum class ReluBackward { Standard, Guided };

namespace detail {

inline void affine_forward(const Layer& l, const Vec& in, Vec& out) {
    switch (l.kind) {
        case LayerKind::Dense: {
            int ni = l.in_shape.size(), no = l.out_shape.size();
            out.assign(no, 0.0);
            for (int o = 0; o < no; ++o) {
                double s = l.bias[o];
                const double* w = &l.weights[static_cast<size_t>(o) * ni];
                for (int i = 0; i < ni; ++i) s += w[i] * in[i];
                out[o] = s;
            }
            break;
        }
        case LayerKind::Conv2d: {
            const auto& is = l.in_shape;
            const auto& os = l.out_shape;
            out.assign(os.size(), 0.0);
            for (int oc = 0; oc < os.c; ++oc)
                for (int oy = 0; oy < os.h; ++oy)
                    for (int ox = 0; ox < os.w; ++ox) {
                        double s = l.bias[oc];
                        for (int ic = 0; ic < is.c; ++ic)
                            for (int ky = 0; ky < l.kernel_h; ++ky)
                                for (int kx = 0; kx < l.kernel_w; ++kx) {
                                    int iy = oy * l.stride + ky - l.pad;
                                    int ix = ox * l.stride + kx - l.pad;
                                    if (iy < 0 || iy >= is.h || ix < 0 || ix >= is.w) continue;
                                    double w = l.weights[((static_cast<size_t>(oc) * is.c + ic) *
                                                          l.kernel_h + ky) * l.kernel_w + kx];
                                    s += w * in[(static_cast<size_t>(ic) * is.h + iy) * is.w + ix];
                                }
                        out[(static_cast<size_t>(oc) * os.h + oy) * os.w + ox] = s;
                    }
            break;
        }
        case LayerKind::AvgPool: {
            const auto& is = l.in_shape;
            const auto& os = l.out_shape;
            out.assign(os.size(), 0.0);
            double inv = 1.0 / (l.pool_h * l.pool_w);
            for (int c = 0; c < os.c; ++c)
                for (int oy = 0; oy < os.h; ++oy)
                    for (int ox = 0; ox < os.w; ++ox) {
                        double s = 0.0;
                        for (int py = 0; py < l.pool_h; ++py)
                            for (int px = 0; px < l.pool_w; ++px)
                                s += in[(static_cast<size_t>(c) * is.h + oy * l.pool_h + py) * is.w +
                                        ox * l.pool_w + px];
                        out[(static_cast<size_t>(c) * os.h + oy) * os.w + ox] = s * inv;
                    }
            break;
        }
        case LayerKind::Flatten:
            out = in;
            break;
    }
}

// d(loss)/d(out) -> d(loss)/d(in); optionally accumulates parameter grads.
inline void affine_backward(const Layer& l, const Vec& in, const Vec& dout,
                            Vec& din, Vec* dweights = nullptr, Vec* dbias = nullptr) {
    switch (l.kind) {
        case LayerKind::Dense: {
            int ni = l.in_shape.size(), no = l.out_shape.size();
            din.assign(ni, 0.0);
            for (int o = 0; o < no; ++o) {
                double g = dout[o];
                if (g == 0.0 && !dweights) continue;
                const double* w = &l.weights[static_cast<size_t>(o) * ni];
                for (int i = 0; i < ni; ++i) din[i] += w[i] * g;
                if (dweights) {
                    double* dw = &(*dweights)[static_cast<size_t>(o) * ni];
                    for (int i = 0; i < ni; ++i) dw[i] += g * in[i];
                }
                if (dbias) (*dbias)[o] += g;
            }
            break;
        }
        case LayerKind::Conv2d: {
            const auto& is = l.in_shape;
            const auto& os = l.out_shape;
            din.assign(is.size(), 0.0);
            for (int oc = 0; oc < os.c; ++oc)
                for (int oy = 0; oy < os.h; ++oy)
                    for (int ox = 0; ox < os.w; ++ox) {
                        double g = dout[(static_cast<size_t>(oc) * os.h + oy) * os.w + ox];
                        if (g == 0.0) continue;
                        if (dbias) (*dbias)[oc] += g;
                        for (int ic = 0; ic < is.c; ++ic)
                            for (int ky = 0; ky < l.kernel_h; ++ky)
                                for (int kx = 0; kx < l.kernel_w; ++kx) {
                                    int iy = oy * l.stride + ky - l.pad;
                                    int ix = ox * l.stride + kx - l.pad;
                                    if (iy < 0 || iy >= is.h || ix < 0 || ix >= is.w) continue;
                                    size_t wi = ((static_cast<size_t>(oc) * is.c + ic) *
                                                 l.kernel_h + ky) * l.kernel_w + kx;
                                    size_t ii = (static_cast<size_t>(ic) * is.h + iy) * is.w + ix;
                                    din[ii] += l.weights[wi] * g;
                                    if (dweights) (*dweights)[wi] += g * in[ii];
                                }
                    }
            break;
        }
        case LayerKind::AvgPool: {
            const auto& is = l.in_shape;
            const auto& os = l.out_shape;
            din.assign(is.size(), 0.0);
            double inv = 1.0 / (l.pool_h * l.pool_w);
            for (int c = 0; c < os.c; ++c)
                for (int oy = 0; oy < os.h; ++oy)
                    for (int ox = 0; ox < os.w; ++ox) {
                        double g = dout[(static_cast<size_t>(c) * os.h + oy) * os.w + ox] * inv;
                        for (int py = 0; py < l.pool_h; ++py)
                            for (int px = 0; px < l.pool_w; ++px)
                                din[(static_cast<size_t>(c) * is.h + oy * l.pool_h + py) * is.w +
                                    ox * l.pool_w + px] += g;
                    }
            break;
        }
        case LayerKind::Flatten:
            din = dout;
            break;
    }
}

}  // namespace detail

// Forward pass recording z and a for every hidden layer. Intercepts, when
// given, are applied to the rectified activation before it propagates.
inline ActivationRecord forward_record(const Network& net, const Vec& x,
                                       const InterceptSpec* intercept,
                                       int class_index) {
    net.validate();
    if (static_cast<int>(x.size()) != net.input_size())
        throw std::invalid_argument("input size mismatch at layer 0: expected " +
                                    std::to_string(net.input_size()) + ", got " +
                                    std::to_string(x.size()));
    for (double v : x)
        if (!std::isfinite(v)) throw std::invalid_argument("non-finite input");
    if (class_index < 0 || class_index >= net.class_count())
        throw std::invalid_argument("class index out of range");
    if (intercept && !intercept->empty() &&
        intercept->kind.size() != static_cast<size_t>(net.total_hidden()))
        throw std::invalid_argument("intercept size mismatch");

    ActivationRecord rec;
    rec.input = x;
    rec.pre.resize(net.hidden_layer_count());
    rec.act.resize(net.hidden_layer_count());
    rec.class_index = class_index;
    rec.net_id = net.id();

    Vec cur = x, next;
    int h = 0;
    for (size_t li = 0; li < net.layer_count(); ++li) {
        const Layer& l = net.layer(li);
        detail::affine_forward(l, cur, next);
        if (l.relu) {
            rec.pre[h] = next;
            int base = net.hidden_offset(h);
            for (size_t j = 0; j < next.size(); ++j) {
                double a = next[j] > 0.0 ? next[j] : 0.0;
                if (intercept && !intercept->empty()) {
                    switch (intercept->kind[base + j]) {
                        case InterceptKind::Pass: break;
                        case InterceptKind::Gate: a *= intercept->value[base + j]; break;
                        case InterceptKind::Freeze: a = intercept->value[base + j]; break;
                    }
                }
                next[j] = a;
            }
            rec.act[h] = next;
            ++h;
        }
        cur.swap(next);
    }
    rec.logits = cur;
    rec.output = cur[class_index];
    return rec;
}

inline ActivationRecord forward_record(const Network& net, const Vec& x,
                                       int class_index = 0) {
    return forward_record(net, x, nullptr, class_index);
}

namespace detail {

// Core reverse pass from a logit seed. neuron_grads hold d out / d a where
// a is the effective (post-intercept) activation; frozen units get 0.
inline GradientRecord backprop(const Network& net, const ActivationRecord& rec,
                               const InterceptSpec* intercept, const Vec& dlogits,
                               ReluBackward mode = ReluBackward::Standard,
                               std::vector<Vec>* dweights = nullptr,
                               std::vector<Vec>* dbias = nullptr) {
    if (rec.net_id != net.id())
        throw std::invalid_argument("stale activation record: network changed");
    GradientRecord g;
    g.neuron_grads.resize(net.hidden_layer_count());

    Vec dcur = dlogits, dprev;
    int h = net.hidden_layer_count();
    for (int li = static_cast<int>(net.layer_count()) - 1; li >= 0; --li) {
        const Layer& l = net.layer(li);
        if (l.relu) {
            --h;
            g.neuron_grads[h] = dcur;
            int base = net.hidden_offset(h);
            const Vec& z = rec.pre[h];
            for (size_t j = 0; j < dcur.size(); ++j) {
                double d = dcur[j];
                if (mode == ReluBackward::Guided && d < 0.0) d = 0.0;
                InterceptKind k = InterceptKind::Pass;
                double v = 0.0;
                if (intercept && !intercept->empty()) {
                    k = intercept->kind[base + j];
                    v = intercept->value[base + j];
                }
                switch (k) {
                    case InterceptKind::Pass:
                        d = z[j] > 0.0 ? d : 0.0;
                        break;
                    case InterceptKind::Gate:
                        d = z[j] > 0.0 ? d * v : 0.0;
                        break;
                    case InterceptKind::Freeze:
                        g.neuron_grads[h][j] = 0.0;
                        d = 0.0;
                        break;
                }
                dcur[j] = d;
            }
        }
        // Input to this layer: previous hidden activation, or x for layer 0.
        const Vec* in = nullptr;
        Vec tmp;
        if (li == 0) {
            in = &rec.input;
        } else {
            // Recompute the affine chain input by scanning for the nearest
            // recorded activation; intermediate non-relu layers re-run forward.
            int hh = -1;
            int src = li - 1;
            while (src >= 0 && !net.layer(src).relu) --src;
            if (src >= 0) {
                for (int k2 = 0; k2 < net.hidden_layer_count(); ++k2)
                    if (net.hidden_layer_index(k2) == src) hh = k2;
                tmp = rec.act[hh];
            } else {
                tmp = rec.input;
            }
            for (int k2 = src + 1; k2 < li; ++k2) {
                Vec nxt;
                affine_forward(net.layer(k2), tmp, nxt);
                tmp.swap(nxt);
            }
            in = &tmp;
        }
        affine_backward(l, *in, dcur, dprev,
                        dweights && l.has_params() ? &(*dweights)[li] : nullptr,
                        dbias && l.has_params() ? &(*dbias)[li] : nullptr);
        dcur.swap(dprev);
    }
    g.input_grad = dcur;
    return g;
}

}  // namespace detail

// Gradient of the recorded class logit with respect to the input and every
// hidden activation. ReLU subgradient at z == 0 is 0.
inline GradientRecord backward(const Network& net, const ActivationRecord& rec,
                               const InterceptSpec* intercept = nullptr,
                               ReluBackward mode = ReluBackward::Standard) {
    Vec seed(net.class_count(), 0.0);
    seed[rec.class_index] = 1.0;
    return detail::backprop(net, rec, intercept, seed, mode);
}

// Gradient of one pre-activation z^i_j with respect to the input, under the
// record's intercept regime (gradient does not flow through frozen units).
inline Vec preactivation_input_grad(const Network& net, const ActivationRecord& rec,
                                    const InterceptSpec* intercept, NeuronId n) {
    net.check_neuron(n);
    if (rec.net_id != net.id())
        throw std::invalid_argument("stale activation record: network changed");
    int target_layer = net.hidden_layer_index(n.layer);
    Vec dcur(net.layer(target_layer).out_shape.size(), 0.0);
    dcur[n.unit] = 1.0;
    Vec dprev;
    int h = n.layer;
    for (int li = target_layer; li >= 0; --li) {
        const Layer& l = net.layer(li);
        if (l.relu && li != target_layer) {
            --h;
            int base = net.hidden_offset(h);
            const Vec& z = rec.pre[h];
            for (size_t j = 0; j < dcur.size(); ++j) {
                InterceptKind k = InterceptKind::Pass;
                double v = 0.0;
                if (intercept && !intercept->empty()) {
                    k = intercept->kind[base + j];
                    v = intercept->value[base + j];
                }
                switch (k) {
                    case InterceptKind::Pass: dcur[j] = z[j] > 0.0 ? dcur[j] : 0.0; break;
                    case InterceptKind::Gate: dcur[j] = z[j] > 0.0 ? dcur[j] * v : 0.0; break;
                    case InterceptKind::Freeze: dcur[j] = 0.0; break;
                }
            }
        }
        const Vec* in = nullptr;
        Vec tmp;
        if (li == 0) {
            in = &rec.input;
        } else {
            int src = li - 1;
            while (src >= 0 && !net.layer(src).relu) --src;
            if (src >= 0) {
                int hh = -1;
                for (int k2 = 0; k2 < net.hidden_layer_count(); ++k2)
                    if (net.hidden_layer_index(k2) == src) hh = k2;
                tmp = rec.act[hh];
            } else {
                tmp = rec.input;
            }
            for (int k2 = src + 1; k2 < li; ++k2) {
                Vec nxt;
                detail::affine_forward(net.layer(k2), tmp, nxt);
                tmp.swap(nxt);
            }
            in = &tmp;
        }
        detail::affine_backward(l, *in, dcur, dprev);
        dcur.swap(dprev);
    }
    return dcur;
}

// Evaluates the network from hidden layer h given an activation vector for
// that layer (used by ablation games on a single layer).
inline double forward_from_hidden(const Network& net, int hidden_layer,
                                  const Vec& activations, int class_index) {
    int start = net.hidden_layer_index(hidden_layer) + 1;
    Vec cur = activations, next;
    for (size_t li = start; li < net.layer_count(); ++li) {
        const Layer& l = net.layer(li);
        detail::affine_forward(l, cur, next);
        if (l.relu)
            for (auto& v : next) v = v > 0.0 ? v : 0.0;
        cur.swap(next);
    }
    return cur[class_index];
}

}  // namespace pathgrad
