// Input feature attribution: pathway gradient over contribution-selected
// frozen sub-networks, gradient-based baselines, and map post-processing.
#pragma once

#include "pathgrad/contrib.hpp"
#include "pathgrad/pathway.hpp"

namespace pathgrad {

struct AttributionMap {
    Vec raw;                 // input-shaped, signed
    Vec reduced;             // H*W, per-pixel sum over channels of |raw|
    TensorShape shape;
    std::string method;
    bool normalized = false;
    bool threshold_zero = false;  // pathway precondition c_kappa > 0 violated

    void reduce() {
        int hw = shape.h * shape.w;
        reduced.assign(hw, 0.0);
        for (int c = 0; c < shape.c; ++c)
            for (int p = 0; p < hw; ++p)
                reduced[p] += std::abs(raw[static_cast<size_t>(c) * hw + p]);
    }
};

// Pixel-site order by ascending reduced attribution (ties by site index).
inline std::vector<int> ranking_ascending(const AttributionMap& map) {
    std::vector<int> order(map.reduced.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        if (map.reduced[a] != map.reduced[b]) return map.reduced[a] < map.reduced[b];
        return a < b;
    });
    return order;
}

inline std::vector<int> ranking_descending(const AttributionMap& map) {
    std::vector<int> order = ranking_ascending(map);
    std::reverse(order.begin(), order.end());
    return order;
}

// grad_x Phi-hat(x; e) for the pathway selected from the given contribution
// method at the requested sparsity. Equals a standard backward pass with
// neuron gradients gated by the pathway mask.
inline AttributionMap pathway_gradient(const Network& net, const Vec& x, int class_index,
                                       ContributionMethod method, double sparsity,
                                       int intgrad_steps = 50) {
    ContributionMap c = method == ContributionMethod::NeuronMCT
                            ? neuron_mct(net, x, class_index)
                            : neuron_intgrad(net, x, class_index, intgrad_steps);
    PathwayMask mask = select_pathway(net, c, sparsity);
    ActivationRecord rec = forward_record(net, x, class_index);
    FrozenNetwork frozen = build_frozen(net, rec, mask);
    GradientRecord grad = frozen.backward_at(frozen.forward(x));

    AttributionMap map;
    map.raw = grad.input_grad;
    map.shape = net.input_shape();
    map.method = std::string("pathway-gradient/") + contribution_method_name(method);
    map.threshold_zero = mask.threshold_zero;
    map.reduce();
    return map;
}

enum class BaselineMethod { Gradient, InputXGradient, InputIntGrad, GuidedBackprop, GradCam };

inline BaselineMethod baseline_method_from_name(const std::string& s) {
    if (s == "gradient") return BaselineMethod::Gradient;
    if (s == "input-x-gradient" || s == "inputmct") return BaselineMethod::InputXGradient;
    if (s == "input-intgrad" || s == "inputintgrad") return BaselineMethod::InputIntGrad;
    if (s == "guided-backprop" || s == "gbp") return BaselineMethod::GuidedBackprop;
    if (s == "gradcam") return BaselineMethod::GradCam;
    throw std::invalid_argument("unknown attribution method '" + s + "'");
}

namespace detail {

inline Vec bilinear_upsample(const Vec& src, int sh, int sw, int dh, int dw) {
    Vec out(static_cast<size_t>(dh) * dw, 0.0);
    for (int y = 0; y < dh; ++y)
        for (int x = 0; x < dw; ++x) {
            // align-corners mapping; degenerate axes collapse to row/col 0
            double fy = dh > 1 ? static_cast<double>(y) * (sh - 1) / (dh - 1) : 0.0;
            double fx = dw > 1 ? static_cast<double>(x) * (sw - 1) / (dw - 1) : 0.0;
            int y0 = static_cast<int>(fy), x0 = static_cast<int>(fx);
            int y1 = std::min(y0 + 1, sh - 1), x1 = std::min(x0 + 1, sw - 1);
            double wy = fy - y0, wx = fx - x0;
            out[static_cast<size_t>(y) * dw + x] =
                (1 - wy) * ((1 - wx) * src[static_cast<size_t>(y0) * sw + x0] +
                            wx * src[static_cast<size_t>(y0) * sw + x1]) +
                wy * ((1 - wx) * src[static_cast<size_t>(y1) * sw + x0] +
                      wx * src[static_cast<size_t>(y1) * sw + x1]);
        }
    return out;
}

}  // namespace detail

struct BaselineOptions {
    int intgrad_steps = 50;
    int gradcam_layer = -1;  // hidden-layer index; -1 = last conv layer
};

inline AttributionMap baseline_attribution(const Network& net, const Vec& x, int class_index,
                                           BaselineMethod method, BaselineOptions opt = {}) {
    AttributionMap map;
    map.shape = net.input_shape();
    switch (method) {
        case BaselineMethod::Gradient: {
            ActivationRecord rec = forward_record(net, x, class_index);
            map.raw = backward(net, rec).input_grad;
            map.method = "gradient";
            break;
        }
        case BaselineMethod::InputXGradient: {
            ActivationRecord rec = forward_record(net, x, class_index);
            map.raw = backward(net, rec).input_grad;
            for (size_t i = 0; i < map.raw.size(); ++i) map.raw[i] *= x[i];
            map.method = "inputmct";
            break;
        }
        case BaselineMethod::InputIntGrad: {
            if (opt.intgrad_steps < 1)
                throw std::invalid_argument("integration steps must be >= 1");
            Vec mean_grad(x.size(), 0.0);
            for (int s = 0; s < opt.intgrad_steps; ++s) {
                double alpha = (s + 0.5) / opt.intgrad_steps;
                Vec xs(x.size());
                for (size_t i = 0; i < x.size(); ++i) xs[i] = alpha * x[i];
                ActivationRecord rec = forward_record(net, xs, class_index);
                GradientRecord grad = backward(net, rec);
                for (size_t i = 0; i < x.size(); ++i) mean_grad[i] += grad.input_grad[i];
            }
            map.raw.resize(x.size());
            for (size_t i = 0; i < x.size(); ++i)
                map.raw[i] = x[i] * mean_grad[i] / opt.intgrad_steps;
            map.method = "inputintgrad";
            break;
        }
        case BaselineMethod::GuidedBackprop: {
            ActivationRecord rec = forward_record(net, x, class_index);
            map.raw = backward(net, rec, nullptr, ReluBackward::Guided).input_grad;
            map.method = "guided-backprop";
            break;
        }
        case BaselineMethod::GradCam: {
            int target = opt.gradcam_layer;
            if (target < 0) {
                for (int h = 0; h < net.hidden_layer_count(); ++h)
                    if (net.layer(net.hidden_layer_index(h)).kind == LayerKind::Conv2d)
                        target = h;
            }
            if (target < 0 ||
                net.layer(net.hidden_layer_index(target)).kind != LayerKind::Conv2d)
                throw std::invalid_argument("gradcam requires a convolutional layer");
            ActivationRecord rec = forward_record(net, x, class_index);
            GradientRecord grad = backward(net, rec);
            TensorShape fs = net.layer(net.hidden_layer_index(target)).out_shape;
            int hw = fs.h * fs.w;
            // cam = relu(sum_k w_k A_k), w_k = spatial mean of dPhi/dA_k
            Vec cam(hw, 0.0);
            for (int k = 0; k < fs.c; ++k) {
                double wk = 0.0;
                for (int p = 0; p < hw; ++p)
                    wk += grad.neuron_grads[target][static_cast<size_t>(k) * hw + p];
                wk /= hw;
                for (int p = 0; p < hw; ++p)
                    cam[p] += wk * rec.act[target][static_cast<size_t>(k) * hw + p];
            }
            for (auto& v : cam) v = v > 0.0 ? v : 0.0;
            Vec up = detail::bilinear_upsample(cam, fs.h, fs.w, map.shape.h, map.shape.w);
            // replicated over input channels
            map.raw.clear();
            for (int c = 0; c < map.shape.c; ++c)
                map.raw.insert(map.raw.end(), up.begin(), up.end());
            map.method = "gradcam";
            break;
        }
    }
    map.reduce();
    return map;
}

// Grayscale morphological opening (erosion then dilation) with a flat
// square structuring element, applied to the reduced map. Border windows
// are clipped to the image.
inline AttributionMap smooth_opening(const AttributionMap& map, int kernel = 3) {
    if (kernel < 1 || kernel % 2 == 0)
        throw std::invalid_argument("kernel must be odd and positive");
    if (kernel > map.shape.h || kernel > map.shape.w)
        throw std::invalid_argument("kernel larger than map");
    int h = map.shape.h, w = map.shape.w, r = kernel / 2;
    auto filter = [&](const Vec& src, bool erode) {
        Vec dst(src.size());
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                double best = src[static_cast<size_t>(y) * w + x];
                for (int dy = -r; dy <= r; ++dy)
                    for (int dx = -r; dx <= r; ++dx) {
                        int yy = y + dy, xx = x + dx;
                        if (yy < 0 || yy >= h || xx < 0 || xx >= w) continue;
                        double v = src[static_cast<size_t>(yy) * w + xx];
                        best = erode ? std::min(best, v) : std::max(best, v);
                    }
                dst[static_cast<size_t>(y) * w + x] = best;
            }
        return dst;
    };
    AttributionMap out = map;
    out.reduced = filter(filter(map.reduced, true), false);
    out.method = map.method + "*";
    return out;
}

// Affine rescale of the raw values by max |value| into [-1,1]; the reduced
// map is recomputed. A zero map stays zero.
inline AttributionMap normalize_map(const AttributionMap& map) {
    AttributionMap out = map;
    double mx = 0.0;
    for (double v : map.raw) {
        if (!std::isfinite(v)) throw std::invalid_argument("non-finite attribution value");
        mx = std::max(mx, std::abs(v));
    }
    if (mx > 0.0)
        for (auto& v : out.raw) v /= mx;
    out.reduce();
    out.normalized = true;
    return out;
}

}  // namespace pathgrad
