// Shared oracles and fixture builders for the test suite. Everything here
// is deliberately naive and independent of the library's fast paths.
#pragma once

#include <random>

#include "pathgrad/network.hpp"

namespace testutil {

using pathgrad::Layer;
using pathgrad::LayerKind;
using pathgrad::Network;
using pathgrad::Vec;

// Independent forward oracle: re-evaluates the network with plain loops
// and an explicit relu, no recording, no intercepts.
inline double naive_forward(const Network& net, const Vec& x, int class_index) {
    Vec cur = x;
    for (size_t li = 0; li < net.layer_count(); ++li) {
        const Layer& l = net.layer(li);
        Vec next;
        switch (l.kind) {
            case LayerKind::Dense: {
                int ni = l.in_shape.size(), no = l.out_shape.size();
                next.assign(no, 0.0);
                for (int o = 0; o < no; ++o) {
                    next[o] = l.bias[o];
                    for (int i = 0; i < ni; ++i)
                        next[o] += l.weights[static_cast<size_t>(o) * ni + i] * cur[i];
                }
                break;
            }
            case LayerKind::Conv2d: {
                auto is = l.in_shape;
                auto os = l.out_shape;
                next.assign(os.size(), 0.0);
                for (int oc = 0; oc < os.c; ++oc)
                    for (int oy = 0; oy < os.h; ++oy)
                        for (int ox = 0; ox < os.w; ++ox) {
                            double s = l.bias[oc];
                            for (int ic = 0; ic < is.c; ++ic)
                                for (int ky = 0; ky < l.kernel_h; ++ky)
                                    for (int kx = 0; kx < l.kernel_w; ++kx) {
                                        int iy = oy * l.stride + ky - l.pad;
                                        int ix = ox * l.stride + kx - l.pad;
                                        if (iy < 0 || iy >= is.h || ix < 0 || ix >= is.w)
                                            continue;
                                        s += l.weights[((static_cast<size_t>(oc) * is.c + ic) *
                                                        l.kernel_h + ky) * l.kernel_w + kx] *
                                             cur[(static_cast<size_t>(ic) * is.h + iy) * is.w +
                                                 ix];
                                    }
                            next[(static_cast<size_t>(oc) * os.h + oy) * os.w + ox] = s;
                        }
                break;
            }
            case LayerKind::AvgPool: {
                auto is = l.in_shape;
                auto os = l.out_shape;
                next.assign(os.size(), 0.0);
                for (int c = 0; c < os.c; ++c)
                    for (int oy = 0; oy < os.h; ++oy)
                        for (int ox = 0; ox < os.w; ++ox) {
                            double s = 0.0;
                            for (int py = 0; py < l.pool_h; ++py)
                                for (int px = 0; px < l.pool_w; ++px)
                                    s += cur[(static_cast<size_t>(c) * is.h + oy * l.pool_h +
                                              py) * is.w + ox * l.pool_w + px];
                            next[(static_cast<size_t>(c) * os.h + oy) * os.w + ox] =
                                s / (l.pool_h * l.pool_w);
                        }
                break;
            }
            case LayerKind::Flatten:
                next = cur;
                break;
        }
        if (l.relu)
            for (auto& v : next) v = v > 0.0 ? v : 0.0;
        cur = next;
    }
    return cur[class_index];
}

// Central finite-difference gradient of the class logit w.r.t. the input.
inline Vec fd_input_grad(const Network& net, const Vec& x, int class_index,
                         double h = 1e-4) {
    Vec g(x.size());
    for (size_t i = 0; i < x.size(); ++i) {
        Vec xp = x, xm = x;
        xp[i] += h;
        xm[i] -= h;
        g[i] = (naive_forward(net, xp, class_index) - naive_forward(net, xm, class_index)) /
               (2.0 * h);
    }
    return g;
}

// Small dense MLP with weights drawn from U(-b, b); biases jittered so
// most hidden neurons sit away from their relu boundary.
inline Network random_mlp(std::mt19937_64& rng, int in, std::vector<int> hidden,
                          int classes, double bound = 1.0) {
    Network net;
    int prev = in;
    std::uniform_real_distribution<double> uni(-bound, bound);
    for (int width : hidden) {
        Layer l = pathgrad::dense_layer(prev, width, true);
        for (auto& w : l.weights) w = uni(rng);
        for (auto& b : l.bias) b = 0.25 * uni(rng);
        net.push_back(std::move(l));
        prev = width;
    }
    Layer head = pathgrad::dense_layer(prev, classes, false);
    for (auto& w : head.weights) w = uni(rng);
    for (auto& b : head.bias) b = 0.25 * uni(rng);
    net.push_back(std::move(head));
    return net;
}

inline Vec random_input(std::mt19937_64& rng, int n, double lo = -1.0, double hi = 1.0) {
    std::uniform_real_distribution<double> uni(lo, hi);
    Vec x(n);
    for (auto& v : x) v = uni(rng);
    return x;
}

// Random conv net on a c x h x w input: conv-relu, avgpool, flatten,
// dense-relu, head.
inline Network random_convnet(std::mt19937_64& rng, pathgrad::TensorShape in, int channels,
                              int dense_width, int classes) {
    std::uniform_real_distribution<double> uni(-0.5, 0.5);
    Network net;
    Layer conv = pathgrad::conv_layer(in, channels, 3, 3, 1, 1, true);
    for (auto& w : conv.weights) w = uni(rng);
    for (auto& b : conv.bias) b = 0.25 * uni(rng);
    pathgrad::TensorShape cs = conv.out_shape;
    net.push_back(std::move(conv));
    Layer pool = pathgrad::avgpool_layer(cs, 2, 2);
    pathgrad::TensorShape ps = pool.out_shape;
    net.push_back(std::move(pool));
    net.push_back(pathgrad::flatten_layer(ps));
    Layer d = pathgrad::dense_layer(ps.size(), dense_width, true);
    for (auto& w : d.weights) w = uni(rng);
    for (auto& b : d.bias) b = 0.25 * uni(rng);
    net.push_back(std::move(d));
    Layer head = pathgrad::dense_layer(dense_width, classes, false);
    for (auto& w : head.weights) w = uni(rng);
    for (auto& b : head.bias) b = 0.25 * uni(rng);
    net.push_back(std::move(head));
    return net;
}

}  // namespace testutil
