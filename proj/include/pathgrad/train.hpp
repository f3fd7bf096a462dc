// Seed-deterministic SGD training and evaluation for desk-scale networks.
#pragma once

#include <random>

#include "pathgrad/dataset.hpp"
#include "pathgrad/network.hpp"

namespace pathgrad {

enum class LossKind { SoftmaxCrossEntropy, MeanSquaredError };

struct TrainConfig {
    double learning_rate = 0.1;
    double momentum = 0.0;
    int epochs = 50;
    int batch_size = 16;
    uint64_t seed = 0;
    LossKind loss = LossKind::SoftmaxCrossEntropy;
};

struct EpochMetrics {
    int epoch = 0;
    double loss = 0.0;
    double accuracy = 0.0;
};

struct TrainResult {
    Network net;
    std::vector<EpochMetrics> trace;
};

// Uniform Kaiming-style fan-in initialization; fully determined by seed.
// Weights land on the float32 grid so manifests round-trip bit-exactly.
inline void init_weights(Network& net, uint64_t seed) {
    std::mt19937_64 rng(seed);
    for (size_t li = 0; li < net.layer_count(); ++li) {
        Layer& l = net.layer(li);
        if (!l.has_params()) continue;
        int fan_in = l.kind == LayerKind::Dense
                         ? l.in_shape.size()
                         : l.in_shape.c * l.kernel_h * l.kernel_w;
        double bound = std::sqrt(6.0 / fan_in);
        std::uniform_real_distribution<double> dist(-bound, bound);
        for (auto& w : l.weights) w = dist(rng);
        for (auto& b : l.bias) b = 0.0;
    }
    net.snap_to_storage();
}

namespace detail {

struct LossGrad {
    double loss;
    Vec dlogits;
};

inline LossGrad loss_and_grad(const Vec& logits, int label, LossKind kind) {
    LossGrad r{0.0, Vec(logits.size(), 0.0)};
    if (kind == LossKind::SoftmaxCrossEntropy) {
        double mx = *std::max_element(logits.begin(), logits.end());
        double sum = 0.0;
        for (double v : logits) sum += std::exp(v - mx);
        double logz = mx + std::log(sum);
        r.loss = logz - logits[label];
        for (size_t k = 0; k < logits.size(); ++k) {
            double p = std::exp(logits[k] - mx) / sum;
            r.dlogits[k] = p - (static_cast<int>(k) == label ? 1.0 : 0.0);
        }
    } else {
        for (size_t k = 0; k < logits.size(); ++k) {
            double target = static_cast<int>(k) == label ? 1.0 : 0.0;
            double d = logits[k] - target;
            r.loss += d * d;
            r.dlogits[k] = 2.0 * d;
        }
        r.loss /= static_cast<double>(logits.size());
        for (auto& g : r.dlogits) g /= static_cast<double>(logits.size());
    }
    return r;
}

}  // namespace detail

struct EvalResult {
    double accuracy = 0.0;
    double mean_loss = 0.0;
};

inline EvalResult evaluate(const Network& net, const Dataset& ds,
                           LossKind loss = LossKind::SoftmaxCrossEntropy) {
    if (ds.inputs.empty()) throw std::invalid_argument("empty dataset");
    size_t correct = 0;
    double total = 0.0;
    for (size_t i = 0; i < ds.size(); ++i) {
        ActivationRecord rec = forward_record(net, ds.inputs[i], 0);
        int pred = static_cast<int>(std::max_element(rec.logits.begin(), rec.logits.end()) -
                                    rec.logits.begin());
        if (pred == ds.labels[i]) ++correct;
        total += detail::loss_and_grad(rec.logits, ds.labels[i], loss).loss;
    }
    return {static_cast<double>(correct) / ds.size(), total / ds.size()};
}

inline int predict(const Network& net, const Vec& x) {
    ActivationRecord rec = forward_record(net, x, 0);
    return static_cast<int>(std::max_element(rec.logits.begin(), rec.logits.end()) -
                            rec.logits.begin());
}

// Trains `net_spec` (architecture; weights reinitialized from cfg.seed).
// Aborts on non-finite loss, reporting the epoch and batch.
inline TrainResult train(Network net_spec, const Dataset& ds, const TrainConfig& cfg) {
    for (int y : ds.labels)
        if (y < 0 || y >= net_spec.class_count())
            throw std::invalid_argument("dataset label out of class range");
    Network& net = net_spec;
    init_weights(net, cfg.seed);

    std::vector<Vec> vel_w(net.layer_count()), vel_b(net.layer_count());
    for (size_t li = 0; li < net.layer_count(); ++li) {
        vel_w[li].assign(net.layer(li).weights.size(), 0.0);
        vel_b[li].assign(net.layer(li).bias.size(), 0.0);
    }

    std::mt19937_64 order_rng(cfg.seed ^ 0x9e3779b97f4a7c15ull);
    std::vector<size_t> order(ds.size());
    std::iota(order.begin(), order.end(), size_t{0});

    TrainResult result{Network{}, {}};
    std::vector<Vec> dw(net.layer_count()), db(net.layer_count());
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), order_rng);
        double epoch_loss = 0.0;
        size_t correct = 0;
        for (size_t start = 0; start < order.size(); start += cfg.batch_size) {
            size_t end = std::min(order.size(), start + cfg.batch_size);
            for (size_t li = 0; li < net.layer_count(); ++li) {
                dw[li].assign(net.layer(li).weights.size(), 0.0);
                db[li].assign(net.layer(li).bias.size(), 0.0);
            }
            double batch_loss = 0.0;
            for (size_t k = start; k < end; ++k) {
                const Vec& x = ds.inputs[order[k]];
                int y = ds.labels[order[k]];
                ActivationRecord rec = forward_record(net, x, 0);
                int pred = static_cast<int>(
                    std::max_element(rec.logits.begin(), rec.logits.end()) -
                    rec.logits.begin());
                if (pred == y) ++correct;
                auto lg = detail::loss_and_grad(rec.logits, y, cfg.loss);
                batch_loss += lg.loss;
                detail::backprop(net, rec, nullptr, lg.dlogits, ReluBackward::Standard,
                                 &dw, &db);
            }
            if (!std::isfinite(batch_loss))
                throw std::runtime_error("training diverged (non-finite loss) at epoch " +
                                         std::to_string(epoch) + ", batch " +
                                         std::to_string(start / cfg.batch_size));
            epoch_loss += batch_loss;
            double scale = cfg.learning_rate / static_cast<double>(end - start);
            if (scale == 0.0) continue;
            for (size_t li = 0; li < net.layer_count(); ++li) {
                Layer& l = net.layer(li);
                if (!l.has_params()) continue;
                for (size_t i = 0; i < l.weights.size(); ++i) {
                    vel_w[li][i] = cfg.momentum * vel_w[li][i] - scale * dw[li][i];
                    l.weights[i] += vel_w[li][i];
                }
                for (size_t i = 0; i < l.bias.size(); ++i) {
                    vel_b[li][i] = cfg.momentum * vel_b[li][i] - scale * db[li][i];
                    l.bias[i] += vel_b[li][i];
                }
            }
        }
        result.trace.push_back({epoch, epoch_loss / ds.size(),
                                static_cast<double>(correct) / ds.size()});
    }
    net.snap_to_storage();
    result.net = std::move(net);
    return result;
}

}  // namespace pathgrad
