// Pruning-objective pathway selectors used as counterexamples: greedy
// pruning that never removes currently-dead neurons, and continuous gate
// optimization with an l1 sparsity penalty (distillation guided routing).
#pragma once

#include <random>

#include "pathgrad/pathway.hpp"
#include "pathgrad/train.hpp"

namespace pathgrad {

struct PruneState {
    std::vector<uint8_t> mask;        // final m
    std::vector<Vec> score_history;   // s per rescoring pass (flat, -1 for removed)
    std::vector<size_t> kept_history; // kept count after each pass
    Vec drift_trace;                  // |Phi_masked - Phi| after each pass
    bool early_stop = false;          // ran out of prunable neurons
};

struct GreedyPruneResult {
    PathwayMask pathway;
    PruneState state;
};

// Alternates between Taylor rank computation under the current mask and
// removal of the `chunk` lowest-scoring neurons whose score is nonzero
// (currently-dead neurons are never pruned), until the kept count reaches
// (1 - kappa) * N.
inline GreedyPruneResult greedy_prune(const Network& net, const Vec& x, int class_index,
                                      double sparsity, int chunk = 0) {
    if (sparsity <= 0.0 || sparsity >= 1.0)
        throw std::invalid_argument("sparsity must be in (0,1)");
    int n = net.total_hidden();
    if (chunk <= 0) chunk = std::max(1, n / 100);

    double reference = forward_record(net, x, class_index).output;
    size_t target = static_cast<size_t>(std::llround((1.0 - sparsity) * n));

    PruneState state;
    state.mask.assign(n, 1);
    size_t kept = n;

    InterceptSpec spec = InterceptSpec::pass_all(n);
    while (kept > target) {
        ActivationRecord rec = forward_record(net, x, &spec, class_index);
        GradientRecord grad = backward(net, rec, &spec);

        Vec scores(n, -1.0);
        std::vector<int> candidates;
        for (int h = 0; h < net.hidden_layer_count(); ++h) {
            int off = net.hidden_offset(h);
            for (int j = 0; j < net.hidden_units(h); ++j) {
                int flat = off + j;
                if (!state.mask[flat]) continue;
                double s = std::abs(rec.act[h][j] * grad.neuron_grads[h][j]);
                scores[flat] = s;
                if (s != 0.0) candidates.push_back(flat);
            }
        }
        state.score_history.push_back(scores);
        if (candidates.empty()) {
            state.early_stop = true;
            break;
        }
        std::stable_sort(candidates.begin(), candidates.end(),
                         [&](int a, int b) {
                             if (scores[a] != scores[b]) return scores[a] < scores[b];
                             return a < b;
                         });
        size_t remove = std::min<size_t>(candidates.size(),
                                         std::min<size_t>(chunk, kept - target));
        for (size_t k = 0; k < remove; ++k) {
            state.mask[candidates[k]] = 0;
            spec.set_gate(candidates[k], 0.0);
        }
        kept -= remove;
        state.kept_history.push_back(kept);
        double masked = forward_record(net, x, &spec, class_index).output;
        state.drift_trace.push_back(std::abs(masked - reference));
    }

    GreedyPruneResult result;
    result.state = std::move(state);
    result.pathway.keep = result.state.mask;
    result.pathway.sparsity = sparsity;
    result.pathway.method = PathwayMethod::GreedyPruning;
    return result;
}

enum class GateInit { Ones, UniformRandom };

struct DgrConfig {
    double gamma = 0.05;
    double learning_rate = 0.1;
    int iterations = 30;
    GateInit init = GateInit::Ones;
    uint64_t seed = 0;
    LossKind loss = LossKind::MeanSquaredError;  // squared error on the logit
};

struct GateVector {
    Vec lambda;
    double gamma = 0.0;
    Vec objective_trace;  // value after each iteration (index 0: initial)
};

struct DgrResult {
    GateVector gates;
    PathwayMask pathway;
};

namespace detail {

struct GatedEval {
    double objective;
    double fit;       // loss term only
    Vec lambda_grad;  // d objective / d lambda (fit term + gamma)
};

inline GatedEval dgr_eval(const Network& net, const Vec& x, int class_index,
                          const Vec& lambda, double gamma, LossKind loss,
                          double reference_output, int reference_class,
                          bool want_grad) {
    int n = net.total_hidden();
    InterceptSpec spec = InterceptSpec::pass_all(n);
    for (int i = 0; i < n; ++i) spec.set_gate(i, lambda[i]);
    ActivationRecord rec = forward_record(net, x, &spec, class_index);

    GatedEval out;
    Vec dlogits(net.class_count(), 0.0);
    if (loss == LossKind::MeanSquaredError) {
        double d = rec.output - reference_output;
        out.fit = d * d;
        dlogits[class_index] = 2.0 * d;
    } else {
        auto lg = loss_and_grad(rec.logits, reference_class, loss);
        out.fit = lg.loss;
        dlogits = lg.dlogits;
    }
    out.objective = out.fit;
    for (int i = 0; i < n; ++i) out.objective += gamma * lambda[i];
    if (!std::isfinite(out.objective))
        throw std::runtime_error("non-finite DGR objective");

    if (want_grad) {
        GradientRecord grad = backprop(net, rec, &spec, dlogits);
        out.lambda_grad.assign(n, gamma);
        for (int h = 0; h < net.hidden_layer_count(); ++h) {
            int off = net.hidden_offset(h);
            for (int j = 0; j < net.hidden_units(h); ++j) {
                double a_raw = rec.pre[h][j] > 0.0 ? rec.pre[h][j] : 0.0;
                out.lambda_grad[off + j] += a_raw * grad.neuron_grads[h][j];
            }
        }
    }
    return out;
}

}  // namespace detail

// Projected gradient descent on the gated-output loss plus gamma * ||lambda||_1
// with lambda >= 0 enforced after every step. Steps that would increase the
// objective are backtracked (halved learning rate), so the trace is
// non-increasing. Deterministic given the seed.
inline DgrResult dgr_optimize(const Network& net, const Vec& x, int class_index,
                              double sparsity, const DgrConfig& cfg = {}) {
    if (cfg.gamma < 0.0) throw std::invalid_argument("gamma must be >= 0");
    if (cfg.learning_rate <= 0.0) throw std::invalid_argument("learning rate must be > 0");
    int n = net.total_hidden();

    ActivationRecord ref = forward_record(net, x, class_index);
    int ref_class = static_cast<int>(std::max_element(ref.logits.begin(), ref.logits.end()) -
                                     ref.logits.begin());

    GateVector gates;
    gates.gamma = cfg.gamma;
    gates.lambda.assign(n, 1.0);
    if (cfg.init == GateInit::UniformRandom) {
        std::mt19937_64 rng(cfg.seed);
        std::uniform_real_distribution<double> uni(0.0, 1.0);
        for (auto& l : gates.lambda) l = uni(rng);
    }

    auto eval = [&](const Vec& lambda, bool want_grad) {
        return detail::dgr_eval(net, x, class_index, lambda, cfg.gamma, cfg.loss,
                                ref.output, ref_class, want_grad);
    };

    detail::GatedEval cur;
    try {
        cur = eval(gates.lambda, true);
    } catch (const std::runtime_error&) {
        throw std::runtime_error("non-finite DGR objective at iteration 0");
    }
    gates.objective_trace.push_back(cur.objective);

    for (int it = 0; it < cfg.iterations; ++it) {
        double lr = cfg.learning_rate;
        bool accepted = false;
        for (int tries = 0; tries < 20; ++tries) {
            Vec trial(n);
            for (int i = 0; i < n; ++i)
                trial[i] = std::max(0.0, gates.lambda[i] - lr * cur.lambda_grad[i]);
            detail::GatedEval next;
            try {
                next = eval(trial, true);
            } catch (const std::runtime_error&) {
                throw std::runtime_error("non-finite DGR objective at iteration " +
                                         std::to_string(it + 1));
            }
            if (next.objective <= cur.objective) {
                gates.lambda = std::move(trial);
                cur = std::move(next);
                accepted = true;
                break;
            }
            lr *= 0.5;
        }
        gates.objective_trace.push_back(cur.objective);
        if (!accepted) break;  // stationary under projection
    }

    // Pathway from the top (1 - kappa) * N gates.
    DgrResult result;
    size_t kept = static_cast<size_t>(std::llround((1.0 - sparsity) * n));
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        if (gates.lambda[a] != gates.lambda[b]) return gates.lambda[a] > gates.lambda[b];
        return a < b;
    });
    result.pathway.keep.assign(n, 0);
    for (size_t k = 0; k < kept && k < order.size(); ++k)
        result.pathway.keep[order[k]] = 1;
    result.pathway.sparsity = sparsity;
    result.pathway.method = PathwayMethod::DGR;
    result.pathway.threshold = kept > 0 ? gates.lambda[order[kept - 1]] : 0.0;
    result.gates = std::move(gates);
    return result;
}

}  // namespace pathgrad
