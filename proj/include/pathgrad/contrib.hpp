// Neuron contribution scores for a single response: first-order Taylor
// (marginal-contribution) scores, integrated-gradients scores along the
// zero-to-activation path, exact single-neuron ablation, and an exact
// Shapley oracle over one layer's coalition game.
#pragma once

#include <bit>
#include <functional>

#include "pathgrad/network.hpp"

namespace pathgrad {

enum class ContributionMethod { NeuronMCT, NeuronIntGrad };

inline const char* contribution_method_name(ContributionMethod m) {
    return m == ContributionMethod::NeuronMCT ? "neuronmct" : "neuronintgrad";
}

// One scalar per hidden neuron, network-wide comparable. `values` are the
// absolute scores used for ranking; `signed_values` keep the pre-absolute
// quantity for completeness checks.
struct ContributionMap {
    Vec values;
    Vec signed_values;
    ContributionMethod method = ContributionMethod::NeuronMCT;
    int steps = 1;
    int class_index = 0;

    size_t size() const { return values.size(); }
    double at(const Network& net, NeuronId n) const {
        return values[net.flat_index(n)];
    }
};

// c^i_j = |a^i_j * d Phi / d a^i_j| at the unmodified network.
inline ContributionMap neuron_mct(const Network& net, const Vec& x, int class_index) {
    ActivationRecord rec = forward_record(net, x, class_index);
    GradientRecord grad = backward(net, rec);
    ContributionMap c;
    c.method = ContributionMethod::NeuronMCT;
    c.class_index = class_index;
    c.values.reserve(net.total_hidden());
    c.signed_values.reserve(net.total_hidden());
    for (int h = 0; h < net.hidden_layer_count(); ++h)
        for (int j = 0; j < net.hidden_units(h); ++j) {
            double v = rec.act[h][j] * grad.neuron_grads[h][j];
            c.signed_values.push_back(v);
            c.values.push_back(std::abs(v));
        }
    return c;
}

enum class IntGradScaling { PerLayer, PerNeuron };

// Integrated gradients with baseline 0 along the activation path,
// midpoint Riemann rule over alpha in (0,1]. The default scales one whole
// layer's activation vector jointly per alpha step (the Aumann-Shapley
// path for that layer), reading all of its integrands from one backward
// pass; per-neuron scaling is available for oracle comparison.
inline ContributionMap neuron_intgrad(const Network& net, const Vec& x, int class_index,
                                      int steps = 50,
                                      IntGradScaling scaling = IntGradScaling::PerLayer) {
    if (steps < 1) throw std::invalid_argument("integration steps must be >= 1");
    ActivationRecord base = forward_record(net, x, class_index);

    ContributionMap c;
    c.method = ContributionMethod::NeuronIntGrad;
    c.steps = steps;
    c.class_index = class_index;
    c.values.assign(net.total_hidden(), 0.0);
    c.signed_values.assign(net.total_hidden(), 0.0);

    for (int h = 0; h < net.hidden_layer_count(); ++h) {
        int base_off = net.hidden_offset(h);
        int units = net.hidden_units(h);
        if (scaling == IntGradScaling::PerLayer) {
            Vec mean_grad(units, 0.0);
            for (int s = 0; s < steps; ++s) {
                double alpha = (s + 0.5) / steps;
                InterceptSpec spec = InterceptSpec::pass_all(net.total_hidden());
                for (int j = 0; j < units; ++j) spec.set_gate(base_off + j, alpha);
                ActivationRecord rec = forward_record(net, x, &spec, class_index);
                GradientRecord grad = backward(net, rec, &spec);
                for (int j = 0; j < units; ++j) mean_grad[j] += grad.neuron_grads[h][j];
            }
            for (int j = 0; j < units; ++j) {
                double v = base.act[h][j] * mean_grad[j] / steps;
                c.signed_values[base_off + j] = v;
                c.values[base_off + j] = std::abs(v);
            }
        } else {
            for (int j = 0; j < units; ++j) {
                if (base.act[h][j] == 0.0) continue;
                double mean_grad = 0.0;
                for (int s = 0; s < steps; ++s) {
                    double alpha = (s + 0.5) / steps;
                    InterceptSpec spec = InterceptSpec::pass_all(net.total_hidden());
                    spec.set_gate(base_off + j, alpha);
                    ActivationRecord rec = forward_record(net, x, &spec, class_index);
                    GradientRecord grad = backward(net, rec, &spec);
                    mean_grad += grad.neuron_grads[h][j];
                }
                double v = base.act[h][j] * mean_grad / steps;
                c.signed_values[base_off + j] = v;
                c.values[base_off + j] = std::abs(v);
            }
        }
    }
    return c;
}

// Exact marginal contribution |Phi(x) - Phi(x; a^i_j <- 0)|; two forwards.
inline double marginal_exact(const Network& net, const Vec& x, NeuronId neuron,
                             int class_index) {
    net.check_neuron(neuron);
    double full = forward_record(net, x, class_index).output;
    InterceptSpec spec = InterceptSpec::pass_all(net.total_hidden());
    spec.set_gate(net.flat_index(neuron), 0.0);
    double ablated = forward_record(net, x, &spec, class_index).output;
    return std::abs(full - ablated);
}

// Output of the layer-i coalition game: Phi evaluated from layer i with
// the activations of absent neurons zeroed (zero-ablation baseline).
inline double layer_coalition_value(const Network& net, const ActivationRecord& rec,
                                    int hidden_layer, uint32_t coalition,
                                    int class_index) {
    Vec a = rec.act[hidden_layer];
    for (size_t j = 0; j < a.size(); ++j)
        if (!(coalition & (1u << j))) a[j] = 0.0;
    return forward_from_hidden(net, hidden_layer, a, class_index);
}

// Exact Shapley values for all neurons of one hidden layer, by full
// coalition enumeration (2^{N_i} tail-network evaluations). Oracle use
// only; rejected for layers wider than 20 units.
inline Vec shapley_bruteforce(const Network& net, const Vec& x, int hidden_layer,
                              int class_index) {
    if (hidden_layer < 0 || hidden_layer >= net.hidden_layer_count())
        throw std::out_of_range("hidden layer out of range");
    int n = net.hidden_units(hidden_layer);
    if (n > 20)
        throw std::invalid_argument("layer too wide for brute-force Shapley: N_i = " +
                                    std::to_string(n));
    ActivationRecord rec = forward_record(net, x, class_index);

    std::vector<double> value(size_t{1} << n);
    for (uint32_t mask = 0; mask < value.size(); ++mask)
        value[mask] = layer_coalition_value(net, rec, hidden_layer, mask, class_index);

    std::vector<double> fact(n + 1, 1.0);
    for (int k = 1; k <= n; ++k) fact[k] = fact[k - 1] * k;

    Vec shapley(n, 0.0);
    for (int j = 0; j < n; ++j) {
        uint32_t bit = 1u << j;
        double sum = 0.0;
        for (uint32_t mask = 0; mask < value.size(); ++mask) {
            if (mask & bit) continue;
            int csize = std::popcount(mask);
            double weight = fact[csize] * fact[n - csize - 1] / fact[n];
            sum += weight * (value[mask | bit] - value[mask]);
        }
        shapley[j] = sum;
    }
    return shapley;
}

}  // namespace pathgrad
