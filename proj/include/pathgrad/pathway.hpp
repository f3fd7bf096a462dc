// Pathway selection from contribution maps, frozen sub-network
// approximations, and pathway statistics (dead fractions, Jaccard overlap).
#pragma once

#include <optional>

#include "pathgrad/contrib.hpp"
#include "pathgrad/network.hpp"

namespace pathgrad {

enum class PathwayMethod { NeuronMCT, NeuronIntGrad, GreedyPruning, DGR, ActiveSubnet };

inline const char* pathway_method_name(PathwayMethod m) {
    switch (m) {
        case PathwayMethod::NeuronMCT: return "neuronmct";
        case PathwayMethod::NeuronIntGrad: return "neuronintgrad";
        case PathwayMethod::GreedyPruning: return "greedy";
        case PathwayMethod::DGR: return "dgr";
        case PathwayMethod::ActiveSubnet: return "active-subnet";
    }
    return "?";
}

// Binary indicator per hidden neuron defining a sub-network.
struct PathwayMask {
    std::vector<uint8_t> keep;     // e, flat hidden-neuron order
    double sparsity = 0.0;         // kappa: fraction excluded
    double threshold = 0.0;        // realized c_kappa
    PathwayMethod method = PathwayMethod::NeuronMCT;
    // Set when the realized threshold is 0 with kappa < 1, which breaks the
    // local-linearity precondition (selected neurons may be dead).
    bool threshold_zero = false;

    size_t kept_count() const {
        size_t n = 0;
        for (uint8_t e : keep) n += e;
        return n;
    }
    bool kept(const Network& net, NeuronId n) const { return keep[net.flat_index(n)]; }
};

// Keeps the top (1 - kappa) * N neurons by contribution, ranked
// network-wide; ties broken by ascending (layer, unit).
inline PathwayMask select_pathway(const Network& net, const ContributionMap& c,
                                  double sparsity) {
    if (sparsity < 0.0 || sparsity >= 1.0)
        throw std::invalid_argument("sparsity must be in [0,1)");
    if (c.size() != static_cast<size_t>(net.total_hidden()))
        throw std::invalid_argument("contribution map size mismatch");
    size_t n = c.size();
    size_t kept = static_cast<size_t>(std::llround((1.0 - sparsity) * n));
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        if (c.values[a] != c.values[b]) return c.values[a] > c.values[b];
        return a < b;
    });
    PathwayMask mask;
    mask.keep.assign(n, 0);
    mask.sparsity = sparsity;
    mask.method = c.method == ContributionMethod::NeuronMCT ? PathwayMethod::NeuronMCT
                                                            : PathwayMethod::NeuronIntGrad;
    for (size_t k = 0; k < kept; ++k) mask.keep[order[k]] = 1;
    mask.threshold = kept > 0 ? c.values[order[kept - 1]] : 0.0;
    mask.threshold_zero = mask.threshold == 0.0;
    return mask;
}

// e^i_j = 1 iff a^i_j > 0 in the record.
inline PathwayMask active_subnet(const Network& net, const ActivationRecord& rec) {
    PathwayMask mask;
    mask.method = PathwayMethod::ActiveSubnet;
    mask.keep.reserve(net.total_hidden());
    size_t active = 0;
    for (int h = 0; h < net.hidden_layer_count(); ++h)
        for (int j = 0; j < net.hidden_units(h); ++j) {
            uint8_t e = rec.act[h][j] > 0.0 ? 1 : 0;
            active += e;
            mask.keep.push_back(e);
        }
    mask.sparsity = 1.0 - static_cast<double>(active) / net.total_hidden();
    mask.threshold = 0.0;
    return mask;
}

// The base network with every excluded neuron frozen to its recorded
// activation. Evaluation at the reference input reproduces the reference
// output exactly; frozen units block gradient flow.
struct FrozenNetwork {
    const Network* net = nullptr;
    ActivationRecord reference;
    PathwayMask mask;
    InterceptSpec intercept;

    ActivationRecord forward(const Vec& x) const {
        return forward_record(*net, x, &intercept, reference.class_index);
    }
    GradientRecord backward_at(const ActivationRecord& rec) const {
        return pathgrad::backward(*net, rec, &intercept);
    }
};

inline FrozenNetwork build_frozen(const Network& net, const ActivationRecord& rec,
                                  const PathwayMask& mask) {
    if (rec.net_id != net.id())
        throw std::invalid_argument("record does not belong to this network");
    if (mask.keep.size() != static_cast<size_t>(net.total_hidden()))
        throw std::invalid_argument("mask/record shape mismatch");
    FrozenNetwork f;
    f.net = &net;
    f.reference = rec;
    f.mask = mask;
    f.intercept = InterceptSpec::pass_all(net.total_hidden());
    for (int h = 0; h < net.hidden_layer_count(); ++h) {
        int off = net.hidden_offset(h);
        for (int j = 0; j < net.hidden_units(h); ++j)
            if (!mask.keep[off + j]) f.intercept.set_freeze(off + j, rec.act[h][j]);
    }
    return f;
}

struct DeadFractions {
    double originally_dead = 0.0;            // share of selected neurons dead at x
    double originally_dead_now_active = 0.0; // ... that are active under the mask regime
};

// Fractions are over the selected (e=1) neurons. `current`, when given, is
// a record produced under the pathway's masking regime (excluded neurons
// zeroed) and determines which originally-dead neurons turned active.
inline DeadFractions dead_fraction(const Network& net, const PathwayMask& mask,
                                   const ActivationRecord& original,
                                   const ActivationRecord* current = nullptr) {
    if (mask.keep.size() != static_cast<size_t>(net.total_hidden()))
        throw std::invalid_argument("mask/record shape mismatch");
    size_t kept = mask.kept_count();
    if (kept == 0) throw std::invalid_argument("empty pathway");
    size_t dead = 0, dead_now_active = 0;
    for (int h = 0; h < net.hidden_layer_count(); ++h) {
        int off = net.hidden_offset(h);
        for (int j = 0; j < net.hidden_units(h); ++j) {
            if (!mask.keep[off + j]) continue;
            if (original.act[h][j] > 0.0) continue;
            ++dead;
            if (current && current->act[h][j] > 0.0) ++dead_now_active;
        }
    }
    DeadFractions r;
    r.originally_dead = static_cast<double>(dead) / kept;
    r.originally_dead_now_active = static_cast<double>(dead_now_active) / kept;
    return r;
}

// Masking-regime record for a pathway: excluded neurons zeroed (m .* a).
inline ActivationRecord masked_record(const Network& net, const Vec& x,
                                      const PathwayMask& mask, int class_index) {
    InterceptSpec spec = InterceptSpec::pass_all(net.total_hidden());
    for (size_t i = 0; i < mask.keep.size(); ++i)
        if (!mask.keep[i]) spec.set_gate(i, 0.0);
    return forward_record(net, x, &spec, class_index);
}

enum class JaccardMode { Global, PerLayer };

inline double jaccard_global(const PathwayMask& a, const PathwayMask& b) {
    if (a.keep.size() != b.keep.size())
        throw std::invalid_argument("pathway shape mismatch");
    size_t inter = 0, uni = 0;
    for (size_t i = 0; i < a.keep.size(); ++i) {
        inter += a.keep[i] & b.keep[i];
        uni += a.keep[i] | b.keep[i];
    }
    return uni == 0 ? 1.0 : static_cast<double>(inter) / uni;
}

inline Vec jaccard_per_layer(const Network& net, const PathwayMask& a,
                             const PathwayMask& b) {
    if (a.keep.size() != b.keep.size() ||
        a.keep.size() != static_cast<size_t>(net.total_hidden()))
        throw std::invalid_argument("pathway shape mismatch");
    Vec out(net.hidden_layer_count());
    for (int h = 0; h < net.hidden_layer_count(); ++h) {
        int off = net.hidden_offset(h);
        size_t inter = 0, uni = 0;
        for (int j = 0; j < net.hidden_units(h); ++j) {
            inter += a.keep[off + j] & b.keep[off + j];
            uni += a.keep[off + j] | b.keep[off + j];
        }
        out[h] = uni == 0 ? 1.0 : static_cast<double>(inter) / uni;
    }
    return out;
}

}  // namespace pathgrad
