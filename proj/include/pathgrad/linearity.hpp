// Activation patterns, linear-region radius, and empirical certification
// that a frozen pathway network is locally linear inside an l2 ball.
#pragma once

#include <optional>
#include <random>

#include "pathgrad/pathway.hpp"

namespace pathgrad {

// Binary indicator per hidden neuron: 1 iff the stored pre-activation is
// strictly positive. Patterns are discrete; no epsilon is applied.
inline std::vector<uint8_t> activation_pattern(const Network& net,
                                               const ActivationRecord& rec) {
    std::vector<uint8_t> ap;
    ap.reserve(net.total_hidden());
    for (int h = 0; h < net.hidden_layer_count(); ++h)
        for (int j = 0; j < net.hidden_units(h); ++j)
            ap.push_back(rec.pre[h][j] > 0.0 ? 1 : 0);
    return ap;
}

struct LinearRegionReport {
    double radius = 0.0;                    // min distance over included neurons
    std::optional<NeuronId> argmin;         // neuron attaining the minimum
    std::vector<std::pair<NeuronId, double>> distances;  // live neurons only
    int excluded_zero_grad = 0;             // live neurons with grad_x z == 0
    std::optional<NeuronId> boundary_neuron;  // live |z| == 0, radius forced to 0
    Vec gradient;                           // g = grad_x Phi-hat at x
    double offset = 0.0;                    // beta = Phi-hat(x) - g . x
    double output = 0.0;                    // Phi-hat(x)
};

namespace detail {

inline double dot(const Vec& a, const Vec& b) {
    double s = 0.0;
    for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double norm2(const Vec& a) { return std::sqrt(dot(a, a)); }

}  // namespace detail

// Distance to the nearest ReLU hyperplane of the live neurons:
// min |z^i_j| / ||grad_x z^i_j||_2, neurons with grad_x z == 0 excluded.
// For a frozen network only pathway (e = 1) units contribute hyperplanes.
inline LinearRegionReport linear_region_radius(const Network& net, const Vec& x,
                                               const InterceptSpec* intercept = nullptr,
                                               const PathwayMask* mask = nullptr,
                                               int class_index = 0) {
    ActivationRecord rec = forward_record(net, x, intercept, class_index);
    GradientRecord grad = backward(net, rec, intercept);

    LinearRegionReport rep;
    rep.output = rec.output;
    rep.gradient = grad.input_grad;
    rep.offset = rec.output - detail::dot(grad.input_grad, x);

    rep.radius = std::numeric_limits<double>::infinity();
    for (int h = 0; h < net.hidden_layer_count(); ++h) {
        int off = net.hidden_offset(h);
        for (int j = 0; j < net.hidden_units(h); ++j) {
            NeuronId id{h, j};
            if (mask && !mask->keep[off + j]) continue;  // frozen: no hyperplane
            double z = rec.pre[h][j];
            Vec gz = preactivation_input_grad(net, rec, intercept, id);
            double gn = detail::norm2(gz);
            if (gn == 0.0) {
                ++rep.excluded_zero_grad;
                continue;
            }
            if (z == 0.0) {
                rep.boundary_neuron = id;
                rep.radius = 0.0;
                rep.argmin = id;
                rep.distances.emplace_back(id, 0.0);
                continue;
            }
            double d = std::abs(z) / gn;
            rep.distances.emplace_back(id, d);
            if (d < rep.radius) {
                rep.radius = d;
                rep.argmin = id;
            }
        }
    }
    if (!std::isfinite(rep.radius)) rep.radius = std::numeric_limits<double>::infinity();
    return rep;
}

inline LinearRegionReport linear_region_radius(const FrozenNetwork& fnet, const Vec& x) {
    return linear_region_radius(*fnet.net, x, &fnet.intercept, &fnet.mask,
                                fnet.reference.class_index);
}

struct LinearRegionVerification {
    bool pass = false;
    double max_deviation = 0.0;  // relative affine mismatch over samples
    int pattern_mismatches = 0;
    std::string reason;
};

namespace detail {

// Uniform sample in the D-ball: Gaussian direction, radius ~ r * u^(1/D).
inline Vec sample_in_ball(const Vec& center, double radius, std::mt19937_64& rng) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    Vec dir(center.size());
    double n2 = 0.0;
    do {
        for (auto& v : dir) v = gauss(rng);
        n2 = norm2(dir);
    } while (n2 == 0.0);
    double r = radius * std::pow(uni(rng), 1.0 / static_cast<double>(center.size()));
    Vec out(center.size());
    for (size_t i = 0; i < center.size(); ++i) out[i] = center[i] + dir[i] * (r / n2);
    return out;
}

}  // namespace detail

// Samples points in the ball of radius (1 - delta) * radius and checks that
// (a) the live activation pattern is identical to the pattern at x, and
// (b) the frozen output matches the affine form g . x + beta to 1e-6 relative.
inline LinearRegionVerification verify_linear_region(const FrozenNetwork& fnet, const Vec& x,
                                                     const LinearRegionReport& report,
                                                     int samples = 64, double delta = 0.01,
                                                     uint64_t seed = 0) {
    if (samples < 1) throw std::invalid_argument("samples must be >= 1");
    if (delta <= 0.0 || delta >= 1.0) throw std::invalid_argument("delta must be in (0,1)");
    LinearRegionVerification v;
    if (report.radius == 0.0) {
        v.reason = "vacuous: linear-region radius is 0 (boundary point)";
        return v;
    }
    double r = std::isfinite(report.radius) ? (1.0 - delta) * report.radius : 1.0;

    const Network& net = *fnet.net;
    ActivationRecord at_x = fnet.forward(x);
    std::vector<uint8_t> ap_x = activation_pattern(net, at_x);

    std::mt19937_64 rng(seed);
    for (int s = 0; s < samples; ++s) {
        Vec xs = detail::sample_in_ball(x, r, rng);
        ActivationRecord rec = fnet.forward(xs);
        std::vector<uint8_t> ap = activation_pattern(net, rec);
        for (size_t i = 0; i < ap.size(); ++i)
            if (fnet.mask.keep[i] && ap[i] != ap_x[i]) {
                ++v.pattern_mismatches;
                break;
            }
        double predicted = detail::dot(report.gradient, xs) + report.offset;
        double dev = std::abs(rec.output - predicted) / std::max(1.0, std::abs(rec.output));
        v.max_deviation = std::max(v.max_deviation, dev);
    }
    v.pass = v.pattern_mismatches == 0 && v.max_deviation <= 1e-6;
    if (!v.pass)
        v.reason = v.pattern_mismatches > 0 ? "activation pattern changed inside ball"
                                            : "affine deviation above tolerance";
    return v;
}

}  // namespace pathgrad
