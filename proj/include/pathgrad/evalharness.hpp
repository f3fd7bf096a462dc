// Quantitative attribution evaluation: LeRF input degradation, ROAR
// remove-and-retrain, parameter-randomization sanity checks, and the
// SSIM / Spearman / AUC metrics they report.
#pragma once

#include <functional>
#include <optional>
#include <random>

#include "pathgrad/attribution.hpp"
#include "pathgrad/dataset.hpp"
#include "pathgrad/train.hpp"

namespace pathgrad {

using Attributor =
    std::function<AttributionMap(const Network&, const Vec& x, int class_index)>;

// ---- metrics ----

// Trapezoid AUC over a curve sampled at `fractions` (normalized t-axis).
inline double auc(const Vec& fractions, const Vec& values) {
    if (fractions.size() != values.size() || fractions.size() < 2)
        throw std::invalid_argument("curve needs >= 2 points");
    double span = fractions.back() - fractions.front();
    if (span <= 0.0) throw std::invalid_argument("fractions must be increasing");
    double area = 0.0;
    for (size_t i = 1; i < fractions.size(); ++i)
        area += 0.5 * (values[i] + values[i - 1]) * (fractions[i] - fractions[i - 1]);
    return area / span;
}

// SSIM with a Gaussian window (sigma 1.5, default 11x11, shrunk to fit
// small maps), K1=0.01, K2=0.03, dynamic range 2 (maps in [-1,1]).
// Averaged over all positions where the full window fits.
inline double ssim(const Vec& a, const Vec& b, int h, int w) {
    if (a.size() != b.size() || a.size() != static_cast<size_t>(h) * w)
        throw std::invalid_argument("ssim: shape mismatch");
    int win = std::min({11, h, w});
    if (win % 2 == 0) --win;
    int r = win / 2;
    // Gaussian weights, renormalized over the window.
    Vec g(static_cast<size_t>(win) * win);
    double sum = 0.0;
    for (int y = 0; y < win; ++y)
        for (int x = 0; x < win; ++x) {
            double dy = y - r, dx = x - r;
            double v = std::exp(-(dy * dy + dx * dx) / (2.0 * 1.5 * 1.5));
            g[static_cast<size_t>(y) * win + x] = v;
            sum += v;
        }
    for (auto& v : g) v /= sum;

    constexpr double kL = 2.0;
    constexpr double c1 = (0.01 * kL) * (0.01 * kL);
    constexpr double c2 = (0.03 * kL) * (0.03 * kL);

    double total = 0.0;
    int count = 0;
    for (int cy = r; cy < h - r; ++cy)
        for (int cx = r; cx < w - r; ++cx) {
            double ma = 0, mb = 0;
            for (int y = 0; y < win; ++y)
                for (int x = 0; x < win; ++x) {
                    double wgt = g[static_cast<size_t>(y) * win + x];
                    ma += wgt * a[static_cast<size_t>(cy - r + y) * w + cx - r + x];
                    mb += wgt * b[static_cast<size_t>(cy - r + y) * w + cx - r + x];
                }
            double va = 0, vb = 0, cov = 0;
            for (int y = 0; y < win; ++y)
                for (int x = 0; x < win; ++x) {
                    double wgt = g[static_cast<size_t>(y) * win + x];
                    double da = a[static_cast<size_t>(cy - r + y) * w + cx - r + x] - ma;
                    double db = b[static_cast<size_t>(cy - r + y) * w + cx - r + x] - mb;
                    va += wgt * da * da;
                    vb += wgt * db * db;
                    cov += wgt * da * db;
                }
            total += ((2 * ma * mb + c1) * (2 * cov + c2)) /
                     ((ma * ma + mb * mb + c1) * (va + vb + c2));
            ++count;
        }
    return total / count;
}

// Spearman rank correlation with average ranks for ties. Undefined
// (nullopt) when either input is constant.
inline std::optional<double> spearman(const Vec& a, const Vec& b) {
    if (a.size() != b.size() || a.size() < 2)
        throw std::invalid_argument("spearman: need two equal-size maps");
    auto ranks = [](const Vec& v) {
        std::vector<int> order(v.size());
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(),
                         [&](int x, int y) { return v[x] < v[y]; });
        Vec rk(v.size());
        size_t i = 0;
        while (i < order.size()) {
            size_t j = i;
            while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
            double avg = 0.5 * (i + j) + 1.0;
            for (size_t k = i; k <= j; ++k) rk[order[k]] = avg;
            i = j + 1;
        }
        return rk;
    };
    Vec ra = ranks(a), rb = ranks(b);
    bool constant = std::all_of(ra.begin(), ra.end(), [&](double v) { return v == ra[0]; });
    if (constant) return std::nullopt;
    if (ra == rb) return 1.0;
    double mean = (a.size() + 1) / 2.0;
    double num = 0, da2 = 0, db2 = 0;
    for (size_t i = 0; i < a.size(); ++i) {
        double x = ra[i] - mean, y = rb[i] - mean;
        num += x * y;
        da2 += x * x;
        db2 += y * y;
    }
    if (da2 == 0.0 || db2 == 0.0) return std::nullopt;
    return num / std::sqrt(da2 * db2);
}

// ---- LeRF input degradation ----

struct DegradationCurve {
    Vec fractions;  // 0, 0.1, ..., 1.0
    Vec values;     // mean |delta Phi| / |Phi| over the dataset
    double area = 0.0;
};

// Removes pixels least-relevant-first in 10% steps and measures the output
// change of the ORIGINAL network; attributions are computed once per input
// on the intact model and reused across all fractions.
inline DegradationCurve lerf_curve(const Network& net, const Dataset& ds,
                                   const Attributor& attributor,
                                   const Vec* fill_override = nullptr) {
    if (ds.inputs.empty()) throw std::invalid_argument("empty dataset");
    Vec fill = fill_override ? *fill_override : ds.channel_means;
    DegradationCurve curve;
    for (int k = 0; k <= 10; ++k) curve.fractions.push_back(k / 10.0);
    curve.values.assign(curve.fractions.size(), 0.0);

    for (size_t i = 0; i < ds.size(); ++i) {
        const Vec& x = ds.inputs[i];
        int cls = predict(net, x);
        double phi = forward_record(net, x, cls).output;
        double denom = std::max(std::abs(phi), 1e-12);
        AttributionMap map = attributor(net, x, cls);
        std::vector<int> order = ranking_ascending(map);
        for (size_t k = 0; k < curve.fractions.size(); ++k) {
            Vec xt = perturb_pixels(x, ds.shape, order, curve.fractions[k], fill);
            double phit = forward_record(net, xt, cls).output;
            curve.values[k] += std::abs(phit - phi) / denom;
        }
    }
    for (auto& v : curve.values) v /= ds.size();
    curve.area = auc(curve.fractions, curve.values);
    return curve;
}

// ---- ROAR remove-and-retrain ----

struct RoarCell {
    double mean_accuracy = 0.0;
    double std_accuracy = 0.0;
    std::vector<double> accuracies;
    bool diverged = false;
};

struct RoarResult {
    std::vector<int> percentiles;  // {10, 30, 50, 70, 90}
    std::vector<RoarCell> cells;
    double area = 0.0;             // trapezoid AUC of mean accuracy
};

struct RoarConfig {
    std::vector<int> percentiles = {10, 30, 50, 70, 90};
    int seeds = 3;
    TrainConfig train;
};

// For each percentile: per image, replace the top t% attributed pixel
// sites (attribution from the reference model, most relevant first) with
// the train-split channel mean, retrain from scratch for each seed, and
// record test accuracy. Divergent cells are flagged and skipped.
inline RoarResult roar_run(const Network& reference, const Network& net_spec,
                           const Dataset& train_ds, const Dataset& test_ds,
                           const Attributor& attributor, const RoarConfig& cfg = {}) {
    if (train_ds.inputs.empty() || test_ds.inputs.empty())
        throw std::invalid_argument("empty dataset");
    Vec fill = train_ds.channel_means;

    auto rankings = [&](const Dataset& ds) {
        std::vector<std::vector<int>> out;
        out.reserve(ds.size());
        for (const auto& x : ds.inputs) {
            AttributionMap map = attributor(reference, x, predict(reference, x));
            out.push_back(ranking_descending(map));
        }
        return out;
    };
    auto train_rankings = rankings(train_ds);
    auto test_rankings = rankings(test_ds);

    RoarResult result;
    result.percentiles = cfg.percentiles;
    for (int pct : cfg.percentiles) {
        double t = pct / 100.0;
        Dataset mod_train = train_ds, mod_test = test_ds;
        for (size_t i = 0; i < train_ds.size(); ++i)
            mod_train.inputs[i] =
                perturb_pixels(train_ds.inputs[i], train_ds.shape, train_rankings[i], t, fill);
        for (size_t i = 0; i < test_ds.size(); ++i)
            mod_test.inputs[i] =
                perturb_pixels(test_ds.inputs[i], test_ds.shape, test_rankings[i], t, fill);

        RoarCell cell;
        for (int s = 0; s < cfg.seeds; ++s) {
            TrainConfig tc = cfg.train;
            tc.seed = cfg.train.seed + static_cast<uint64_t>(s);
            try {
                TrainResult tr = train(net_spec, mod_train, tc);
                cell.accuracies.push_back(evaluate(tr.net, mod_test, tc.loss).accuracy);
            } catch (const std::runtime_error&) {
                cell.diverged = true;
            }
        }
        if (!cell.accuracies.empty()) {
            double mean = 0.0;
            for (double a : cell.accuracies) mean += a;
            mean /= cell.accuracies.size();
            double var = 0.0;
            for (double a : cell.accuracies) var += (a - mean) * (a - mean);
            cell.mean_accuracy = mean;
            cell.std_accuracy = std::sqrt(var / cell.accuracies.size());
        }
        result.cells.push_back(std::move(cell));
    }
    Vec fr, vals;
    for (size_t i = 0; i < result.percentiles.size(); ++i) {
        fr.push_back(result.percentiles[i] / 100.0);
        vals.push_back(result.cells[i].mean_accuracy);
    }
    if (fr.size() >= 2) result.area = auc(fr, vals);
    return result;
}

// ---- parameter randomization sanity check ----

struct SanityTrace {
    // checkpoint 0 = nothing randomized; checkpoint k = last k parameterized
    // layers re-drawn from Normal(0, 0.01) with biases zeroed.
    std::vector<int> randomized_layers;
    Vec ssim_trace;
    Vec spearman_trace;
};

namespace detail {

inline Vec comparison_field(const AttributionMap& map) {
    AttributionMap norm = normalize_map(map);
    if (map.shape.c == 1) return norm.raw;
    // multi-channel: compare the channel-reduced map, rescaled to [0,1]
    Vec field = norm.reduced;
    double mx = 0.0;
    for (double v : field) mx = std::max(mx, v);
    if (mx > 0.0)
        for (auto& v : field) v /= mx;
    return field;
}

}  // namespace detail

inline SanityTrace randomization_sanity(const Network& net, const Dataset& ds,
                                        const Attributor& attributor, uint64_t seed = 0) {
    std::vector<int> param_layers;
    for (size_t li = 0; li < net.layer_count(); ++li)
        if (net.layer(li).has_params()) param_layers.push_back(static_cast<int>(li));
    std::reverse(param_layers.begin(), param_layers.end());  // last -> first

    std::vector<Vec> originals;
    std::vector<int> classes;
    for (const auto& x : ds.inputs) {
        int cls = predict(net, x);
        classes.push_back(cls);
        originals.push_back(detail::comparison_field(attributor(net, x, cls)));
    }

    SanityTrace trace;
    Network randomized = net;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 0.1);  // variance 0.01
    for (size_t cp = 0; cp <= param_layers.size(); ++cp) {
        if (cp > 0) {
            Layer& l = randomized.layer(param_layers[cp - 1]);
            for (auto& w : l.weights) w = gauss(rng);
            for (auto& b : l.bias) b = 0.0;
            trace.randomized_layers.push_back(param_layers[cp - 1]);
        }
        double ssim_sum = 0.0, rho_sum = 0.0;
        int rho_count = 0;
        for (size_t i = 0; i < ds.size(); ++i) {
            Vec field =
                detail::comparison_field(attributor(randomized, ds.inputs[i], classes[i]));
            ssim_sum += ssim(originals[i], field, ds.shape.h,
                             ds.shape.c == 1 ? ds.shape.w : ds.shape.w);
            if (auto rho = spearman(originals[i], field)) {
                rho_sum += *rho;
                ++rho_count;
            }
        }
        trace.ssim_trace.push_back(ssim_sum / ds.size());
        trace.spearman_trace.push_back(rho_count > 0 ? rho_sum / rho_count : 0.0);
    }
    return trace;
}

}  // namespace pathgrad
