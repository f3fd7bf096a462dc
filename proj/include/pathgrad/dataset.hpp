// Dataset ingestion (IDX binary format), synthetic generators, and the
// pixel-replacement perturbation used by LeRF and ROAR.
#pragma once

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "pathgrad/network.hpp"

namespace pathgrad {

struct Dataset {
    std::vector<Vec> inputs;
    std::vector<int> labels;
    TensorShape shape;
    Vec channel_means;     // per channel, from the training split
    std::string name;
    std::string split = "train";
    int class_count = 0;
    // Ground-truth informative pixel sites, when the generator knows them.
    std::vector<int> informative_pixels;

    size_t size() const { return inputs.size(); }

    void compute_channel_means() {
        channel_means.assign(shape.c, 0.0);
        if (inputs.empty()) return;
        int hw = shape.h * shape.w;
        for (const auto& x : inputs)
            for (int c = 0; c < shape.c; ++c)
                for (int p = 0; p < hw; ++p)
                    channel_means[c] += x[static_cast<size_t>(c) * hw + p];
        for (auto& m : channel_means) m /= static_cast<double>(inputs.size()) * hw;
    }
};

namespace detail {

inline uint32_t read_be32(std::istream& f, const std::string& what) {
    uint8_t b[4];
    f.read(reinterpret_cast<char*>(b), 4);
    if (!f) throw std::invalid_argument("truncated IDX file while reading " + what);
    return (static_cast<uint32_t>(b[0]) << 24) | (static_cast<uint32_t>(b[1]) << 16) |
           (static_cast<uint32_t>(b[2]) << 8) | static_cast<uint32_t>(b[3]);
}

inline void write_be32(std::ostream& f, uint32_t v) {
    uint8_t b[4] = {static_cast<uint8_t>(v >> 24), static_cast<uint8_t>(v >> 16),
                    static_cast<uint8_t>(v >> 8), static_cast<uint8_t>(v)};
    f.write(reinterpret_cast<const char*>(b), 4);
}

}  // namespace detail

inline constexpr uint32_t kIdxImagesMagic = 0x00000803;
inline constexpr uint32_t kIdxLabelsMagic = 0x00000801;

// Loads an MNIST-style IDX image/label pair; pixels scaled to [0,1].
inline Dataset load_idx(const std::string& images_path, const std::string& labels_path) {
    std::ifstream fi(images_path, std::ios::binary);
    if (!fi) throw std::runtime_error("cannot open " + images_path);
    uint32_t magic = detail::read_be32(fi, "image magic");
    if (magic != kIdxImagesMagic) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "0x%08x", magic);
        throw std::invalid_argument("bad IDX image magic " + std::string(buf));
    }
    uint32_t n = detail::read_be32(fi, "image count");
    uint32_t h = detail::read_be32(fi, "image rows");
    uint32_t w = detail::read_be32(fi, "image cols");

    Dataset ds;
    ds.shape = {1, static_cast<int>(h), static_cast<int>(w)};
    ds.inputs.reserve(n);
    std::vector<uint8_t> row(static_cast<size_t>(h) * w);
    for (uint32_t i = 0; i < n; ++i) {
        fi.read(reinterpret_cast<char*>(row.data()), static_cast<std::streamsize>(row.size()));
        if (!fi) throw std::invalid_argument("truncated IDX image payload at image " +
                                             std::to_string(i));
        Vec x(row.size());
        for (size_t j = 0; j < row.size(); ++j) x[j] = row[j] / 255.0;
        ds.inputs.push_back(std::move(x));
    }

    std::ifstream fl(labels_path, std::ios::binary);
    if (!fl) throw std::runtime_error("cannot open " + labels_path);
    uint32_t lmagic = detail::read_be32(fl, "label magic");
    if (lmagic != kIdxLabelsMagic) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "0x%08x", lmagic);
        throw std::invalid_argument("bad IDX label magic " + std::string(buf));
    }
    uint32_t ln = detail::read_be32(fl, "label count");
    if (ln != n)
        throw std::invalid_argument("label/image count mismatch: " + std::to_string(ln) +
                                    " labels vs " + std::to_string(n) + " images");
    ds.labels.resize(ln);
    for (uint32_t i = 0; i < ln; ++i) {
        uint8_t b;
        fl.read(reinterpret_cast<char*>(&b), 1);
        if (!fl) throw std::invalid_argument("truncated IDX label payload");
        ds.labels[i] = b;
    }
    ds.class_count = ds.labels.empty()
                         ? 0
                         : *std::max_element(ds.labels.begin(), ds.labels.end()) + 1;
    ds.name = images_path;
    ds.compute_channel_means();
    return ds;
}

// Writes a single-channel dataset back to the IDX container (values
// quantized to bytes by round(255 x)).
inline void save_idx(const Dataset& ds, const std::string& images_path,
                     const std::string& labels_path) {
    if (ds.shape.c != 1)
        throw std::invalid_argument("IDX container stores single-channel images");
    std::ofstream fi(images_path, std::ios::binary);
    if (!fi) throw std::runtime_error("cannot open " + images_path + " for writing");
    detail::write_be32(fi, kIdxImagesMagic);
    detail::write_be32(fi, static_cast<uint32_t>(ds.size()));
    detail::write_be32(fi, static_cast<uint32_t>(ds.shape.h));
    detail::write_be32(fi, static_cast<uint32_t>(ds.shape.w));
    for (const auto& x : ds.inputs)
        for (double v : x) {
            double clamped = std::min(1.0, std::max(0.0, v));
            uint8_t b = static_cast<uint8_t>(std::lround(clamped * 255.0));
            fi.write(reinterpret_cast<const char*>(&b), 1);
        }
    std::ofstream fl(labels_path, std::ios::binary);
    if (!fl) throw std::runtime_error("cannot open " + labels_path + " for writing");
    detail::write_be32(fl, kIdxLabelsMagic);
    detail::write_be32(fl, static_cast<uint32_t>(ds.size()));
    for (int label : ds.labels) {
        uint8_t b = static_cast<uint8_t>(label);
        fl.write(reinterpret_cast<const char*>(&b), 1);
    }
}

enum class SyntheticKind { TwoMoons, InformativePixels, Xor };

inline SyntheticKind synthetic_kind_from_name(const std::string& s) {
    if (s == "two-moons") return SyntheticKind::TwoMoons;
    if (s == "informative-pixels") return SyntheticKind::InformativePixels;
    if (s == "xor") return SyntheticKind::Xor;
    throw std::invalid_argument("unknown synthetic dataset kind '" + s + "'");
}

struct SyntheticOptions {
    int image_h = 4, image_w = 4;       // informative-pixels geometry
    int informative_count = 2;
    double noise = 0.1;                 // two-moons / xor jitter
};

// Deterministic in seed. Classes are balanced within one sample.
inline Dataset gen_synthetic(SyntheticKind kind, int n, uint64_t seed,
                             SyntheticOptions opt = {}) {
    if (n <= 0) throw std::invalid_argument("sample count must be positive");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    Dataset ds;
    ds.class_count = 2;
    switch (kind) {
        case SyntheticKind::TwoMoons: {
            ds.name = "two-moons";
            ds.shape = {1, 1, 2};
            for (int i = 0; i < n; ++i) {
                int y = i % 2;
                double t = uni(rng) * 3.14159265358979323846;
                double gx, gy;
                if (y == 0) {
                    gx = std::cos(t);
                    gy = std::sin(t);
                } else {
                    gx = 1.0 - std::cos(t);
                    gy = 0.5 - std::sin(t);
                }
                gx += (uni(rng) - 0.5) * 2.0 * opt.noise;
                gy += (uni(rng) - 0.5) * 2.0 * opt.noise;
                ds.inputs.push_back({gx, gy});
                ds.labels.push_back(y);
            }
            break;
        }
        case SyntheticKind::Xor: {
            ds.name = "xor";
            ds.shape = {1, 1, 2};
            static const double corners[4][3] = {
                {0, 0, 0}, {0, 1, 1}, {1, 0, 1}, {1, 1, 0}};
            for (int i = 0; i < n; ++i) {
                const double* c = corners[i % 4];
                double jx = (uni(rng) - 0.5) * 2.0 * opt.noise;
                double jy = (uni(rng) - 0.5) * 2.0 * opt.noise;
                ds.inputs.push_back({c[0] + jx, c[1] + jy});
                ds.labels.push_back(static_cast<int>(c[2]));
            }
            break;
        }
        case SyntheticKind::InformativePixels: {
            // All pixels are uniform noise except K fixed sites that carry
            // the class: low band for class 0, high band for class 1.
            // Erasing those K sites makes the classes indistinguishable.
            ds.name = "informative-pixels";
            ds.shape = {1, opt.image_h, opt.image_w};
            int hw = opt.image_h * opt.image_w;
            if (opt.informative_count <= 0 || opt.informative_count > hw)
                throw std::invalid_argument("informative pixel count out of range");
            // Fixed informative sites, spread over the image.
            for (int k = 0; k < opt.informative_count; ++k)
                ds.informative_pixels.push_back(
                    (k * hw) / opt.informative_count + (opt.image_w + 1) / 2);
            for (auto& p : ds.informative_pixels) p %= hw;
            for (int i = 0; i < n; ++i) {
                int y = i % 2;
                Vec x(hw);
                for (int p = 0; p < hw; ++p) x[p] = uni(rng);
                for (int p : ds.informative_pixels)
                    x[p] = (y == 1 ? 0.8 : 0.0) + 0.2 * uni(rng);
                ds.inputs.push_back(std::move(x));
                ds.labels.push_back(y);
            }
            break;
        }
    }
    ds.compute_channel_means();
    return ds;
}

// Replaces the first floor(t * HW) pixel sites of `ranking` (a permutation
// of the HW sites) with the per-channel fill value, across all channels.
inline Vec perturb_pixels(const Vec& x, TensorShape shape, const std::vector<int>& ranking,
                          double t, const Vec& fill) {
    int hw = shape.h * shape.w;
    if (static_cast<int>(ranking.size()) != hw)
        throw std::invalid_argument("ranking length mismatch: expected " + std::to_string(hw) +
                                    ", got " + std::to_string(ranking.size()));
    if (static_cast<int>(fill.size()) != shape.c)
        throw std::invalid_argument("fill must have one value per channel");
    if (t < 0.0 || t > 1.0) throw std::invalid_argument("fraction t must be in [0,1]");
    Vec out = x;
    int count = static_cast<int>(std::floor(t * hw + 1e-9));
    for (int k = 0; k < count; ++k) {
        int site = ranking[k];
        for (int c = 0; c < shape.c; ++c) out[static_cast<size_t>(c) * hw + site] = fill[c];
    }
    return out;
}

}  // namespace pathgrad
