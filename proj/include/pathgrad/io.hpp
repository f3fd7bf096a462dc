// Artifact serialization: deterministic CSV tables, PGM heatmaps, and the
// sparse pathway-mask / contribution-map containers.
#pragma once

#include <cinttypes>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "pathgrad/attribution.hpp"
#include "pathgrad/manifest.hpp"
#include "pathgrad/pathway.hpp"

namespace pathgrad {

// Shortest round-trip decimal formatting; byte-stable across runs.
inline std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    double back = std::strtod(buf, nullptr);
    if (back == v) {
        for (int prec = 1; prec < 17; ++prec) {
            char shorter[32];
            std::snprintf(shorter, sizeof shorter, "%.*g", prec, v);
            if (std::strtod(shorter, nullptr) == v) return shorter;
        }
    }
    return buf;
}

class CsvWriter {
public:
    explicit CsvWriter(const std::string& path) : file_(path, std::ios::binary) {
        if (!file_) throw std::runtime_error("cannot open " + path + " for writing");
    }
    void row(const std::vector<std::string>& cells) {
        for (size_t i = 0; i < cells.size(); ++i) {
            if (i) file_ << ',';
            file_ << cells[i];
        }
        file_ << '\n';
    }

private:
    std::ofstream file_;
};

// 8-bit PGM heatmap: values mapped by a linear gray ramp after
// normalization to [-1,1] (so -1 -> 0, 0 -> 127, +1 -> 255).
inline void write_pgm(const AttributionMap& map, const std::string& path) {
    AttributionMap norm = map.normalized ? map : normalize_map(map);
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open " + path + " for writing");
    f << "P5\n" << map.shape.w << " " << map.shape.h << "\n255\n";
    int hw = map.shape.h * map.shape.w;
    for (int p = 0; p < hw; ++p) {
        // single gray channel: average signed value over channels
        double v = 0.0;
        for (int c = 0; c < map.shape.c; ++c)
            v += norm.raw[static_cast<size_t>(c) * hw + p];
        v /= map.shape.c;
        int gray = static_cast<int>(std::lround((v + 1.0) * 127.5));
        gray = std::min(255, std::max(0, gray));
        unsigned char byte = static_cast<unsigned char>(gray);
        f.write(reinterpret_cast<const char*>(&byte), 1);
    }
}

inline void write_contribution_csv(const Network& net, const ContributionMap& c,
                                   const std::string& path) {
    CsvWriter csv(path);
    csv.row({"layer", "unit", "value", "signed_value"});
    for (int h = 0; h < net.hidden_layer_count(); ++h) {
        int off = net.hidden_offset(h);
        for (int j = 0; j < net.hidden_units(h); ++j)
            csv.row({std::to_string(h), std::to_string(j),
                     format_double(c.values[off + j]),
                     format_double(c.signed_values[off + j])});
    }
}

// Sparse index list with header (model hash, kappa, method, c_kappa).
inline void save_pathway_mask(const Network& net, const PathwayMask& mask,
                              const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open " + path + " for writing");
    f << "pathway-mask v1\n";
    f << "model " << manifest_hash(net) << "\n";
    f << "kappa " << format_double(mask.sparsity) << "\n";
    f << "method " << pathway_method_name(mask.method) << "\n";
    f << "threshold " << format_double(mask.threshold) << "\n";
    f << "kept";
    for (size_t i = 0; i < mask.keep.size(); ++i)
        if (mask.keep[i]) f << ' ' << i;
    f << "\n";
}

inline PathwayMask load_pathway_mask(const Network& net, const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open " + path);
    std::string line;
    std::getline(f, line);
    if (line != "pathway-mask v1") throw std::invalid_argument("bad pathway mask header");
    PathwayMask mask;
    mask.keep.assign(net.total_hidden(), 0);
    while (std::getline(f, line)) {
        std::istringstream ss(line);
        std::string key;
        ss >> key;
        if (key == "model") {
            std::string hash;
            ss >> hash;
            if (hash != manifest_hash(net))
                throw std::invalid_argument("pathway mask belongs to a different model");
        } else if (key == "kappa") {
            ss >> mask.sparsity;
        } else if (key == "threshold") {
            ss >> mask.threshold;
        } else if (key == "method") {
            std::string m;
            ss >> m;
            if (m == "neuronmct") mask.method = PathwayMethod::NeuronMCT;
            else if (m == "neuronintgrad") mask.method = PathwayMethod::NeuronIntGrad;
            else if (m == "greedy") mask.method = PathwayMethod::GreedyPruning;
            else if (m == "dgr") mask.method = PathwayMethod::DGR;
            else if (m == "active-subnet") mask.method = PathwayMethod::ActiveSubnet;
            else throw std::invalid_argument("unknown pathway method '" + m + "'");
        } else if (key == "kept") {
            size_t idx;
            while (ss >> idx) {
                if (idx >= mask.keep.size())
                    throw std::invalid_argument("pathway index out of range");
                mask.keep[idx] = 1;
            }
        }
    }
    mask.threshold_zero = mask.threshold == 0.0;
    return mask;
}

}  // namespace pathgrad
