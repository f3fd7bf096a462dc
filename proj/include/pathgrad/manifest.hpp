// Model manifest: a self-describing JSON text document with a topology
// section and weight blobs encoded as base64 little-endian IEEE-754
// float32, row-major. Loading widens exactly to float64.
#pragma once

#include <bit>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "pathgrad/network.hpp"

namespace pathgrad {

inline constexpr int kManifestVersion = 1;

namespace detail {

inline const char* b64_alphabet() {
    return "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
}

inline std::string base64_encode(const std::vector<uint8_t>& bytes) {
    const char* tab = b64_alphabet();
    std::string out;
    out.reserve((bytes.size() + 2) / 3 * 4);
    size_t i = 0;
    for (; i + 3 <= bytes.size(); i += 3) {
        uint32_t v = (bytes[i] << 16) | (bytes[i + 1] << 8) | bytes[i + 2];
        out.push_back(tab[(v >> 18) & 63]);
        out.push_back(tab[(v >> 12) & 63]);
        out.push_back(tab[(v >> 6) & 63]);
        out.push_back(tab[v & 63]);
    }
    size_t rem = bytes.size() - i;
    if (rem == 1) {
        uint32_t v = bytes[i] << 16;
        out.push_back(tab[(v >> 18) & 63]);
        out.push_back(tab[(v >> 12) & 63]);
        out += "==";
    } else if (rem == 2) {
        uint32_t v = (bytes[i] << 16) | (bytes[i + 1] << 8);
        out.push_back(tab[(v >> 18) & 63]);
        out.push_back(tab[(v >> 12) & 63]);
        out.push_back(tab[(v >> 6) & 63]);
        out.push_back('=');
    }
    return out;
}

inline std::vector<uint8_t> base64_decode(const std::string& text) {
    int8_t rev[256];
    std::fill(std::begin(rev), std::end(rev), int8_t{-1});
    const char* tab = b64_alphabet();
    for (int i = 0; i < 64; ++i) rev[static_cast<uint8_t>(tab[i])] = static_cast<int8_t>(i);
    std::vector<uint8_t> out;
    uint32_t buf = 0;
    int bits = 0;
    for (char c : text) {
        if (c == '=' || c == '\n' || c == '\r') continue;
        int8_t v = rev[static_cast<uint8_t>(c)];
        if (v < 0) throw std::invalid_argument("invalid base64 character in weight blob");
        buf = (buf << 6) | static_cast<uint32_t>(v);
        bits += 6;
        if (bits >= 8) {
            bits -= 8;
            out.push_back(static_cast<uint8_t>((buf >> bits) & 0xFF));
        }
    }
    return out;
}

inline std::string encode_f32(const Vec& values) {
    std::vector<uint8_t> bytes(values.size() * 4);
    for (size_t i = 0; i < values.size(); ++i) {
        float f = static_cast<float>(values[i]);
        uint32_t u = std::bit_cast<uint32_t>(f);
        bytes[4 * i + 0] = static_cast<uint8_t>(u & 0xFF);
        bytes[4 * i + 1] = static_cast<uint8_t>((u >> 8) & 0xFF);
        bytes[4 * i + 2] = static_cast<uint8_t>((u >> 16) & 0xFF);
        bytes[4 * i + 3] = static_cast<uint8_t>((u >> 24) & 0xFF);
    }
    return base64_encode(bytes);
}

inline Vec decode_f32(const std::string& blob, size_t expected, const std::string& field) {
    std::vector<uint8_t> bytes = base64_decode(blob);
    if (bytes.size() != expected * 4)
        throw std::invalid_argument("corrupt weight block at " + field + ": expected " +
                                    std::to_string(expected * 4) + " bytes, got " +
                                    std::to_string(bytes.size()));
    Vec out(expected);
    for (size_t i = 0; i < expected; ++i) {
        uint32_t u = static_cast<uint32_t>(bytes[4 * i]) |
                     (static_cast<uint32_t>(bytes[4 * i + 1]) << 8) |
                     (static_cast<uint32_t>(bytes[4 * i + 2]) << 16) |
                     (static_cast<uint32_t>(bytes[4 * i + 3]) << 24);
        out[i] = static_cast<double>(std::bit_cast<float>(u));
    }
    return out;
}

}  // namespace detail

inline nlohmann::ordered_json shape_json(TensorShape s) {
    return {{"c", s.c}, {"h", s.h}, {"w", s.w}};
}

inline TensorShape shape_from_json(const nlohmann::ordered_json& j) {
    return {j.at("c").get<int>(), j.at("h").get<int>(), j.at("w").get<int>()};
}

inline std::string save_manifest(const Network& net) {
    net.validate();
    nlohmann::ordered_json doc;
    doc["format_version"] = kManifestVersion;
    doc["kind"] = "rectified-network";
    auto layers = nlohmann::ordered_json::array();
    for (size_t i = 0; i < net.layer_count(); ++i) {
        const Layer& l = net.layer(i);
        nlohmann::ordered_json jl;
        jl["type"] = layer_kind_name(l.kind);
        jl["relu"] = l.relu;
        jl["in"] = shape_json(l.in_shape);
        jl["out"] = shape_json(l.out_shape);
        switch (l.kind) {
            case LayerKind::Dense:
                jl["weights"] = detail::encode_f32(l.weights);
                jl["bias"] = detail::encode_f32(l.bias);
                break;
            case LayerKind::Conv2d:
                jl["kernel"] = {{"h", l.kernel_h}, {"w", l.kernel_w}};
                jl["stride"] = l.stride;
                jl["pad"] = l.pad;
                jl["weights"] = detail::encode_f32(l.weights);
                jl["bias"] = detail::encode_f32(l.bias);
                break;
            case LayerKind::AvgPool:
                jl["pool"] = {{"h", l.pool_h}, {"w", l.pool_w}};
                break;
            case LayerKind::Flatten:
                break;
        }
        layers.push_back(std::move(jl));
    }
    doc["layers"] = std::move(layers);
    return doc.dump(2) + "\n";
}

inline Network load_manifest(const std::string& text) {
    nlohmann::ordered_json doc;
    try {
        doc = nlohmann::ordered_json::parse(text);
    } catch (const std::exception& e) {
        throw std::invalid_argument(std::string("malformed manifest: ") + e.what());
    }
    if (!doc.contains("format_version"))
        throw std::invalid_argument("manifest missing format_version");
    int version = doc.at("format_version").get<int>();
    if (version != kManifestVersion)
        throw std::invalid_argument("unsupported manifest format_version " +
                                    std::to_string(version));
    Network net;
    int index = 0;
    for (const auto& jl : doc.at("layers")) {
        std::string where = "layers[" + std::to_string(index) + "]";
        std::string type = jl.at("type").get<std::string>();
        TensorShape in = shape_from_json(jl.at("in"));
        TensorShape out = shape_from_json(jl.at("out"));
        Layer l;
        if (type == "dense") {
            l = dense_layer(in.size(), out.size(), jl.at("relu").get<bool>());
            l.in_shape = in;
            l.out_shape = out;
            l.weights = detail::decode_f32(jl.at("weights").get<std::string>(),
                                           static_cast<size_t>(in.size()) * out.size(),
                                           where + ".weights");
            l.bias = detail::decode_f32(jl.at("bias").get<std::string>(), out.size(),
                                        where + ".bias");
        } else if (type == "conv2d") {
            l = conv_layer(in, out.c, jl.at("kernel").at("h").get<int>(),
                           jl.at("kernel").at("w").get<int>(), jl.at("stride").get<int>(),
                           jl.at("pad").get<int>(), jl.at("relu").get<bool>());
            if (!(l.out_shape == out))
                throw std::invalid_argument("shape inconsistency at " + where +
                                            ".out: conv geometry disagrees");
            l.weights = detail::decode_f32(jl.at("weights").get<std::string>(),
                                           l.weights.size(), where + ".weights");
            l.bias = detail::decode_f32(jl.at("bias").get<std::string>(), out.c,
                                        where + ".bias");
        } else if (type == "avgpool") {
            l = avgpool_layer(in, jl.at("pool").at("h").get<int>(),
                              jl.at("pool").at("w").get<int>());
        } else if (type == "flatten") {
            l = flatten_layer(in);
        } else {
            throw std::invalid_argument("unknown layer type '" + type + "' at " + where);
        }
        try {
            net.push_back(std::move(l));
        } catch (const std::invalid_argument& e) {
            throw std::invalid_argument("shape inconsistency at " + where + ": " + e.what());
        }
        ++index;
    }
    net.validate();
    return net;
}

inline void save_manifest_file(const Network& net, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open " + path + " for writing");
    f << save_manifest(net);
}

inline Network load_manifest_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return load_manifest(ss.str());
}

// FNV-1a over the serialized manifest; keys serialized artifacts to a model.
inline std::string manifest_hash(const Network& net) {
    std::string text = save_manifest(net);
    uint64_t h = 1469598103934665603ull;
    for (unsigned char c : text) {
        h ^= c;
        h *= 1099511628211ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

}  // namespace pathgrad
