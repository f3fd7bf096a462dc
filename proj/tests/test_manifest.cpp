#include <doctest.h>

#include "helpers.hpp"
#include "pathgrad/manifest.hpp"
#include "pathgrad/train.hpp"

using namespace pathgrad;
using testutil::random_convnet;
using testutil::random_mlp;

TEST_CASE("manifest round-trips snapped weights bit-exactly") {
    std::mt19937_64 rng(31);
    Network net = random_mlp(rng, 4, {6, 5}, 3);
    net.snap_to_storage();
    Network back = load_manifest(save_manifest(net));
    REQUIRE(back.layer_count() == net.layer_count());
    for (size_t li = 0; li < net.layer_count(); ++li) {
        CHECK(back.layer(li).weights == net.layer(li).weights);
        CHECK(back.layer(li).bias == net.layer(li).bias);
    }
    // Twice through the codec yields the identical document.
    CHECK(save_manifest(back) == save_manifest(net));
    CHECK(manifest_hash(back) == manifest_hash(net));
}

TEST_CASE("manifest round-trips conv/pool/flatten geometry") {
    std::mt19937_64 rng(32);
    Network net = random_convnet(rng, {1, 4, 4}, 3, 6, 2);
    net.snap_to_storage();
    Network back = load_manifest(save_manifest(net));
    REQUIRE(back.layer_count() == net.layer_count());
    for (size_t li = 0; li < net.layer_count(); ++li) {
        const Layer& a = net.layer(li);
        const Layer& b = back.layer(li);
        CHECK(a.kind == b.kind);
        CHECK(a.relu == b.relu);
        CHECK(a.in_shape == b.in_shape);
        CHECK(a.out_shape == b.out_shape);
        CHECK(a.weights == b.weights);
        CHECK(a.bias == b.bias);
        CHECK(a.kernel_h == b.kernel_h);
        CHECK(a.stride == b.stride);
        CHECK(a.pad == b.pad);
        CHECK(a.pool_h == b.pool_h);
    }
    Vec x = testutil::random_input(rng, 16, 0.0, 1.0);
    CHECK(forward_record(net, x, 0).output == forward_record(back, x, 0).output);
}

TEST_CASE("a trained network survives save/load with identical behavior") {
    Dataset ds = gen_synthetic(SyntheticKind::Xor, 64, 7);
    Network spec;
    spec.push_back(dense_layer(2, 8, true));
    spec.push_back(dense_layer(8, 2, false));
    TrainConfig cfg;
    cfg.epochs = 20;
    Network net = train(spec, ds, cfg).net;
    Network back = load_manifest(save_manifest(net));
    for (const auto& x : ds.inputs)
        CHECK(forward_record(net, x, 0).output == forward_record(back, x, 0).output);
}

TEST_CASE("malformed manifests fail with the offending field named") {
    CHECK_THROWS_WITH_AS(load_manifest("not json"), doctest::Contains("malformed"),
                         std::invalid_argument);
    CHECK_THROWS_WITH_AS(load_manifest(R"({"layers": []})"),
                         doctest::Contains("format_version"), std::invalid_argument);
    CHECK_THROWS_WITH_AS(load_manifest(R"({"format_version": 99, "layers": []})"),
                         doctest::Contains("format_version 99"), std::invalid_argument);

    std::mt19937_64 rng(33);
    Network net = testutil::random_mlp(rng, 3, {4}, 2);
    net.snap_to_storage();
    auto doc = nlohmann::ordered_json::parse(save_manifest(net));

    auto corrupt_blob = doc;
    corrupt_blob["layers"][1]["weights"] = "AAAA";  // wrong byte count
    CHECK_THROWS_WITH_AS(load_manifest(corrupt_blob.dump()),
                         doctest::Contains("layers[1].weights"), std::invalid_argument);

    auto bad_char = doc;
    bad_char["layers"][0]["bias"] = "!!!!";
    CHECK_THROWS_WITH_AS(load_manifest(bad_char.dump()), doctest::Contains("base64"),
                         std::invalid_argument);

    auto bad_type = doc;
    bad_type["layers"][0]["type"] = "recurrent";
    CHECK_THROWS_WITH_AS(load_manifest(bad_type.dump()),
                         doctest::Contains("unknown layer type"), std::invalid_argument);

    auto bad_shape = doc;
    // Break chaining with layer 0 while keeping the layer self-consistent,
    // so the shape check (not the blob-size check) must fire.
    bad_shape["layers"][1]["in"]["w"] = 7;
    bad_shape["layers"][1]["weights"] = detail::encode_f32(Vec(2 * 7, 0.5));
    CHECK_THROWS_WITH_AS(load_manifest(bad_shape.dump()),
                         doctest::Contains("shape inconsistency at layers[1]"),
                         std::invalid_argument);
}

TEST_CASE("base64 codec round-trips arbitrary byte strings") {
    std::mt19937_64 rng(34);
    std::uniform_int_distribution<int> byte(0, 255);
    for (int len = 0; len < 16; ++len) {
        std::vector<uint8_t> bytes(len);
        for (auto& b : bytes) b = static_cast<uint8_t>(byte(rng));
        CHECK(detail::base64_decode(detail::base64_encode(bytes)) == bytes);
    }
}

TEST_CASE("float32 blobs decode little-endian") {
    // 1.0f = 0x3F800000 -> bytes 00 00 80 3F -> base64 "AACAPw=="
    CHECK(detail::encode_f32({1.0}) == "AACAPw==");
    Vec back = detail::decode_f32("AACAPw==", 1, "test");
    CHECK(back[0] == 1.0);
}
