#include <doctest.h>

#include "helpers.hpp"
#include "pathgrad/train.hpp"

using namespace pathgrad;

namespace {

Network xor_spec() {
    Network net;
    net.push_back(dense_layer(2, 8, true));
    net.push_back(dense_layer(8, 2, false));
    return net;
}

}  // namespace

TEST_CASE("training is bit-deterministic in the seed") {
    Dataset ds = gen_synthetic(SyntheticKind::Xor, 64, 3);
    TrainConfig cfg;
    cfg.epochs = 10;
    cfg.seed = 42;
    TrainResult a = train(xor_spec(), ds, cfg);
    TrainResult b = train(xor_spec(), ds, cfg);
    for (size_t li = 0; li < a.net.layer_count(); ++li) {
        CHECK(a.net.layer(li).weights == b.net.layer(li).weights);
        CHECK(a.net.layer(li).bias == b.net.layer(li).bias);
    }
    for (size_t e = 0; e < a.trace.size(); ++e) {
        CHECK(a.trace[e].loss == b.trace[e].loss);
        CHECK(a.trace[e].accuracy == b.trace[e].accuracy);
    }
    cfg.seed = 43;
    TrainResult c = train(xor_spec(), ds, cfg);
    CHECK(a.net.layer(0).weights != c.net.layer(0).weights);
}

TEST_CASE("a small MLP learns xor") {
    Dataset ds = gen_synthetic(SyntheticKind::Xor, 128, 5);
    TrainConfig cfg;
    cfg.epochs = 80;
    cfg.learning_rate = 0.2;
    cfg.momentum = 0.9;
    TrainResult r = train(xor_spec(), ds, cfg);
    CHECK(evaluate(r.net, ds).accuracy >= 0.95);
    CHECK(r.trace.back().loss < r.trace.front().loss);
}

TEST_CASE("a small MLP learns the informative-pixels task") {
    Dataset ds = gen_synthetic(SyntheticKind::InformativePixels, 200, 11);
    Network spec;
    spec.push_back(dense_layer(16, 12, true));
    spec.push_back(dense_layer(12, 2, false));
    TrainConfig cfg;
    cfg.epochs = 40;
    TrainResult r = train(spec, ds, cfg);
    CHECK(evaluate(r.net, ds).accuracy >= 0.95);
}

TEST_CASE("mse loss also trains") {
    Dataset ds = gen_synthetic(SyntheticKind::Xor, 64, 3);
    TrainConfig cfg;
    cfg.epochs = 120;
    cfg.learning_rate = 0.3;
    cfg.loss = LossKind::MeanSquaredError;
    TrainResult r = train(xor_spec(), ds, cfg);
    CHECK(evaluate(r.net, ds, cfg.loss).accuracy >= 0.9);
}

TEST_CASE("softmax cross-entropy matches a hand computation") {
    // logits (0, log 3), label 1: p1 = 3/4, loss = -log(3/4).
    auto lg = detail::loss_and_grad({0.0, std::log(3.0)}, 1, LossKind::SoftmaxCrossEntropy);
    CHECK(lg.loss == doctest::Approx(-std::log(0.75)).epsilon(1e-12));
    CHECK(lg.dlogits[0] == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(lg.dlogits[1] == doctest::Approx(-0.25).epsilon(1e-12));
}

TEST_CASE("mse loss matches a hand computation") {
    // logits (0.5, 0.25), label 0 -> targets (1, 0):
    // loss = ((0.5-1)^2 + 0.25^2)/2 = 0.15625
    auto lg = detail::loss_and_grad({0.5, 0.25}, 0, LossKind::MeanSquaredError);
    CHECK(lg.loss == doctest::Approx(0.15625).epsilon(1e-12));
    CHECK(lg.dlogits[0] == doctest::Approx(-0.5).epsilon(1e-12));
    CHECK(lg.dlogits[1] == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("training gradients match finite differences on the loss") {
    std::mt19937_64 rng(41);
    Network net = testutil::random_mlp(rng, 3, {4}, 2);
    Vec x = testutil::random_input(rng, 3);
    int label = 1;

    // Size the gradient buffers through a const view: the mutable layer()
    // accessor would invalidate the activation record.
    const Network& cnet = net;
    ActivationRecord rec = forward_record(net, x, 0);
    auto lg = detail::loss_and_grad(rec.logits, label, LossKind::SoftmaxCrossEntropy);
    std::vector<Vec> dw(net.layer_count()), db(net.layer_count());
    for (size_t li = 0; li < net.layer_count(); ++li) {
        dw[li].assign(cnet.layer(li).weights.size(), 0.0);
        db[li].assign(cnet.layer(li).bias.size(), 0.0);
    }
    detail::backprop(net, rec, nullptr, lg.dlogits, ReluBackward::Standard, &dw, &db);

    auto loss_at = [&](Network& n) {
        ActivationRecord r = forward_record(n, x, 0);
        return detail::loss_and_grad(r.logits, label, LossKind::SoftmaxCrossEntropy).loss;
    };
    const double h = 1e-5;
    for (size_t li = 0; li < net.layer_count(); ++li) {
        for (size_t i = 0; i < net.layer(li).weights.size(); ++i) {
            Network p = net, m = net;
            p.layer(li).weights[i] += h;
            m.layer(li).weights[i] -= h;
            double fd = (loss_at(p) - loss_at(m)) / (2.0 * h);
            CHECK(dw[li][i] == doctest::Approx(fd).epsilon(1e-4).scale(1.0));
        }
        for (size_t i = 0; i < net.layer(li).bias.size(); ++i) {
            Network p = net, m = net;
            p.layer(li).bias[i] += h;
            m.layer(li).bias[i] -= h;
            double fd = (loss_at(p) - loss_at(m)) / (2.0 * h);
            CHECK(db[li][i] == doctest::Approx(fd).epsilon(1e-4).scale(1.0));
        }
    }
}

TEST_CASE("divergence aborts with epoch and batch in the message") {
    Dataset ds = gen_synthetic(SyntheticKind::TwoMoons, 64, 3);
    // Scale inputs to astronomic magnitude so huge learning rate explodes.
    for (auto& x : ds.inputs)
        for (auto& v : x) v *= 1e12;
    Network spec;
    spec.push_back(dense_layer(2, 8, true));
    spec.push_back(dense_layer(8, 2, false));
    TrainConfig cfg;
    cfg.learning_rate = 1e12;
    cfg.loss = LossKind::MeanSquaredError;
    cfg.epochs = 50;
    CHECK_THROWS_WITH_AS(train(spec, ds, cfg), doctest::Contains("epoch"),
                         std::runtime_error);
}

TEST_CASE("labels outside the class range are rejected") {
    Dataset ds = gen_synthetic(SyntheticKind::Xor, 8, 3);
    ds.labels[0] = 7;
    CHECK_THROWS_AS(train(xor_spec(), ds, {}), std::invalid_argument);
}

TEST_CASE("evaluate rejects an empty dataset") {
    Dataset ds;
    std::mt19937_64 rng(1);
    Network net = testutil::random_mlp(rng, 2, {3}, 2);
    CHECK_THROWS_AS(evaluate(net, ds), std::invalid_argument);
}

TEST_CASE("init_weights is deterministic and on the float32 grid") {
    Network a = xor_spec(), b = xor_spec();
    init_weights(a, 9);
    init_weights(b, 9);
    CHECK(a.layer(0).weights == b.layer(0).weights);
    for (double w : a.layer(0).weights)
        CHECK(w == static_cast<double>(static_cast<float>(w)));
}
