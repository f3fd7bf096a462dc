#include <doctest.h>

#include "helpers.hpp"
#include "pathgrad/contrib.hpp"

using namespace pathgrad;
using testutil::random_input;
using testutil::random_mlp;

namespace {

// Independent Shapley oracle: average marginal contribution over all
// permutations of one layer's neurons.
Vec shapley_by_permutations(const Network& net, const Vec& x, int layer, int cls) {
    int n = net.hidden_units(layer);
    ActivationRecord rec = forward_record(net, x, cls);
    std::vector<int> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    Vec sum(n, 0.0);
    size_t count = 0;
    do {
        uint32_t coalition = 0;
        double prev = layer_coalition_value(net, rec, layer, coalition, cls);
        for (int j : perm) {
            coalition |= 1u << j;
            double cur = layer_coalition_value(net, rec, layer, coalition, cls);
            sum[j] += cur - prev;
            prev = cur;
        }
        ++count;
    } while (std::next_permutation(perm.begin(), perm.end()));
    for (auto& v : sum) v /= static_cast<double>(count);
    return sum;
}

double phi_with_layer_gated(const Network& net, const Vec& x, int layer, double lambda,
                            int cls) {
    InterceptSpec spec = InterceptSpec::pass_all(net.total_hidden());
    int off = net.hidden_offset(layer);
    for (int j = 0; j < net.hidden_units(layer); ++j) spec.set_gate(off + j, lambda);
    return forward_record(net, x, &spec, cls).output;
}

}  // namespace

TEST_CASE("neuron MCT equals |a * dPhi/da|") {
    std::mt19937_64 rng(51);
    Network net = random_mlp(rng, 3, {5, 4}, 2);
    Vec x = random_input(rng, 3);
    ActivationRecord rec = forward_record(net, x, 1);
    GradientRecord g = backward(net, rec);
    ContributionMap c = neuron_mct(net, x, 1);
    REQUIRE(c.size() == static_cast<size_t>(net.total_hidden()));
    for (int h = 0; h < net.hidden_layer_count(); ++h)
        for (int j = 0; j < net.hidden_units(h); ++j) {
            double v = rec.act[h][j] * g.neuron_grads[h][j];
            int flat = net.hidden_offset(h) + j;
            CHECK(c.signed_values[flat] == v);
            CHECK(c.values[flat] == std::abs(v));
        }
}

TEST_CASE("dead neurons get exactly zero under both contribution methods") {
    // Force one dead neuron via a large negative bias.
    std::mt19937_64 rng(52);
    Network net = random_mlp(rng, 3, {5}, 2);
    net.layer(0).bias[2] = -100.0;
    Vec x = random_input(rng, 3);
    ActivationRecord rec = forward_record(net, x, 0);
    REQUIRE(rec.act[0][2] == 0.0);
    CHECK(neuron_mct(net, x, 0).values[2] == 0.0);
    CHECK(neuron_intgrad(net, x, 0, 10).values[2] == 0.0);
    CHECK(neuron_intgrad(net, x, 0, 10, IntGradScaling::PerNeuron).values[2] == 0.0);
}

TEST_CASE("per-neuron integrated gradients converge to the exact marginal") {
    // For a single gated neuron the path integral telescopes to
    // Phi(x) - Phi(a_j <- 0), which marginal_exact computes by ablation.
    std::mt19937_64 rng(53);
    for (int t = 0; t < 5; ++t) {
        Network net = random_mlp(rng, 3, {4, 3}, 2);
        Vec x = random_input(rng, 3);
        ContributionMap c = neuron_intgrad(net, x, 0, 400, IntGradScaling::PerNeuron);
        for (int h = 0; h < net.hidden_layer_count(); ++h)
            for (int j = 0; j < net.hidden_units(h); ++j) {
                double oracle = marginal_exact(net, x, {h, j}, 0);
                int flat = net.hidden_offset(h) + j;
                CHECK(c.values[flat] == doctest::Approx(oracle).epsilon(5e-3).scale(1.0));
            }
    }
}

TEST_CASE("per-layer integrated gradients satisfy layer completeness") {
    // Summing signed scores over one layer recovers
    // Phi(x) - Phi(layer zeroed) to midpoint-rule accuracy.
    std::mt19937_64 rng(54);
    for (int t = 0; t < 5; ++t) {
        Network net = random_mlp(rng, 4, {6, 5}, 3);
        Vec x = random_input(rng, 4);
        ContributionMap c = neuron_intgrad(net, x, 1, 400);
        for (int h = 0; h < net.hidden_layer_count(); ++h) {
            double total = 0.0;
            for (int j = 0; j < net.hidden_units(h); ++j)
                total += c.signed_values[net.hidden_offset(h) + j];
            double full = forward_record(net, x, 1).output;
            double oracle = full - phi_with_layer_gated(net, x, h, 0.0, 1);
            // The midpoint-rule error scales with the response magnitude,
            // not with the (possibly tiny) layer delta.
            CHECK(total ==
                  doctest::Approx(oracle).epsilon(0.01).scale(std::abs(full) + 1e-6));
        }
    }
}

TEST_CASE("integration error shrinks as steps grow") {
    std::mt19937_64 rng(55);
    Network net = random_mlp(rng, 3, {5, 4}, 2);
    Vec x = random_input(rng, 3);
    auto completeness_error = [&](int steps) {
        ContributionMap c = neuron_intgrad(net, x, 0, steps);
        double err = 0.0;
        for (int h = 0; h < net.hidden_layer_count(); ++h) {
            double total = 0.0;
            for (int j = 0; j < net.hidden_units(h); ++j)
                total += c.signed_values[net.hidden_offset(h) + j];
            double oracle = forward_record(net, x, 0).output -
                            phi_with_layer_gated(net, x, h, 0.0, 0);
            err += std::abs(total - oracle);
        }
        return err;
    };
    CHECK(completeness_error(64) <= completeness_error(2) + 1e-12);
}

TEST_CASE("on a linear region MCT and intgrad coincide") {
    // All gates on a one-layer net with positive activations: Phi is linear
    // in the layer's activations, so the integrand is constant in alpha.
    Network net;
    Layer l = dense_layer(2, 2, true);
    l.weights = {1.0, 0.0, 0.0, 1.0};
    net.push_back(std::move(l));
    Layer head = dense_layer(2, 1, false);
    head.weights = {2.0, -3.0};
    net.push_back(std::move(head));
    Vec x = {0.5, 0.25};
    ContributionMap mct = neuron_mct(net, x, 0);
    ContributionMap ig = neuron_intgrad(net, x, 0, 3);
    CHECK(mct.values[0] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(mct.values[1] == doctest::Approx(0.75).epsilon(1e-12));
    for (size_t i = 0; i < mct.size(); ++i)
        CHECK(ig.signed_values[i] == doctest::Approx(mct.signed_values[i]).epsilon(1e-12));
}

TEST_CASE("invalid step counts are rejected") {
    std::mt19937_64 rng(56);
    Network net = random_mlp(rng, 2, {3}, 2);
    CHECK_THROWS_AS(neuron_intgrad(net, {0.1, 0.2}, 0, 0), std::invalid_argument);
}

TEST_CASE("marginal_exact matches a hand computation") {
    // Phi = 2 relu(x0) + 3 relu(x1); ablating unit 1 at x=(1,1) changes 3.
    Network net;
    Layer l = dense_layer(2, 2, true);
    l.weights = {1.0, 0.0, 0.0, 1.0};
    net.push_back(std::move(l));
    Layer head = dense_layer(2, 1, false);
    head.weights = {2.0, 3.0};
    net.push_back(std::move(head));
    CHECK(marginal_exact(net, {1.0, 1.0}, {0, 1}, 0) == doctest::Approx(3.0));
    CHECK(marginal_exact(net, {1.0, -1.0}, {0, 1}, 0) == 0.0);
}

TEST_CASE("layer coalition value: full coalition is Phi, empty is Phi-ablated") {
    std::mt19937_64 rng(57);
    Network net = random_mlp(rng, 3, {4}, 2);
    Vec x = random_input(rng, 3);
    ActivationRecord rec = forward_record(net, x, 0);
    uint32_t full = (1u << net.hidden_units(0)) - 1;
    CHECK(layer_coalition_value(net, rec, 0, full, 0) ==
          doctest::Approx(rec.output).epsilon(1e-15));
    CHECK(layer_coalition_value(net, rec, 0, 0u, 0) ==
          doctest::Approx(phi_with_layer_gated(net, x, 0, 0.0, 0)).epsilon(1e-15));
}

TEST_CASE("brute-force Shapley matches the permutation oracle") {
    std::mt19937_64 rng(58);
    for (int t = 0; t < 5; ++t) {
        Network net = random_mlp(rng, 3, {4, 3}, 2);
        Vec x = random_input(rng, 3);
        for (int layer = 0; layer < 2; ++layer) {
            Vec fast = shapley_bruteforce(net, x, layer, 0);
            Vec oracle = shapley_by_permutations(net, x, layer, 0);
            for (size_t j = 0; j < fast.size(); ++j)
                CHECK(fast[j] == doctest::Approx(oracle[j]).epsilon(1e-10).scale(1.0));
        }
    }
}

TEST_CASE("Shapley axioms: efficiency, null player, symmetry") {
    std::mt19937_64 rng(59);
    Network net = random_mlp(rng, 3, {5}, 2);
    net.layer(0).bias[3] = -50.0;  // null player (dead)
    // Symmetric pair: identical incoming and outgoing weights for units 0, 1.
    for (int i = 0; i < 3; ++i)
        net.layer(0).weights[1 * 3 + i] = net.layer(0).weights[0 * 3 + i];
    net.layer(0).bias[1] = net.layer(0).bias[0];
    net.layer(1).weights[0 * 5 + 1] = net.layer(1).weights[0 * 5 + 0];
    net.layer(1).weights[1 * 5 + 1] = net.layer(1).weights[1 * 5 + 0];

    Vec x = random_input(rng, 3);
    ActivationRecord rec = forward_record(net, x, 0);
    Vec sh = shapley_bruteforce(net, x, 0, 0);

    double total = 0.0;
    for (double v : sh) total += v;
    double grand = rec.output - layer_coalition_value(net, rec, 0, 0u, 0);
    CHECK(total == doctest::Approx(grand).epsilon(1e-10).scale(1.0));  // efficiency
    CHECK(sh[3] == doctest::Approx(0.0).scale(1.0).epsilon(1e-12));    // null player
    CHECK(sh[0] == doctest::Approx(sh[1]).epsilon(1e-10).scale(1.0)); // symmetry
}

TEST_CASE("brute-force Shapley refuses layers wider than 20") {
    std::mt19937_64 rng(60);
    Network net = random_mlp(rng, 2, {21}, 2);
    CHECK_THROWS_WITH_AS(shapley_bruteforce(net, {0.1, 0.2}, 0, 0),
                         doctest::Contains("N_i = 21"), std::invalid_argument);
    CHECK_THROWS_AS(shapley_bruteforce(net, {0.1, 0.2}, 5, 0), std::out_of_range);
}
