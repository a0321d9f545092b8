#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>

#include "dm/core_math.hpp"
#include "dm/network.hpp"
#include "dm/rng.hpp"
#include "test_util.hpp"

using namespace dm;

namespace {

std::vector<double> random_features(Rng& rng, std::size_t n) {
    std::vector<double> x(n);
    for (double& v : x) v = rng.normal();
    return x;
}

// d/dtheta of a scalar objective via central differences
std::vector<double> fd_param_grad(Mlp net, const std::function<double(const Mlp&)>& objective,
                                  double step) {
    std::vector<double> g(net.theta.size());
    for (std::size_t i = 0; i < net.theta.size(); ++i) {
        double keep = net.theta[i];
        net.theta[i] = keep + step;
        double hi = objective(net);
        net.theta[i] = keep - step;
        double lo = objective(net);
        net.theta[i] = keep;
        g[i] = (hi - lo) / (2.0 * step);
    }
    return g;
}

}  // namespace

TEST_CASE("init_mlp: determinism and parameter count") {
    Mlp a = init_mlp({50, 8, 2}, Activation::ReLU, 0.0, 99);
    Mlp b = init_mlp({50, 8, 2}, Activation::ReLU, 0.0, 99);
    CHECK(a.theta == b.theta);
    CHECK(a.theta.size() == 50 * 8 + 8 + 8 * 2 + 2);  // 426

    Mlp c = init_mlp({50, 8, 2}, Activation::ReLU, 0.0, 100);
    CHECK(a.theta != c.theta);

    CHECK_THROWS_AS(init_mlp({50, 0, 2}, Activation::ReLU, 0.0, 1), std::invalid_argument);
}

TEST_CASE("init_mlp: empirical weight mean near zero") {
    // one wide layer gives 10^5 draws; uniform(-b,b) has sd b/sqrt(3)
    Mlp net = init_mlp({1000, 100, 2}, Activation::ReLU, 0.0, 7);
    auto w = net.weights(0);
    double mean = 0.0;
    for (double v : w) mean += v;
    mean /= static_cast<double>(w.size());
    double bound = std::sqrt(6.0 / 1100.0);
    double se = bound / std::sqrt(3.0) / std::sqrt(static_cast<double>(w.size()));
    CHECK(std::abs(mean) < 3.0 * se);
}

TEST_CASE("forward: hand-computed 2-layer net") {
    Mlp net = init_mlp({2, 2, 2}, Activation::ReLU, 0.0, 1);
    // W0 = [[1,2],[3,4]], b0 = [0.5,-0.5], W1 = [[1,-1],[2,1]], b1 = [0,1]
    double theta[] = {1, 2, 3, 4, 0.5, -0.5, 1, -1, 2, 1, 0, 1};
    std::copy(std::begin(theta), std::end(theta), net.theta.begin());

    std::vector<double> x = {1.0, -1.0};
    auto cache = forward(net, x, 1, false, Rng(0));
    // s0 = [1*1+2*(-1)+0.5, 3*1+4*(-1)-0.5] = [-0.5, -1.5]; relu -> [0,0]
    // logits = [0, 1]
    CHECK(std::abs(cache.logits[0] - 0.0) < 1e-12);
    CHECK(std::abs(cache.logits[1] - 1.0) < 1e-12);

    std::vector<double> x2 = {1.0, 1.0};
    auto cache2 = forward(net, x2, 1, false, Rng(0));
    // s0 = [3.5, 6.5]; relu same; logits = [3.5-6.5, 2*3.5+6.5+1] = [-3, 14.5]
    CHECK(std::abs(cache2.logits[0] - (-3.0)) < 1e-12);
    CHECK(std::abs(cache2.logits[1] - 14.5) < 1e-12);
}

TEST_CASE("forward: zero dropout means train == eval") {
    Mlp net = init_mlp({4, 5, 3}, Activation::Tanh, 0.0, 3);
    Rng rng(8);
    auto x = random_features(rng, 6 * 4);
    auto train = forward(net, x, 6, true, Rng(123));
    auto eval = forward(net, x, 6, false, Rng(456));
    CHECK(testutil::max_abs_diff(train.logits, eval.logits) < 1e-15);
}

TEST_CASE("forward: dropout masks are seed-reproducible and train mean approaches eval") {
    Mlp net = init_mlp({4, 64, 2}, Activation::ReLU, 0.3, 3);
    Rng rng(8);
    auto x = random_features(rng, 4);

    auto a = forward(net, x, 1, true, Rng(77));
    auto b = forward(net, x, 1, true, Rng(77));
    CHECK(a.logits == b.logits);

    auto eval = forward(net, x, 1, false, Rng(0));
    std::vector<double> mean(2, 0.0);
    int reps = 20000;
    for (int r = 0; r < reps; ++r) {
        auto c = forward(net, x, 1, true, Rng(1000 + r));
        mean[0] += c.logits[0];
        mean[1] += c.logits[1];
    }
    mean[0] /= reps;
    mean[1] /= reps;
    // inverted dropout: expectation of the train-mode logits is the eval logits
    CHECK(std::abs(mean[0] - eval.logits[0]) < 0.05);
    CHECK(std::abs(mean[1] - eval.logits[1]) < 0.05);
}

TEST_CASE("forward: shape mismatch throws") {
    Mlp net = init_mlp({4, 5, 3}, Activation::ReLU, 0.0, 3);
    std::vector<double> x(7);
    CHECK_THROWS_AS(forward(net, x, 2, false, Rng(0)), std::invalid_argument);
}

TEST_CASE("backward: linear functional <G, logits> matches finite differences") {
    Mlp net = init_mlp({4, 5, 3}, Activation::Tanh, 0.0, 21);
    Rng rng(33);
    std::size_t batch = 3;
    auto x = random_features(rng, batch * 4);
    std::vector<double> g(batch * 3);
    for (double& v : g) v = rng.uniform(-1.0, 1.0);

    auto cache = forward(net, x, batch, false, Rng(0));
    auto grads = backward(net, cache, g);

    auto fd = fd_param_grad(net, [&](const Mlp& n) {
        auto c = forward(n, x, batch, false, Rng(0));
        double acc = 0.0;
        for (std::size_t i = 0; i < c.logits.size(); ++i) acc += g[i] * c.logits[i];
        return acc / static_cast<double>(batch);
    }, 1e-5);

    for (std::size_t i = 0; i < grads.size(); ++i) {
        double denom = std::max(std::abs(fd[i]), 1e-8);
        CHECK(std::abs(grads[i] - fd[i]) / denom < 1e-4);
    }
}

TEST_CASE("backward: injecting CCE gradients reproduces the CCE training gradient") {
    Mlp net = init_mlp({4, 5, 3}, Activation::Tanh, 0.0, 77);
    Rng rng(44);
    std::size_t batch = 4;
    auto x = random_features(rng, batch * 4);
    std::vector<std::size_t> y = {0, 2, 1, 2};

    auto cache = forward(net, x, batch, false, Rng(0));
    std::vector<double> g(batch * 3);
    for (std::size_t n = 0; n < batch; ++n) {
        auto gi = grad_logits(LossKind::cce(), cache.probs[n], y[n]);
        std::copy(gi.begin(), gi.end(), g.begin() + n * 3);
    }
    auto grads = backward(net, cache, g);

    auto fd = fd_param_grad(net, [&](const Mlp& n) {
        auto c = forward(n, x, batch, false, Rng(0));
        double acc = 0.0;
        for (std::size_t k = 0; k < batch; ++k)
            acc += loss_value(LossKind::cce(), c.probs[k][y[k]]);
        return acc / static_cast<double>(batch);
    }, 1e-5);

    CHECK(testutil::max_abs_diff(grads, fd) < 1e-5);
}

TEST_CASE("backward: linearity and zero input") {
    Mlp net = init_mlp({3, 4, 2}, Activation::ReLU, 0.0, 5);
    Rng rng(9);
    auto x = random_features(rng, 2 * 3);
    auto cache = forward(net, x, 2, false, Rng(0));

    std::vector<double> zero(2 * 2, 0.0);
    auto gz = backward(net, cache, zero);
    for (double v : gz) CHECK(v == 0.0);

    std::vector<double> g(2 * 2);
    for (double& v : g) v = rng.uniform(-1.0, 1.0);
    auto g1 = backward(net, cache, g);
    for (double& v : g) v *= 2.5;
    auto g2 = backward(net, cache, g);
    for (std::size_t i = 0; i < g1.size(); ++i)
        CHECK(std::abs(g2[i] - 2.5 * g1[i]) < 1e-12);
}

TEST_CASE("backward: batch of k copies equals single example") {
    Mlp net = init_mlp({3, 4, 2}, Activation::Tanh, 0.0, 15);
    Rng rng(10);
    auto x1 = random_features(rng, 3);
    std::vector<double> xk;
    for (int k = 0; k < 5; ++k) xk.insert(xk.end(), x1.begin(), x1.end());

    std::vector<double> g1 = {0.3, -0.3};
    std::vector<double> gk;
    for (int k = 0; k < 5; ++k) gk.insert(gk.end(), g1.begin(), g1.end());

    auto c1 = forward(net, x1, 1, false, Rng(0));
    auto ck = forward(net, xk, 5, false, Rng(0));
    auto a = backward(net, c1, g1);
    auto b = backward(net, ck, gk);
    CHECK(testutil::max_abs_diff(a, b) < 1e-12);
}

TEST_CASE("predict: argmax, tie rule, shift invariance") {
    Mlp net = init_mlp({3, 3}, Activation::ReLU, 0.0, 1);
    // identity weights, zero bias: logits = x
    std::fill(net.theta.begin(), net.theta.end(), 0.0);
    auto w = net.weights(0);
    w[0] = w[4] = w[8] = 1.0;

    std::vector<double> x = {3, 1, 1, 1, 1, 0, 5, 5, 5};
    auto pred = predict(net, x, 3);
    CHECK(pred.labels[0] == 0);
    CHECK(pred.labels[1] == 0);  // tie between 0 and 1 goes to 0
    CHECK(pred.labels[2] == 0);

    std::vector<double> shifted = {13, 11, 11};
    CHECK(predict(net, shifted, 1).labels[0] == 0);
}

TEST_CASE("checkpoint: bit-exact round trip") {
    Mlp net = init_mlp({7, 5, 4}, Activation::ReLU, 0.1, 404);
    auto path = std::filesystem::temp_directory_path() / "dm_test_ckpt.dmf";
    save_checkpoint(net, path.string());
    Mlp loaded = load_checkpoint(path.string(), Activation::ReLU, 0.1);
    CHECK(loaded.layer_dims == net.layer_dims);
    CHECK(loaded.theta == net.theta);
    std::filesystem::remove(path);
}

TEST_CASE("checkpoint: bad magic rejected") {
    auto path = std::filesystem::temp_directory_path() / "dm_test_badmagic.dmf";
    std::FILE* f = std::fopen(path.string().c_str(), "wb");
    std::fwrite("NOPE", 1, 4, f);
    std::fclose(f);
    CHECK_THROWS_AS(load_checkpoint(path.string()), std::runtime_error);
    std::filesystem::remove(path);
}
