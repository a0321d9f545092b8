#include <benchmark/benchmark.h>

#include "dm/core_math.hpp"
#include "dm/edf.hpp"
#include "dm/network.hpp"
#include "dm/rng.hpp"

namespace {

std::vector<double> random_logits(dm::Rng& rng, std::size_t c) {
    std::vector<double> z(c);
    for (double& v : z) v = rng.uniform(-4.0, 4.0);
    return z;
}

void BM_grad_logits(benchmark::State& state) {
    dm::Rng rng(7);
    auto probs = dm::softmax(random_logits(rng, 10));
    for (auto _ : state)
        benchmark::DoNotOptimize(dm::grad_logits(dm::LossKind::cce(), probs, 3));
}
BENCHMARK(BM_grad_logits);

void BM_dm_grad_logits(benchmark::State& state) {
    dm::Rng rng(7);
    auto probs = dm::softmax(random_logits(rng, 10));
    dm::Edf edf = dm::Edf::make(dm::EdfFamily::unified(1.0, 8.0));
    for (auto _ : state)
        benchmark::DoNotOptimize(dm::dm_grad_logits(probs, 3, edf));
}
BENCHMARK(BM_dm_grad_logits);

void BM_forward_backward(benchmark::State& state) {
    dm::Mlp net = dm::init_mlp({50, 8, 2}, dm::Activation::ReLU, 0.0, 1);
    dm::Rng rng(3);
    std::size_t batch = 32;
    std::vector<double> feats(batch * 50);
    for (double& v : feats) v = rng.normal();
    std::vector<double> g(batch * 2, 0.1);
    for (auto _ : state) {
        auto cache = dm::forward(net, feats, batch, true, dm::Rng(0));
        benchmark::DoNotOptimize(dm::backward(net, cache, g));
    }
}
BENCHMARK(BM_forward_backward);

void BM_normalizer(benchmark::State& state) {
    auto family = dm::EdfFamily::unified(0.5, 12.0);
    for (auto _ : state)
        benchmark::DoNotOptimize(dm::normalizer(family, 10001));
}
BENCHMARK(BM_normalizer);

}  // namespace

BENCHMARK_MAIN();
