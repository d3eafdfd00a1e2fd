#include <benchmark/benchmark.h>

#include "comve/rng.hpp"
#include "comve/tensor.hpp"

using namespace comve;

namespace {

Tensor random_tensor(std::vector<size_t> shape, uint64_t seed, bool grad = false) {
    size_t n = 1;
    for (size_t d : shape) n *= d;
    Rng rng(seed);
    std::vector<double> values(n);
    for (double& v : values) v = rng.uniform(-1.0, 1.0);
    return grad ? Tensor::parameter(std::move(shape), std::move(values))
                : Tensor::from(std::move(shape), std::move(values));
}

void BM_matmul(benchmark::State& state) {
    const size_t n = static_cast<size_t>(state.range(0));
    NoGradGuard guard;
    Tensor a = random_tensor({64, 64}, 1);
    Tensor b = random_tensor({64, n}, 2);
    for (auto _ : state) {
        Tensor c = matmul(a, b);
        benchmark::DoNotOptimize(c.values().data());
    }
    state.SetItemsProcessed(state.iterations() * 64 * 64 * n);
}
BENCHMARK(BM_matmul)->Arg(16)->Arg(32)->Arg(64);

void BM_softmax_rows(benchmark::State& state) {
    const size_t n = static_cast<size_t>(state.range(0));
    NoGradGuard guard;
    Tensor a = random_tensor({n, n}, 3);
    for (auto _ : state) {
        Tensor s = softmax(a, 1);
        benchmark::DoNotOptimize(s.values().data());
    }
}
BENCHMARK(BM_softmax_rows)->Arg(24)->Arg(48);

void BM_layer_norm(benchmark::State& state) {
    NoGradGuard guard;
    Tensor x = random_tensor({64, 32}, 4);
    Tensor gain = random_tensor({64}, 5);
    Tensor bias = random_tensor({64}, 6);
    for (auto _ : state) {
        Tensor y = layer_norm(x, gain, bias);
        benchmark::DoNotOptimize(y.values().data());
    }
}
BENCHMARK(BM_layer_norm);

void BM_matmul_backward(benchmark::State& state) {
    Tensor a = random_tensor({64, 64}, 7, true);
    Tensor b = random_tensor({64, 32}, 8, true);
    for (auto _ : state) {
        Tensor loss = sum(matmul(a, b));
        backward(loss);
        a.zero_grad();
        b.zero_grad();
    }
}
BENCHMARK(BM_matmul_backward);

} // namespace

BENCHMARK_MAIN();
