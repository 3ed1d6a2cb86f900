// OpenMP kernels against the serial reference. Thread count follows
// OMP_NUM_THREADS; the reference is always single-threaded.

#include "refpoint/fusion/kernels.hpp"
#include "refpoint/fusion/layout.hpp"
#include "refpoint/fusion/network.hpp"
#include "refpoint/reference/naive_net.hpp"

#include <benchmark/benchmark.h>

#include <random>
#include <vector>

using namespace refpoint;
using namespace refpoint::fusion;

namespace {

std::vector<float> gaussian(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<float> g(0.0f, 1.0f);
    std::vector<float> v(n);
    for (auto& x : v) x = g(rng);
    return v;
}

NetworkConfig net_with(int maps) {
    NetworkConfig c;
    c.feature_maps = maps;
    return c;
}

void BM_ForwardKernels(benchmark::State& st) {
    const auto cfg = net_with(static_cast<int>(st.range(0)));
    const auto batch = static_cast<std::size_t>(st.range(1));
    FusionNet<float> net(cfg);
    const auto params = init_params<float>(net.layout(), 1);
    const auto x = gaussian(batch * static_cast<std::size_t>(cfg.sample_size()), 2);
    Workspace<float> ws;
    for (auto _ : st) {
        net.forward(params, x, batch, ws);
        benchmark::DoNotOptimize(ws.output.data());
    }
    st.SetItemsProcessed(static_cast<std::int64_t>(st.iterations() * batch));
}

void BM_ForwardReference(benchmark::State& st) {
    const auto cfg = net_with(static_cast<int>(st.range(0)));
    const auto batch = static_cast<std::size_t>(st.range(1));
    FusionNet<float> net(cfg);
    const auto params = init_params<float>(net.layout(), 1);
    const auto x = gaussian(batch * static_cast<std::size_t>(cfg.sample_size()), 2);
    for (auto _ : st) {
        auto out = reference::naive_forward<float>(cfg, params, x, batch);
        benchmark::DoNotOptimize(out.data());
    }
    st.SetItemsProcessed(static_cast<std::int64_t>(st.iterations() * batch));
}

void BM_StepKernels(benchmark::State& st) {
    const auto cfg = net_with(static_cast<int>(st.range(0)));
    const auto batch = static_cast<std::size_t>(st.range(1));
    FusionNet<float> net(cfg);
    const auto params = init_params<float>(net.layout(), 1);
    const auto x = gaussian(batch * static_cast<std::size_t>(cfg.sample_size()), 2);
    const auto d_out = gaussian(batch * 3, 3);
    std::vector<float> grad(net.num_params());
    Workspace<float> ws;
    for (auto _ : st) {
        net.forward(params, x, batch, ws);
        net.backward(params, d_out, ws, grad);
        benchmark::DoNotOptimize(grad.data());
    }
    st.SetItemsProcessed(static_cast<std::int64_t>(st.iterations() * batch));
}

void BM_StepReference(benchmark::State& st) {
    const auto cfg = net_with(static_cast<int>(st.range(0)));
    const auto batch = static_cast<std::size_t>(st.range(1));
    FusionNet<float> net(cfg);
    const auto params = init_params<float>(net.layout(), 1);
    const auto x = gaussian(batch * static_cast<std::size_t>(cfg.sample_size()), 2);
    const auto d_out = gaussian(batch * 3, 3);
    for (auto _ : st) {
        auto grad = reference::naive_backward<float>(cfg, params, x, batch, d_out);
        benchmark::DoNotOptimize(grad.data());
    }
    st.SetItemsProcessed(static_cast<std::int64_t>(st.iterations() * batch));
}

// Joint-layer shaped product: rows = batch * 72 positions, k = 4 * maps * 3 inputs.
void BM_Gemm(benchmark::State& st) {
    const std::size_t m = static_cast<std::size_t>(st.range(0)) * 72, k = 4 * 384, n = 128;
    const auto a = gaussian(m * k, 4), b = gaussian(k * n, 5);
    std::vector<float> c(m * n);
    for (auto _ : st) {
        kernels::gemm_nn<float>(m, n, k, a.data(), b.data(), c.data(), false);
        benchmark::DoNotOptimize(c.data());
    }
    st.SetItemsProcessed(static_cast<std::int64_t>(st.iterations() * 2 * m * n * k));
}

void BM_GemmTripleLoop(benchmark::State& st) {
    const std::size_t m = static_cast<std::size_t>(st.range(0)) * 72, k = 4 * 384, n = 128;
    const auto a = gaussian(m * k, 4), b = gaussian(k * n, 5);
    std::vector<float> c(m * n);
    for (auto _ : st) {
        for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t j = 0; j < n; ++j) {
                float s = 0.0f;
                for (std::size_t p = 0; p < k; ++p) s += a[i * k + p] * b[p * n + j];
                c[i * n + j] = s;
            }
        }
        benchmark::DoNotOptimize(c.data());
    }
    st.SetItemsProcessed(static_cast<std::int64_t>(st.iterations() * 2 * m * n * k));
}

}  // namespace

BENCHMARK(BM_ForwardKernels)->Args({128, 32})->Args({32, 32})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ForwardReference)->Args({128, 32})->Args({32, 32})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_StepKernels)->Args({128, 32})->Args({32, 32})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_StepReference)->Args({128, 32})->Args({32, 32})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Gemm)->Arg(8)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_GemmTripleLoop)->Arg(8)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
