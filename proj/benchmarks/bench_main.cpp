// SPDX-License-Identifier: Apache-2.0
#include <benchmark/benchmark.h>

#include "amr/gru.hpp"
#include "amr/matmul.hpp"
#include "amr/model.hpp"
#include "amr/rng.hpp"

namespace {

amr::Tensor random_tensor(std::vector<std::size_t> shape, std::uint64_t seed) {
  amr::Tensor t(std::move(shape));
  amr::Rng rng(seed);
  for (auto& v : t.data) v = float(rng.normal());
  return t;
}

void BM_Matmul(benchmark::State& state) {
  const std::size_t n = std::size_t(state.range(0));
  const amr::Tensor a = random_tensor({n, n}, 1);
  const amr::Tensor b = random_tensor({n, n}, 2);
  amr::Tensor c({n, n});
  for (auto _ : state) {
    std::fill(c.data.begin(), c.data.end(), 0.0f);
    amr::matmul_nn(a.ptr(), b.ptr(), c.ptr(), n, n, n);
    benchmark::DoNotOptimize(c.data.data());
  }
  state.SetItemsProcessed(std::int64_t(state.iterations()) *
                          std::int64_t(2 * n * n * n));
}
BENCHMARK(BM_Matmul)->Arg(128)->Arg(256);

void BM_GruForward(benchmark::State& state) {
  const std::size_t B = std::size_t(state.range(0)), T = 117, in = 25,
                    u = 128;
  const amr::Tensor x = random_tensor({B, T, in}, 3);
  const amr::Tensor k = random_tensor({in, 3 * u}, 4);
  const amr::Tensor r = random_tensor({u, 3 * u}, 5);
  const amr::Tensor bias = random_tensor({2, 3 * u}, 6);
  amr::GruCache<float> cache;
  for (auto _ : state) {
    amr::gru_forward_cached(x, k, r, bias, u, cache);
    benchmark::DoNotOptimize(cache.h.data());
  }
}
BENCHMARK(BM_GruForward)->Arg(16)->Arg(128);

void BM_ModelForward(benchmark::State& state) {
  amr::ModelSpec spec;
  const amr::Model m = amr::build<float>(spec, 7);
  const std::size_t B = std::size_t(state.range(0));
  const amr::Tensor batch = random_tensor({B, 2, spec.frame_len}, 8);
  for (auto _ : state) {
    const auto res = amr::forward(m, batch);
    benchmark::DoNotOptimize(res.probs.ptr());
  }
  state.SetItemsProcessed(std::int64_t(state.iterations()) * std::int64_t(B));
}
BENCHMARK(BM_ModelForward)->Arg(16)->Arg(128);

}  // namespace

BENCHMARK_MAIN();
