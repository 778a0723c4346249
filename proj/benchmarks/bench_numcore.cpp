#include <benchmark/benchmark.h>

#include <random>

#include "hmem/numcore/ops.hpp"

using namespace hmem::numcore;

namespace {

Tensor<float> random_tensor(Shape s, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> nd;
  std::vector<float> v(numel(s));
  for (auto& x : v) x = nd(rng);
  return Tensor<float>(s, std::move(v));
}

void BM_Matmul(benchmark::State& st) {
  const auto n = static_cast<std::size_t>(st.range(0));
  const auto a = random_tensor({n, n}, 1), b = random_tensor({n, n}, 2);
  for (auto _ : st) {
    Tape<float> tape;
    auto y = matmul(tape.constant(a), tape.constant(b));
    benchmark::DoNotOptimize(y.value().data());
  }
  st.SetItemsProcessed(st.iterations() * static_cast<std::int64_t>(2 * n * n * n));
}
BENCHMARK(BM_Matmul)->Arg(64)->Arg(128)->Arg(256);

// Causal self-attention forward and backward at the desk-scale width.
void BM_Attention(benchmark::State& st) {
  const auto T = static_cast<std::size_t>(st.range(0));
  const std::size_t heads = 4, width = 128;
  const auto q = random_tensor({T, width}, 3), k = random_tensor({T, width}, 4), v = random_tensor({T, width}, 5);
  Tensor<float> mask({T, T}, 0.0f);
  for (std::size_t i = 0; i < T; ++i)
    for (std::size_t j = i + 1; j < T; ++j) mask(i, j) = -std::numeric_limits<float>::infinity();
  for (auto _ : st) {
    Tape<float> tape;
    auto y = attention(tape.leaf(q), tape.leaf(k), tape.leaf(v), &mask, heads);
    auto loss = matmul(matmul(tape.constant(Tensor<float>({1, T}, 1.0f)), y),
                       tape.constant(Tensor<float>({width, 1}, 1.0f)));
    tape.backward(loss);
    benchmark::DoNotOptimize(tape.grad(y).data());
  }
}
BENCHMARK(BM_Attention)->Arg(64)->Arg(256);

}  // namespace
