#include <benchmark/benchmark.h>

#include <random>

#include "hmem/membank/bank.hpp"
#include "hmem/model/transformer.hpp"
#include "hmem/numcore/ops.hpp"

using namespace hmem;

namespace {

model::AnchorConfig desk_arch() {
  model::AnchorConfig a;
  a.layers = 4, a.d = 128, a.heads = 4, a.head_dim = 32, a.ffn_dim = 512, a.context = 256;
  return a;
}

std::vector<std::uint32_t> random_tokens(std::size_t n) {
  std::mt19937_64 rng(1);
  std::vector<std::uint32_t> t(n);
  for (auto& x : t) x = static_cast<std::uint32_t>(rng() % 256);
  return t;
}

void BM_Forward(benchmark::State& st) {
  model::TransformerModel<float> m(desk_arch(), {});
  m.init(1);
  const auto t = random_tokens(static_cast<std::size_t>(st.range(0)));
  for (auto _ : st) benchmark::DoNotOptimize(m.logits(t).data().data());
  st.SetItemsProcessed(st.iterations() * st.range(0));
}
BENCHMARK(BM_Forward)->Arg(64)->Arg(256)->Unit(benchmark::kMillisecond);

// One sequence of a memory-training step: forward with fetched FFN memory, backward
// into the memory blocks only.
void BM_MemoryStep(benchmark::State& st) {
  model::MemoryConfig mc;
  mc.multipliers = {64, 32};
  const auto a = desk_arch();
  model::TransformerModel<float> m(a, mc);
  m.init(1);
  const auto bank = membank::init_bank(mc, a, 4, 2);
  const auto fetched = bank.fetch({2, 7});
  std::vector<std::vector<float>> grads;
  model::MemoryBinding<float> binding;
  for (const auto& b : fetched.blocks) {
    grads.emplace_back(b.size(), 0.0f);
    binding.values.push_back(b);
  }
  for (auto& g : grads) binding.grads.emplace_back(g);
  const auto t = random_tokens(256);
  std::vector<std::int32_t> targets(t.begin() + 1, t.end());
  targets.push_back(-1);
  for (auto _ : st) {
    numcore::Tape<float> tape;
    auto logits = m.forward(tape, t, {}, &binding, nullptr);
    tape.backward(numcore::cross_entropy(logits, std::span<const std::int32_t>(targets)));
    benchmark::DoNotOptimize(grads[0].data());
  }
}
BENCHMARK(BM_MemoryStep)->Unit(benchmark::kMillisecond);

}  // namespace
