#include <benchmark/benchmark.h>

#include <random>
#include <string>

#include "hmem/cluster/tree.hpp"
#include "hmem/embed/embedder.hpp"

using namespace hmem;

namespace {

void BM_EmbedText(benchmark::State& st) {
  embed::EmbedderConfig cfg;
  std::string text;
  for (int i = 0; i < st.range(0) / 8; ++i) text += "entity 17 ";
  for (auto _ : st) benchmark::DoNotOptimize(embed::embed_text(text, cfg).data());
  st.SetBytesProcessed(st.iterations() * static_cast<std::int64_t>(text.size()));
}
BENCHMARK(BM_EmbedText)->Arg(256)->Arg(4096);

// Greedy descent through a paper-shaped tree (p = 4, k = 16) of 384-dim centroids.
void BM_Assign(benchmark::State& st) {
  const std::uint32_t p = 4, k = 16, c = 384;
  cluster::ClusterTree tree(p, k, c);
  std::mt19937_64 rng(3);
  std::normal_distribution<float> nd;
  for (std::uint32_t l = 1; l <= p; ++l)
    for (std::uint32_t id = 1; id <= tree.nodes_at(l); ++id)
      for (auto& x : tree.centroid(l, id)) x = nd(rng);
  std::vector<float> v(c);
  for (auto& x : v) x = nd(rng);
  for (auto _ : st) benchmark::DoNotOptimize(tree.assign(v));
}
BENCHMARK(BM_Assign);

}  // namespace
