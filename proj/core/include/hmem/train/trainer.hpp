#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "hmem/membank/bank.hpp"
#include "hmem/model/transformer.hpp"
#include "hmem/train/optimizer.hpp"
#include "hmem/train/packing.hpp"

namespace hmem {
class IniConfig;
}

namespace hmem::train {

/// FROZEN: anchor fixed, memories learn. COTRAIN: both learn from a given anchor.
/// SCRATCH: both learn from a freshly initialized anchor.
enum class Regime { FROZEN, COTRAIN, SCRATCH };
std::string_view to_string(Regime r);
Regime parse_regime(std::string_view s);

struct TrainConfig {
  double max_lr = 1e-4;
  double min_lr = 1e-5;
  std::uint64_t warmup_steps = 0;
  std::uint64_t total_steps = 100;
  double anchor_weight_decay = 0.1;
  double memory_weight_decay = 1e-3;
  /// Memory blocks use lr * memory_lr_scale.
  double memory_lr_scale = 1.0;
  double grad_clip = 1.0;
  AdamWParams adam;
  std::size_t batch_size = 8;
  /// Negative means 1/(k+1).
  double generic_prob = -1.0;
  Regime regime = Regime::COTRAIN;
  std::uint64_t seed = 0;
  std::uint64_t checkpoint_every = 0;

  double generic_probability(std::uint32_t k) const { return generic_prob >= 0 ? generic_prob : 1.0 / (k + 1.0); }
  void validate() const;
  std::uint64_t digest() const;
  static TrainConfig from_ini(const IniConfig& ini, const std::string& section = "train");
};

/// Linear warmup from 0 to max_lr over warmup_steps, then cosine decay to min_lr at total_steps.
double cosine_lr(std::uint64_t step, const TrainConfig& cfg);

/// Per-sequence draws: true means the generic memory is used.
std::vector<bool> sample_memory_modes(std::size_t n, double generic_prob, std::mt19937_64& rng);

struct StepMetrics {
  std::uint64_t step = 0;
  double lr = 0;
  double loss = std::numeric_limits<double>::quiet_NaN();
  double loss_fetched = std::numeric_limits<double>::quiet_NaN();
  double loss_generic = std::numeric_limits<double>::quiet_NaN();
  std::uint64_t tokens_seen = 0;
  std::size_t n_fetched = 0, n_generic = 0;
  double grad_norm = 0;
  bool aborted = false;
  /// Bank blocks that received an update this step, as (level, id); id 0 is generic.
  std::vector<std::pair<std::uint32_t, std::uint32_t>> touched;
};

/// Single-worker trainer. Step s (1-based) uses batch positions (s-1)*B .. s*B-1 of an
/// endless stream of per-epoch shuffles of `data`; all randomness derives from (seed, s),
/// so a restored state continues bit-identically.
class Trainer {
 public:
  Trainer(model::TransformerModel<float>& model, membank::MemoryBank* bank, TrainConfig cfg,
          const std::vector<PackedSequence>& data);

  StepMetrics step();
  std::uint64_t current_step() const noexcept { return step_; }
  const TrainConfig& config() const noexcept { return cfg_; }
  SparseOptimizer& optimizer() noexcept { return opt_; }

  std::vector<std::size_t> batch_indices(std::uint64_t step);
  std::vector<bool> memory_modes(std::uint64_t step) const;

  /// Model, bank, optimizer state and step counter in one file.
  void save_state(const std::string& path, std::uint64_t config_digest = 0) const;
  void load_state(const std::string& path);

 private:
  model::TransformerModel<float>& model_;
  membank::MemoryBank* bank_;
  TrainConfig cfg_;
  const std::vector<PackedSequence>& data_;
  SparseOptimizer opt_;
  std::uint64_t step_ = 0;
  std::uint64_t perm_epoch_ = std::numeric_limits<std::uint64_t>::max();
  std::vector<std::size_t> perm_;
  std::vector<numcore::Tensor<float>> anchor_grads_;
};

struct RunResult {
  std::vector<StepMetrics> metrics;
  std::vector<std::string> checkpoints;
};

/// Runs the trainer to cfg.total_steps. Writes `metrics.csv` (step, lr, loss_fetched,
/// loss_generic, tokens_seen) and, every checkpoint_every steps, `state-<step>.bin` into
/// out_dir. When `resume_state` is non-empty the trainer first restores it.
RunResult train_run(model::TransformerModel<float>& model, membank::MemoryBank* bank, const TrainConfig& cfg,
                    const std::vector<PackedSequence>& data, const std::string& out_dir,
                    const std::string& resume_state = "", std::uint64_t config_digest = 0,
                    const std::function<void(const StepMetrics&)>& on_step = {});

}  // namespace hmem::train
