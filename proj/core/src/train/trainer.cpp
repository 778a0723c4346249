#include "hmem/train/trainer.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <numbers>
#include <sstream>

#include "hmem/common/binary_io.hpp"
#include "hmem/common/digest.hpp"
#include "hmem/common/ini.hpp"
#include "hmem/membank/bank_io.hpp"
#include "hmem/model/checkpoint.hpp"
#include "hmem/numcore/ops.hpp"

namespace hmem::train {

using numcore::Tensor;

std::string_view to_string(Regime r) {
  switch (r) {
    case Regime::FROZEN: return "frozen";
    case Regime::COTRAIN: return "cotrain";
    case Regime::SCRATCH: return "scratch";
  }
  return "?";
}

Regime parse_regime(std::string_view s) {
  std::string v(s);
  for (auto& c : v) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  for (auto r : {Regime::FROZEN, Regime::COTRAIN, Regime::SCRATCH})
    if (v == to_string(r)) return r;
  throw std::invalid_argument("unknown training regime '" + std::string(s) + "'");
}

void TrainConfig::validate() const {
  if (!(max_lr >= 0)) throw ConfigError("train.max_lr", "must be non-negative");
  if (!(min_lr >= 0) || min_lr > max_lr) throw ConfigError("train.min_lr", "must lie in [0, max_lr]");
  if (total_steps == 0) throw ConfigError("train.total_steps", "must be positive");
  if (warmup_steps > total_steps) throw ConfigError("train.warmup_steps", "must not exceed total_steps");
  if (batch_size == 0) throw ConfigError("train.batch_size", "must be positive");
  if (!(grad_clip > 0)) throw ConfigError("train.grad_clip", "must be positive");
  if (generic_prob > 1.0) throw ConfigError("train.generic_prob", "must lie in [0, 1]");
  if (!(adam.beta1 >= 0 && adam.beta1 < 1)) throw ConfigError("train.beta1", "must lie in [0, 1)");
  if (!(adam.beta2 >= 0 && adam.beta2 < 1)) throw ConfigError("train.beta2", "must lie in [0, 1)");
  if (anchor_weight_decay < 0) throw ConfigError("train.anchor_weight_decay", "must be non-negative");
  if (memory_weight_decay < 0) throw ConfigError("train.memory_weight_decay", "must be non-negative");
  if (!(memory_lr_scale > 0)) throw ConfigError("train.memory_lr_scale", "must be positive");
}

std::uint64_t TrainConfig::digest() const {
  Fnv1a64 h;
  h.update("train");
  for (double v : {max_lr, min_lr, anchor_weight_decay, memory_weight_decay, memory_lr_scale, grad_clip, adam.beta1,
                   adam.beta2, adam.eps, generic_prob})
    h.update_pod(v);
  for (std::uint64_t v : {warmup_steps, total_steps, static_cast<std::uint64_t>(batch_size), seed, checkpoint_every})
    h.update_pod(v);
  h.update(to_string(regime));
  return h.value();
}

TrainConfig TrainConfig::from_ini(const IniConfig& ini, const std::string& s) {
  TrainConfig c;
  auto u64 = [&](const char* key, std::uint64_t fb) {
    const auto v = ini.get_int(s, key, static_cast<std::int64_t>(fb));
    if (v < 0) throw ConfigError(s + "." + key, "must be non-negative");
    return static_cast<std::uint64_t>(v);
  };
  c.max_lr = ini.get_double(s, "max_lr", c.max_lr);
  c.min_lr = ini.get_double(s, "min_lr", c.min_lr);
  c.warmup_steps = u64("warmup_steps", c.warmup_steps);
  c.total_steps = u64("total_steps", c.total_steps);
  c.anchor_weight_decay = ini.get_double(s, "anchor_weight_decay", c.anchor_weight_decay);
  c.memory_weight_decay = ini.get_double(s, "memory_weight_decay", c.memory_weight_decay);
  c.memory_lr_scale = ini.get_double(s, "memory_lr_scale", c.memory_lr_scale);
  c.grad_clip = ini.get_double(s, "grad_clip", c.grad_clip);
  c.adam.beta1 = ini.get_double(s, "beta1", c.adam.beta1);
  c.adam.beta2 = ini.get_double(s, "beta2", c.adam.beta2);
  c.batch_size = u64("batch_size", c.batch_size);
  c.generic_prob = ini.get_double(s, "generic_prob", c.generic_prob);
  c.checkpoint_every = u64("checkpoint_every", c.checkpoint_every);
  c.seed = u64("seed", c.seed);
  try {
    c.regime = parse_regime(ini.get_string(s, "regime", "cotrain"));
  } catch (const std::invalid_argument& e) {
    throw ConfigError(s + ".regime", e.what());
  }
  c.validate();
  return c;
}

double cosine_lr(std::uint64_t step, const TrainConfig& cfg) {
  step = std::min(step, cfg.total_steps);
  if (cfg.warmup_steps > 0 && step < cfg.warmup_steps)
    return cfg.max_lr * static_cast<double>(step) / static_cast<double>(cfg.warmup_steps);
  const std::uint64_t decay = cfg.total_steps - cfg.warmup_steps;
  if (decay == 0) return cfg.max_lr;
  const double t = static_cast<double>(step - cfg.warmup_steps) / static_cast<double>(decay);
  return cfg.min_lr + 0.5 * (cfg.max_lr - cfg.min_lr) * (1.0 + std::cos(std::numbers::pi * t));
}

std::vector<bool> sample_memory_modes(std::size_t n, double generic_prob, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<bool> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = u(rng) < generic_prob;
  return out;
}

Trainer::Trainer(model::TransformerModel<float>& model, membank::MemoryBank* bank, TrainConfig cfg,
                 const std::vector<PackedSequence>& data)
    : model_(model), bank_(bank), cfg_(std::move(cfg)), data_(data) {
  cfg_.validate();
  if (data_.empty()) throw std::invalid_argument("Trainer: no training sequences");
  const auto L = data_.front().tokens.size();
  for (const auto& s : data_)
    if (s.tokens.size() != L) throw std::invalid_argument("Trainer: sequences have different lengths");
  if (L - 1 > model_.arch().context)
    throw std::invalid_argument("Trainer: sequence length " + std::to_string(L - 1) + " exceeds context " +
                                std::to_string(model_.arch().context));
  if (bank_ && bank_->config().digest() != model_.memory_config().digest())
    throw std::invalid_argument("Trainer: bank and model memory configurations differ");
  if (cfg_.regime != Regime::FROZEN) anchor_grads_ = model_.make_grads();
}

std::vector<std::size_t> Trainer::batch_indices(std::uint64_t step) {
  const std::size_t N = data_.size();
  std::vector<std::size_t> out;
  out.reserve(cfg_.batch_size);
  for (std::size_t j = 0; j < cfg_.batch_size; ++j) {
    const std::uint64_t pos = (step - 1) * cfg_.batch_size + j;
    const std::uint64_t epoch = pos / N;
    if (epoch != perm_epoch_) {
      perm_.resize(N);
      for (std::size_t i = 0; i < N; ++i) perm_[i] = i;
      std::mt19937_64 rng(derive_seed(cfg_.seed, 0x65706f6368ull, epoch));
      std::shuffle(perm_.begin(), perm_.end(), rng);
      perm_epoch_ = epoch;
    }
    out.push_back(perm_[pos % N]);
  }
  return out;
}

std::vector<bool> Trainer::memory_modes(std::uint64_t step) const {
  if (!bank_ || bank_->config().empty()) return std::vector<bool>(cfg_.batch_size, false);
  std::mt19937_64 rng(derive_seed(cfg_.seed, 0x6d6f6465ull, step));
  return sample_memory_modes(cfg_.batch_size, cfg_.generic_probability(bank_->branching()), rng);
}

StepMetrics Trainer::step() {
  const std::uint64_t s = step_ + 1;
  StepMetrics m;
  m.step = s;
  m.lr = cosine_lr(s, cfg_);
  const auto batch = batch_indices(s);
  const auto modes = memory_modes(s);
  const bool use_memory = bank_ && !bank_->config().empty();
  const bool train_anchor = cfg_.regime != Regime::FROZEN;

  for (auto& g : anchor_grads_) std::fill(g.data().begin(), g.data().end(), 0.0f);
  std::map<std::pair<std::uint32_t, std::uint32_t>, std::vector<float>> block_grads;
  std::vector<float> generic_grad;

  std::vector<std::vector<std::int32_t>> targets(batch.size());
  std::size_t total = 0;
  for (std::size_t j = 0; j < batch.size(); ++j) {
    targets[j] = data_[batch[j]].targets();
    total += static_cast<std::size_t>(std::count_if(targets[j].begin(), targets[j].end(), [](auto t) { return t >= 0; }));
  }
  const std::size_t L = data_.front().tokens.size();
  m.tokens_seen = s * cfg_.batch_size * L;
  if (total == 0) {
    step_ = s;
    return m;
  }

  double sum_all = 0, sum_f = 0, sum_g = 0;
  std::size_t cnt_f = 0, cnt_g = 0;
  for (std::size_t j = 0; j < batch.size(); ++j) {
    const auto& seq = data_[batch[j]];
    const std::size_t count = static_cast<std::size_t>(
        std::count_if(targets[j].begin(), targets[j].end(), [](auto t) { return t >= 0; }));
    if (count == 0) continue;
    model::MemoryBinding<float> binding;
    if (use_memory) {
      const bool generic = modes[j];
      const auto fetched = generic ? bank_->fetch_generic() : bank_->fetch(seq.index);
      binding.values = fetched.blocks;
      binding.grads.resize(fetched.blocks.size());
      if (generic && generic_grad.empty()) generic_grad.assign(bank_->accounting().fetch_size, 0.0f);
      for (std::uint32_t l = 1; l <= bank_->depth(); ++l) {
        const auto sz = bank_->block_size(l);
        if (sz == 0) continue;
        if (generic) {
          binding.grads[l - 1] = std::span<float>(generic_grad).subspan(bank_->generic_offset(l), sz);
        } else {
          auto& g = block_grads[{l, seq.index[l - 1]}];
          if (g.empty()) g.assign(sz, 0.0f);
          binding.grads[l - 1] = g;
        }
      }
      (generic ? m.n_generic : m.n_fetched) += 1;
    }
    numcore::Tape<float> tape;
    auto logits = model_.forward(tape, seq.inputs(), seq.input_doc_ids(), use_memory ? &binding : nullptr,
                                 train_anchor ? &anchor_grads_ : nullptr);
    auto nll = numcore::nll_sum(logits, targets[j]);
    const double v = nll.item();
    if (!std::isfinite(v)) {
      m.aborted = true;
      break;
    }
    sum_all += v;
    if (use_memory && modes[j]) {
      sum_g += v;
      cnt_g += count;
    } else {
      sum_f += v;
      cnt_f += count;
    }
    tape.backward(numcore::scale(nll, 1.0f / static_cast<float>(total)));
  }
  step_ = s;
  if (m.aborted) return m;
  m.loss = sum_all / static_cast<double>(total);
  if (cnt_f) m.loss_fetched = sum_f / static_cast<double>(cnt_f);
  if (cnt_g) m.loss_generic = sum_g / static_cast<double>(cnt_g);

  double sq = 0;
  auto acc = [&](std::span<const float> g) {
    for (float x : g) sq += static_cast<double>(x) * x;
  };
  for (const auto& g : anchor_grads_) acc(g.data());
  for (const auto& [key, g] : block_grads) acc(g);
  acc(generic_grad);
  m.grad_norm = std::sqrt(sq);
  if (!std::isfinite(m.grad_norm)) {
    m.aborted = true;
    return m;
  }
  const double clip = m.grad_norm > cfg_.grad_clip ? cfg_.grad_clip / m.grad_norm : 1.0;

  if (train_anchor) {
    auto& params = model_.params();
    for (std::size_t i = 0; i < params.size(); ++i) {
      if (params[i].value.numel() == 0) continue;
      adamw_update(params[i].value.data(), anchor_grads_[i].data(), opt_.anchor(i), m.lr,
                   params[i].decay ? cfg_.anchor_weight_decay : 0.0, cfg_.adam, clip);
    }
  }
  const double mem_lr = m.lr * cfg_.memory_lr_scale;
  for (const auto& [key, g] : block_grads) {
    adamw_update(bank_->block(key.first, key.second), g, opt_.block(key.first, key.second), mem_lr,
                 cfg_.memory_weight_decay, cfg_.adam, clip);
    ++bank_->update_counts(key.first)[key.second - 1];
    m.touched.push_back(key);
  }
  if (!generic_grad.empty()) {
    adamw_update(bank_->generic(), generic_grad, opt_.generic(), mem_lr, cfg_.memory_weight_decay, cfg_.adam, clip);
    ++bank_->generic_updates();
    m.touched.emplace_back(0, 0);
  }
  return m;
}

void Trainer::save_state(const std::string& path, std::uint64_t config_digest) const {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("save_state: cannot open " + path);
  BinaryWriter w(f);
  w.put_bytes("HMTS");
  w.put<std::uint32_t>(1);
  w.put<std::uint64_t>(step_);
  w.put<std::uint64_t>(cfg_.digest());
  model::CheckpointHeader h;
  h.arch = model_.arch();
  h.mem = model_.memory_config();
  h.step = step_;
  h.config_digest = config_digest;
  model::write_model(f, model_, h);
  w.put<std::uint8_t>(bank_ != nullptr);
  if (bank_) {
    const auto bytes = membank::serialize_bank(*bank_);
    w.put<std::uint64_t>(bytes.size());
    w.put_bytes(bytes);
  }
  opt_.write(f);
  f.flush();
  if (!f) throw std::runtime_error("save_state: write failed for " + path);
}

void Trainer::load_state(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("load_state: cannot open " + path);
  BinaryReader r(f, "training state");
  if (r.get_bytes(4) != "HMTS") throw FormatError("training state: bad magic");
  if (r.get<std::uint32_t>() != 1) throw FormatError("training state: unsupported version");
  const auto step = r.get<std::uint64_t>();
  const auto digest = r.get<std::uint64_t>();
  if (digest != cfg_.digest()) throw FormatError("training state: produced with a different training configuration");
  auto loaded = model::read_model(f);
  if (loaded.arch().digest() != model_.arch().digest())
    throw FormatError("training state: anchor architecture differs");
  model_.copy_from(loaded);
  const bool has_bank = r.get<std::uint8_t>() != 0;
  if (has_bank != (bank_ != nullptr)) throw FormatError("training state: memory bank presence differs");
  if (has_bank) {
    const auto n = r.get<std::uint64_t>();
    const auto bytes = r.get_bytes(n);
    auto bank = membank::deserialize_bank(bytes);
    *bank_ = std::move(bank);
  }
  opt_.read(f);
  step_ = step;
}

RunResult train_run(model::TransformerModel<float>& model, membank::MemoryBank* bank, const TrainConfig& cfg,
                    const std::vector<PackedSequence>& data, const std::string& out_dir,
                    const std::string& resume_state, std::uint64_t config_digest,
                    const std::function<void(const StepMetrics&)>& on_step) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  Trainer trainer(model, bank, cfg, data);
  if (!resume_state.empty()) trainer.load_state(resume_state);
  const auto csv_path = (fs::path(out_dir) / "metrics.csv").string();
  const bool append = !resume_state.empty() && fs::exists(csv_path);
  std::ofstream csv(csv_path, append ? std::ios::app : std::ios::trunc);
  if (!csv) throw std::runtime_error("train_run: cannot write " + csv_path);
  if (!append) csv << "step,lr,loss_fetched,loss_generic,tokens_seen\n";
  csv.precision(9);
  RunResult res;
  while (trainer.current_step() < cfg.total_steps) {
    auto m = trainer.step();
    csv << m.step << ',' << m.lr << ',';
    if (std::isfinite(m.loss_fetched)) csv << m.loss_fetched;
    csv << ',';
    if (std::isfinite(m.loss_generic)) csv << m.loss_generic;
    csv << ',' << m.tokens_seen << '\n';
    if (on_step) on_step(m);
    if (cfg.checkpoint_every && m.step % cfg.checkpoint_every == 0) {
      const auto p = (fs::path(out_dir) / ("state-" + std::to_string(m.step) + ".bin")).string();
      trainer.save_state(p, config_digest);
      res.checkpoints.push_back(p);
    }
    m.touched.clear();
    res.metrics.push_back(std::move(m));
  }
  csv.flush();
  if (!csv) throw std::runtime_error("train_run: failed writing " + csv_path);
  return res;
}

}  // namespace hmem::train
