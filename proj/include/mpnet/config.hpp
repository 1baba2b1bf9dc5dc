#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mpnet/synth.hpp"

namespace mp {

// Widths of the free parts of the network. The conv stack per modality is
// fixed (it always flattens to 512); these knobs size the demographic subnet,
// the fused profile embedding and the similarity stack.
struct NetworkConfig {
  int demo_hidden = 32;
  int demo_out = 64;
  int profile_width = 512;
  int sim_hidden1 = 128;
  int sim_hidden2 = 64;

  void validate() const;
};

struct PretrainConfig {
  int epochs = 8;
  int batch = 32;
  std::string schedule = "cyclic_triangular";  // constant | cyclic_triangular | cosine_warm_restarts
  double base_lr = 1e-4;
  double max_lr = 1e-3;
  int step_size = 0;  // 0 = auto: 2 * floor(train_users / batch)
  int log_every = 10;

  void validate() const;
};

struct MetaConfig {
  int episodes = 120;
  int shot = 1;        // K; way N is always the number of source tasks
  int query_size = 32;
  std::string schedule = "cosine_warm_restarts";
  double lr_max = 1e-3;
  int t0 = 20;
  double t_mult = 2.0;
  double backbone_lr_scale = 0.1;  // fine-tune g at a fraction of f's LR
  bool trace = false;              // per-episode JSONL trace

  void validate() const;
};

struct EvaluateConfig {
  std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};
  int shot = 1;
  // D_predict is split into an adaptation part (baseline training data /
  // support-set pool) and a fixed scoring part.
  double adapt_fraction = 0.5;
  bool ood = true;
  bool masking = true;
  bool imbalance = true;
  std::vector<double> masking_fractions = {1.0, 0.8, 0.6, 0.4, 0.2, 0.05, 0.03, 0.01, 0.005};
  std::vector<double> imbalance_ratios = {0.5, 1, 2, 4, 8, 16, 32};
  int ma_period = 2;
  int baseline_steps = 36;   // from-scratch episodes per baseline cell
  int baseline_query = 16;   // query batch during baseline training
  // Task budgets: the OOD sweep always covers every target task; masking and
  // imbalance sweeps take the first k tasks (0 = all) to bound runtime.
  int masking_tasks = 2;
  int imbalance_tasks = 2;

  void validate() const;
};

struct PipelineConfig {
  std::uint64_t seed = 1;
  std::string out_dir = "runs/out";
  int threads = 1;
  SplitFractions split;
  CohortConfig cohort;
  NetworkConfig network;
  PretrainConfig pretrain;
  MetaConfig meta;
  EvaluateConfig evaluate;

  void validate() const;
  std::string to_json_text() const;
  // origin names the source (a path) for error messages. Unknown keys are
  // rejected so config typos surface instead of silently using defaults.
  static PipelineConfig from_json_text(const std::string& text, const std::string& origin);
  static PipelineConfig load(const std::string& path);
  // Hash of the canonical serialization; equal configs hash equal regardless
  // of key order or whitespace in the source file.
  std::string canonical_hash() const;
};

}  // namespace mp
