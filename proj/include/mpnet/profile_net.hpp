#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "mpnet/checkpoint.hpp"
#include "mpnet/config.hpp"
#include "mpnet/heatmap.hpp"
#include "mpnet/nn.hpp"
#include "mpnet/synth.hpp"

namespace mp {

// The conv stack always flattens to this width regardless of input channels.
inline constexpr int kBranchWidth = 512;

struct ProfileNetShape {
  int channels_a = 4;  // shopping heatmap channels
  int channels_b = 2;  // point-usage heatmap channels
  int demo_in = 13;    // numerics + one-hots + modality presence flags
  int demo_hidden = 32;
  int demo_out = 64;
  int profile_width = 512;  // E, the embedding width
  int num_tasks = 9;        // source-task heads

  static ProfileNetShape make(const NetworkConfig& net, int channels_a, int channels_b,
                              int num_source_tasks);
  void validate() const;
};

// One modality branch: four blocks of conv + batch norm + ReLU + max pool,
// then flatten. Input (B, 365, 24, C) -> output (B, 512) with intermediate
// shapes (B,365,24,64) -> (B,52,12,64) -> ... -> (B,1,1,512).
template <class T>
struct BranchCnn {
  std::array<nn::Conv2d<T>, 4> conv;
  std::array<nn::BatchNorm<T>, 4> bn;
  std::array<nn::MaxPool2d<T>, 4> pool;

  void configure(const std::string& prefix, int in_channels);
  void init_params(Rng& rng);
  std::vector<nn::Param<T>*> params();

  Tensor<T> forward(const Tensor<T>& x, nn::Mode mode);
  // dy (B, 512); accumulates parameter grads, returns grad w.r.t. the input.
  Tensor<T> backward(const Tensor<T>& dy);

  void collect_bn_stats(std::vector<CheckpointEntry>& out) const;
  void load_bn_stats(const std::vector<CheckpointEntry>& entries);

 private:
  std::array<Tensor<T>, 4> relu_y_;
  std::vector<int> pre_flatten_shape_;
};

// g: two heatmap branches plus a demographic MLP, fused into one embedding,
// with per-task sigmoid heads for multi-task pretraining.
template <class T>
struct ProfileNet {
  ProfileNetShape shape;
  BranchCnn<T> branch_a, branch_b;
  nn::Dense<T> demo1, demo2;
  nn::Dense<T> fusion;  // concat(512 + 512 + demo_out) -> E
  nn::Dense<T> heads;   // E -> num_tasks

  void configure(const ProfileNetShape& s);
  void init_params(std::uint64_t seed);
  std::vector<nn::Param<T>*> params();
  std::vector<nn::Param<T>*> backbone_params();  // everything except heads
  std::int64_t param_count();
  void set_backbone_lr_scale(T scale);
  void zero_grads();

  Tensor<T> forward_embedding(const Tensor<T>& heat_a, const Tensor<T>& heat_b,
                              const Tensor<T>& demo, nn::Mode mode);
  Tensor<T> forward_heads(const Tensor<T>& embedding);  // (B, E) -> (B, N)
  // Grad of the head logits; returns grad w.r.t. the embedding.
  Tensor<T> backward_heads(const Tensor<T>& dlogits);
  // Backprop an embedding grad through fusion and all three input branches;
  // input grads are discarded.
  void backward_embedding(const Tensor<T>& demb);

  std::vector<CheckpointEntry> state();  // params + BN running stats
  void load_state(const std::vector<CheckpointEntry>& entries);

 private:
  Tensor<T> demo_y1_, demo_y2_, fus_y_, concat_;
};

// Weighted multi-task BCE over task heads: each task's per-sample losses are
// normalized by that task's observed-label count in the batch; a task with no
// observed labels contributes exactly zero. grad may be null.
template <class T>
T multitask_loss(const Tensor<T>& logits, const Tensor<T>& labels, const Tensor<T>& weights,
                 Tensor<T>* grad);

// ---------------------------------------------------------------------------
// Per-user model inputs, kept sparse and densified per batch.
// ---------------------------------------------------------------------------

struct UserTensorBank {
  ChannelSpec spec_a, spec_b;
  std::vector<bool> log1p_a, log1p_b;  // per-channel transform flags
  std::vector<SparseHeatmap> heat_a, heat_b;
  std::vector<std::vector<float>> demo_rows;
  std::vector<std::int64_t> user_ids;
  std::map<std::int64_t, int> row_of;
  // standardization stats for the numeric demo features, frozen at build time
  std::vector<double> demo_mean, demo_sd;

  int demo_width() const;
  int row(std::int64_t user_id) const;
};

UserTensorBank build_tensor_bank(const Cohort& cohort);
// Adds more users (e.g. the OOD pool) reusing the bank's frozen demo stats.
void append_users(UserTensorBank& bank, const std::vector<UserData>& users);

// Rebuilds a bank from already-encoded artifacts; bit-identical to the
// build/append path fed the same data. Demo standardization stats come from
// the first stats_rows entries (the in-distribution cohort); demos[i] must
// carry the same user id as user_ids[i].
UserTensorBank assemble_tensor_bank(const ChannelSpec& spec_a, const ChannelSpec& spec_b,
                                    const std::vector<std::int64_t>& user_ids,
                                    std::vector<SparseHeatmap> heat_a,
                                    std::vector<SparseHeatmap> heat_b,
                                    const std::vector<DemographicRecord>& demos, int stats_rows);

// Densifies the given bank rows into batch tensors, applying per-channel
// log1p transforms. Output tensors are reallocated only on shape change.
void fill_batch(const UserTensorBank& bank, const std::vector<int>& rows, Tensor<float>* heat_a,
                Tensor<float>* heat_b, Tensor<float>* demo);

// ---------------------------------------------------------------------------
// Stage 1: multi-task pretraining of g on the source tasks.
// ---------------------------------------------------------------------------

struct TrainLogRow {
  long long step = 0;
  double lr = 0;
  double loss = 0;
};

struct PretrainResult {
  std::vector<TrainLogRow> log;
};

nn::LrSchedule make_schedule(const std::string& kind, double base_lr, double max_lr,
                             long long step_size, long long t0, double t_mult);

// labels rows must align with bank rows; the first shape.num_tasks columns are
// the source tasks. Batches follow a seeded per-epoch shuffle of train_rows.
PretrainResult train_multitask(ProfileNet<float>& net, const UserTensorBank& bank,
                               const LabelMatrix& labels, const std::vector<int>& train_rows,
                               const PretrainConfig& cfg, std::uint64_t seed);

void write_train_log(const std::string& path, const std::vector<TrainLogRow>& rows);

}  // namespace mp
