#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mpnet/profile_net.hpp"

namespace mp {

// f: dense stack scoring a concatenated (query, support) embedding pair.
template <class T>
struct SimilarityNet {
  nn::Dense<T> fc1, fc2, fc3;  // 2E -> h1 -> h2 -> 1

  void configure(int pair_width, int hidden1, int hidden2);
  void init_params(Rng& rng);
  std::vector<nn::Param<T>*> params();

  Tensor<T> forward(const Tensor<T>& pairs);    // (M, 2E) -> (M, 1)
  Tensor<T> backward(const Tensor<T>& dscore);  // (M, 1) -> (M, 2E)

 private:
  Tensor<T> y1_, y2_;
};

// g + f. Heads of the backbone exist but take no part in episodic training.
template <class T>
struct MetaModel {
  ProfileNet<T> backbone;
  SimilarityNet<T> sim;

  void configure(const ProfileNetShape& shape, const NetworkConfig& net);
  void init_params(std::uint64_t seed);
  // backbone (without heads) + similarity parameters, fixed order
  std::vector<nn::Param<T>*> params();
  std::vector<CheckpointEntry> state();
  void load_state(const std::vector<CheckpointEntry>& entries);
};

// ---------------------------------------------------------------------------
// Episodes
// ---------------------------------------------------------------------------

struct Episode {
  int way = 0, shot = 0;
  // support is class-major: K items of class 0, then K of class 1, ...
  std::vector<int> support_rows, support_cls;
  std::vector<int> query_rows, query_cls;
};

// class_pools[c] = candidate rows of class c; pools must be pairwise disjoint.
// Draws K support per class, then query_size queries uniformly from the
// remaining pooled rows. Errors name the short class.
Episode sample_episode(const std::vector<std::vector<int>>& class_pools, int shot, int query_size,
                       std::uint64_t seed);

// Episode classes for meta-training: class n = observed positives of column
// class_tasks[n]. A row positive in several columns is assigned to one of
// them uniformly, so pools come out disjoint.
std::vector<std::vector<int>> assign_task_classes(const LabelMatrix& labels,
                                                  const std::vector<int>& rows,
                                                  const std::vector<int>& class_tasks,
                                                  std::uint64_t seed);

// ---------------------------------------------------------------------------
// Attention readout over support scores
// ---------------------------------------------------------------------------

// scores (M, S) -> class probabilities (M, way) via row softmax and summing
// attention mass per support class.
template <class T>
Tensor<T> attention_predict(const Tensor<T>& scores, const std::vector<int>& support_cls, int way);

// Mean cross-entropy of attention_predict against query classes; grad_scores
// (optional) gets dL/dscores.
template <class T>
double attention_ce(const Tensor<T>& scores, const std::vector<int>& support_cls, int way,
                    const std::vector<int>& query_cls, Tensor<T>* grad_scores);

// Single-query convenience wrapper: class distribution for one embedding.
template <class T>
std::vector<double> predict_query(const Tensor<T>& q_embed, const Tensor<T>& s_embeds,
                                  const std::vector<int>& support_cls, int way,
                                  SimilarityNet<T>& sim);

// ---------------------------------------------------------------------------
// Batched inference helpers
// ---------------------------------------------------------------------------

// Inference-mode embeddings for bank rows, processed in fixed-size batches.
Tensor<float> embed_rows(ProfileNet<float>& net, const UserTensorBank& bank,
                         const std::vector<int>& rows, int batch = 64);

// Class probabilities (M, way) for query embeddings against a support set.
Tensor<float> attention_probs(SimilarityNet<float>& sim, const Tensor<float>& support_embs,
                              const std::vector<int>& support_cls, int way,
                              const Tensor<float>& query_embs);

// ---------------------------------------------------------------------------
// Stage 2: episodic training, scoring, and the from-scratch baseline
// ---------------------------------------------------------------------------

struct MetaTrainResult {
  std::vector<TrainLogRow> log;            // step,lr,loss
  std::vector<double> episode_accuracy;    // per episode
  std::vector<std::string> trace_lines;    // JSONL, when tracing enabled
};

// Episodic training over the source tasks (columns [0, num_tasks) of labels).
// Backbone fine-tunes at cfg.backbone_lr_scale of the step LR.
MetaTrainResult meta_train(MetaModel<float>& model, const UserTensorBank& bank,
                           const LabelMatrix& labels, const std::vector<int>& train_rows,
                           const MetaConfig& cfg, std::uint64_t seed);

// Post-training episodic accuracy on freshly sampled episodes (infer mode).
double episodic_accuracy(MetaModel<float>& model, const UserTensorBank& bank,
                         const LabelMatrix& labels, const std::vector<int>& rows, int shot,
                         int query_size, int episodes, std::uint64_t seed);

// Feed-forward scoring of predict_rows against a binary support set; returns
// the positive-class probability per row. No parameter writes.
std::vector<double> meta_test(MetaModel<float>& model, const UserTensorBank& bank,
                              const std::vector<int>& support_rows,
                              const std::vector<int>& support_cls,
                              const std::vector<int>& predict_rows);

struct BaselineConfig {
  int steps = 36;
  int shot = 1;
  int query_size = 16;
  std::string schedule = "cosine_warm_restarts";
  double lr_max = 1e-3;
  int t0 = 20;
  double t_mult = 2.0;
};

// The control arm: a freshly initialized MetaModel trained with 2-way
// episodes on the given labeled rows only. Episodes needing more data than
// available shrink the query size; with no queries available the model stays
// at initialization. Returns the trained model for scoring.
MetaModel<float> baseline_train_from_scratch(const ProfileNetShape& shape,
                                             const NetworkConfig& net,
                                             const UserTensorBank& bank,
                                             const std::vector<int>& pos_rows,
                                             const std::vector<int>& neg_rows,
                                             const BaselineConfig& cfg, std::uint64_t seed);

// scores CSV: user_id,score,label
void write_scores_csv(const std::string& path, const std::vector<std::int64_t>& user_ids,
                      const std::vector<double>& scores, const std::vector<int>& labels);

}  // namespace mp
