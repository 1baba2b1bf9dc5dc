#include "mpnet/meta.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <set>

#include <nlohmann/json.hpp>

#include "mpnet/common.hpp"

namespace mp {

namespace {

enum : std::uint64_t {
  kTagSimInit = 31,
  kTagEpisode = 32,
  kTagEvalEpisode = 33,
  kTagBaselineInit = 34,
  kTagBaselineEpisode = 35,
  kTagAssign = 36,
  kTagDraw = 37,
};

}  // namespace

// ---------------------------------------------------------------------------
// SimilarityNet
// ---------------------------------------------------------------------------

template <class T>
void SimilarityNet<T>::configure(int pair_width, int hidden1, int hidden2) {
  if (pair_width < 1 || hidden1 < 1 || hidden2 < 1)
    fail(Errc::invalid_argument, "similarity: widths must be >= 1");
  fc1.configure("sim.fc1", pair_width, hidden1);
  fc2.configure("sim.fc2", hidden1, hidden2);
  fc3.configure("sim.fc3", hidden2, 1);
}

template <class T>
void SimilarityNet<T>::init_params(Rng& rng) {
  fc1.init_params(rng);
  fc2.init_params(rng);
  fc3.init_params(rng);
}

template <class T>
std::vector<nn::Param<T>*> SimilarityNet<T>::params() {
  std::vector<nn::Param<T>*> out;
  for (auto* p : fc1.params()) out.push_back(p);
  for (auto* p : fc2.params()) out.push_back(p);
  for (auto* p : fc3.params()) out.push_back(p);
  return out;
}

template <class T>
Tensor<T> SimilarityNet<T>::forward(const Tensor<T>& pairs) {
  y1_ = nn::relu_forward(fc1.forward(pairs));
  y2_ = nn::relu_forward(fc2.forward(y1_));
  return fc3.forward(y2_);
}

template <class T>
Tensor<T> SimilarityNet<T>::backward(const Tensor<T>& dscore) {
  Tensor<T> d2 = nn::relu_backward(fc3.backward(dscore), y2_);
  Tensor<T> d1 = nn::relu_backward(fc2.backward(d2), y1_);
  return fc1.backward(d1);
}

// ---------------------------------------------------------------------------
// MetaModel
// ---------------------------------------------------------------------------

template <class T>
void MetaModel<T>::configure(const ProfileNetShape& shape, const NetworkConfig& net) {
  backbone.configure(shape);
  sim.configure(2 * shape.profile_width, net.sim_hidden1, net.sim_hidden2);
}

template <class T>
void MetaModel<T>::init_params(std::uint64_t seed) {
  backbone.init_params(seed);
  Rng srng(derive_seed(seed, kTagSimInit));
  sim.init_params(srng);
}

template <class T>
std::vector<nn::Param<T>*> MetaModel<T>::params() {
  std::vector<nn::Param<T>*> out = backbone.backbone_params();
  for (auto* p : sim.params()) out.push_back(p);
  return out;
}

template <class T>
std::vector<CheckpointEntry> MetaModel<T>::state() {
  std::vector<CheckpointEntry> out = backbone.state();
  for (auto* p : sim.params()) out.push_back({p->name, p->value.template cast<float>()});
  return out;
}

template <class T>
void MetaModel<T>::load_state(const std::vector<CheckpointEntry>& entries) {
  backbone.load_state(entries);
  for (auto* p : sim.params()) {
    const Tensor<float>* t = find_entry(entries, p->name);
    if (!t) fail(Errc::invalid_argument, "checkpoint missing tensor: ", p->name);
    if (t->shape != p->value.shape)
      fail(Errc::invalid_argument, "checkpoint tensor ", p->name, " has shape ", shape_str(*t),
           ", expected ", shape_str(p->value));
    p->value = t->template cast<T>();
  }
}

// ---------------------------------------------------------------------------
// Episodes
// ---------------------------------------------------------------------------

Episode sample_episode(const std::vector<std::vector<int>>& class_pools, int shot, int query_size,
                       std::uint64_t seed) {
  const int way = static_cast<int>(class_pools.size());
  if (way < 2) fail(Errc::invalid_argument, "episode: need at least 2 classes, got ", way);
  if (shot < 1) fail(Errc::invalid_argument, "episode: shot must be >= 1");
  if (query_size < 0) fail(Errc::invalid_argument, "episode: query_size must be >= 0");
  {
    std::set<int> seen;
    for (const auto& pool : class_pools)
      for (int r : pool)
        if (!seen.insert(r).second)
          fail(Errc::invalid_argument, "episode: row ", r, " appears in two class pools");
  }

  Episode ep;
  ep.way = way;
  ep.shot = shot;
  Rng rng(derive_seed(seed, kTagDraw));
  std::vector<std::pair<int, int>> remaining;  // (row, cls)
  for (int c = 0; c < way; ++c) {
    const auto& pool = class_pools[static_cast<std::size_t>(c)];
    const int n = static_cast<int>(pool.size());
    if (n < shot)
      fail(Errc::invalid_argument, "episode: class ", c, " has ", n, " candidates, need ", shot,
           " support shots");
    const auto picks = rng.sample_without_replacement(n, shot);
    std::vector<char> taken(static_cast<std::size_t>(n), 0);
    for (int idx : picks) {
      taken[static_cast<std::size_t>(idx)] = 1;
      ep.support_rows.push_back(pool[static_cast<std::size_t>(idx)]);
      ep.support_cls.push_back(c);
    }
    for (int i = 0; i < n; ++i)
      if (!taken[static_cast<std::size_t>(i)])
        remaining.emplace_back(pool[static_cast<std::size_t>(i)], c);
  }
  if (static_cast<int>(remaining.size()) < query_size)
    fail(Errc::invalid_argument, "episode: ", remaining.size(),
         " rows left for queries, need ", query_size);
  const auto qpicks =
      rng.sample_without_replacement(static_cast<int>(remaining.size()), query_size);
  for (int idx : qpicks) {
    ep.query_rows.push_back(remaining[static_cast<std::size_t>(idx)].first);
    ep.query_cls.push_back(remaining[static_cast<std::size_t>(idx)].second);
  }
  return ep;
}

std::vector<std::vector<int>> assign_task_classes(const LabelMatrix& labels,
                                                  const std::vector<int>& rows,
                                                  const std::vector<int>& class_tasks,
                                                  std::uint64_t seed) {
  if (class_tasks.empty()) fail(Errc::invalid_argument, "assign_task_classes: no class tasks");
  for (int t : class_tasks)
    if (t < 0 || t >= labels.num_tasks)
      fail(Errc::invalid_argument, "assign_task_classes: task ", t, " out of range");
  Rng rng(derive_seed(seed, kTagAssign));
  std::vector<std::vector<int>> pools(class_tasks.size());
  std::vector<int> hits;
  for (int row : rows) {
    if (row < 0 || row >= labels.num_users)
      fail(Errc::invalid_argument, "assign_task_classes: row ", row, " out of range");
    hits.clear();
    for (std::size_t n = 0; n < class_tasks.size(); ++n) {
      const int t = class_tasks[n];
      if (labels.mask_at(row, t) && labels.label(row, t)) hits.push_back(static_cast<int>(n));
    }
    if (hits.empty()) continue;
    const int pick = hits.size() == 1
                         ? hits[0]
                         : hits[static_cast<std::size_t>(rng.uniform_int(static_cast<int>(hits.size())))];
    pools[static_cast<std::size_t>(pick)].push_back(row);
  }
  return pools;
}

// ---------------------------------------------------------------------------
// Attention readout
// ---------------------------------------------------------------------------

namespace {

template <class T>
void validate_attention_args(const Tensor<T>& scores, const std::vector<int>& support_cls,
                             int way) {
  if (scores.rank() != 2) fail(Errc::invalid_argument, "attention: scores must be (M, S)");
  if (scores.shape[1] != static_cast<int>(support_cls.size()))
    fail(Errc::invalid_argument, "attention: ", support_cls.size(), " support classes for ",
         scores.shape[1], " score columns");
  if (way < 2) fail(Errc::invalid_argument, "attention: way must be >= 2");
  for (int c : support_cls)
    if (c < 0 || c >= way) fail(Errc::invalid_argument, "attention: class ", c, " outside way ", way);
}

// Row softmax in double; returns attention weights for one row.
template <class T>
void row_attention(const T* s, int n, std::vector<double>& a) {
  double mx = -1e300;
  for (int k = 0; k < n; ++k) {
    if (!std::isfinite(static_cast<double>(s[k])))
      fail(Errc::numeric, "attention: non-finite similarity score");
    mx = std::max(mx, static_cast<double>(s[k]));
  }
  double z = 0;
  for (int k = 0; k < n; ++k) {
    a[static_cast<std::size_t>(k)] = std::exp(static_cast<double>(s[k]) - mx);
    z += a[static_cast<std::size_t>(k)];
  }
  for (int k = 0; k < n; ++k) a[static_cast<std::size_t>(k)] /= z;
}

}  // namespace

template <class T>
Tensor<T> attention_predict(const Tensor<T>& scores, const std::vector<int>& support_cls,
                            int way) {
  validate_attention_args(scores, support_cls, way);
  const int m = scores.shape[0], s = scores.shape[1];
  Tensor<T> probs({m, way});
  probs.zero();
  std::vector<double> a(static_cast<std::size_t>(s));
  std::vector<double> p(static_cast<std::size_t>(way));
  for (int i = 0; i < m; ++i) {
    row_attention(scores.ptr() + static_cast<std::int64_t>(i) * s, s, a);
    std::fill(p.begin(), p.end(), 0.0);
    for (int k = 0; k < s; ++k) p[static_cast<std::size_t>(support_cls[static_cast<std::size_t>(k)])] += a[static_cast<std::size_t>(k)];
    for (int c = 0; c < way; ++c) probs.at(i, c) = static_cast<T>(p[static_cast<std::size_t>(c)]);
  }
  return probs;
}

template <class T>
double attention_ce(const Tensor<T>& scores, const std::vector<int>& support_cls, int way,
                    const std::vector<int>& query_cls, Tensor<T>* grad_scores) {
  validate_attention_args(scores, support_cls, way);
  const int m = scores.shape[0], s = scores.shape[1];
  if (static_cast<int>(query_cls.size()) != m)
    fail(Errc::invalid_argument, "attention_ce: ", query_cls.size(), " query classes for ", m,
         " rows");
  if (grad_scores && !grad_scores->same_shape(scores)) *grad_scores = Tensor<T>(scores.shape);

  double total = 0;
  std::vector<double> a(static_cast<std::size_t>(s));
  for (int i = 0; i < m; ++i) {
    const int truth = query_cls[static_cast<std::size_t>(i)];
    if (truth < 0 || truth >= way)
      fail(Errc::invalid_argument, "attention_ce: query class ", truth, " outside way ", way);
    row_attention(scores.ptr() + static_cast<std::int64_t>(i) * s, s, a);
    double p = 0;
    for (int k = 0; k < s; ++k)
      if (support_cls[static_cast<std::size_t>(k)] == truth) p += a[static_cast<std::size_t>(k)];
    const double p_safe = std::max(p, 1e-300);
    total += -std::log(p_safe);
    if (grad_scores) {
      for (int k = 0; k < s; ++k) {
        const double ak = a[static_cast<std::size_t>(k)];
        const double g =
            ak - (support_cls[static_cast<std::size_t>(k)] == truth ? ak / p_safe : 0.0);
        grad_scores->at(i, k) = static_cast<T>(g / m);
      }
    }
  }
  return total / m;
}

template <class T>
std::vector<double> predict_query(const Tensor<T>& q_embed, const Tensor<T>& s_embeds,
                                  const std::vector<int>& support_cls, int way,
                                  SimilarityNet<T>& sim) {
  if (s_embeds.rank() != 2) fail(Errc::invalid_argument, "predict_query: support must be (S, E)");
  const int s = s_embeds.shape[0], e = s_embeds.shape[1];
  if (q_embed.numel() != e)
    fail(Errc::invalid_argument, "predict_query: query width ", q_embed.numel(), ", expected ", e);
  Tensor<T> pairs({s, 2 * e});
  for (int k = 0; k < s; ++k) {
    std::memcpy(pairs.ptr() + static_cast<std::int64_t>(k) * 2 * e, q_embed.ptr(), sizeof(T) * e);
    std::memcpy(pairs.ptr() + static_cast<std::int64_t>(k) * 2 * e + e,
                s_embeds.ptr() + static_cast<std::int64_t>(k) * e, sizeof(T) * e);
  }
  Tensor<T> scores = sim.forward(pairs).reshaped({1, s});
  Tensor<T> probs = attention_predict(scores, support_cls, way);
  std::vector<double> out(static_cast<std::size_t>(way));
  for (int c = 0; c < way; ++c) out[static_cast<std::size_t>(c)] = probs.at(0, c);
  return out;
}

// ---------------------------------------------------------------------------
// Batched inference
// ---------------------------------------------------------------------------

Tensor<float> embed_rows(ProfileNet<float>& net, const UserTensorBank& bank,
                         const std::vector<int>& rows, int batch) {
  if (rows.empty()) fail(Errc::invalid_argument, "embed_rows: empty row list");
  if (batch < 1) fail(Errc::invalid_argument, "embed_rows: batch must be >= 1");
  const int n = static_cast<int>(rows.size());
  const int e = net.shape.profile_width;
  Tensor<float> out({n, e});
  Tensor<float> ha, hb, dm;
  for (int off = 0; off < n; off += batch) {
    const int end = std::min(n, off + batch);
    const std::vector<int> chunk(rows.begin() + off, rows.begin() + end);
    fill_batch(bank, chunk, &ha, &hb, &dm);
    const Tensor<float> emb = net.forward_embedding(ha, hb, dm, nn::Mode::infer);
    std::memcpy(out.ptr() + static_cast<std::int64_t>(off) * e, emb.ptr(),
                sizeof(float) * static_cast<std::size_t>(end - off) * static_cast<std::size_t>(e));
  }
  return out;
}

Tensor<float> attention_probs(SimilarityNet<float>& sim, const Tensor<float>& support_embs,
                              const std::vector<int>& support_cls, int way,
                              const Tensor<float>& query_embs) {
  if (support_embs.rank() != 2 || query_embs.rank() != 2)
    fail(Errc::invalid_argument, "attention_probs: embeddings must be rank 2");
  const int s = support_embs.shape[0], e = support_embs.shape[1];
  const int m = query_embs.shape[0];
  if (s == 0) fail(Errc::invalid_argument, "attention_probs: empty support");
  if (query_embs.shape[1] != e)
    fail(Errc::invalid_argument, "attention_probs: embedding width mismatch");
  if (static_cast<int>(support_cls.size()) != s)
    fail(Errc::invalid_argument, "attention_probs: class list size mismatch");

  Tensor<float> out({m, way});
  constexpr int kChunk = 256;
  Tensor<float> pairs;
  for (int off = 0; off < m; off += kChunk) {
    const int end = std::min(m, off + kChunk), mc = end - off;
    if (pairs.numel() != static_cast<std::int64_t>(mc) * s * 2 * e)
      pairs = Tensor<float>({mc * s, 2 * e});
    for (int i = 0; i < mc; ++i)
      for (int k = 0; k < s; ++k) {
        float* row = pairs.ptr() + (static_cast<std::int64_t>(i) * s + k) * 2 * e;
        std::memcpy(row, query_embs.ptr() + static_cast<std::int64_t>(off + i) * e,
                    sizeof(float) * static_cast<std::size_t>(e));
        std::memcpy(row + e, support_embs.ptr() + static_cast<std::int64_t>(k) * e,
                    sizeof(float) * static_cast<std::size_t>(e));
      }
    const Tensor<float> scores = sim.forward(pairs).reshaped({mc, s});
    const Tensor<float> probs = attention_predict(scores, support_cls, way);
    std::memcpy(out.ptr() + static_cast<std::int64_t>(off) * way, probs.ptr(),
                sizeof(float) * static_cast<std::size_t>(mc) * static_cast<std::size_t>(way));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Episodic training
// ---------------------------------------------------------------------------

namespace {

struct EpisodeStepOut {
  double loss = 0;
  double accuracy = 0;
};

// One fused forward/backward/update over an episode. Support and query rows
// share a single batch so batch-norm statistics are common to both roles.
EpisodeStepOut run_episode_step(MetaModel<float>& model, const UserTensorBank& bank,
                                const Episode& ep, std::vector<nn::Param<float>*>& params,
                                nn::AdamState<float>& adam, double lr, Tensor<float>& ha,
                                Tensor<float>& hb, Tensor<float>& dm) {
  const int s = static_cast<int>(ep.support_rows.size());
  const int m = static_cast<int>(ep.query_rows.size());
  const int e = model.backbone.shape.profile_width;

  std::vector<int> rows = ep.support_rows;
  rows.insert(rows.end(), ep.query_rows.begin(), ep.query_rows.end());
  fill_batch(bank, rows, &ha, &hb, &dm);
  const Tensor<float> emb = model.backbone.forward_embedding(ha, hb, dm, nn::Mode::train);

  Tensor<float> pairs({m * s, 2 * e});
  for (int i = 0; i < m; ++i)
    for (int k = 0; k < s; ++k) {
      float* row = pairs.ptr() + (static_cast<std::int64_t>(i) * s + k) * 2 * e;
      std::memcpy(row, emb.ptr() + static_cast<std::int64_t>(s + i) * e,
                  sizeof(float) * static_cast<std::size_t>(e));
      std::memcpy(row + e, emb.ptr() + static_cast<std::int64_t>(k) * e,
                  sizeof(float) * static_cast<std::size_t>(e));
    }
  const Tensor<float> scores = model.sim.forward(pairs).reshaped({m, s});

  EpisodeStepOut out;
  Tensor<float> dscores;
  out.loss = attention_ce(scores, ep.support_cls, ep.way, ep.query_cls, &dscores);
  {
    const Tensor<float> probs = attention_predict(scores, ep.support_cls, ep.way);
    int correct = 0;
    for (int i = 0; i < m; ++i) {
      int best = 0;
      for (int c = 1; c < ep.way; ++c)
        if (probs.at(i, c) > probs.at(i, best)) best = c;
      if (best == ep.query_cls[static_cast<std::size_t>(i)]) ++correct;
    }
    out.accuracy = m > 0 ? static_cast<double>(correct) / m : 0.0;
  }

  model.backbone.zero_grads();
  for (auto* p : model.sim.params()) p->zero_grad();
  const Tensor<float> dpairs = model.sim.backward(dscores.reshaped({m * s, 1}));
  Tensor<float> demb({s + m, e});
  demb.zero();
  for (int i = 0; i < m; ++i)
    for (int k = 0; k < s; ++k) {
      const float* row = dpairs.ptr() + (static_cast<std::int64_t>(i) * s + k) * 2 * e;
      float* dq = demb.ptr() + static_cast<std::int64_t>(s + i) * e;
      float* ds = demb.ptr() + static_cast<std::int64_t>(k) * e;
      for (int j = 0; j < e; ++j) {
        dq[j] += row[j];
        ds[j] += row[e + j];
      }
    }
  model.backbone.backward_embedding(demb);
  nn::adam_step(params, adam, static_cast<float>(lr));
  return out;
}

}  // namespace

MetaTrainResult meta_train(MetaModel<float>& model, const UserTensorBank& bank,
                           const LabelMatrix& labels, const std::vector<int>& train_rows,
                           const MetaConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  if (train_rows.empty()) fail(Errc::invalid_argument, "meta_train: empty training set");
  const int way = model.backbone.shape.num_tasks;
  if (labels.num_tasks < way)
    fail(Errc::invalid_argument, "meta_train: label matrix has ", labels.num_tasks,
         " tasks, episodes need ", way);
  std::vector<int> class_tasks(static_cast<std::size_t>(way));
  for (int n = 0; n < way; ++n) class_tasks[static_cast<std::size_t>(n)] = n;

  model.backbone.set_backbone_lr_scale(static_cast<float>(cfg.backbone_lr_scale));
  const nn::LrSchedule sched =
      make_schedule(cfg.schedule, cfg.lr_max / 10.0, cfg.lr_max, cfg.t0, cfg.t0, cfg.t_mult);
  auto params = model.params();
  nn::AdamState<float> adam;

  MetaTrainResult result;
  Tensor<float> ha, hb, dm;
  for (int e = 0; e < cfg.episodes; ++e) {
    const std::uint64_t ep_seed = derive_seed(seed, kTagEpisode, static_cast<std::uint64_t>(e));
    const auto pools = assign_task_classes(labels, train_rows, class_tasks, ep_seed);
    const Episode ep = sample_episode(pools, cfg.shot, cfg.query_size, ep_seed);
    const double lr = nn::lr_at(sched, e);
    const EpisodeStepOut step = run_episode_step(model, bank, ep, params, adam, lr, ha, hb, dm);
    result.log.push_back({e, lr, step.loss});
    result.episode_accuracy.push_back(step.accuracy);
    if (cfg.trace) {
      nlohmann::json line;
      line["episode"] = e;
      line["loss"] = step.loss;
      line["accuracy"] = step.accuracy;
      auto ids = [&](const std::vector<int>& rows) {
        std::vector<std::int64_t> v;
        for (int r : rows) v.push_back(bank.user_ids[static_cast<std::size_t>(r)]);
        return v;
      };
      line["support_users"] = ids(ep.support_rows);
      line["query_users"] = ids(ep.query_rows);
      result.trace_lines.push_back(line.dump());
    }
  }
  return result;
}

double episodic_accuracy(MetaModel<float>& model, const UserTensorBank& bank,
                         const LabelMatrix& labels, const std::vector<int>& rows, int shot,
                         int query_size, int episodes, std::uint64_t seed) {
  if (episodes < 1) fail(Errc::invalid_argument, "episodic_accuracy: episodes must be >= 1");
  const int way = model.backbone.shape.num_tasks;
  std::vector<int> class_tasks(static_cast<std::size_t>(way));
  for (int n = 0; n < way; ++n) class_tasks[static_cast<std::size_t>(n)] = n;

  long long correct = 0, total = 0;
  for (int e = 0; e < episodes; ++e) {
    const std::uint64_t ep_seed =
        derive_seed(seed, kTagEvalEpisode, static_cast<std::uint64_t>(e));
    const auto pools = assign_task_classes(labels, rows, class_tasks, ep_seed);
    const Episode ep = sample_episode(pools, shot, query_size, ep_seed);
    const Tensor<float> s_embs = embed_rows(model.backbone, bank, ep.support_rows);
    const Tensor<float> q_embs = embed_rows(model.backbone, bank, ep.query_rows);
    const Tensor<float> probs =
        attention_probs(model.sim, s_embs, ep.support_cls, ep.way, q_embs);
    for (int i = 0; i < probs.shape[0]; ++i) {
      int best = 0;
      for (int c = 1; c < ep.way; ++c)
        if (probs.at(i, c) > probs.at(i, best)) best = c;
      if (best == ep.query_cls[static_cast<std::size_t>(i)]) ++correct;
      ++total;
    }
  }
  return total > 0 ? static_cast<double>(correct) / static_cast<double>(total) : 0.0;
}

std::vector<double> meta_test(MetaModel<float>& model, const UserTensorBank& bank,
                              const std::vector<int>& support_rows,
                              const std::vector<int>& support_cls,
                              const std::vector<int>& predict_rows) {
  if (support_rows.empty()) fail(Errc::invalid_argument, "meta_test: empty support");
  if (support_rows.size() != support_cls.size())
    fail(Errc::invalid_argument, "meta_test: support row/class size mismatch");
  bool has[2] = {false, false};
  for (int c : support_cls) {
    if (c != 0 && c != 1) fail(Errc::invalid_argument, "meta_test: support class must be 0 or 1");
    has[c] = true;
  }
  if (!has[0] || !has[1])
    fail(Errc::invalid_argument, "meta_test: support must contain both classes");
  if (predict_rows.empty()) fail(Errc::invalid_argument, "meta_test: empty prediction set");

  const Tensor<float> s_embs = embed_rows(model.backbone, bank, support_rows);
  const Tensor<float> q_embs = embed_rows(model.backbone, bank, predict_rows);
  const Tensor<float> probs = attention_probs(model.sim, s_embs, support_cls, 2, q_embs);
  std::vector<double> scores(predict_rows.size());
  for (std::size_t i = 0; i < scores.size(); ++i)
    scores[i] = probs.at(static_cast<int>(i), 1);
  return scores;
}

MetaModel<float> baseline_train_from_scratch(const ProfileNetShape& shape,
                                             const NetworkConfig& net, const UserTensorBank& bank,
                                             const std::vector<int>& pos_rows,
                                             const std::vector<int>& neg_rows,
                                             const BaselineConfig& cfg, std::uint64_t seed) {
  if (cfg.steps < 0 || cfg.shot < 1 || cfg.query_size < 0 || !(cfg.lr_max > 0) || cfg.t0 < 1)
    fail(Errc::invalid_argument, "baseline: bad training config");
  if (static_cast<int>(pos_rows.size()) < cfg.shot)
    fail(Errc::invalid_argument, "baseline: ", pos_rows.size(), " positive rows, need ", cfg.shot);
  if (static_cast<int>(neg_rows.size()) < cfg.shot)
    fail(Errc::invalid_argument, "baseline: ", neg_rows.size(), " negative rows, need ", cfg.shot);

  MetaModel<float> model;
  model.configure(shape, net);
  model.init_params(derive_seed(seed, kTagBaselineInit));
  model.backbone.set_backbone_lr_scale(1.0f);

  const nn::LrSchedule sched =
      make_schedule(cfg.schedule, cfg.lr_max / 10.0, cfg.lr_max, cfg.t0, cfg.t0, cfg.t_mult);
  auto params = model.params();
  nn::AdamState<float> adam;

  const std::vector<std::vector<int>> pools = {neg_rows, pos_rows};  // class 1 = positive
  const int avail =
      static_cast<int>(pos_rows.size() + neg_rows.size()) - 2 * cfg.shot;
  const int query = std::min(cfg.query_size, avail);
  if (query == 0) return model;  // nothing to train on beyond the support draw

  Tensor<float> ha, hb, dm;
  for (int e = 0; e < cfg.steps; ++e) {
    const Episode ep = sample_episode(
        pools, cfg.shot, query, derive_seed(seed, kTagBaselineEpisode, static_cast<std::uint64_t>(e)));
    run_episode_step(model, bank, ep, params, adam, nn::lr_at(sched, e), ha, hb, dm);
  }
  return model;
}

void write_scores_csv(const std::string& path, const std::vector<std::int64_t>& user_ids,
                      const std::vector<double>& scores, const std::vector<int>& labels) {
  if (user_ids.size() != scores.size() || user_ids.size() != labels.size())
    fail(Errc::invalid_argument, "write_scores_csv: column length mismatch");
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(Errc::io, "cannot open for writing: ", path);
  out << "user_id,score,label\n";
  for (std::size_t i = 0; i < user_ids.size(); ++i)
    out << user_ids[i] << ',' << format_double(scores[i]) << ',' << labels[i] << '\n';
  if (!out) fail(Errc::io, "write failed: ", path);
}

// ---------------------------------------------------------------------------

template struct SimilarityNet<float>;
template struct SimilarityNet<double>;
template struct MetaModel<float>;
template struct MetaModel<double>;
template Tensor<float> attention_predict<float>(const Tensor<float>&, const std::vector<int>&,
                                                int);
template Tensor<double> attention_predict<double>(const Tensor<double>&, const std::vector<int>&,
                                                  int);
template double attention_ce<float>(const Tensor<float>&, const std::vector<int>&, int,
                                    const std::vector<int>&, Tensor<float>*);
template double attention_ce<double>(const Tensor<double>&, const std::vector<int>&, int,
                                     const std::vector<int>&, Tensor<double>*);
template std::vector<double> predict_query<float>(const Tensor<float>&, const Tensor<float>&,
                                                  const std::vector<int>&, int,
                                                  SimilarityNet<float>&);
template std::vector<double> predict_query<double>(const Tensor<double>&, const Tensor<double>&,
                                                   const std::vector<int>&, int,
                                                   SimilarityNet<double>&);

}  // namespace mp
