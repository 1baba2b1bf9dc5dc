#include "mpnet/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

#include <nlohmann/json.hpp>

#include "mpnet/events.hpp"
#include "mpnet/manifest.hpp"

namespace mp {

namespace {

enum : std::uint64_t {
  kTagAdaptSplit = 41,
  kTagSupportDraw = 42,
  kTagBaselineTrain = 43,
  kTagMaskShuffle = 44,
  kTagImbShuffle = 45,
};

constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

template <class V>
void put_pod(std::string& buf, V v) {
  buf.append(reinterpret_cast<const char*>(&v), sizeof v);
}

// Canonical byte image of one evaluation cell's scored payload: the sparse
// inputs and labels of every scored row plus the support set. Both arms hash
// their actual arguments; the hashes must agree.
std::string payload_hash(const UserTensorBank& bank, const std::vector<int>& scored_rows,
                         const std::vector<int>& labels01, const std::vector<int>& support_rows,
                         const std::vector<int>& support_cls) {
  if (scored_rows.size() != labels01.size())
    fail(Errc::invalid_argument, "payload_hash: label count mismatch");
  std::string buf;
  buf.reserve(1 << 20);
  buf.append("cell-v1");
  for (std::size_t i = 0; i < scored_rows.size(); ++i) {
    const int r = scored_rows[i];
    put_pod(buf, bank.user_ids[static_cast<std::size_t>(r)]);
    put_pod(buf, labels01[i]);
    for (const SparseHeatmap* h :
         {&bank.heat_a[static_cast<std::size_t>(r)], &bank.heat_b[static_cast<std::size_t>(r)]}) {
      put_pod(buf, static_cast<int>(h->cells.size()));
      for (const HeatCell& c : h->cells) {
        put_pod(buf, c.day);
        put_pod(buf, c.hour);
        put_pod(buf, c.channel);
        put_pod(buf, c.value);
      }
    }
    for (float v : bank.demo_rows[static_cast<std::size_t>(r)]) put_pod(buf, v);
  }
  buf.append("support");
  for (std::size_t i = 0; i < support_rows.size(); ++i) {
    put_pod(buf, bank.user_ids[static_cast<std::size_t>(support_rows[i])]);
    put_pod(buf, support_cls[i]);
  }
  return sha256_hex(buf);
}

// Identity of a labeled subset; doubles as the baseline cache key and as the
// seed material for the cell's support draw and baseline training.
std::string subset_signature(int task, std::uint64_t seed, std::vector<int> pos,
                             std::vector<int> neg) {
  std::sort(pos.begin(), pos.end());
  std::sort(neg.begin(), neg.end());
  std::string buf;
  buf.append("subset-v1");
  put_pod(buf, task);
  put_pod(buf, seed);
  put_pod(buf, static_cast<int>(pos.size()));
  for (int r : pos) put_pod(buf, r);
  put_pod(buf, static_cast<int>(neg.size()));
  for (int r : neg) put_pod(buf, r);
  return sha256_hex(buf);
}

std::uint64_t sig_to_seed(const std::string& hex) {
  return std::stoull(hex.substr(0, 16), nullptr, 16);
}

// Support draw from a labeled subset: shot negatives (class 0) then shot
// positives (class 1), deterministic in the subset signature.
void draw_support(const std::vector<int>& pos, const std::vector<int>& neg, int shot,
                  std::uint64_t seed, std::vector<int>* rows, std::vector<int>* cls) {
  Rng rng(seed);
  rows->clear();
  cls->clear();
  const auto npick = rng.sample_without_replacement(static_cast<int>(neg.size()), shot);
  for (int i : npick) {
    rows->push_back(neg[static_cast<std::size_t>(i)]);
    cls->push_back(0);
  }
  const auto ppick = rng.sample_without_replacement(static_cast<int>(pos.size()), shot);
  for (int i : ppick) {
    rows->push_back(pos[static_cast<std::size_t>(i)]);
    cls->push_back(1);
  }
}

Tensor<float> gather_rows(const Tensor<float>& all, const std::vector<int>& rows) {
  const int e = all.shape[1];
  Tensor<float> out({static_cast<int>(rows.size()), e});
  for (std::size_t i = 0; i < rows.size(); ++i)
    std::memcpy(out.ptr() + static_cast<std::int64_t>(i) * e,
                all.ptr() + static_cast<std::int64_t>(rows[i]) * e,
                sizeof(float) * static_cast<std::size_t>(e));
  return out;
}

// Positive-class probability per scored row for the meta arm, read off the
// precomputed backbone embeddings.
std::vector<double> meta_scores(ExperimentContext& ctx, const std::vector<int>& support_rows,
                                const std::vector<int>& support_cls,
                                const std::vector<int>& rows) {
  const Tensor<float> s = gather_rows(ctx.meta_embeddings, support_rows);
  const Tensor<float> q = gather_rows(ctx.meta_embeddings, rows);
  const Tensor<float> probs = attention_probs(ctx.meta->sim, s, support_cls, 2, q);
  std::vector<double> out(rows.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = probs.at(static_cast<int>(i), 1);
  return out;
}

std::shared_ptr<MetaModel<float>> get_baseline(ExperimentContext& ctx, int task,
                                               const std::string& sig,
                                               const std::vector<int>& pos,
                                               const std::vector<int>& neg, bool cacheable) {
  if (cacheable) {
    auto it = ctx.baseline_cache.find(sig);
    if (it != ctx.baseline_cache.end()) return it->second;
  }
  BaselineConfig bc;
  bc.steps = ctx.cfg.baseline_steps;
  bc.shot = ctx.cfg.shot;
  bc.query_size = ctx.cfg.baseline_query;
  auto model = std::make_shared<MetaModel<float>>(baseline_train_from_scratch(
      ctx.shape, ctx.net, *ctx.bank, pos, neg, bc,
      derive_seed(sig_to_seed(sig), kTagBaselineTrain, static_cast<std::uint64_t>(task))));
  if (cacheable) ctx.baseline_cache[sig] = model;
  return model;
}

std::vector<ScoredSample> to_samples(const std::vector<double>& scores,
                                     const std::vector<int>& labels01) {
  std::vector<ScoredSample> out(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i)
    out[i] = {scores[i], labels01[i]};
  return out;
}

struct CellMetrics {
  double aupr = 0, auroc = 0;
};

CellMetrics score_cell(const std::vector<double>& scores, const std::vector<int>& labels01) {
  const auto samples = to_samples(scores, labels01);
  return {aupr(samples), auroc(samples)};
}

// Shared plumbing for one (task, config, seed) evaluation: draws the support,
// scores both arms on the same payload, and appends one row per arm.
struct CellSpec {
  const char* experiment;
  int task;
  std::string config;
  std::uint64_t seed;
  const std::vector<int>* pos;       // labeled subset, positives
  const std::vector<int>* neg;       // labeled subset, negatives
  const std::vector<int>* scored;    // rows to score
  const std::vector<int>* labels01;  // per scored row
  bool ood_confidence = false;       // score = max class probability
  bool cacheable_baseline = false;
};

void run_cell(ExperimentContext& ctx, const CellSpec& cell, std::vector<ReportRow>& rows) {
  ReportRow base_row;
  base_row.experiment = cell.experiment;
  base_row.task = cell.task;
  base_row.config = cell.config;
  base_row.seed = cell.seed;

  const int shot = ctx.cfg.shot;
  if (static_cast<int>(cell.pos->size()) < shot || static_cast<int>(cell.neg->size()) < shot) {
    base_row.skipped = true;
    base_row.note = "subset too small for a " + std::to_string(shot) + "-shot support (" +
                    std::to_string(cell.pos->size()) + " pos, " +
                    std::to_string(cell.neg->size()) + " neg)";
    base_row.aupr = base_row.auroc = kNan;
    for (const char* arm : {"meta", "baseline"}) {
      ReportRow r = base_row;
      r.arm = arm;
      rows.push_back(std::move(r));
    }
    return;
  }

  const std::string sig = subset_signature(cell.task, cell.seed, *cell.pos, *cell.neg);
  std::vector<int> support_rows, support_cls;
  draw_support(*cell.pos, *cell.neg, shot, derive_seed(sig_to_seed(sig), kTagSupportDraw),
               &support_rows, &support_cls);

  auto finish = [&](const char* arm, std::vector<double> scores) {
    if (cell.ood_confidence)
      for (double& v : scores) v = std::max(v, 1.0 - v);
    ReportRow r = base_row;
    r.arm = arm;
    const CellMetrics m = score_cell(scores, *cell.labels01);
    r.aupr = m.aupr;
    r.auroc = m.auroc;
    r.input_sha = payload_hash(*ctx.bank, *cell.scored, *cell.labels01, support_rows, support_cls);
    rows.push_back(std::move(r));
  };

  finish("meta", meta_scores(ctx, support_rows, support_cls, *cell.scored));

  auto baseline = get_baseline(ctx, cell.task, sig, *cell.pos, *cell.neg, cell.cacheable_baseline);
  finish("baseline", meta_test(*baseline, *ctx.bank, support_rows, support_cls, *cell.scored));

  const std::size_t n = rows.size();
  if (rows[n - 1].input_sha != rows[n - 2].input_sha)
    fail(Errc::internal, "experiment arms diverged on cell inputs (", cell.experiment, " task ",
         cell.task, " config ", cell.config, ")");
}

void split_by_label(const Cohort& cohort, const std::vector<int>& rows, int col,
                    std::vector<int>* pos, std::vector<int>* neg) {
  pos->clear();
  neg->clear();
  for (int r : rows) {
    if (cohort.labels.label(r, col))
      pos->push_back(r);
    else
      neg->push_back(r);
  }
}

void require_prepared(const ExperimentContext& ctx) {
  if (!ctx.cohort || !ctx.bank || !ctx.meta)
    fail(Errc::invalid_argument, "experiment context is missing cohort, bank, or model");
  if (ctx.meta_embeddings.numel() == 0)
    fail(Errc::invalid_argument, "experiment context not prepared");
}

int task_budget(int limit, int num_tasks) {
  return limit == 0 ? num_tasks : std::min(limit, num_tasks);
}

int masking_task_budget(const ExperimentContext& ctx) {
  return task_budget(ctx.cfg.masking_tasks, ctx.cohort->cfg.num_target_tasks);
}

}  // namespace

void ExperimentContext::prepare(const CohortSplit& split) {
  if (!cohort || !bank || !meta)
    fail(Errc::invalid_argument, "experiment context is missing cohort, bank, or model");
  cfg.validate();
  if (split.predict_users.empty())
    fail(Errc::invalid_argument, "prediction split is empty");

  std::vector<int> predict_rows;
  for (std::int64_t uid : split.predict_users) predict_rows.push_back(bank->row(uid));
  Rng rng(derive_seed(split_seed, kTagAdaptSplit));
  rng.shuffle(predict_rows);
  const int n_adapt = static_cast<int>(
      std::lround(cfg.adapt_fraction * static_cast<double>(predict_rows.size())));
  if (n_adapt < 1 || n_adapt >= static_cast<int>(predict_rows.size()))
    fail(Errc::invalid_argument, "adapt_fraction ", cfg.adapt_fraction, " leaves ", n_adapt,
         " of ", predict_rows.size(), " rows for adaptation");
  pools.adapt_rows.assign(predict_rows.begin(), predict_rows.begin() + n_adapt);
  pools.test_rows.assign(predict_rows.begin() + n_adapt, predict_rows.end());
  std::sort(pools.adapt_rows.begin(), pools.adapt_rows.end());
  std::sort(pools.test_rows.begin(), pools.test_rows.end());

  pools.ood_rows.clear();
  for (const UserData& u : cohort->ood_users) pools.ood_rows.push_back(bank->row(u.user_id));
  std::sort(pools.ood_rows.begin(), pools.ood_rows.end());

  std::vector<int> all_rows(bank->user_ids.size());
  for (std::size_t i = 0; i < all_rows.size(); ++i) all_rows[i] = static_cast<int>(i);
  meta_embeddings = embed_rows(meta->backbone, *bank, all_rows);
}

ExperimentReport ood_experiment(ExperimentContext& ctx) {
  require_prepared(ctx);
  if (ctx.pools.ood_rows.empty()) fail(Errc::invalid_argument, "ood: empty OOD set");

  std::vector<int> scored = ctx.pools.test_rows;
  scored.insert(scored.end(), ctx.pools.ood_rows.begin(), ctx.pools.ood_rows.end());
  std::vector<int> labels01(scored.size(), 0);
  for (std::size_t i = 0; i < ctx.pools.test_rows.size(); ++i) labels01[i] = 1;

  ExperimentReport report;
  const int num_source = ctx.cohort->cfg.num_source_tasks;
  for (int t = 0; t < ctx.cohort->cfg.num_target_tasks; ++t) {
    std::vector<int> pos, neg;
    split_by_label(*ctx.cohort, ctx.pools.adapt_rows, num_source + t, &pos, &neg);
    for (std::uint64_t s : ctx.cfg.seeds) {
      CellSpec cell;
      cell.experiment = "ood";
      cell.task = t;
      cell.config = "full";
      cell.seed = s;
      cell.pos = &pos;
      cell.neg = &neg;
      cell.scored = &scored;
      cell.labels01 = &labels01;
      cell.ood_confidence = true;
      // the same full-pool baseline serves the top-of-schedule masking cells
      cell.cacheable_baseline = ctx.cfg.masking && t < masking_task_budget(ctx);
      run_cell(ctx, cell, report.rows);
    }
  }
  return report;
}

ExperimentReport label_masking_experiment(ExperimentContext& ctx) {
  require_prepared(ctx);
  if (ctx.cfg.masking_fractions.empty())
    fail(Errc::invalid_argument, "masking: empty fraction schedule");

  const int num_source = ctx.cohort->cfg.num_source_tasks;
  std::vector<int> test_labels;
  ExperimentReport report;
  for (int t = 0; t < masking_task_budget(ctx); ++t) {
    const int col = num_source + t;
    std::vector<int> pos, neg;
    split_by_label(*ctx.cohort, ctx.pools.adapt_rows, col, &pos, &neg);
    test_labels.clear();
    for (int r : ctx.pools.test_rows) test_labels.push_back(ctx.cohort->labels.label(r, col));

    for (std::uint64_t s : ctx.cfg.seeds) {
      // one shuffle per (task, seed); fraction subsets are nested prefixes
      std::vector<int> pos_order = pos, neg_order = neg;
      Rng rng(derive_seed(s, kTagMaskShuffle, static_cast<std::uint64_t>(t)));
      rng.shuffle(pos_order);
      rng.shuffle(neg_order);

      for (double f : ctx.cfg.masking_fractions) {
        const int np = static_cast<int>(std::lround(f * static_cast<double>(pos_order.size())));
        const int nn = static_cast<int>(std::lround(f * static_cast<double>(neg_order.size())));
        const std::vector<int> sub_pos(pos_order.begin(), pos_order.begin() + np);
        const std::vector<int> sub_neg(neg_order.begin(), neg_order.begin() + nn);

        CellSpec cell;
        cell.experiment = "masking";
        cell.task = t;
        cell.config = format_double(f);
        cell.seed = s;
        cell.pos = &sub_pos;
        cell.neg = &sub_neg;
        cell.scored = &ctx.pools.test_rows;
        cell.labels01 = &test_labels;
        cell.cacheable_baseline =
            ctx.cfg.ood && np == static_cast<int>(pos.size()) && nn == static_cast<int>(neg.size());
        run_cell(ctx, cell, report.rows);
      }
    }
  }
  return report;
}

ExperimentReport imbalance_experiment(ExperimentContext& ctx) {
  require_prepared(ctx);
  if (ctx.cfg.imbalance_ratios.empty())
    fail(Errc::invalid_argument, "imbalance: empty ratio schedule");

  const int num_source = ctx.cohort->cfg.num_source_tasks;
  const double min_ratio =
      *std::min_element(ctx.cfg.imbalance_ratios.begin(), ctx.cfg.imbalance_ratios.end());
  std::vector<int> test_labels;
  ExperimentReport report;
  const int budget = task_budget(ctx.cfg.imbalance_tasks, ctx.cohort->cfg.num_target_tasks);
  for (int t = 0; t < budget; ++t) {
    const int col = num_source + t;
    std::vector<int> pos, neg;
    split_by_label(*ctx.cohort, ctx.pools.adapt_rows, col, &pos, &neg);
    test_labels.clear();
    for (int r : ctx.pools.test_rows) test_labels.push_back(ctx.cohort->labels.label(r, col));

    // fixed positive count: the largest making the smallest ratio reachable
    const int pos_count = std::min(static_cast<int>(pos.size()),
                                   static_cast<int>(std::floor(
                                       static_cast<double>(neg.size()) * min_ratio)));

    for (std::uint64_t s : ctx.cfg.seeds) {
      std::vector<int> pos_order = pos, neg_order = neg;
      Rng rng(derive_seed(s, kTagImbShuffle, static_cast<std::uint64_t>(t)));
      rng.shuffle(pos_order);
      rng.shuffle(neg_order);
      const std::vector<int> sub_pos(pos_order.begin(), pos_order.begin() + pos_count);

      for (double r : ctx.cfg.imbalance_ratios) {
        const int neg_count = static_cast<int>(std::lround(pos_count / r));
        CellSpec cell;
        cell.experiment = "imbalance";
        cell.task = t;
        cell.config = format_double(r);
        cell.seed = s;
        cell.scored = &ctx.pools.test_rows;
        cell.labels01 = &test_labels;

        if (neg_count > static_cast<int>(neg_order.size())) {
          ReportRow row;
          row.experiment = cell.experiment;
          row.task = t;
          row.config = cell.config;
          row.seed = s;
          row.skipped = true;
          row.aupr = row.auroc = kNan;
          row.note = "ratio " + cell.config + " needs " + std::to_string(neg_count) +
                     " negatives, pool has " + std::to_string(neg_order.size());
          for (const char* arm : {"meta", "baseline"}) {
            ReportRow arm_row = row;
            arm_row.arm = arm;
            report.rows.push_back(std::move(arm_row));
          }
          continue;
        }
        const std::vector<int> sub_neg(neg_order.begin(), neg_order.begin() + neg_count);
        cell.pos = &sub_pos;
        cell.neg = &sub_neg;
        run_cell(ctx, cell, report.rows);
      }
    }
  }
  return report;
}

void ExperimentReport::append(const ExperimentReport& other) {
  rows.insert(rows.end(), other.rows.begin(), other.rows.end());
}

ExperimentReport run_experiments(ExperimentContext& ctx) {
  require_prepared(ctx);
  ExperimentReport report;
  if (ctx.cfg.ood) report.append(ood_experiment(ctx));
  if (ctx.cfg.masking) report.append(label_masking_experiment(ctx));
  if (ctx.cfg.imbalance) report.append(imbalance_experiment(ctx));
  report.aggregates = aggregate_report(report.rows, ctx.cfg.ma_period);
  return report;
}

// ---------------------------------------------------------------------------
// Aggregation
// ---------------------------------------------------------------------------

std::vector<AggregateRow> aggregate_report(const std::vector<ReportRow>& rows, int ma_period) {
  if (ma_period < 1) fail(Errc::invalid_argument, "aggregate: ma_period must be >= 1");

  struct Acc {
    double aupr = 0, auroc = 0;
    int n = 0;
  };
  auto key_of = [](const ReportRow& r) {
    return r.experiment + '\x1f' + std::to_string(r.task) + '\x1f' + r.arm + '\x1f' + r.config;
  };
  std::map<std::string, Acc> acc;
  std::vector<std::string> key_order;
  std::vector<const ReportRow*> key_first;
  for (const ReportRow& r : rows) {
    if (r.skipped) continue;
    const std::string k = key_of(r);
    auto it = acc.find(k);
    if (it == acc.end()) {
      acc.emplace(k, Acc{r.aupr, r.auroc, 1});
      key_order.push_back(k);
      key_first.push_back(&r);
    } else {
      it->second.aupr += r.aupr;
      it->second.auroc += r.auroc;
      ++it->second.n;
    }
  }

  std::vector<AggregateRow> out;
  std::map<std::string, std::size_t> index_of;
  for (std::size_t i = 0; i < key_order.size(); ++i) {
    const Acc& a = acc[key_order[i]];
    const ReportRow& f = *key_first[i];
    AggregateRow row;
    row.experiment = f.experiment;
    row.task = f.task;
    row.arm = f.arm;
    row.config = f.config;
    row.seeds = a.n;
    row.mean_aupr = a.aupr / a.n;
    row.mean_auroc = a.auroc / a.n;
    row.ma_aupr = kNan;
    row.growth_rate = kNan;
    index_of[key_order[i]] = out.size();
    out.push_back(std::move(row));
  }

  // moving average along each (experiment, task, arm) series in config order
  std::map<std::string, std::vector<std::size_t>> series;
  std::vector<std::string> series_order;
  for (std::size_t i = 0; i < out.size(); ++i) {
    const std::string k = out[i].experiment + '\x1f' + std::to_string(out[i].task) + '\x1f' + out[i].arm;
    if (series.find(k) == series.end()) series_order.push_back(k);
    series[k].push_back(i);
  }
  for (const std::string& k : series_order) {
    const auto& idx = series[k];
    std::vector<double> vals;
    for (std::size_t i : idx) vals.push_back(out[i].mean_aupr);
    const std::vector<double> ma = moving_average(vals, ma_period);
    for (std::size_t j = 0; j < idx.size(); ++j) out[idx[j]].ma_aupr = ma[j];
  }

  // growth rate, recomputed from this table's own AUPR cells
  for (AggregateRow& row : out) {
    if (row.arm != "meta") continue;
    const std::string bk =
        row.experiment + '\x1f' + std::to_string(row.task) + "\x1f" + "baseline" + '\x1f' + row.config;
    auto it = index_of.find(bk);
    if (it == index_of.end()) continue;
    const double b = out[it->second].mean_aupr;
    if (b != 0) row.growth_rate = (row.mean_aupr - b) / b;
  }

  // overall summary rows for the OOD table (mean of the per-task means)
  struct Overall {
    double aupr = 0, auroc = 0;
    int tasks = 0, seeds = 0;
  };
  std::map<std::string, Overall> overall;
  for (const AggregateRow& row : out) {
    if (row.experiment != "ood") continue;
    Overall& o = overall[row.arm];
    o.aupr += row.mean_aupr;
    o.auroc += row.mean_auroc;
    o.tasks += 1;
    o.seeds += row.seeds;
  }
  if (!overall.empty()) {
    double base_aupr = kNan;
    if (overall.count("baseline"))
      base_aupr = overall["baseline"].aupr / overall["baseline"].tasks;
    for (const char* arm : {"baseline", "meta"}) {
      auto it = overall.find(arm);
      if (it == overall.end()) continue;
      AggregateRow row;
      row.experiment = "ood";
      row.task = -1;
      row.arm = arm;
      row.config = "overall";
      row.seeds = it->second.seeds;
      row.mean_aupr = it->second.aupr / it->second.tasks;
      row.mean_auroc = it->second.auroc / it->second.tasks;
      row.ma_aupr = kNan;
      row.growth_rate = kNan;
      if (std::string(arm) == "meta" && std::isfinite(base_aupr) && base_aupr != 0)
        row.growth_rate = (row.mean_aupr - base_aupr) / base_aupr;
      out.push_back(std::move(row));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

namespace {

std::string csv_num(double v) { return std::isfinite(v) ? format_double(v) : "NA"; }

}  // namespace

void write_report_csv(const std::string& path, const std::vector<ReportRow>& rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(Errc::io, "cannot open for writing: ", path);
  out << "experiment,task,arm,config,seed,aupr,auroc\n";
  for (const ReportRow& r : rows)
    out << r.experiment << ',' << r.task << ',' << r.arm << ',' << r.config << ',' << r.seed
        << ',' << csv_num(r.aupr) << ',' << csv_num(r.auroc) << '\n';
  if (!out) fail(Errc::io, "write failed: ", path);
}

void write_aggregate_csv(const std::string& path, const std::vector<AggregateRow>& rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(Errc::io, "cannot open for writing: ", path);
  out << "experiment,task,arm,config,seeds,mean_aupr,mean_auroc,ma_aupr,growth_rate\n";
  for (const AggregateRow& r : rows)
    out << r.experiment << ',' << r.task << ',' << r.arm << ',' << r.config << ',' << r.seeds
        << ',' << csv_num(r.mean_aupr) << ',' << csv_num(r.mean_auroc) << ','
        << csv_num(r.ma_aupr) << ',' << csv_num(r.growth_rate) << '\n';
  if (!out) fail(Errc::io, "write failed: ", path);
}

namespace {

nlohmann::json num_or_null(double v) {
  if (!std::isfinite(v)) return nullptr;
  return v;
}

double null_to_nan(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return kNan;
  return j.at(key).get<double>();
}

}  // namespace

void write_report_json(const std::string& path, const ExperimentReport& report) {
  nlohmann::json doc;
  doc["rows"] = nlohmann::json::array();
  for (const ReportRow& r : report.rows) {
    nlohmann::json j;
    j["experiment"] = r.experiment;
    j["task"] = r.task;
    j["arm"] = r.arm;
    j["config"] = r.config;
    j["seed"] = r.seed;
    j["aupr"] = num_or_null(r.aupr);
    j["auroc"] = num_or_null(r.auroc);
    j["skipped"] = r.skipped;
    if (!r.note.empty()) j["note"] = r.note;
    if (!r.input_sha.empty()) j["input_sha"] = r.input_sha;
    doc["rows"].push_back(std::move(j));
  }
  doc["aggregates"] = nlohmann::json::array();
  for (const AggregateRow& r : report.aggregates) {
    nlohmann::json j;
    j["experiment"] = r.experiment;
    j["task"] = r.task;
    j["arm"] = r.arm;
    j["config"] = r.config;
    j["seeds"] = r.seeds;
    j["mean_aupr"] = num_or_null(r.mean_aupr);
    j["mean_auroc"] = num_or_null(r.mean_auroc);
    j["ma_aupr"] = num_or_null(r.ma_aupr);
    j["growth_rate"] = num_or_null(r.growth_rate);
    doc["aggregates"].push_back(std::move(j));
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(Errc::io, "cannot open for writing: ", path);
  out << doc.dump(2) << '\n';
  if (!out) fail(Errc::io, "write failed: ", path);
}

ExperimentReport read_report_json(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(Errc::io, "cannot open: ", path);
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::parse, path, ": ", e.what());
  }
  ExperimentReport report;
  try {
    for (const auto& j : doc.at("rows")) {
      ReportRow r;
      r.experiment = j.at("experiment").get<std::string>();
      r.task = j.at("task").get<int>();
      r.arm = j.at("arm").get<std::string>();
      r.config = j.at("config").get<std::string>();
      r.seed = j.at("seed").get<std::uint64_t>();
      r.aupr = null_to_nan(j, "aupr");
      r.auroc = null_to_nan(j, "auroc");
      r.skipped = j.at("skipped").get<bool>();
      if (j.contains("note")) r.note = j.at("note").get<std::string>();
      if (j.contains("input_sha")) r.input_sha = j.at("input_sha").get<std::string>();
      report.rows.push_back(std::move(r));
    }
    for (const auto& j : doc.at("aggregates")) {
      AggregateRow r;
      r.experiment = j.at("experiment").get<std::string>();
      r.task = j.at("task").get<int>();
      r.arm = j.at("arm").get<std::string>();
      r.config = j.at("config").get<std::string>();
      r.seeds = j.at("seeds").get<int>();
      r.mean_aupr = null_to_nan(j, "mean_aupr");
      r.mean_auroc = null_to_nan(j, "mean_auroc");
      r.ma_aupr = null_to_nan(j, "ma_aupr");
      r.growth_rate = null_to_nan(j, "growth_rate");
      report.aggregates.push_back(std::move(r));
    }
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::parse, path, ": ", e.what());
  }
  return report;
}

}  // namespace mp
