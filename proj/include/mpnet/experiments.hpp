#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "mpnet/config.hpp"
#include "mpnet/meta.hpp"
#include "mpnet/metrics.hpp"

namespace mp {

// One evaluation cell: a (task, arm, config value, seed) measurement.
struct ReportRow {
  std::string experiment;  // "ood" | "masking" | "imbalance"
  int task = 0;            // target task index
  std::string arm;         // "meta" | "baseline"
  std::string config;      // "full", a fraction, or a ratio
  std::uint64_t seed = 0;
  double aupr = 0.0;
  double auroc = 0.0;
  bool skipped = false;
  std::string note;       // diagnostic for skipped cells (JSON mirror only)
  std::string input_sha;  // hash of the scored payload; equal across arms
};

// Mean over seeds for one (experiment, task, arm, config), in schedule order.
struct AggregateRow {
  std::string experiment;
  int task = 0;
  std::string arm;
  std::string config;
  int seeds = 0;
  double mean_aupr = 0.0;
  double mean_auroc = 0.0;
  double ma_aupr = 0.0;      // moving average along the config axis; NaN when undefined
  double growth_rate = 0.0;  // meta rows: (meta-baseline)/baseline on mean AUPR; NaN otherwise
};

struct ExperimentReport {
  std::vector<ReportRow> rows;
  std::vector<AggregateRow> aggregates;

  void append(const ExperimentReport& other);
};

// Row pools shared by every experiment. The prediction split is divided once
// into an adaptation pool (labels usable for support draws and baseline
// training) and a fixed held-out test pool that every cell scores.
struct EvalPools {
  std::vector<int> adapt_rows;
  std::vector<int> test_rows;
  std::vector<int> ood_rows;
};

struct ExperimentContext {
  const Cohort* cohort = nullptr;
  const UserTensorBank* bank = nullptr;  // in-distribution rows, then OOD rows
  ProfileNetShape shape;
  NetworkConfig net;
  MetaModel<float>* meta = nullptr;  // the trained arm, shared across cells
  EvaluateConfig cfg;
  std::uint64_t split_seed = 1;  // fixes the adapt/test division, not cell draws

  EvalPools pools;
  Tensor<float> meta_embeddings;  // (bank rows, E) under the meta backbone

  // Trained baselines for full-adaptation-pool cells that more than one
  // experiment requests; other cells are single-use and never cached.
  std::map<std::string, std::shared_ptr<MetaModel<float>>> baseline_cache;

  // Splits the prediction rows, embeds the bank under the meta backbone.
  void prepare(const CohortSplit& split);
};

// In-distribution confidence scoring of test + OOD rows per target task.
ExperimentReport ood_experiment(ExperimentContext& ctx);

// Label availability sweep: per fraction, the baseline retrains on the
// unmasked subset and the meta arm draws its support from the same subset.
// Subsets are nested per seed. A fraction with no positives is a skipped row.
ExperimentReport label_masking_experiment(ExperimentContext& ctx);

// Class imbalance sweep at fixed positive count; negatives are subsampled to
// hit each positive:negative ratio. Unreachable ratios are skipped rows.
ExperimentReport imbalance_experiment(ExperimentContext& ctx);

// All enabled experiments plus aggregate rows.
ExperimentReport run_experiments(ExperimentContext& ctx);

// Means over seeds in first-appearance config order, moving average along
// each (experiment, task, arm) series, growth rate on meta rows, and overall
// per-arm summary rows for the OOD table.
std::vector<AggregateRow> aggregate_report(const std::vector<ReportRow>& rows, int ma_period);

// experiment,task,arm,config,seed,aupr,auroc  (NA metrics on skipped rows)
void write_report_csv(const std::string& path, const std::vector<ReportRow>& rows);
// experiment,task,arm,config,seeds,mean_aupr,mean_auroc,ma_aupr,growth_rate
void write_aggregate_csv(const std::string& path, const std::vector<AggregateRow>& rows);
// full mirror of rows + aggregates, including skip diagnostics and input hashes
void write_report_json(const std::string& path, const ExperimentReport& report);
ExperimentReport read_report_json(const std::string& path);

}  // namespace mp
