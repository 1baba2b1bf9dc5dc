#pragma once

#include <string>
#include <vector>

#include "mpnet/config.hpp"
#include "mpnet/manifest.hpp"

namespace mp {

// Canonical layout of a run directory. Every command reads and writes only
// through these paths so reruns land on byte-identical artifacts.
struct RunPaths {
  explicit RunPaths(const std::string& out_dir);

  std::string root;
  std::string config;  // the config the run was generated with

  // generate
  std::string events_shopping;
  std::string events_points;
  std::string demos;
  std::string labels;
  std::string split;
  std::string spec_shopping;
  std::string spec_points;

  // encode
  std::string heat_shopping;
  std::string heat_points;

  // pretrain / meta-train
  std::string pretrained_ckpt;
  std::string meta_ckpt;
  std::string pretrain_log;
  std::string meta_train_log;
  std::string episode_trace;

  // evaluate / report
  std::string report_csv;
  std::string aggregate_csv;
  std::string report_json;
  std::string summary_json;
  std::string ood_summary_csv;
  std::string masking_curves_csv;
  std::string imbalance_curves_csv;
  std::string scores_dir;
  std::string manifests_dir;

  std::string scores_csv(int task) const;
  std::string manifest(const std::string& command) const;
};

// Each command validates the config, refuses to run against a directory
// generated from a different config, and records every file it touched in a
// manifest under <out_dir>/manifests/<command>.json.
RunManifest run_generate(const PipelineConfig& cfg);
RunManifest run_encode(const PipelineConfig& cfg);
RunManifest run_pretrain(const PipelineConfig& cfg);
RunManifest run_meta_train(const PipelineConfig& cfg);
RunManifest run_evaluate(const PipelineConfig& cfg);
RunManifest run_report(const PipelineConfig& cfg);

// The whole chain in order; returns one manifest per command.
std::vector<RunManifest> run_all(const PipelineConfig& cfg);

}  // namespace mp
