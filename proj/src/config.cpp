#include "mpnet/config.hpp"

#include <fstream>
#include <set>

#include <nlohmann/json.hpp>

#include "mpnet/common.hpp"
#include "mpnet/manifest.hpp"

namespace mp {

namespace {

using nlohmann::json;

[[noreturn]] void cfg_fail(const std::string& origin, const std::string& what) {
  fail(Errc::config, origin, ": ", what);
}

void expect_object(const json& j, const std::string& origin, const std::string& where) {
  if (!j.is_object()) cfg_fail(origin, where + " must be a JSON object");
}

void check_keys(const json& j, const std::string& origin, const std::string& where,
                const std::set<std::string>& allowed) {
  for (const auto& [key, _] : j.items())
    if (!allowed.count(key)) cfg_fail(origin, where + ": unknown key '" + key + "'");
}

template <typename T>
void get_to(const json& j, const std::string& origin, const std::string& where, const char* key,
            T& out) {
  if (!j.contains(key)) return;
  try {
    j.at(key).get_to(out);
  } catch (const json::exception&) {
    cfg_fail(origin, where + ": bad value for '" + std::string(key) + "'");
  }
}

bool known_schedule(const std::string& s) {
  return s == "constant" || s == "cyclic_triangular" || s == "cosine_warm_restarts";
}

}  // namespace

void NetworkConfig::validate() const {
  if (demo_hidden < 1 || demo_out < 1 || profile_width < 1 || sim_hidden1 < 1 || sim_hidden2 < 1)
    fail(Errc::config, "network: all widths must be >= 1");
}

void PretrainConfig::validate() const {
  if (epochs < 0) fail(Errc::config, "pretrain: epochs must be >= 0");
  if (batch < 1) fail(Errc::config, "pretrain: batch must be >= 1");
  if (!known_schedule(schedule)) fail(Errc::config, "pretrain: unknown schedule '", schedule, "'");
  if (!(base_lr > 0) || !(max_lr >= base_lr))
    fail(Errc::config, "pretrain: need 0 < base_lr <= max_lr");
  if (step_size < 0) fail(Errc::config, "pretrain: step_size must be >= 0");
  if (log_every < 1) fail(Errc::config, "pretrain: log_every must be >= 1");
}

void MetaConfig::validate() const {
  if (episodes < 0) fail(Errc::config, "meta: episodes must be >= 0");
  if (shot < 1) fail(Errc::config, "meta: shot must be >= 1");
  if (query_size < 1) fail(Errc::config, "meta: query_size must be >= 1");
  if (!known_schedule(schedule)) fail(Errc::config, "meta: unknown schedule '", schedule, "'");
  if (!(lr_max > 0)) fail(Errc::config, "meta: lr_max must be > 0");
  if (t0 < 1) fail(Errc::config, "meta: t0 must be >= 1");
  if (!(t_mult >= 1)) fail(Errc::config, "meta: t_mult must be >= 1");
  if (!(backbone_lr_scale >= 0)) fail(Errc::config, "meta: backbone_lr_scale must be >= 0");
}

void EvaluateConfig::validate() const {
  if (seeds.empty()) fail(Errc::config, "evaluate: at least one seed required");
  std::set<std::uint64_t> uniq(seeds.begin(), seeds.end());
  if (uniq.size() != seeds.size()) fail(Errc::config, "evaluate: duplicate seeds");
  if (shot < 1) fail(Errc::config, "evaluate: shot must be >= 1");
  if (!(adapt_fraction > 0 && adapt_fraction < 1))
    fail(Errc::config, "evaluate: adapt_fraction must be in (0, 1)");
  if (masking) {
    if (masking_fractions.empty()) fail(Errc::config, "evaluate: masking_fractions empty");
    for (double f : masking_fractions)
      if (!(f > 0 && f <= 1)) fail(Errc::config, "evaluate: masking fraction ", f, " outside (0, 1]");
  }
  if (imbalance) {
    if (imbalance_ratios.empty()) fail(Errc::config, "evaluate: imbalance_ratios empty");
    for (double r : imbalance_ratios)
      if (!(r > 0)) fail(Errc::config, "evaluate: imbalance ratio ", r, " must be > 0");
  }
  if (ma_period < 1) fail(Errc::config, "evaluate: ma_period must be >= 1");
  if (baseline_steps < 1) fail(Errc::config, "evaluate: baseline_steps must be >= 1");
  if (baseline_query < 1) fail(Errc::config, "evaluate: baseline_query must be >= 1");
  if (masking_tasks < 0 || imbalance_tasks < 0)
    fail(Errc::config, "evaluate: task budgets must be >= 0");
}

void PipelineConfig::validate() const {
  if (out_dir.empty()) fail(Errc::config, "out_dir must not be empty");
  if (threads < 1) fail(Errc::config, "threads must be >= 1");
  if (split.train < 0 || split.support < 0 || split.predict < 0 ||
      split.train + split.support + split.predict > 1.0 + 1e-9)
    fail(Errc::config, "split fractions must be non-negative and sum to <= 1");
  cohort.validate();
  network.validate();
  pretrain.validate();
  meta.validate();
  evaluate.validate();
}

std::string PipelineConfig::to_json_text() const {
  json j;
  j["seed"] = seed;
  j["out_dir"] = out_dir;
  j["threads"] = threads;
  j["split"] = {{"train", split.train}, {"support", split.support}, {"predict", split.predict}};
  j["cohort"] = {{"num_users", cohort.num_users},
                 {"num_ood_users", cohort.num_ood_users},
                 {"num_archetypes", cohort.num_archetypes},
                 {"ood_archetype_ids", cohort.ood_archetype_ids},
                 {"num_source_tasks", cohort.num_source_tasks},
                 {"num_target_tasks", cohort.num_target_tasks},
                 {"seed", cohort.seed},
                 {"source_prevalence", cohort.source_prevalence},
                 {"target_prevalence", cohort.target_prevalence},
                 {"label_noise_sd", cohort.label_noise_sd},
                 {"mask_density", cohort.mask_density},
                 {"mean_events_shopping", cohort.mean_events_shopping},
                 {"mean_events_points", cohort.mean_events_points}};
  j["network"] = {{"demo_hidden", network.demo_hidden},
                  {"demo_out", network.demo_out},
                  {"profile_width", network.profile_width},
                  {"sim_hidden1", network.sim_hidden1},
                  {"sim_hidden2", network.sim_hidden2}};
  j["pretrain"] = {{"epochs", pretrain.epochs},
                   {"batch", pretrain.batch},
                   {"schedule", pretrain.schedule},
                   {"base_lr", pretrain.base_lr},
                   {"max_lr", pretrain.max_lr},
                   {"step_size", pretrain.step_size},
                   {"log_every", pretrain.log_every}};
  j["meta"] = {{"episodes", meta.episodes},
               {"shot", meta.shot},
               {"query_size", meta.query_size},
               {"schedule", meta.schedule},
               {"lr_max", meta.lr_max},
               {"t0", meta.t0},
               {"t_mult", meta.t_mult},
               {"backbone_lr_scale", meta.backbone_lr_scale},
               {"trace", meta.trace}};
  j["evaluate"] = {{"seeds", evaluate.seeds},
                   {"shot", evaluate.shot},
                   {"adapt_fraction", evaluate.adapt_fraction},
                   {"ood", evaluate.ood},
                   {"masking", evaluate.masking},
                   {"imbalance", evaluate.imbalance},
                   {"masking_fractions", evaluate.masking_fractions},
                   {"imbalance_ratios", evaluate.imbalance_ratios},
                   {"ma_period", evaluate.ma_period},
                   {"baseline_steps", evaluate.baseline_steps},
                   {"baseline_query", evaluate.baseline_query},
                   {"masking_tasks", evaluate.masking_tasks},
                   {"imbalance_tasks", evaluate.imbalance_tasks}};
  return j.dump(2) + "\n";
}

PipelineConfig PipelineConfig::from_json_text(const std::string& text, const std::string& origin) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    cfg_fail(origin, e.what());
  }
  expect_object(j, origin, "top level");
  check_keys(j, origin, "top level",
             {"seed", "out_dir", "threads", "split", "cohort", "network", "pretrain", "meta",
              "evaluate"});

  PipelineConfig c;
  get_to(j, origin, "top level", "seed", c.seed);
  get_to(j, origin, "top level", "out_dir", c.out_dir);
  get_to(j, origin, "top level", "threads", c.threads);

  if (j.contains("split")) {
    const json& s = j["split"];
    expect_object(s, origin, "split");
    check_keys(s, origin, "split", {"train", "support", "predict"});
    get_to(s, origin, "split", "train", c.split.train);
    get_to(s, origin, "split", "support", c.split.support);
    get_to(s, origin, "split", "predict", c.split.predict);
  }
  if (j.contains("cohort")) {
    const json& s = j["cohort"];
    expect_object(s, origin, "cohort");
    check_keys(s, origin, "cohort",
               {"num_users", "num_ood_users", "num_archetypes", "ood_archetype_ids",
                "num_source_tasks", "num_target_tasks", "seed", "source_prevalence",
                "target_prevalence", "label_noise_sd", "mask_density", "mean_events_shopping",
                "mean_events_points"});
    get_to(s, origin, "cohort", "num_users", c.cohort.num_users);
    get_to(s, origin, "cohort", "num_ood_users", c.cohort.num_ood_users);
    get_to(s, origin, "cohort", "num_archetypes", c.cohort.num_archetypes);
    get_to(s, origin, "cohort", "ood_archetype_ids", c.cohort.ood_archetype_ids);
    get_to(s, origin, "cohort", "num_source_tasks", c.cohort.num_source_tasks);
    get_to(s, origin, "cohort", "num_target_tasks", c.cohort.num_target_tasks);
    get_to(s, origin, "cohort", "seed", c.cohort.seed);
    get_to(s, origin, "cohort", "source_prevalence", c.cohort.source_prevalence);
    get_to(s, origin, "cohort", "target_prevalence", c.cohort.target_prevalence);
    get_to(s, origin, "cohort", "label_noise_sd", c.cohort.label_noise_sd);
    get_to(s, origin, "cohort", "mask_density", c.cohort.mask_density);
    get_to(s, origin, "cohort", "mean_events_shopping", c.cohort.mean_events_shopping);
    get_to(s, origin, "cohort", "mean_events_points", c.cohort.mean_events_points);
  }
  if (j.contains("network")) {
    const json& s = j["network"];
    expect_object(s, origin, "network");
    check_keys(s, origin, "network",
               {"demo_hidden", "demo_out", "profile_width", "sim_hidden1", "sim_hidden2"});
    get_to(s, origin, "network", "demo_hidden", c.network.demo_hidden);
    get_to(s, origin, "network", "demo_out", c.network.demo_out);
    get_to(s, origin, "network", "profile_width", c.network.profile_width);
    get_to(s, origin, "network", "sim_hidden1", c.network.sim_hidden1);
    get_to(s, origin, "network", "sim_hidden2", c.network.sim_hidden2);
  }
  if (j.contains("pretrain")) {
    const json& s = j["pretrain"];
    expect_object(s, origin, "pretrain");
    check_keys(s, origin, "pretrain",
               {"epochs", "batch", "schedule", "base_lr", "max_lr", "step_size", "log_every"});
    get_to(s, origin, "pretrain", "epochs", c.pretrain.epochs);
    get_to(s, origin, "pretrain", "batch", c.pretrain.batch);
    get_to(s, origin, "pretrain", "schedule", c.pretrain.schedule);
    get_to(s, origin, "pretrain", "base_lr", c.pretrain.base_lr);
    get_to(s, origin, "pretrain", "max_lr", c.pretrain.max_lr);
    get_to(s, origin, "pretrain", "step_size", c.pretrain.step_size);
    get_to(s, origin, "pretrain", "log_every", c.pretrain.log_every);
  }
  if (j.contains("meta")) {
    const json& s = j["meta"];
    expect_object(s, origin, "meta");
    check_keys(s, origin, "meta",
               {"episodes", "shot", "query_size", "schedule", "lr_max", "t0", "t_mult",
                "backbone_lr_scale", "trace"});
    get_to(s, origin, "meta", "episodes", c.meta.episodes);
    get_to(s, origin, "meta", "shot", c.meta.shot);
    get_to(s, origin, "meta", "query_size", c.meta.query_size);
    get_to(s, origin, "meta", "schedule", c.meta.schedule);
    get_to(s, origin, "meta", "lr_max", c.meta.lr_max);
    get_to(s, origin, "meta", "t0", c.meta.t0);
    get_to(s, origin, "meta", "t_mult", c.meta.t_mult);
    get_to(s, origin, "meta", "backbone_lr_scale", c.meta.backbone_lr_scale);
    get_to(s, origin, "meta", "trace", c.meta.trace);
  }
  if (j.contains("evaluate")) {
    const json& s = j["evaluate"];
    expect_object(s, origin, "evaluate");
    check_keys(s, origin, "evaluate",
               {"seeds", "shot", "adapt_fraction", "ood", "masking", "imbalance",
                "masking_fractions", "imbalance_ratios", "ma_period", "baseline_steps",
                "baseline_query", "masking_tasks", "imbalance_tasks"});
    get_to(s, origin, "evaluate", "seeds", c.evaluate.seeds);
    get_to(s, origin, "evaluate", "shot", c.evaluate.shot);
    get_to(s, origin, "evaluate", "adapt_fraction", c.evaluate.adapt_fraction);
    get_to(s, origin, "evaluate", "ood", c.evaluate.ood);
    get_to(s, origin, "evaluate", "masking", c.evaluate.masking);
    get_to(s, origin, "evaluate", "imbalance", c.evaluate.imbalance);
    get_to(s, origin, "evaluate", "masking_fractions", c.evaluate.masking_fractions);
    get_to(s, origin, "evaluate", "imbalance_ratios", c.evaluate.imbalance_ratios);
    get_to(s, origin, "evaluate", "ma_period", c.evaluate.ma_period);
    get_to(s, origin, "evaluate", "baseline_steps", c.evaluate.baseline_steps);
    get_to(s, origin, "evaluate", "baseline_query", c.evaluate.baseline_query);
    get_to(s, origin, "evaluate", "masking_tasks", c.evaluate.masking_tasks);
    get_to(s, origin, "evaluate", "imbalance_tasks", c.evaluate.imbalance_tasks);
  }
  try {
    c.validate();
  } catch (const Error& e) {
    cfg_fail(origin, e.what());
  }
  return c;
}

PipelineConfig PipelineConfig::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(Errc::io, "cannot open config: ", path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return from_json_text(text, path);
}

std::string PipelineConfig::canonical_hash() const { return sha256_hex(to_json_text()); }

}  // namespace mp
