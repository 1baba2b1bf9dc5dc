#include "mpnet/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "mpnet/common.hpp"
#include "mpnet/events.hpp"
#include "mpnet/experiments.hpp"
#include "mpnet/heatmap.hpp"
#include "mpnet/meta.hpp"
#include "mpnet/profile_net.hpp"
#include "mpnet/synth.hpp"

namespace fs = std::filesystem;

namespace mp {
namespace {

// Seed sub-stream tags for the pipeline layer. Commands must not share
// streams: a changed pretrain seed must not silently shift cohort draws.
constexpr std::uint64_t kTagSplitSeed = 61;
constexpr std::uint64_t kTagPretrain = 62;
constexpr std::uint64_t kTagMetaInit = 63;
constexpr std::uint64_t kTagMetaTrain = 64;
constexpr std::uint64_t kTagEvalSplit = 65;
constexpr std::uint64_t kTagScores = 66;
constexpr std::uint64_t kTagEpAccuracy = 67;

std::string join(const std::string& a, const std::string& b) {
  return (fs::path(a) / b).string();
}

struct Timer {
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  }
};

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(Errc::io, "cannot open ", path, " for writing");
  out << text;
  if (!out) fail(Errc::io, "write failed: ", path);
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(Errc::io, "cannot open ", path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void ensure_dirs(const RunPaths& p) {
  for (const std::string& d :
       {join(p.root, "cohort"), join(p.root, "encoded"), join(p.root, "checkpoints"),
        join(p.root, "logs"), join(p.root, "reports"), p.scores_dir, p.manifests_dir}) {
    std::error_code ec;
    fs::create_directories(d, ec);
    if (ec) fail(Errc::io, "cannot create directory ", d, ": ", ec.message());
  }
}

// Later commands must run against the exact config that generated the
// artifacts; otherwise seeds and artifacts silently disagree.
void check_config_guard(const PipelineConfig& cfg, const RunPaths& p) {
  if (!fs::exists(p.config))
    fail(Errc::config, "no config.json under ", p.root, "; run generate first");
  PipelineConfig stored = PipelineConfig::load(p.config);
  if (stored.canonical_hash() != cfg.canonical_hash())
    fail(Errc::config, "config does not match the artifacts in ", p.root,
         " (stored hash ", stored.canonical_hash().substr(0, 12), ", given ",
         cfg.canonical_hash().substr(0, 12), "); regenerate or fix the config");
}

RunManifest start_manifest(const PipelineConfig& cfg, const std::string& command) {
  set_max_threads(cfg.threads);
  RunManifest m;
  m.command = command;
  m.config_hash = cfg.canonical_hash();
  m.seed = cfg.seed;
  return m;
}

void finish_manifest(RunManifest& m, const RunPaths& p, const Timer& t) {
  m.elapsed_seconds = t.seconds();
  m.write(p.manifest(m.command));
}

// --------------------------------------------------------------------------
// split.json
// --------------------------------------------------------------------------

void write_split_json(const std::string& path, const CohortSplit& split) {
  nlohmann::json j;
  j["train_users"] = split.train_users;
  j["support_users"] = split.support_users;
  j["predict_users"] = split.predict_users;
  nlohmann::json sup = nlohmann::json::object();
  for (const auto& [task, items] : split.target_support) {
    nlohmann::json arr = nlohmann::json::array();
    for (const SupportItem& it : items) arr.push_back({{"user_id", it.user_id}, {"cls", it.cls}});
    sup[std::to_string(task)] = std::move(arr);
  }
  j["target_support"] = std::move(sup);
  write_text_file(path, j.dump(2) + "\n");
}

CohortSplit read_split_json(const std::string& path) {
  CohortSplit split;
  try {
    nlohmann::json j = nlohmann::json::parse(read_text_file(path));
    split.train_users = j.at("train_users").get<std::vector<std::int64_t>>();
    split.support_users = j.at("support_users").get<std::vector<std::int64_t>>();
    split.predict_users = j.at("predict_users").get<std::vector<std::int64_t>>();
    for (const auto& [key, arr] : j.at("target_support").items()) {
      std::vector<SupportItem> items;
      for (const auto& e : arr)
        items.push_back({e.at("user_id").get<std::int64_t>(), e.at("cls").get<int>()});
      split.target_support[std::stoi(key)] = std::move(items);
    }
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::parse, path, ": ", e.what());
  }
  return split;
}

// --------------------------------------------------------------------------
// Artifact loading shared by pretrain / meta-train / evaluate
// --------------------------------------------------------------------------

struct LoadedRun {
  ChannelSpec spec_a;
  ChannelSpec spec_b;
  std::vector<std::int64_t> label_uids;  // in-distribution users, bank order
  LabelMatrix labels;
  CohortSplit split;
  UserTensorBank bank;  // in-distribution rows first, then OOD rows
  ProfileNetShape shape;
  std::vector<int> train_rows;
};

LoadedRun load_run(const PipelineConfig& cfg, const RunPaths& p, RunManifest& m) {
  LoadedRun run;
  run.spec_a = read_channel_spec(p.spec_shopping);
  run.spec_b = read_channel_spec(p.spec_points);
  std::vector<DemographicRecord> demos = read_demos_csv(p.demos);
  read_labels_csv(p.labels, run.label_uids, run.labels);
  run.split = read_split_json(p.split);

  std::vector<UserHeatmap> ha = read_sparse_file(p.heat_shopping, run.spec_a.num_channels);
  std::vector<UserHeatmap> hb = read_sparse_file(p.heat_points, run.spec_b.num_channels);
  if (ha.size() != demos.size() || hb.size() != demos.size())
    fail(Errc::invalid_argument, "encoded artifacts cover ", ha.size(), "/", hb.size(),
         " users but demos.csv has ", demos.size());

  std::vector<std::int64_t> uids;
  std::vector<SparseHeatmap> heat_a, heat_b;
  uids.reserve(ha.size());
  heat_a.reserve(ha.size());
  heat_b.reserve(hb.size());
  for (std::size_t i = 0; i < ha.size(); ++i) {
    if (ha[i].user_id != hb[i].user_id)
      fail(Errc::invalid_argument, "encoded files disagree on user order at line ", i + 1, ": ",
           ha[i].user_id, " vs ", hb[i].user_id);
    uids.push_back(ha[i].user_id);
    heat_a.push_back(std::move(ha[i].heatmap));
    heat_b.push_back(std::move(hb[i].heatmap));
  }

  // Labeled users must be the leading rows: demo standardization and every
  // train/eval split indexes them by position.
  if (uids.size() < run.label_uids.size())
    fail(Errc::invalid_argument, "labels.csv lists ", run.label_uids.size(),
         " users but only ", uids.size(), " are encoded");
  for (std::size_t i = 0; i < run.label_uids.size(); ++i)
    if (uids[i] != run.label_uids[i])
      fail(Errc::invalid_argument, "user order mismatch at row ", i, ": encoded ", uids[i],
           ", labels ", run.label_uids[i]);

  const int stats_rows = static_cast<int>(run.label_uids.size());
  run.bank = assemble_tensor_bank(run.spec_a, run.spec_b, uids, std::move(heat_a),
                                  std::move(heat_b), demos, stats_rows);
  run.shape = ProfileNetShape::make(cfg.network, run.spec_a.num_channels,
                                    run.spec_b.num_channels, cfg.cohort.num_source_tasks);
  run.train_rows.reserve(run.split.train_users.size());
  for (std::int64_t uid : run.split.train_users) run.train_rows.push_back(run.bank.row(uid));

  for (const std::string& path : {p.spec_shopping, p.spec_points, p.demos, p.labels, p.split,
                                  p.heat_shopping, p.heat_points})
    m.add_input(path);
  return run;
}

void append_csv_field(std::string& line, double v) {
  line += ',';
  line += std::isfinite(v) ? format_double(v) : std::string("NA");
}

}  // namespace

// --------------------------------------------------------------------------
// RunPaths
// --------------------------------------------------------------------------

RunPaths::RunPaths(const std::string& out_dir) : root(out_dir) {
  if (out_dir.empty()) fail(Errc::invalid_argument, "out_dir is empty");
  config = join(root, "config.json");
  const std::string cohort = join(root, "cohort");
  events_shopping = join(cohort, "events_shopping.csv");
  events_points = join(cohort, "events_points.csv");
  demos = join(cohort, "demos.csv");
  labels = join(cohort, "labels.csv");
  split = join(cohort, "split.json");
  spec_shopping = join(cohort, "spec_shopping.json");
  spec_points = join(cohort, "spec_points.json");
  heat_shopping = join(join(root, "encoded"), "shopping.heat");
  heat_points = join(join(root, "encoded"), "points.heat");
  pretrained_ckpt = join(join(root, "checkpoints"), "pretrained.ckpt");
  meta_ckpt = join(join(root, "checkpoints"), "meta.ckpt");
  pretrain_log = join(join(root, "logs"), "pretrain.csv");
  meta_train_log = join(join(root, "logs"), "meta_train.csv");
  episode_trace = join(join(root, "logs"), "episodes.jsonl");
  const std::string reports = join(root, "reports");
  report_csv = join(reports, "report.csv");
  aggregate_csv = join(reports, "aggregate.csv");
  report_json = join(reports, "report.json");
  summary_json = join(reports, "summary.json");
  ood_summary_csv = join(reports, "ood_summary.csv");
  masking_curves_csv = join(reports, "masking_curves.csv");
  imbalance_curves_csv = join(reports, "imbalance_curves.csv");
  scores_dir = join(root, "scores");
  manifests_dir = join(root, "manifests");
}

std::string RunPaths::scores_csv(int task) const {
  return join(scores_dir, "task_" + std::to_string(task) + ".csv");
}

std::string RunPaths::manifest(const std::string& command) const {
  return join(manifests_dir, command + ".json");
}

// --------------------------------------------------------------------------
// generate
// --------------------------------------------------------------------------

RunManifest run_generate(const PipelineConfig& cfg) {
  cfg.validate();
  RunPaths p(cfg.out_dir);
  ensure_dirs(p);
  Timer timer;
  RunManifest m = start_manifest(cfg, "generate");

  Cohort cohort = generate_cohort(cfg.cohort);

  std::vector<std::int64_t> uids;
  uids.reserve(cohort.users.size());
  for (const UserData& u : cohort.users) uids.push_back(u.user_id);
  std::vector<int> source_tasks, target_tasks;
  for (int t = 0; t < cfg.cohort.num_source_tasks; ++t) source_tasks.push_back(t);
  for (int t = 0; t < cfg.cohort.num_target_tasks; ++t)
    target_tasks.push_back(cfg.cohort.num_source_tasks + t);
  // Split-level support sets only exist when a support slice is configured;
  // the evaluation harness otherwise draws support from the adaptation pool.
  const int split_shot = cfg.split.support > 0 ? cfg.evaluate.shot : 0;
  CohortSplit split = split_cohort(cohort.labels, uids, source_tasks, target_tasks, cfg.split,
                                   split_shot, derive_seed(cfg.seed, kTagSplitSeed));

  // Event and demo files carry the labeled cohort first, then the
  // held-out-archetype users; downstream loading depends on that order.
  std::vector<EventRecord> shopping, points;
  std::vector<DemographicRecord> demos;
  for (const std::vector<UserData>* group : {&cohort.users, &cohort.ood_users}) {
    for (const UserData& u : *group) {
      shopping.insert(shopping.end(), u.shopping.begin(), u.shopping.end());
      points.insert(points.end(), u.points.begin(), u.points.end());
      demos.push_back(u.demo);
    }
  }

  write_text_file(p.config, cfg.to_json_text());
  write_events_csv(p.events_shopping, shopping);
  write_events_csv(p.events_points, points);
  write_demos_csv(p.demos, demos);
  write_labels_csv(p.labels, uids, cohort.labels);
  write_split_json(p.split, split);
  write_channel_spec(p.spec_shopping, cohort.shopping_spec);
  write_channel_spec(p.spec_points, cohort.points_spec);

  for (const std::string& path : {p.config, p.events_shopping, p.events_points, p.demos,
                                  p.labels, p.split, p.spec_shopping, p.spec_points})
    m.add_output(path);
  finish_manifest(m, p, timer);
  return m;
}

// --------------------------------------------------------------------------
// encode
// --------------------------------------------------------------------------

RunManifest run_encode(const PipelineConfig& cfg) {
  cfg.validate();
  RunPaths p(cfg.out_dir);
  check_config_guard(cfg, p);
  ensure_dirs(p);
  Timer timer;
  RunManifest m = start_manifest(cfg, "encode");

  ChannelSpec spec_a = read_channel_spec(p.spec_shopping);
  ChannelSpec spec_b = read_channel_spec(p.spec_points);
  std::vector<DemographicRecord> demos = read_demos_csv(p.demos);
  std::vector<EventRecord> shopping = read_events_csv(p.events_shopping);
  std::vector<EventRecord> points = read_events_csv(p.events_points);
  for (const std::string& path :
       {p.spec_shopping, p.spec_points, p.demos, p.events_shopping, p.events_points})
    m.add_input(path);

  // demos.csv defines the user universe; users without events still get a row
  // (an empty heatmap) so the tensor bank covers everyone.
  std::unordered_map<std::int64_t, std::size_t> index;
  index.reserve(demos.size());
  for (std::size_t i = 0; i < demos.size(); ++i)
    if (!index.emplace(demos[i].user_id, i).second)
      fail(Errc::invalid_argument, "duplicate user ", demos[i].user_id, " in ", p.demos);

  auto encode_all = [&](const std::vector<EventRecord>& events, const ChannelSpec& spec) {
    std::vector<std::vector<EventRecord>> per_user(demos.size());
    for (const EventRecord& e : events) {
      auto it = index.find(e.user_id);
      if (it == index.end())
        fail(Errc::invalid_argument, "event for user ", e.user_id, " not present in ", p.demos);
      per_user[it->second].push_back(e);
    }
    std::vector<UserHeatmap> out(demos.size());
    for (std::size_t i = 0; i < demos.size(); ++i) {
      out[i].user_id = demos[i].user_id;
      out[i].heatmap = encode_events(per_user[i], spec);
    }
    return out;
  };

  write_sparse_file(p.heat_shopping, encode_all(shopping, spec_a));
  write_sparse_file(p.heat_points, encode_all(points, spec_b));

  m.add_output(p.heat_shopping);
  m.add_output(p.heat_points);
  finish_manifest(m, p, timer);
  return m;
}

// --------------------------------------------------------------------------
// pretrain
// --------------------------------------------------------------------------

RunManifest run_pretrain(const PipelineConfig& cfg) {
  cfg.validate();
  RunPaths p(cfg.out_dir);
  check_config_guard(cfg, p);
  ensure_dirs(p);
  Timer timer;
  RunManifest m = start_manifest(cfg, "pretrain");

  LoadedRun run = load_run(cfg, p, m);

  ProfileNet<float> net;
  net.configure(run.shape);
  const std::uint64_t seed = derive_seed(cfg.seed, kTagPretrain);
  net.init_params(seed);
  PretrainResult result = train_multitask(net, run.bank, run.labels, run.train_rows,
                                          cfg.pretrain, seed);

  write_checkpoint(p.pretrained_ckpt, net.state());
  write_train_log(p.pretrain_log, result.log);
  m.add_output(p.pretrained_ckpt);
  m.add_output(p.pretrain_log);
  finish_manifest(m, p, timer);
  return m;
}

// --------------------------------------------------------------------------
// meta-train
// --------------------------------------------------------------------------

RunManifest run_meta_train(const PipelineConfig& cfg) {
  cfg.validate();
  RunPaths p(cfg.out_dir);
  check_config_guard(cfg, p);
  ensure_dirs(p);
  Timer timer;
  RunManifest m = start_manifest(cfg, "meta-train");

  LoadedRun run = load_run(cfg, p, m);

  MetaModel<float> model;
  model.configure(run.shape, cfg.network);
  model.init_params(derive_seed(cfg.seed, kTagMetaInit));
  // Warm-start the backbone from stage 1; the similarity stack keeps its
  // fresh initialization.
  model.backbone.load_state(read_checkpoint(p.pretrained_ckpt));
  m.add_input(p.pretrained_ckpt);

  MetaTrainResult result = meta_train(model, run.bank, run.labels, run.train_rows, cfg.meta,
                                      derive_seed(cfg.seed, kTagMetaTrain));

  write_checkpoint(p.meta_ckpt, model.state());
  write_train_log(p.meta_train_log, result.log);
  m.add_output(p.meta_ckpt);
  m.add_output(p.meta_train_log);
  if (cfg.meta.trace) {
    std::string text;
    for (const std::string& line : result.trace_lines) {
      text += line;
      text += '\n';
    }
    write_text_file(p.episode_trace, text);
    m.add_output(p.episode_trace);
  }
  finish_manifest(m, p, timer);
  return m;
}

// --------------------------------------------------------------------------
// evaluate
// --------------------------------------------------------------------------

RunManifest run_evaluate(const PipelineConfig& cfg) {
  cfg.validate();
  RunPaths p(cfg.out_dir);
  check_config_guard(cfg, p);
  ensure_dirs(p);
  Timer timer;
  RunManifest m = start_manifest(cfg, "evaluate");

  LoadedRun run = load_run(cfg, p, m);

  MetaModel<float> model;
  model.configure(run.shape, cfg.network);
  model.load_state(read_checkpoint(p.meta_ckpt));
  m.add_input(p.meta_ckpt);

  // The experiment layer only needs labels, task counts and the OOD id list;
  // rebuild that frame from the artifacts.
  Cohort frame;
  frame.cfg = cfg.cohort;
  frame.labels = run.labels;
  for (int r = run.labels.num_users; r < static_cast<int>(run.bank.user_ids.size()); ++r)
    frame.ood_users.push_back(UserData{run.bank.user_ids[static_cast<std::size_t>(r)]});

  ExperimentContext ctx;
  ctx.cohort = &frame;
  ctx.bank = &run.bank;
  ctx.shape = run.shape;
  ctx.net = cfg.network;
  ctx.meta = &model;
  ctx.cfg = cfg.evaluate;
  ctx.split_seed = derive_seed(cfg.seed, kTagEvalSplit);
  ctx.prepare(run.split);

  ExperimentReport report = run_experiments(ctx);

  write_report_csv(p.report_csv, report.rows);
  write_aggregate_csv(p.aggregate_csv, report.aggregates);
  write_report_json(p.report_json, report);
  m.add_output(p.report_csv);
  m.add_output(p.aggregate_csv);
  m.add_output(p.report_json);

  // Per-task score dumps: the meta arm against the fixed test rows, with a
  // class-balanced support set drawn from the adaptation pool.
  for (int t = 0; t < cfg.cohort.num_target_tasks; ++t) {
    const int col = cfg.cohort.num_source_tasks + t;
    std::vector<int> pos, neg;
    for (int r : ctx.pools.adapt_rows)
      (run.labels.label(r, col) ? pos : neg).push_back(r);
    const int shot = cfg.evaluate.shot;
    if (static_cast<int>(pos.size()) < shot || static_cast<int>(neg.size()) < shot)
      fail(Errc::invalid_argument, "target task ", col, " adaptation pool too small for a ",
           shot, "-shot support (", pos.size(), " pos, ", neg.size(), " neg)");
    Rng rng(derive_seed(cfg.seed, kTagScores, static_cast<std::uint64_t>(col)));
    std::vector<int> support_rows, support_cls;
    for (int pick : rng.sample_without_replacement(static_cast<int>(neg.size()), shot)) {
      support_rows.push_back(neg[static_cast<std::size_t>(pick)]);
      support_cls.push_back(0);
    }
    for (int pick : rng.sample_without_replacement(static_cast<int>(pos.size()), shot)) {
      support_rows.push_back(pos[static_cast<std::size_t>(pick)]);
      support_cls.push_back(1);
    }
    std::vector<double> scores = meta_test(model, run.bank, support_rows, support_cls,
                                           ctx.pools.test_rows);
    std::vector<std::int64_t> test_uids;
    std::vector<int> test_labels;
    for (int r : ctx.pools.test_rows) {
      test_uids.push_back(run.bank.user_ids[static_cast<std::size_t>(r)]);
      test_labels.push_back(run.labels.label(r, col));
    }
    const std::string path = p.scores_csv(col);
    write_scores_csv(path, test_uids, scores, test_labels);
    m.add_output(path);
  }

  // Post-training episodic accuracy on the source tasks, for the summary.
  const double ep_acc =
      episodic_accuracy(model, run.bank, run.labels, run.train_rows, cfg.meta.shot,
                        cfg.meta.query_size, 24, derive_seed(cfg.seed, kTagEpAccuracy));

  nlohmann::json summary;
  summary["episodic_accuracy"] = ep_acc;
  summary["chance_accuracy"] = 1.0 / cfg.cohort.num_source_tasks;
  summary["seeds"] = cfg.evaluate.seeds;
  summary["test_users"] = ctx.pools.test_rows.size();
  summary["adapt_users"] = ctx.pools.adapt_rows.size();
  summary["ood_users"] = ctx.pools.ood_rows.size();
  for (const AggregateRow& a : report.aggregates)
    if (a.experiment == "ood" && a.task < 0 && a.arm == "meta") {
      summary["ood_overall_growth_rate"] = a.growth_rate;
      break;
    }
  write_text_file(p.summary_json, summary.dump(2) + "\n");
  m.add_output(p.summary_json);

  finish_manifest(m, p, timer);
  return m;
}

// --------------------------------------------------------------------------
// report
// --------------------------------------------------------------------------

RunManifest run_report(const PipelineConfig& cfg) {
  cfg.validate();
  RunPaths p(cfg.out_dir);
  check_config_guard(cfg, p);
  ensure_dirs(p);
  Timer timer;
  RunManifest m = start_manifest(cfg, "report");

  ExperimentReport report = read_report_json(p.report_json);
  m.add_input(p.report_json);

  // Pivot the per-arm aggregate rows into per-cell comparison tables that a
  // plotting script can consume directly.
  struct Cell {
    const AggregateRow* baseline = nullptr;
    const AggregateRow* meta = nullptr;
  };
  auto pivot = [&](const std::string& experiment) {
    std::vector<std::pair<std::pair<int, std::string>, Cell>> cells;
    auto slot = [&](int task, const std::string& config) -> Cell& {
      for (auto& [key, cell] : cells)
        if (key.first == task && key.second == config) return cell;
      cells.push_back({{task, config}, Cell{}});
      return cells.back().second;
    };
    for (const AggregateRow& a : report.aggregates) {
      if (a.experiment != experiment) continue;
      Cell& c = slot(a.task, a.config);
      (a.arm == "meta" ? c.meta : c.baseline) = &a;
    }
    return cells;
  };

  {
    std::string text = "task,baseline_aupr,meta_aupr,aupr_gain,growth_rate,baseline_auroc,meta_auroc\n";
    for (const auto& [key, cell] : pivot("ood")) {
      if (!cell.baseline || !cell.meta) continue;
      std::string line = key.first < 0 ? "overall" : std::to_string(key.first);
      append_csv_field(line, cell.baseline->mean_aupr);
      append_csv_field(line, cell.meta->mean_aupr);
      append_csv_field(line, cell.meta->mean_aupr - cell.baseline->mean_aupr);
      append_csv_field(line, cell.meta->growth_rate);
      append_csv_field(line, cell.baseline->mean_auroc);
      append_csv_field(line, cell.meta->mean_auroc);
      text += line + "\n";
    }
    write_text_file(p.ood_summary_csv, text);
    m.add_output(p.ood_summary_csv);
  }
  {
    std::string text = "task,fraction,baseline_aupr,meta_aupr,gap,baseline_auroc,meta_auroc\n";
    for (const auto& [key, cell] : pivot("masking")) {
      if (!cell.baseline || !cell.meta) continue;
      std::string line = std::to_string(key.first) + "," + key.second;
      append_csv_field(line, cell.baseline->mean_aupr);
      append_csv_field(line, cell.meta->mean_aupr);
      append_csv_field(line, cell.meta->mean_aupr - cell.baseline->mean_aupr);
      append_csv_field(line, cell.baseline->mean_auroc);
      append_csv_field(line, cell.meta->mean_auroc);
      text += line + "\n";
    }
    write_text_file(p.masking_curves_csv, text);
    m.add_output(p.masking_curves_csv);
  }
  {
    std::string text =
        "task,ratio,baseline_aupr,meta_aupr,baseline_ma,meta_ma,ma_gap,baseline_auroc,meta_auroc\n";
    for (const auto& [key, cell] : pivot("imbalance")) {
      if (!cell.baseline || !cell.meta) continue;
      std::string line = std::to_string(key.first) + "," + key.second;
      append_csv_field(line, cell.baseline->mean_aupr);
      append_csv_field(line, cell.meta->mean_aupr);
      append_csv_field(line, cell.baseline->ma_aupr);
      append_csv_field(line, cell.meta->ma_aupr);
      append_csv_field(line, cell.meta->ma_aupr - cell.baseline->ma_aupr);
      append_csv_field(line, cell.baseline->mean_auroc);
      append_csv_field(line, cell.meta->mean_auroc);
      text += line + "\n";
    }
    write_text_file(p.imbalance_curves_csv, text);
    m.add_output(p.imbalance_curves_csv);
  }

  finish_manifest(m, p, timer);
  return m;
}

std::vector<RunManifest> run_all(const PipelineConfig& cfg) {
  std::vector<RunManifest> out;
  out.push_back(run_generate(cfg));
  out.push_back(run_encode(cfg));
  out.push_back(run_pretrain(cfg));
  out.push_back(run_meta_train(cfg));
  out.push_back(run_evaluate(cfg));
  out.push_back(run_report(cfg));
  return out;
}

}  // namespace mp
