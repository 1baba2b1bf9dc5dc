// mpnet: command-line front end for the meta-profile pipeline. Talks to the
// core exclusively through the C API in metaprofile.h.

#include <cstdint>
#include <cstdio>
#include <string>

#include "CLI11.hpp"
#include "metaprofile.h"
#include "nlohmann/json.hpp"

namespace {

const char* status_name(mp_status st) {
  switch (st) {
    case MP_OK: return "ok";
    case MP_ERR_INVALID_ARGUMENT: return "invalid_argument";
    case MP_ERR_PARSE: return "parse";
    case MP_ERR_IO: return "io";
    case MP_ERR_CONFIG: return "config";
    case MP_ERR_NUMERIC: return "numeric";
    case MP_ERR_INTERNAL: return "internal";
  }
  return "internal";
}

struct GlobalFlags {
  std::string config;
  std::string out_dir;
  std::uint64_t seed = 0;
  int threads = 0;
  bool has_out_dir = false;
  bool has_seed = false;
  bool has_threads = false;

  // Flags become a JSON override object merged over the config file.
  std::string overrides() const {
    nlohmann::json j = nlohmann::json::object();
    if (has_seed) j["seed"] = seed;
    if (has_out_dir) j["out_dir"] = out_dir;
    if (has_threads) j["threads"] = threads;
    return j.empty() ? std::string() : j.dump();
  }
};

void print_manifest_line(const nlohmann::json& m) {
  std::printf("%-10s ok  %6.1fs  %zu in, %zu out\n",
              m.value("command", std::string("?")).c_str(), m.value("elapsed_seconds", 0.0),
              m.value("inputs", nlohmann::json::array()).size(),
              m.value("outputs", nlohmann::json::array()).size());
}

// One line on stderr, machine-parsable: error: <status>: <message>
int report_error(mp_status st) {
  std::string msg = mp_last_error();
  for (char& c : msg)
    if (c == '\n') c = ' ';
  std::fprintf(stderr, "error: %s: %s\n", status_name(st), msg.c_str());
  return static_cast<int>(st);
}

using CommandFn = mp_status (*)(const char*, const char*, char**);

int run(CommandFn fn, const GlobalFlags& flags, bool array_result) {
  const std::string over = flags.overrides();
  char* manifest = nullptr;
  mp_status st = fn(flags.config.c_str(), over.empty() ? nullptr : over.c_str(), &manifest);
  if (st != MP_OK) return report_error(st);
  nlohmann::json j = nlohmann::json::parse(manifest);
  mp_free(manifest);
  if (array_result)
    for (const nlohmann::json& m : j) print_manifest_line(m);
  else
    print_manifest_line(j);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"meta-profile network pipeline"};
  app.require_subcommand(1);

  GlobalFlags flags;
  app.add_option("-c,--config", flags.config, "JSON config file")
      ->required()
      ->check(CLI::ExistingFile);
  app.add_option("--seed", flags.seed, "override the config seed")
      ->each([&](const std::string&) { flags.has_seed = true; });
  app.add_option("--out-dir", flags.out_dir, "override the output directory")
      ->each([&](const std::string&) { flags.has_out_dir = true; });
  app.add_option("--threads", flags.threads, "override the worker thread count")
      ->each([&](const std::string&) { flags.has_threads = true; });

  struct Command {
    const char* name;
    const char* help;
    CommandFn fn;
  };
  const Command commands[] = {
      {"generate", "synthesize the cohort: events, demographics, labels, split", mp_run_generate},
      {"encode", "aggregate event logs into sparse heatmaps", mp_run_encode},
      {"pretrain", "multi-task pretraining of the profile backbone", mp_run_pretrain},
      {"meta-train", "episodic training of the similarity head", mp_run_meta_train},
      {"evaluate", "run the OOD, label-masking and imbalance sweeps", mp_run_evaluate},
      {"report", "pivot the evaluation into plot-ready tables", mp_run_report},
  };
  for (const Command& c : commands) app.add_subcommand(c.name, c.help);
  app.add_subcommand("all", "run the whole pipeline in order");

  CLI11_PARSE(app, argc, argv);

  CLI::App* sub = app.get_subcommands().front();
  if (sub->get_name() == "all") return run(mp_run_all, flags, true);
  for (const Command& c : commands)
    if (sub->get_name() == c.name) return run(c.fn, flags, false);
  std::fprintf(stderr, "error: invalid_argument: unknown command\n");
  return static_cast<int>(MP_ERR_INVALID_ARGUMENT);
}
