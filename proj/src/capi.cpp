#include "metaprofile.h"

#include <cstdlib>
#include <cstring>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mpnet/common.hpp"
#include "mpnet/config.hpp"
#include "mpnet/heatmap.hpp"
#include "mpnet/metrics.hpp"
#include "mpnet/pipeline.hpp"

namespace {

thread_local std::string g_last_error;

mp_status to_status(mp::Errc c) {
  switch (c) {
    case mp::Errc::invalid_argument: return MP_ERR_INVALID_ARGUMENT;
    case mp::Errc::parse: return MP_ERR_PARSE;
    case mp::Errc::io: return MP_ERR_IO;
    case mp::Errc::config: return MP_ERR_CONFIG;
    case mp::Errc::numeric: return MP_ERR_NUMERIC;
    case mp::Errc::internal: return MP_ERR_INTERNAL;
  }
  return MP_ERR_INTERNAL;
}

// Runs fn, routing failures into the thread-local error slot.
template <class Fn>
mp_status guarded(Fn&& fn) {
  g_last_error.clear();
  try {
    fn();
    return MP_OK;
  } catch (const mp::Error& e) {
    g_last_error = e.what();
    return to_status(e.code());
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return MP_ERR_INTERNAL;
  } catch (...) {
    g_last_error = "unknown error";
    return MP_ERR_INTERNAL;
  }
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) mp::fail(mp::Errc::internal, "out of memory");
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

void merge_json(nlohmann::json& base, const nlohmann::json& over) {
  if (!over.is_object() || !base.is_object()) {
    base = over;
    return;
  }
  for (const auto& [key, value] : over.items()) {
    if (base.contains(key) && base[key].is_object() && value.is_object())
      merge_json(base[key], value);
    else
      base[key] = value;
  }
}

mp::PipelineConfig load_config(const char* config_path, const char* overrides_json) {
  if (!config_path || !*config_path)
    mp::fail(mp::Errc::invalid_argument, "config_path is null or empty");
  std::FILE* f = std::fopen(config_path, "rb");
  if (!f) mp::fail(mp::Errc::io, "cannot open ", config_path);
  std::string text;
  char buf[1 << 14];
  for (std::size_t got; (got = std::fread(buf, 1, sizeof buf, f)) > 0;) text.append(buf, got);
  std::fclose(f);

  if (overrides_json && *overrides_json) {
    nlohmann::json base, over;
    try {
      base = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
      mp::fail(mp::Errc::parse, config_path, ": ", e.what());
    }
    try {
      over = nlohmann::json::parse(overrides_json);
    } catch (const nlohmann::json::exception& e) {
      mp::fail(mp::Errc::parse, "overrides: ", e.what());
    }
    if (!over.is_object()) mp::fail(mp::Errc::invalid_argument, "overrides must be a JSON object");
    merge_json(base, over);
    text = base.dump();
  }
  return mp::PipelineConfig::from_json_text(text, config_path);
}

using RunFn = mp::RunManifest (*)(const mp::PipelineConfig&);

mp_status run_command(RunFn fn, const char* config_path, const char* overrides_json,
                      char** manifest_json_out) {
  return guarded([&] {
    mp::RunManifest m = fn(load_config(config_path, overrides_json));
    if (manifest_json_out) *manifest_json_out = dup_string(m.to_json_text());
  });
}

}  // namespace

struct mp_heatmap {
  mp::SparseHeatmap heatmap;
};

extern "C" {

const char* mp_version(void) { return "1.0.0"; }

const char* mp_last_error(void) { return g_last_error.c_str(); }

void mp_set_threads(int n) { mp::set_max_threads(n); }

void mp_free(void* p) { std::free(p); }

mp_status mp_run_generate(const char* config_path, const char* overrides_json,
                          char** manifest_json_out) {
  return run_command(&mp::run_generate, config_path, overrides_json, manifest_json_out);
}

mp_status mp_run_encode(const char* config_path, const char* overrides_json,
                        char** manifest_json_out) {
  return run_command(&mp::run_encode, config_path, overrides_json, manifest_json_out);
}

mp_status mp_run_pretrain(const char* config_path, const char* overrides_json,
                          char** manifest_json_out) {
  return run_command(&mp::run_pretrain, config_path, overrides_json, manifest_json_out);
}

mp_status mp_run_meta_train(const char* config_path, const char* overrides_json,
                            char** manifest_json_out) {
  return run_command(&mp::run_meta_train, config_path, overrides_json, manifest_json_out);
}

mp_status mp_run_evaluate(const char* config_path, const char* overrides_json,
                          char** manifest_json_out) {
  return run_command(&mp::run_evaluate, config_path, overrides_json, manifest_json_out);
}

mp_status mp_run_report(const char* config_path, const char* overrides_json,
                        char** manifest_json_out) {
  return run_command(&mp::run_report, config_path, overrides_json, manifest_json_out);
}

mp_status mp_run_all(const char* config_path, const char* overrides_json,
                     char** manifest_json_out) {
  return guarded([&] {
    std::vector<mp::RunManifest> ms = mp::run_all(load_config(config_path, overrides_json));
    if (manifest_json_out) {
      nlohmann::json arr = nlohmann::json::array();
      for (const mp::RunManifest& m : ms) arr.push_back(nlohmann::json::parse(m.to_json_text()));
      *manifest_json_out = dup_string(arr.dump(2));
    }
  });
}

mp_status mp_config_hash(const char* config_path, const char* overrides_json, char** hash_out) {
  return guarded([&] {
    if (!hash_out) mp::fail(mp::Errc::invalid_argument, "hash_out is null");
    *hash_out = dup_string(load_config(config_path, overrides_json).canonical_hash());
  });
}

mp_status mp_heatmap_parse(const char* text, int num_channels, mp_heatmap** out) {
  return guarded([&] {
    if (!text) mp::fail(mp::Errc::invalid_argument, "text is null");
    if (!out) mp::fail(mp::Errc::invalid_argument, "out is null");
    mp::SparseHeatmap h = mp::parse_sparse(text, num_channels);
    *out = new mp_heatmap{std::move(h)};
  });
}

mp_status mp_heatmap_serialize(const mp_heatmap* h, char** text_out) {
  return guarded([&] {
    if (!h || !text_out) mp::fail(mp::Errc::invalid_argument, "null argument");
    *text_out = dup_string(mp::serialize_sparse(h->heatmap));
  });
}

mp_status mp_heatmap_num_cells(const mp_heatmap* h, int64_t* out) {
  return guarded([&] {
    if (!h || !out) mp::fail(mp::Errc::invalid_argument, "null argument");
    *out = static_cast<int64_t>(h->heatmap.cells.size());
  });
}

mp_status mp_heatmap_num_channels(const mp_heatmap* h, int* out) {
  return guarded([&] {
    if (!h || !out) mp::fail(mp::Errc::invalid_argument, "null argument");
    *out = h->heatmap.num_channels;
  });
}

mp_status mp_heatmap_cell(const mp_heatmap* h, int64_t i, int* day, int* hour, int* channel,
                          float* value) {
  return guarded([&] {
    if (!h) mp::fail(mp::Errc::invalid_argument, "null heatmap");
    if (i < 0 || i >= static_cast<int64_t>(h->heatmap.cells.size()))
      mp::fail(mp::Errc::invalid_argument, "cell index ", i, " out of range (",
               h->heatmap.cells.size(), " cells)");
    const mp::HeatCell& c = h->heatmap.cells[static_cast<std::size_t>(i)];
    if (day) *day = c.day;
    if (hour) *hour = c.hour;
    if (channel) *channel = c.channel;
    if (value) *value = c.value;
  });
}

void mp_heatmap_free(mp_heatmap* h) { delete h; }

mp_status mp_auroc(const double* scores, const int* labels, int64_t n, double* out) {
  return guarded([&] {
    if (!scores || !labels || !out) mp::fail(mp::Errc::invalid_argument, "null argument");
    std::vector<mp::ScoredSample> samples(static_cast<std::size_t>(n));
    for (int64_t i = 0; i < n; ++i)
      samples[static_cast<std::size_t>(i)] = {scores[i], labels[i]};
    *out = mp::auroc(samples);
  });
}

mp_status mp_aupr(const double* scores, const int* labels, int64_t n, double* out) {
  return guarded([&] {
    if (!scores || !labels || !out) mp::fail(mp::Errc::invalid_argument, "null argument");
    std::vector<mp::ScoredSample> samples(static_cast<std::size_t>(n));
    for (int64_t i = 0; i < n; ++i)
      samples[static_cast<std::size_t>(i)] = {scores[i], labels[i]};
    *out = mp::aupr(samples);
  });
}

}  // extern "C"
