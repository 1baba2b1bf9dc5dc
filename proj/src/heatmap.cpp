#include "mpnet/heatmap.hpp"

#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <tuple>

#include "json.hpp"
#include "mpnet/common.hpp"

namespace mp {

namespace {

using Key = std::tuple<int, int, int>;

std::vector<HeatCell> cells_from_map(const std::map<Key, double>& acc, bool drop_zero) {
  std::vector<HeatCell> cells;
  cells.reserve(acc.size());
  for (const auto& [key, sum] : acc) {
    const float v = static_cast<float>(sum);
    if (drop_zero && v == 0.0f) continue;
    cells.push_back({std::get<0>(key), std::get<1>(key), std::get<2>(key), v});
  }
  return cells;
}

std::map<Key, double> map_from_cells(const std::vector<HeatCell>& cells) {
  std::map<Key, double> acc;
  for (const auto& c : cells) acc[{c.day, c.hour, c.channel}] += c.value;
  return acc;
}

}  // namespace

// ---------------------------------------------------------------------------
// ChannelSpec
// ---------------------------------------------------------------------------

void ChannelSpec::validate() const {
  if (num_channels < 1) fail(Errc::config, "channel spec: num_channels must be >= 1");
  if (rules.empty()) fail(Errc::config, "channel spec: at least one rule required");
  for (const auto& r : rules)
    if (r.channel < 0 || r.channel >= num_channels)
      fail(Errc::config, "channel spec: rule channel ", r.channel, " outside [0, ", num_channels,
           ")");
  if (!transforms.empty() && static_cast<int>(transforms.size()) != num_channels)
    fail(Errc::config, "channel spec: transforms must be empty or one per channel");
}

CellTransform ChannelSpec::transform_for(int channel) const {
  if (channel < 0 || channel >= num_channels)
    fail(Errc::invalid_argument, "transform_for: channel ", channel, " out of range");
  if (!transforms.empty()) return transforms[static_cast<std::size_t>(channel)];
  for (const auto& r : rules)
    if (r.channel == channel && r.extractor == Extractor::amount) return CellTransform::log1p;
  return CellTransform::identity;
}

ChannelSpec ChannelSpec::from_json_text(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const std::exception& e) {
    fail(Errc::parse, "channel spec json: ", e.what());
  }
  ChannelSpec spec;
  try {
    spec.num_channels = j.at("num_channels").get<int>();
    for (const auto& jr : j.at("rules")) {
      ChannelRule r;
      r.channel = jr.at("channel").get<int>();
      r.genre_prefix = jr.value("prefix", std::string());
      const std::string ex = jr.at("extractor").get<std::string>();
      if (ex == "amount")
        r.extractor = Extractor::amount;
      else if (ex == "count")
        r.extractor = Extractor::count;
      else
        fail(Errc::config, "channel spec: unknown extractor '", ex, "'");
      spec.rules.push_back(std::move(r));
    }
    if (j.contains("transforms")) {
      for (const auto& jt : j.at("transforms")) {
        const std::string t = jt.get<std::string>();
        if (t == "identity")
          spec.transforms.push_back(CellTransform::identity);
        else if (t == "log1p")
          spec.transforms.push_back(CellTransform::log1p);
        else
          fail(Errc::config, "channel spec: unknown transform '", t, "'");
      }
    }
  } catch (const Error&) {
    throw;
  } catch (const std::exception& e) {
    fail(Errc::config, "channel spec json: ", e.what());
  }
  spec.validate();
  return spec;
}

std::string ChannelSpec::to_json_text() const {
  validate();
  nlohmann::json j;
  j["num_channels"] = num_channels;
  j["rules"] = nlohmann::json::array();
  for (const auto& r : rules) {
    nlohmann::json jr;
    jr["channel"] = r.channel;
    jr["prefix"] = r.genre_prefix;
    jr["extractor"] = r.extractor == Extractor::amount ? "amount" : "count";
    j["rules"].push_back(jr);
  }
  if (!transforms.empty()) {
    j["transforms"] = nlohmann::json::array();
    for (auto t : transforms)
      j["transforms"].push_back(t == CellTransform::log1p ? "log1p" : "identity");
  }
  return j.dump(2) + "\n";
}

ChannelSpec read_channel_spec(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(Errc::io, "cannot open: ", path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  try {
    return ChannelSpec::from_json_text(text);
  } catch (const Error& e) {
    fail(e.code(), path, ": ", e.what());
  }
}

void write_channel_spec(const std::string& path, const ChannelSpec& spec) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(Errc::io, "cannot open for writing: ", path);
  out << spec.to_json_text();
  if (!out) fail(Errc::io, "write failed: ", path);
}

// ---------------------------------------------------------------------------
// Sparse text format
// ---------------------------------------------------------------------------

SparseHeatmap normalized(const SparseHeatmap& h) {
  SparseHeatmap out;
  out.num_channels = h.num_channels;
  out.cells = cells_from_map(map_from_cells(h.cells), /*drop_zero=*/true);
  return out;
}

namespace {

struct SparseScanner {
  const std::string& text;
  std::size_t pos = 0;

  [[noreturn]] void error(std::size_t at, const std::string& what) const {
    fail(Errc::parse, "sparse parse error at byte ", at, ": ", what);
  }
  void skip_ws() {
    while (pos < text.size() && (text[pos] == ' ' || text[pos] == '\t')) ++pos;
  }
  bool done() const { return pos >= text.size(); }
  void expect(char c) {
    if (done() || text[pos] != c)
      error(pos, std::string("expected '") + c + "', got " +
                     (done() ? std::string("end of input")
                             : "'" + std::string(1, text[pos]) + "'"));
    ++pos;
  }
  int parse_index(const char* what, int lo, int hi) {
    skip_ws();
    const std::size_t at = pos;
    int v = 0;
    auto [p, ec] = std::from_chars(text.data() + pos, text.data() + text.size(), v);
    if (ec != std::errc{} || p == text.data() + pos)
      error(at, std::string("expected integer ") + what);
    pos = static_cast<std::size_t>(p - text.data());
    if (v < lo || v > hi)
      error(at, std::string(what) + " out of range: " + std::to_string(v) + " not in [" +
                    std::to_string(lo) + ", " + std::to_string(hi) + "]");
    return v;
  }
  float parse_value() {
    skip_ws();
    const std::size_t at = pos;
    float v = 0.0f;
    auto [p, ec] = std::from_chars(text.data() + pos, text.data() + text.size(), v);
    if (ec == std::errc::result_out_of_range) error(at, "value out of float range");
    if (ec != std::errc{} || p == text.data() + pos) error(at, "expected numeric value");
    pos = static_cast<std::size_t>(p - text.data());
    if (!std::isfinite(v)) error(at, "value must be finite");
    return v;
  }
};

}  // namespace

SparseHeatmap parse_sparse(const std::string& text, int num_channels) {
  if (num_channels < 1) fail(Errc::invalid_argument, "parse_sparse: num_channels must be >= 1");
  SparseScanner s{text};
  std::map<Key, double> acc;
  s.skip_ws();
  while (!s.done()) {
    const int day = s.parse_index("day", 0, kDays - 1);
    s.skip_ws();
    s.expect(',');
    const int hour = s.parse_index("hour", 0, kHours - 1);
    s.skip_ws();
    s.expect(',');
    const int channel = s.parse_index("channel", 0, num_channels - 1);
    s.skip_ws();
    s.expect(':');
    const float value = s.parse_value();
    acc[{day, hour, channel}] += value;
    s.skip_ws();
    if (s.done()) break;
    s.expect(';');
    s.skip_ws();  // trailing separator before end of input is allowed
  }
  SparseHeatmap h;
  h.num_channels = num_channels;
  h.cells = cells_from_map(acc, /*drop_zero=*/false);
  return h;
}

std::string serialize_sparse(const SparseHeatmap& h) {
  const auto acc = map_from_cells(h.cells);  // sorts and merges duplicates
  std::string out;
  bool first = true;
  for (const auto& [key, sum] : acc) {
    if (!first) out += "; ";
    first = false;
    out += std::to_string(std::get<0>(key));
    out += ", ";
    out += std::to_string(std::get<1>(key));
    out += ", ";
    out += std::to_string(std::get<2>(key));
    out += ": ";
    out += format_float(static_cast<float>(sum));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Dense conversion
// ---------------------------------------------------------------------------

DenseHeatmap densify(const SparseHeatmap& h) {
  if (h.num_channels < 1) fail(Errc::invalid_argument, "densify: num_channels must be >= 1");
  DenseHeatmap d({kDays, kHours, h.num_channels});
  for (const auto& c : h.cells) {
    if (c.day < 0 || c.day >= kDays || c.hour < 0 || c.hour >= kHours || c.channel < 0 ||
        c.channel >= h.num_channels)
      fail(Errc::invalid_argument, "densify: cell out of range (", c.day, ", ", c.hour, ", ",
           c.channel, ")");
    d.data[(static_cast<std::size_t>(c.day) * kHours + c.hour) * h.num_channels + c.channel] +=
        c.value;
  }
  return d;
}

SparseHeatmap sparsify(const DenseHeatmap& d, float eps) {
  if (d.rank() != 3 || d.shape[0] != kDays || d.shape[1] != kHours)
    fail(Errc::invalid_argument, "sparsify: expected (365, 24, C) tensor, got ", shape_str(d));
  if (!(eps >= 0)) fail(Errc::invalid_argument, "sparsify: eps must be >= 0");
  SparseHeatmap h;
  h.num_channels = d.shape[2];
  const int c = h.num_channels;
  for (int day = 0; day < kDays; ++day)
    for (int hour = 0; hour < kHours; ++hour)
      for (int ch = 0; ch < c; ++ch) {
        const float v = d.data[(static_cast<std::size_t>(day) * kHours + hour) * c + ch];
        if (std::abs(v) > eps) h.cells.push_back({day, hour, ch, v});
      }
  return h;
}

// ---------------------------------------------------------------------------
// Event aggregation
// ---------------------------------------------------------------------------

namespace {

bool prefix_matches(const std::string& genre_path, const std::string& prefix) {
  if (prefix.empty()) return true;
  if (genre_path.size() < prefix.size()) return false;
  if (genre_path.compare(0, prefix.size(), prefix) != 0) return false;
  return genre_path.size() == prefix.size() || genre_path[prefix.size()] == '/';
}

}  // namespace

SparseHeatmap encode_events(const std::vector<EventRecord>& events, const ChannelSpec& spec,
                            EncodeStats* stats) {
  spec.validate();
  std::map<Key, double> acc;
  for (std::size_t i = 0; i < events.size(); ++i) {
    const auto& e = events[i];
    if (e.day < 0 || e.day >= kDays || e.hour < 0 || e.hour >= kHours) {
      if (!stats)
        fail(Errc::invalid_argument, "encode_events: event ", i, " has out-of-range time (day=",
             e.day, ", hour=", e.hour, ")");
      stats->rejected += 1;
      continue;
    }
    bool any = false;
    for (const auto& r : spec.rules) {
      if (!prefix_matches(e.genre_path, r.genre_prefix)) continue;
      any = true;
      acc[{e.day, e.hour, r.channel}] += r.extractor == Extractor::amount ? e.price : 1.0;
      if (stats) stats->matched += 1;
    }
    if (!any && stats) stats->unmatched += 1;
  }
  SparseHeatmap h;
  h.num_channels = spec.num_channels;
  h.cells = cells_from_map(acc, /*drop_zero=*/true);
  return h;
}

// ---------------------------------------------------------------------------
// Files
// ---------------------------------------------------------------------------

void write_sparse_file(const std::string& path, const std::vector<UserHeatmap>& users) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(Errc::io, "cannot open for writing: ", path);
  for (const auto& u : users) out << u.user_id << '|' << serialize_sparse(u.heatmap) << '\n';
  if (!out) fail(Errc::io, "write failed: ", path);
}

std::vector<UserHeatmap> read_sparse_file(const std::string& path, int num_channels) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(Errc::io, "cannot open: ", path);
  std::vector<UserHeatmap> users;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto bar = line.find('|');
    if (bar == std::string::npos)
      fail(Errc::parse, path, ":", lineno, ": expected 'user_id|cells' line");
    UserHeatmap u;
    auto [p, ec] = std::from_chars(line.data(), line.data() + bar, u.user_id);
    if (ec != std::errc{} || p != line.data() + bar)
      fail(Errc::parse, path, ":", lineno, ": bad user id '", line.substr(0, bar), "'");
    try {
      u.heatmap = parse_sparse(line.substr(bar + 1), num_channels);
    } catch (const Error& e) {
      fail(Errc::parse, path, ":", lineno, ": ", e.what());
    }
    users.push_back(std::move(u));
  }
  return users;
}

namespace {

void put_u32le(std::string& out, std::uint32_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
  out.push_back(static_cast<char>((v >> 16) & 0xff));
  out.push_back(static_cast<char>((v >> 24) & 0xff));
}

std::uint32_t get_u32le(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

}  // namespace

void write_dense_file(const std::string& path, const std::vector<DenseHeatmap>& maps) {
  if (maps.empty()) fail(Errc::invalid_argument, "write_dense_file: no heatmaps");
  const int c = maps.front().shape.back();
  for (const auto& m : maps)
    if (m.rank() != 3 || m.shape[0] != kDays || m.shape[1] != kHours || m.shape[2] != c)
      fail(Errc::invalid_argument, "write_dense_file: inconsistent shape ", shape_str(m));
  std::string header = "MPHM";
  put_u32le(header, kDays);
  put_u32le(header, kHours);
  put_u32le(header, static_cast<std::uint32_t>(c));
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(Errc::io, "cannot open for writing: ", path);
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  for (const auto& m : maps) {
    static_assert(sizeof(float) == 4);
    out.write(reinterpret_cast<const char*>(m.ptr()),
              static_cast<std::streamsize>(m.numel() * 4));
  }
  if (!out) fail(Errc::io, "write failed: ", path);
}

std::vector<DenseHeatmap> read_dense_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(Errc::io, "cannot open: ", path);
  unsigned char header[16];
  if (!in.read(reinterpret_cast<char*>(header), 16)) fail(Errc::parse, path, ": truncated header");
  if (std::memcmp(header, "MPHM", 4) != 0) fail(Errc::parse, path, ": bad magic");
  const std::uint32_t days = get_u32le(header + 4), hours = get_u32le(header + 8),
                      channels = get_u32le(header + 12);
  if (days != kDays || hours != kHours)
    fail(Errc::parse, path, ": unexpected grid ", days, "x", hours);
  if (channels < 1 || channels > 4096) fail(Errc::parse, path, ": bad channel count ", channels);
  const std::size_t block = static_cast<std::size_t>(days) * hours * channels;
  std::vector<DenseHeatmap> maps;
  for (;;) {
    DenseHeatmap m({kDays, kHours, static_cast<int>(channels)});
    in.read(reinterpret_cast<char*>(m.ptr()), static_cast<std::streamsize>(block * 4));
    if (in.gcount() == 0 && in.eof()) break;
    if (static_cast<std::size_t>(in.gcount()) != block * 4)
      fail(Errc::parse, path, ": truncated heatmap block ", maps.size());
    maps.push_back(std::move(m));
  }
  if (maps.empty()) fail(Errc::parse, path, ": no heatmap blocks");
  return maps;
}

}  // namespace mp
