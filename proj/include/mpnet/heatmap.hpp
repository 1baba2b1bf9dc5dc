#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mpnet/events.hpp"
#include "mpnet/tensor.hpp"

namespace mp {

inline constexpr int kDays = 365;
inline constexpr int kHours = 24;

// How a channel turns matched events into cell values, and how the network
// input is transformed afterwards.
enum class Extractor { amount, count };
enum class CellTransform { identity, log1p };

struct ChannelRule {
  int channel = 0;
  std::string genre_prefix;  // empty prefix matches every event
  Extractor extractor = Extractor::amount;
};

struct ChannelSpec {
  int num_channels = 0;
  std::vector<ChannelRule> rules;
  // Per-channel transform applied at batch-assembly time (not at encode time,
  // so stored heatmaps keep raw sums). Empty means defaults: log1p for
  // channels with an amount rule, identity otherwise.
  std::vector<CellTransform> transforms;

  void validate() const;
  CellTransform transform_for(int channel) const;
  static ChannelSpec from_json_text(const std::string& text);
  std::string to_json_text() const;
};

ChannelSpec read_channel_spec(const std::string& path);
void write_channel_spec(const std::string& path, const ChannelSpec& spec);

// One cell of a sparse heatmap; key order is (day, hour, channel).
struct HeatCell {
  int day = 0;
  int hour = 0;
  int channel = 0;
  float value = 0.0f;

  friend bool operator==(const HeatCell& a, const HeatCell& b) {
    return a.day == b.day && a.hour == b.hour && a.channel == b.channel && a.value == b.value;
  }
};

struct SparseHeatmap {
  int num_channels = 0;
  std::vector<HeatCell> cells;  // sorted by (day, hour, channel), unique keys

  friend bool operator==(const SparseHeatmap& a, const SparseHeatmap& b) {
    return a.num_channels == b.num_channels && a.cells == b.cells;
  }
};

// Sort by key, sum duplicates, drop exact-zero cells.
SparseHeatmap normalized(const SparseHeatmap& h);

// Grammar: record := day "," hour "," channel ":" value; records joined by
// ";"; spaces allowed around tokens; trailing ";" allowed. Duplicate keys are
// summed. Errors carry the byte offset of the offending token.
SparseHeatmap parse_sparse(const std::string& text, int num_channels);

// Canonical form: cells sorted by key, "d, h, c: v" joined by "; ", values in
// shortest round-trip decimal. parse_sparse(serialize_sparse(h)) == h.
std::string serialize_sparse(const SparseHeatmap& h);

using DenseHeatmap = Tensor<float>;  // (365, 24, C)

DenseHeatmap densify(const SparseHeatmap& h);
SparseHeatmap sparsify(const DenseHeatmap& d, float eps);

struct EncodeStats {
  std::int64_t matched = 0;    // event-rule matches accumulated
  std::int64_t unmatched = 0;  // events matching no rule
  std::int64_t rejected = 0;   // events with out-of-range day/hour
};

// Aggregates events into cells. With stats == nullptr an out-of-range event
// is an error; otherwise it is skipped and counted.
SparseHeatmap encode_events(const std::vector<EventRecord>& events, const ChannelSpec& spec,
                            EncodeStats* stats = nullptr);

// Multi-user text file: one line per user, "user_id|<sparse text>".
struct UserHeatmap {
  std::int64_t user_id = 0;
  SparseHeatmap heatmap;
};

void write_sparse_file(const std::string& path, const std::vector<UserHeatmap>& users);
std::vector<UserHeatmap> read_sparse_file(const std::string& path, int num_channels);

// Dense binary: 16-byte header (magic "MPHM", u32 365, u32 24, u32 C, all
// little-endian) followed by one or more (365,24,C) float32 blocks in file
// order. Block count is implied by file size.
void write_dense_file(const std::string& path, const std::vector<DenseHeatmap>& maps);
std::vector<DenseHeatmap> read_dense_file(const std::string& path);

}  // namespace mp
