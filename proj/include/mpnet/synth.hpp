#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "mpnet/events.hpp"
#include "mpnet/heatmap.hpp"

namespace mp {

// Long-term behavioral profile a user is drawn from. channel_affinity indexes
// the genre groups of one modality (shopping groups or the single points
// group), which map one-to-one onto heatmap channels.
struct UserArchetype {
  int archetype_id = 0;
  std::vector<double> channel_affinity;  // sums to 1
  std::vector<double> hour_profile;      // 24 entries, sums to 1
  std::vector<double> seasonality;       // 365 entries, >= 0, mean 1
  double mean_events_per_year = 0.0;     // >= 0
  double price_log_mean = 0.0;
  double price_log_sd = 0.0;
};

void validate_archetype(const UserArchetype& a);

struct DemographicRecord {
  std::int64_t user_id = 0;
  std::vector<double> numeric_features;
  std::vector<int> categorical_features;  // cardinalities in kDemoCardinalities
};

inline constexpr int kDemoNumericCount = 2;             // age, income index
inline const std::vector<int> kDemoCardinalities = {5, 3};  // region, segment

struct LabelMatrix {
  int num_users = 0;
  int num_tasks = 0;
  std::vector<std::int8_t> labels;  // row-major users x tasks, {0,1}
  std::vector<std::int8_t> mask;    // 1 = label observed

  void resize(int users, int tasks) {
    num_users = users;
    num_tasks = tasks;
    labels.assign(static_cast<std::size_t>(users) * tasks, 0);
    mask.assign(static_cast<std::size_t>(users) * tasks, 1);
  }
  std::int8_t& label(int u, int t) { return labels[static_cast<std::size_t>(u) * num_tasks + t]; }
  std::int8_t label(int u, int t) const {
    return labels[static_cast<std::size_t>(u) * num_tasks + t];
  }
  std::int8_t& mask_at(int u, int t) { return mask[static_cast<std::size_t>(u) * num_tasks + t]; }
  std::int8_t mask_at(int u, int t) const {
    return mask[static_cast<std::size_t>(u) * num_tasks + t];
  }
};

struct CohortConfig {
  int num_users = 2000;
  int num_ood_users = 300;
  int num_archetypes = 12;
  std::vector<int> ood_archetype_ids = {10, 11};
  int num_source_tasks = 9;   // N
  int num_target_tasks = 8;
  std::uint64_t seed = 1;
  double source_prevalence = 0.2;
  double target_prevalence = 0.3;
  double label_noise_sd = 0.55;
  double mask_density = 1.0;  // fraction of source labels observed
  double mean_events_shopping = 250.0;
  double mean_events_points = 90.0;

  void validate() const;
};

struct UserData {
  std::int64_t user_id = 0;
  int archetype_id = 0;
  std::vector<EventRecord> shopping;
  std::vector<EventRecord> points;
  DemographicRecord demo;
};

// Task columns in the label matrix: source tasks first (0..N-1), then target
// tasks (N..N+T-1).
struct Cohort {
  CohortConfig cfg;
  std::vector<UserData> users;      // in-distribution cohort
  std::vector<UserData> ood_users;  // drawn from the withheld archetypes
  LabelMatrix labels;               // rows follow `users` order
  ChannelSpec shopping_spec;
  ChannelSpec points_spec;
};

// Shopping genre groups; group index == shopping heatmap channel.
const std::vector<std::vector<std::string>>& shopping_genre_groups();
const std::vector<std::vector<std::string>>& points_genre_groups();

ChannelSpec default_shopping_spec();
ChannelSpec default_points_spec();

// The deterministic archetype bank for a config; both modality views.
struct ArchetypeBank {
  std::vector<UserArchetype> shopping;
  std::vector<UserArchetype> points;
};
ArchetypeBank build_archetypes(const CohortConfig& cfg);

std::vector<EventRecord> sample_user_events(const UserArchetype& a, std::uint64_t year_seed,
                                            const std::vector<std::vector<std::string>>& genre_groups,
                                            std::int64_t user_id = 0);

Cohort generate_cohort(const CohortConfig& cfg);

// Per-user behavioral aggregates (raw, unstandardized): the hand-crafted
// features the labels are keyed to. Order documented in synth.cpp.
std::vector<double> user_aggregates(const UserData& u);
int aggregate_count();

// ---------------------------------------------------------------------------
// Three-way user split and support-set carving.
// ---------------------------------------------------------------------------

struct SplitFractions {
  double train = 0.6;
  double support = 0.0;
  double predict = 0.4;
};

struct SupportItem {
  std::int64_t user_id = 0;
  int cls = 0;  // class index within the target task (binary: 0 or 1)
};

struct CohortSplit {
  std::vector<std::int64_t> train_users;
  std::vector<std::int64_t> support_users;
  std::vector<std::int64_t> predict_users;
  // target task index -> K support users per class, drawn from support_users
  std::map<int, std::vector<SupportItem>> target_support;
};

CohortSplit split_cohort(const LabelMatrix& labels, const std::vector<std::int64_t>& user_ids,
                         const std::vector<int>& source_tasks, const std::vector<int>& target_tasks,
                         const SplitFractions& fractions, int shot, std::uint64_t seed);

// ---------------------------------------------------------------------------
// CSV interfaces
// ---------------------------------------------------------------------------

// Header: user_id,task_0..task_{T-1}; masked labels written as NA.
void write_labels_csv(const std::string& path, const std::vector<std::int64_t>& user_ids,
                      const LabelMatrix& labels);
void read_labels_csv(const std::string& path, std::vector<std::int64_t>& user_ids,
                     LabelMatrix& labels);

// Header: user_id,num_0..,cat_0..
void write_demos_csv(const std::string& path, const std::vector<DemographicRecord>& demos);
std::vector<DemographicRecord> read_demos_csv(const std::string& path);

}  // namespace mp
