#include "mpnet/synth.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include "mpnet/common.hpp"
#include "mpnet/rng.hpp"

namespace mp {

namespace {

// Sub-stream tags for seed derivation.
enum : std::uint64_t {
  kTagUser = 1,
  kTagShopEvents = 2,
  kTagPointEvents = 3,
  kTagLabelNoise = 4,
  kTagMask = 5,
  kTagSplit = 6,
  kTagOod = 7,
};

const std::vector<std::string> kShoppingGroupNames = {"fashion", "electronics", "grocery",
                                                      "leisure"};

double vec_sum(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0); }

void normalize_prob(std::vector<double>& v) {
  const double s = vec_sum(v);
  if (!(s > 0)) fail(Errc::internal, "probability vector sums to zero");
  for (auto& x : v) x /= s;
}

}  // namespace

const std::vector<std::vector<std::string>>& shopping_genre_groups() {
  static const std::vector<std::vector<std::string>> groups = {
      {"fashion/tops/shirts", "fashion/shoes/sneakers", "fashion/bags/totes",
       "fashion/accessories/watches"},
      {"electronics/phones/smartphones", "electronics/cameras/mirrorless",
       "electronics/audio/headphones"},
      {"grocery/fresh/vegetables", "grocery/drinks/coffee", "grocery/snacks/chocolate"},
      {"leisure/travel/hotels", "leisure/books/novels", "leisure/sports/outdoor"}};
  return groups;
}

const std::vector<std::vector<std::string>>& points_genre_groups() {
  static const std::vector<std::vector<std::string>> groups = {
      {"points/redeem/store", "points/redeem/online", "points/earn/campaign"}};
  return groups;
}

ChannelSpec default_shopping_spec() {
  ChannelSpec spec;
  spec.num_channels = static_cast<int>(kShoppingGroupNames.size());
  for (int g = 0; g < spec.num_channels; ++g)
    spec.rules.push_back({g, kShoppingGroupNames[static_cast<std::size_t>(g)], Extractor::amount});
  return spec;
}

ChannelSpec default_points_spec() {
  ChannelSpec spec;
  spec.num_channels = 2;
  spec.rules.push_back({0, "points", Extractor::count});
  spec.rules.push_back({1, "points", Extractor::amount});
  return spec;
}

void validate_archetype(const UserArchetype& a) {
  if (a.channel_affinity.empty()) fail(Errc::invalid_argument, "archetype: empty channel_affinity");
  if (a.hour_profile.size() != 24) fail(Errc::invalid_argument, "archetype: hour_profile must have 24 entries");
  if (a.seasonality.size() != 365)
    fail(Errc::invalid_argument, "archetype: seasonality must have 365 entries");
  for (double v : a.channel_affinity)
    if (!(v >= 0)) fail(Errc::invalid_argument, "archetype: negative affinity");
  for (double v : a.hour_profile)
    if (!(v >= 0)) fail(Errc::invalid_argument, "archetype: negative hour weight");
  for (double v : a.seasonality)
    if (!(v >= 0)) fail(Errc::invalid_argument, "archetype: negative seasonality");
  if (std::abs(vec_sum(a.channel_affinity) - 1.0) > 1e-9)
    fail(Errc::invalid_argument, "archetype: channel_affinity must sum to 1");
  if (std::abs(vec_sum(a.hour_profile) - 1.0) > 1e-9)
    fail(Errc::invalid_argument, "archetype: hour_profile must sum to 1");
  if (!(a.mean_events_per_year >= 0))
    fail(Errc::invalid_argument, "archetype: mean_events_per_year must be >= 0");
  if (!(a.price_log_sd >= 0)) fail(Errc::invalid_argument, "archetype: price_log_sd must be >= 0");
}

void CohortConfig::validate() const {
  if (num_users < 1) fail(Errc::config, "cohort: num_users must be >= 1");
  if (num_ood_users < 0) fail(Errc::config, "cohort: num_ood_users must be >= 0");
  if (num_archetypes < 2) fail(Errc::config, "cohort: num_archetypes must be >= 2");
  if (num_source_tasks < 1) fail(Errc::config, "cohort: num_source_tasks must be >= 1");
  if (num_target_tasks < 0) fail(Errc::config, "cohort: num_target_tasks must be >= 0");
  std::set<int> ood(ood_archetype_ids.begin(), ood_archetype_ids.end());
  for (int id : ood)
    if (id < 0 || id >= num_archetypes)
      fail(Errc::config, "cohort: ood archetype id ", id, " outside [0, ", num_archetypes, ")");
  if (static_cast<int>(ood.size()) >= num_archetypes)
    fail(Errc::config, "cohort: at least one in-distribution archetype required");
  if (num_ood_users > 0 && ood.empty())
    fail(Errc::config, "cohort: num_ood_users > 0 requires ood_archetype_ids");
  if (!(source_prevalence > 0 && source_prevalence < 1))
    fail(Errc::config, "cohort: source_prevalence must be in (0, 1)");
  if (!(target_prevalence > 0 && target_prevalence < 1))
    fail(Errc::config, "cohort: target_prevalence must be in (0, 1)");
  if (!(label_noise_sd >= 0)) fail(Errc::config, "cohort: label_noise_sd must be >= 0");
  if (!(mask_density > 0 && mask_density <= 1))
    fail(Errc::config, "cohort: mask_density must be in (0, 1]");
  if (!(mean_events_shopping >= 0) || !(mean_events_points >= 0))
    fail(Errc::config, "cohort: mean event counts must be >= 0");
}

// ---------------------------------------------------------------------------
// Archetype bank
// ---------------------------------------------------------------------------

namespace {

std::vector<double> peaked_hour_profile(int peak, double kappa) {
  std::vector<double> p(24);
  constexpr double two_pi = 6.283185307179586476925286766559;
  for (int h = 0; h < 24; ++h) p[h] = std::exp(kappa * std::cos(two_pi * (h - peak) / 24.0));
  normalize_prob(p);
  return p;
}

std::vector<double> seasonal_curve(int phase, bool twin_peak) {
  std::vector<double> s(365);
  constexpr double two_pi = 6.283185307179586476925286766559;
  for (int d = 0; d < 365; ++d) {
    const double x = two_pi * (d - phase) / 365.0;
    s[d] = twin_peak ? 1.0 + 0.85 * std::sin(2.0 * x) : 1.0 + 0.6 * std::sin(x);
    if (s[d] < 0) s[d] = 0;
  }
  const double mean = vec_sum(s) / 365.0;
  for (auto& v : s) v /= mean;
  return s;
}

}  // namespace

ArchetypeBank build_archetypes(const CohortConfig& cfg) {
  cfg.validate();
  const std::set<int> ood(cfg.ood_archetype_ids.begin(), cfg.ood_archetype_ids.end());
  const int groups = static_cast<int>(kShoppingGroupNames.size());
  ArchetypeBank bank;
  for (int k = 0; k < cfg.num_archetypes; ++k) {
    const bool is_ood = ood.count(k) > 0;
    const int hour_peak = (7 + 2 * k) % 24;
    const int phase = (k * 97) % 365;

    UserArchetype shop;
    shop.archetype_id = k;
    shop.hour_profile = peaked_hour_profile(hour_peak, 2.2);
    shop.seasonality = seasonal_curve(phase, is_ood);
    shop.channel_affinity.assign(groups, 0.1);
    shop.channel_affinity[k % groups] += 0.45;
    shop.channel_affinity[(k / groups) % groups] += 0.15;
    normalize_prob(shop.channel_affinity);
    shop.mean_events_per_year =
        cfg.mean_events_shopping * (0.7 + 0.1 * (k % 7)) * (is_ood ? 1.5 : 1.0);
    shop.price_log_mean = std::log(2500.0) + 0.25 * ((k % 5) - 2) + (is_ood ? 0.9 : 0.0);
    shop.price_log_sd = 0.8;
    validate_archetype(shop);
    bank.shopping.push_back(std::move(shop));

    UserArchetype pts;
    pts.archetype_id = k;
    pts.hour_profile = peaked_hour_profile((hour_peak + 3) % 24, 2.0);
    pts.seasonality = seasonal_curve(phase, is_ood);
    pts.channel_affinity = {1.0};
    pts.mean_events_per_year =
        cfg.mean_events_points * (0.6 + 0.08 * (k % 6)) * (is_ood ? 1.5 : 1.0);
    pts.price_log_mean = std::log(150.0) + 0.2 * ((k % 4) - 1.5);
    pts.price_log_sd = 0.6;
    validate_archetype(pts);
    bank.points.push_back(std::move(pts));
  }
  return bank;
}

// ---------------------------------------------------------------------------
// Event sampling
// ---------------------------------------------------------------------------

std::vector<EventRecord> sample_user_events(const UserArchetype& a, std::uint64_t year_seed,
                                            const std::vector<std::vector<std::string>>& genre_groups,
                                            std::int64_t user_id) {
  validate_archetype(a);
  if (genre_groups.size() != a.channel_affinity.size())
    fail(Errc::invalid_argument, "sample_user_events: genre group count ", genre_groups.size(),
         " != affinity size ", a.channel_affinity.size());
  for (const auto& g : genre_groups)
    if (g.empty()) fail(Errc::invalid_argument, "sample_user_events: empty genre group");

  Rng rng(year_seed);
  const double mean_season = vec_sum(a.seasonality) / 365.0;
  const int n = rng.poisson(a.mean_events_per_year * mean_season);
  std::vector<EventRecord> events;
  events.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    EventRecord e;
    e.user_id = user_id;
    e.day = rng.categorical(a.seasonality);
    e.hour = rng.categorical(a.hour_profile);
    const int group = rng.categorical(a.channel_affinity);
    const auto& pool = genre_groups[static_cast<std::size_t>(group)];
    e.genre_path = pool[static_cast<std::size_t>(rng.uniform_int(static_cast<int>(pool.size())))];
    e.price = std::max(1.0, std::round(rng.lognormal(a.price_log_mean, a.price_log_sd)));
    events.push_back(std::move(e));
  }
  std::stable_sort(events.begin(), events.end(), [](const EventRecord& x, const EventRecord& y) {
    return x.day != y.day ? x.day < y.day : x.hour < y.hour;
  });
  return events;
}

// ---------------------------------------------------------------------------
// Aggregates
// ---------------------------------------------------------------------------

int aggregate_count() { return 10; }

std::vector<double> user_aggregates(const UserData& u) {
  const int groups = static_cast<int>(kShoppingGroupNames.size());
  double count = 0, evening = 0, morning = 0, weekend = 0;
  std::vector<double> amount(groups, 0.0);
  for (const auto& e : u.shopping) {
    count += 1;
    if (e.hour >= 18) evening += 1;
    if (e.hour >= 5 && e.hour <= 10) morning += 1;
    if (e.day % 7 >= 5) weekend += 1;
    for (int g = 0; g < groups; ++g) {
      const auto& name = kShoppingGroupNames[static_cast<std::size_t>(g)];
      if (e.genre_path.size() > name.size() && e.genre_path.compare(0, name.size(), name) == 0 &&
          e.genre_path[name.size()] == '/') {
        amount[g] += e.price;
        break;
      }
    }
  }
  double p_count = static_cast<double>(u.points.size()), p_amount = 0;
  for (const auto& e : u.points) p_amount += e.price;

  std::vector<double> agg;
  agg.push_back(std::log1p(count));
  for (int g = 0; g < groups; ++g) agg.push_back(std::log1p(amount[g]));
  agg.push_back(std::log1p(evening));
  agg.push_back(std::log1p(morning));
  agg.push_back(std::log1p(weekend));
  agg.push_back(std::log1p(p_count));
  agg.push_back(std::log1p(p_amount));
  return agg;
}

// ---------------------------------------------------------------------------
// Cohort generation
// ---------------------------------------------------------------------------

namespace {

UserArchetype jitter_archetype(const UserArchetype& base, double vol_mult, int hour_shift,
                               int season_shift, const std::vector<double>& affinity_mults,
                               double price_shift) {
  UserArchetype a = base;
  a.mean_events_per_year *= vol_mult;
  a.price_log_mean += price_shift;
  std::vector<double> hp(24);
  for (int h = 0; h < 24; ++h) hp[h] = base.hour_profile[((h - hour_shift) % 24 + 24) % 24];
  a.hour_profile = std::move(hp);
  std::vector<double> se(365);
  for (int d = 0; d < 365; ++d) se[d] = base.seasonality[((d - season_shift) % 365 + 365) % 365];
  a.seasonality = std::move(se);
  for (std::size_t g = 0; g < a.channel_affinity.size(); ++g)
    a.channel_affinity[g] *= affinity_mults[g];
  normalize_prob(a.channel_affinity);
  return a;
}

UserData make_user(const CohortConfig& cfg, const ArchetypeBank& bank,
                   const std::vector<int>& archetype_pool, std::int64_t user_id,
                   std::int64_t stream_index) {
  Rng rng(derive_seed(cfg.seed, kTagUser, static_cast<std::uint64_t>(stream_index)));
  UserData u;
  u.user_id = user_id;
  u.archetype_id =
      archetype_pool[static_cast<std::size_t>(rng.uniform_int(static_cast<int>(archetype_pool.size())))];
  const auto& shop_base = bank.shopping[static_cast<std::size_t>(u.archetype_id)];
  const auto& pts_base = bank.points[static_cast<std::size_t>(u.archetype_id)];

  const double vol_mult = std::exp(rng.normal(0.0, 0.25));
  const int hour_shift = rng.uniform_int(3) - 1;
  const int season_shift = rng.uniform_int(21) - 10;
  std::vector<double> aff_mults(shop_base.channel_affinity.size());
  for (auto& m : aff_mults) m = std::exp(rng.normal(0.0, 0.22));
  const double price_shift = rng.normal(0.0, 0.1);
  const int pts_hour_shift = rng.uniform_int(3) - 1;
  const double pts_price_shift = rng.normal(0.0, 0.1);

  const auto shop = jitter_archetype(shop_base, vol_mult, hour_shift, season_shift, aff_mults,
                                     price_shift);
  const auto pts = jitter_archetype(pts_base, vol_mult, pts_hour_shift, season_shift, {1.0},
                                    pts_price_shift);

  // Demographics drawn from the same per-user stream.
  const int k = u.archetype_id;
  const bool is_ood =
      std::find(cfg.ood_archetype_ids.begin(), cfg.ood_archetype_ids.end(), k) !=
      cfg.ood_archetype_ids.end();
  const double age =
      std::clamp(rng.normal(26.0 + 2.2 * (k % 10) + (is_ood ? 14.0 : 0.0), 5.0), 18.0, 80.0);
  const double income = rng.normal(2.6 + 0.35 * (k % 5), 0.7);
  std::vector<double> region_w(static_cast<std::size_t>(kDemoCardinalities[0]), 0.12);
  region_w[static_cast<std::size_t>(k % kDemoCardinalities[0])] = 0.52;
  const int region = rng.categorical(region_w);
  std::vector<double> segment_w(static_cast<std::size_t>(kDemoCardinalities[1]), 0.2);
  segment_w[static_cast<std::size_t>(k % kDemoCardinalities[1])] = 0.6;
  const int segment = rng.categorical(segment_w);
  u.demo.user_id = user_id;
  u.demo.numeric_features = {age, income};
  u.demo.categorical_features = {region, segment};

  u.shopping = sample_user_events(
      shop, derive_seed(cfg.seed, kTagShopEvents, static_cast<std::uint64_t>(stream_index)),
      shopping_genre_groups(), user_id);
  u.points = sample_user_events(
      pts, derive_seed(cfg.seed, kTagPointEvents, static_cast<std::uint64_t>(stream_index)),
      points_genre_groups(), user_id);
  return u;
}

}  // namespace

Cohort generate_cohort(const CohortConfig& cfg) {
  cfg.validate();
  Cohort cohort;
  cohort.cfg = cfg;
  cohort.shopping_spec = default_shopping_spec();
  cohort.points_spec = default_points_spec();

  const ArchetypeBank bank = build_archetypes(cfg);
  const std::set<int> ood(cfg.ood_archetype_ids.begin(), cfg.ood_archetype_ids.end());
  std::vector<int> in_dist, ood_pool;
  for (int k = 0; k < cfg.num_archetypes; ++k) (ood.count(k) ? ood_pool : in_dist).push_back(k);

  cohort.users.resize(static_cast<std::size_t>(cfg.num_users));
  parallel_for(cfg.num_users, [&](std::int64_t i) {
    cohort.users[static_cast<std::size_t>(i)] = make_user(cfg, bank, in_dist, 1000 + i, i);
  });
  cohort.ood_users.resize(static_cast<std::size_t>(cfg.num_ood_users));
  parallel_for(cfg.num_ood_users, [&](std::int64_t j) {
    cohort.ood_users[static_cast<std::size_t>(j)] =
        make_user(cfg, bank, ood_pool, 100000 + j, cfg.num_users + j);
  });

  // ---- labels ----
  const int n_users = cfg.num_users;
  const int n_tasks = cfg.num_source_tasks + cfg.num_target_tasks;
  cohort.labels.resize(n_users, n_tasks);

  // Standardized aggregates over the in-distribution cohort.
  const int adim = aggregate_count();
  std::vector<std::vector<double>> agg(static_cast<std::size_t>(n_users));
  for (int u = 0; u < n_users; ++u) agg[static_cast<std::size_t>(u)] = user_aggregates(cohort.users[static_cast<std::size_t>(u)]);
  std::vector<double> mean(adim, 0.0), sd(adim, 0.0);
  for (const auto& a : agg)
    for (int d = 0; d < adim; ++d) mean[d] += a[static_cast<std::size_t>(d)];
  for (auto& m : mean) m /= n_users;
  for (const auto& a : agg)
    for (int d = 0; d < adim; ++d) {
      const double dd = a[static_cast<std::size_t>(d)] - mean[d];
      sd[d] += dd * dd;
    }
  for (auto& s : sd) s = std::sqrt(std::max(s / n_users, 1e-18));

  const int in_dist_count = static_cast<int>(in_dist.size());
  for (int t = 0; t < n_tasks; ++t) {
    const bool is_source = t < cfg.num_source_tasks;
    const int idx = is_source ? t : t - cfg.num_source_tasks;
    const int key_arch = in_dist[static_cast<std::size_t>(idx % in_dist_count)];
    // Task-specific direction over the standardized aggregates.
    const int c0 = (3 * idx + (is_source ? 0 : 1)) % adim;
    const int c1 = (3 * idx + (is_source ? 5 : 6)) % adim;
    const double prevalence = is_source ? cfg.source_prevalence : cfg.target_prevalence;

    Rng noise(derive_seed(cfg.seed, kTagLabelNoise, static_cast<std::uint64_t>(t)));
    std::vector<double> direction(static_cast<std::size_t>(n_users));
    for (int u = 0; u < n_users; ++u) {
      const auto& a = agg[static_cast<std::size_t>(u)];
      const double z0 = (a[static_cast<std::size_t>(c0)] - mean[c0]) / sd[c0];
      const double z1 = (a[static_cast<std::size_t>(c1)] - mean[c1]) / sd[c1];
      direction[static_cast<std::size_t>(u)] = (z0 + 0.5 * z1) / 1.118033988749895;
    }
    // Center the aggregate direction within each archetype so it only carries
    // within-group variation; group membership itself drives the main bump.
    std::map<int, std::pair<double, int>> group_stats;
    for (int u = 0; u < n_users; ++u) {
      auto& [s, cnt] = group_stats[cohort.users[static_cast<std::size_t>(u)].archetype_id];
      s += direction[static_cast<std::size_t>(u)];
      cnt += 1;
    }
    std::vector<double> score(static_cast<std::size_t>(n_users));
    for (int u = 0; u < n_users; ++u) {
      const auto& [s, cnt] = group_stats[cohort.users[static_cast<std::size_t>(u)].archetype_id];
      const double centered = direction[static_cast<std::size_t>(u)] - s / cnt;
      score[static_cast<std::size_t>(u)] =
          2.2 * (cohort.users[static_cast<std::size_t>(u)].archetype_id == key_arch ? 1.0 : 0.0) +
          0.8 * centered + noise.normal(0.0, cfg.label_noise_sd);
    }
    std::vector<double> sorted = score;
    std::sort(sorted.begin(), sorted.end(), std::greater<>());
    const int n_pos = std::clamp(static_cast<int>(std::lround(prevalence * n_users)), 1, n_users - 1);
    const double threshold = sorted[static_cast<std::size_t>(n_pos - 1)];
    for (int u = 0; u < n_users; ++u)
      cohort.labels.label(u, t) = score[static_cast<std::size_t>(u)] >= threshold ? 1 : 0;
  }

  // ---- mask (source tasks only; target labels stay fully observed) ----
  if (cfg.mask_density < 1.0) {
    for (int t = 0; t < cfg.num_source_tasks; ++t) {
      Rng mrng(derive_seed(cfg.seed, kTagMask, static_cast<std::uint64_t>(t)));
      for (int u = 0; u < n_users; ++u)
        cohort.labels.mask_at(u, t) = mrng.uniform01() < cfg.mask_density ? 1 : 0;
    }
  }
  return cohort;
}

// ---------------------------------------------------------------------------
// Split
// ---------------------------------------------------------------------------

CohortSplit split_cohort(const LabelMatrix& labels, const std::vector<std::int64_t>& user_ids,
                         const std::vector<int>& source_tasks, const std::vector<int>& target_tasks,
                         const SplitFractions& fractions, int shot, std::uint64_t seed) {
  if (static_cast<int>(user_ids.size()) != labels.num_users)
    fail(Errc::invalid_argument, "split_cohort: user id list size ", user_ids.size(),
         " != label rows ", labels.num_users);
  for (int t : source_tasks)
    if (t < 0 || t >= labels.num_tasks) fail(Errc::invalid_argument, "split_cohort: source task ", t, " out of range");
  for (int t : target_tasks)
    if (t < 0 || t >= labels.num_tasks) fail(Errc::invalid_argument, "split_cohort: target task ", t, " out of range");
  std::set<int> src(source_tasks.begin(), source_tasks.end());
  for (int t : target_tasks)
    if (src.count(t)) fail(Errc::invalid_argument, "split_cohort: task ", t, " in both source and target sets");
  if (fractions.train < 0 || fractions.support < 0 || fractions.predict < 0 ||
      fractions.train + fractions.support + fractions.predict > 1.0 + 1e-9)
    fail(Errc::invalid_argument, "split_cohort: fractions must be non-negative and sum to <= 1");
  if (shot < 0) fail(Errc::invalid_argument, "split_cohort: shot must be >= 0");

  const int n = labels.num_users;
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  Rng rng(derive_seed(seed, kTagSplit));
  rng.shuffle(order);

  const int n_train = static_cast<int>(std::floor(fractions.train * n));
  const int n_support = static_cast<int>(std::floor(fractions.support * n));
  const int n_predict = static_cast<int>(std::floor(fractions.predict * n));

  CohortSplit split;
  std::vector<int> support_rows;
  for (int i = 0; i < n_train; ++i) split.train_users.push_back(user_ids[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])]);
  for (int i = n_train; i < n_train + n_support; ++i) {
    split.support_users.push_back(user_ids[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])]);
    support_rows.push_back(order[static_cast<std::size_t>(i)]);
  }
  for (int i = n_train + n_support; i < n_train + n_support + n_predict; ++i)
    split.predict_users.push_back(user_ids[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])]);
  std::sort(split.train_users.begin(), split.train_users.end());
  std::sort(split.support_users.begin(), split.support_users.end());
  std::sort(split.predict_users.begin(), split.predict_users.end());

  if (shot > 0) {
    for (int t : target_tasks) {
      std::vector<int> by_class[2];
      for (int row : support_rows) {
        if (!labels.mask_at(row, t)) continue;
        by_class[labels.label(row, t) ? 1 : 0].push_back(row);
      }
      std::vector<SupportItem> items;
      for (int c = 0; c < 2; ++c) {
        auto& pool = by_class[c];
        if (static_cast<int>(pool.size()) < shot)
          fail(Errc::invalid_argument, "split_cohort: target task ", t, " class ", c, " has ",
               pool.size(), " support candidates, need ", shot);
        std::sort(pool.begin(), pool.end());
        Rng crng(derive_seed(seed, kTagSplit + 10 + static_cast<std::uint64_t>(t),
                             static_cast<std::uint64_t>(c)));
        for (int pick : crng.sample_without_replacement(static_cast<int>(pool.size()), shot))
          items.push_back({user_ids[static_cast<std::size_t>(pool[static_cast<std::size_t>(pick)])], c});
      }
      split.target_support[t] = std::move(items);
    }
  }
  return split;
}

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

void write_labels_csv(const std::string& path, const std::vector<std::int64_t>& user_ids,
                      const LabelMatrix& labels) {
  if (static_cast<int>(user_ids.size()) != labels.num_users)
    fail(Errc::invalid_argument, "write_labels_csv: id/row count mismatch");
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(Errc::io, "cannot open for writing: ", path);
  out << "user_id";
  for (int t = 0; t < labels.num_tasks; ++t) out << ",task_" << t;
  out << '\n';
  for (int u = 0; u < labels.num_users; ++u) {
    out << user_ids[static_cast<std::size_t>(u)];
    for (int t = 0; t < labels.num_tasks; ++t) {
      out << ',';
      if (labels.mask_at(u, t))
        out << static_cast<int>(labels.label(u, t));
      else
        out << "NA";
    }
    out << '\n';
  }
  if (!out) fail(Errc::io, "write failed: ", path);
}

void read_labels_csv(const std::string& path, std::vector<std::int64_t>& user_ids,
                     LabelMatrix& labels) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(Errc::io, "cannot open: ", path);
  std::string line;
  if (!std::getline(in, line)) fail(Errc::parse, path, ": empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  std::vector<std::string> header;
  {
    std::stringstream ss(line);
    std::string f;
    while (std::getline(ss, f, ',')) header.push_back(f);
  }
  if (header.empty() || header[0] != "user_id")
    fail(Errc::parse, path, ": header must start with user_id");
  const int n_tasks = static_cast<int>(header.size()) - 1;
  for (int t = 0; t < n_tasks; ++t)
    if (header[static_cast<std::size_t>(t + 1)] != "task_" + std::to_string(t))
      fail(Errc::parse, path, ": unexpected column '", header[static_cast<std::size_t>(t + 1)], "'");

  user_ids.clear();
  std::vector<std::int8_t> lab, msk;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string f;
    if (!std::getline(ss, f, ',')) fail(Errc::parse, path, ":", lineno, ": missing user_id");
    std::int64_t uid = 0;
    auto [p, ec] = std::from_chars(f.data(), f.data() + f.size(), uid);
    if (ec != std::errc{} || p != f.data() + f.size())
      fail(Errc::parse, path, ":", lineno, ": bad user_id '", f, "'");
    user_ids.push_back(uid);
    for (int t = 0; t < n_tasks; ++t) {
      if (!std::getline(ss, f, ','))
        fail(Errc::parse, path, ":", lineno, ": expected ", n_tasks, " label columns");
      if (f == "NA") {
        lab.push_back(0);
        msk.push_back(0);
      } else if (f == "0" || f == "1") {
        lab.push_back(f == "1" ? 1 : 0);
        msk.push_back(1);
      } else {
        fail(Errc::parse, path, ":", lineno, ": label must be 0, 1 or NA, got '", f, "'");
      }
    }
    if (ss.rdbuf()->in_avail() > 0) fail(Errc::parse, path, ":", lineno, ": extra columns");
  }
  labels.num_users = static_cast<int>(user_ids.size());
  labels.num_tasks = n_tasks;
  labels.labels = std::move(lab);
  labels.mask = std::move(msk);
}

void write_demos_csv(const std::string& path, const std::vector<DemographicRecord>& demos) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(Errc::io, "cannot open for writing: ", path);
  out << "user_id";
  for (int i = 0; i < kDemoNumericCount; ++i) out << ",num_" << i;
  for (std::size_t i = 0; i < kDemoCardinalities.size(); ++i) out << ",cat_" << i;
  out << '\n';
  for (const auto& d : demos) {
    if (static_cast<int>(d.numeric_features.size()) != kDemoNumericCount ||
        d.categorical_features.size() != kDemoCardinalities.size())
      fail(Errc::invalid_argument, "write_demos_csv: wrong feature counts for user ", d.user_id);
    out << d.user_id;
    for (double v : d.numeric_features) out << ',' << format_double(v);
    for (std::size_t i = 0; i < d.categorical_features.size(); ++i) {
      const int c = d.categorical_features[i];
      if (c < 0 || c >= kDemoCardinalities[i])
        fail(Errc::invalid_argument, "write_demos_csv: category ", c, " out of range for user ",
             d.user_id);
      out << ',' << c;
    }
    out << '\n';
  }
  if (!out) fail(Errc::io, "write failed: ", path);
}

std::vector<DemographicRecord> read_demos_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(Errc::io, "cannot open: ", path);
  std::string line;
  if (!std::getline(in, line)) fail(Errc::parse, path, ": empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  {
    std::string expect = "user_id";
    for (int i = 0; i < kDemoNumericCount; ++i) expect += ",num_" + std::to_string(i);
    for (std::size_t i = 0; i < kDemoCardinalities.size(); ++i) expect += ",cat_" + std::to_string(i);
    if (line != expect) fail(Errc::parse, path, ": unexpected header '", line, "'");
  }
  std::vector<DemographicRecord> demos;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string f;
    DemographicRecord d;
    auto next = [&](const char* what) {
      if (!std::getline(ss, f, ',')) fail(Errc::parse, path, ":", lineno, ": missing ", what);
      return f;
    };
    {
      next("user_id");
      auto [p, ec] = std::from_chars(f.data(), f.data() + f.size(), d.user_id);
      if (ec != std::errc{} || p != f.data() + f.size())
        fail(Errc::parse, path, ":", lineno, ": bad user_id '", f, "'");
    }
    for (int i = 0; i < kDemoNumericCount; ++i) {
      next("numeric feature");
      double v = 0;
      auto [p, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
      if (ec != std::errc{} || p != f.data() + f.size())
        fail(Errc::parse, path, ":", lineno, ": bad numeric '", f, "'");
      d.numeric_features.push_back(v);
    }
    for (std::size_t i = 0; i < kDemoCardinalities.size(); ++i) {
      next("categorical feature");
      int v = 0;
      auto [p, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
      if (ec != std::errc{} || p != f.data() + f.size() || v < 0 || v >= kDemoCardinalities[i])
        fail(Errc::parse, path, ":", lineno, ": bad category '", f, "'");
      d.categorical_features.push_back(v);
    }
    demos.push_back(std::move(d));
  }
  return demos;
}

}  // namespace mp
