#include "mpnet/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>

#include "mpnet/common.hpp"

namespace mp {

namespace {

void validate_samples(const std::vector<ScoredSample>& samples) {
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (!std::isfinite(samples[i].score))
      fail(Errc::invalid_argument, "metric input: non-finite score at index ", i);
    if (samples[i].label != 0 && samples[i].label != 1)
      fail(Errc::invalid_argument, "metric input: label must be 0/1 at index ", i);
  }
}

}  // namespace

double auroc(const std::vector<ScoredSample>& samples) {
  validate_samples(samples);
  std::int64_t pos = 0, neg = 0;
  for (const auto& s : samples) (s.label ? pos : neg) += 1;
  if (pos == 0 || neg == 0)
    fail(Errc::invalid_argument, "auroc undefined: need both classes (", pos, " positive, ", neg,
         " negative)");

  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return samples[a].score < samples[b].score; });

  // Twice the Mann-Whitney U statistic, accumulated per tie group: each
  // positive beats every lower-scored negative (worth 2) and half-beats every
  // tied negative (worth 1).
  std::int64_t u2 = 0, neg_below = 0;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    std::int64_t gpos = 0, gneg = 0;
    while (j < order.size() && samples[order[j]].score == samples[order[i]].score) {
      (samples[order[j]].label ? gpos : gneg) += 1;
      ++j;
    }
    u2 += gpos * (2 * neg_below + gneg);
    neg_below += gneg;
    i = j;
  }
  return static_cast<double>(u2) / static_cast<double>(2 * pos * neg);
}

namespace {

// AP with an arbitrary preference among equal scores: prefer_pos puts
// positives first inside each tie group (upper bound), otherwise negatives
// first (lower bound).
double ap_with_tie_preference(const std::vector<ScoredSample>& samples, bool prefer_pos) {
  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (samples[a].score != samples[b].score) return samples[a].score > samples[b].score;
    if (samples[a].label != samples[b].label)
      return prefer_pos ? samples[a].label > samples[b].label
                        : samples[a].label < samples[b].label;
    return false;
  });
  std::int64_t pos_seen = 0, total_pos = 0;
  for (const auto& s : samples) total_pos += s.label;
  double sum = 0.0;
  for (std::size_t r = 0; r < order.size(); ++r) {
    if (!samples[order[r]].label) continue;
    pos_seen += 1;
    sum += static_cast<double>(pos_seen) / static_cast<double>(r + 1);
  }
  return sum / static_cast<double>(total_pos);
}

}  // namespace

double aupr(const std::vector<ScoredSample>& samples, AuprTieRange* tie_range) {
  validate_samples(samples);
  std::int64_t pos = 0;
  for (const auto& s : samples) pos += s.label;
  if (pos == 0) fail(Errc::invalid_argument, "aupr undefined: no positive samples");

  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (samples[a].score != samples[b].score) return samples[a].score > samples[b].score;
    return a < b;  // documented stable tie order: original index ascending
  });
  std::int64_t pos_seen = 0;
  double sum = 0.0;
  for (std::size_t r = 0; r < order.size(); ++r) {
    if (!samples[order[r]].label) continue;
    pos_seen += 1;
    sum += static_cast<double>(pos_seen) / static_cast<double>(r + 1);
  }
  const double ap = sum / static_cast<double>(pos);
  if (tie_range) {
    tie_range->lo = ap_with_tie_preference(samples, /*prefer_pos=*/false);
    tie_range->hi = ap_with_tie_preference(samples, /*prefer_pos=*/true);
  }
  return ap;
}

std::vector<double> moving_average(const std::vector<double>& series, int period) {
  if (period < 1) fail(Errc::invalid_argument, "moving_average: period must be >= 1");
  std::vector<double> out(series.size(), std::numeric_limits<double>::quiet_NaN());
  for (std::size_t i = static_cast<std::size_t>(period) - 1; i < series.size(); ++i) {
    double s = 0.0;
    for (int k = 0; k < period; ++k) s += series[i - static_cast<std::size_t>(k)];
    out[i] = s / period;
  }
  return out;
}

}  // namespace mp
