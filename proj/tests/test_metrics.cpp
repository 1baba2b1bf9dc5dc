#include <cmath>
#include <vector>

#include "doctest.h"
#include "mpnet/common.hpp"
#include "mpnet/metrics.hpp"
#include "mpnet/rng.hpp"
#include "oracles.hpp"

using namespace mp;

namespace {

std::vector<ScoredSample> random_samples(Rng& rng, int n, int score_levels, double p_pos) {
  std::vector<ScoredSample> s(static_cast<std::size_t>(n));
  for (auto& x : s) {
    // few distinct levels -> heavy ties
    x.score = static_cast<double>(rng.uniform_int(score_levels)) / score_levels;
    x.label = rng.uniform01() < p_pos ? 1 : 0;
  }
  return s;
}

bool has_both_classes(const std::vector<ScoredSample>& s) {
  bool pos = false, neg = false;
  for (const auto& x : s) (x.label ? pos : neg) = true;
  return pos && neg;
}

}  // namespace

TEST_SUITE_BEGIN("metrics");

TEST_CASE("auroc equals the pairwise probability, ties included, bit for bit") {
  Rng rng(2024);
  int tested = 0;
  while (tested < 1000) {
    const int n = 2 + rng.uniform_int(38);
    const int levels = 1 + rng.uniform_int(6);
    auto s = random_samples(rng, n, levels, 0.2 + 0.6 * rng.uniform01());
    if (!has_both_classes(s)) continue;
    ++tested;
    CHECK(auroc(s) == oracle::pairwise_auroc(s));
  }
}

TEST_CASE("auroc endpoints: perfect and inverted rankings") {
  std::vector<ScoredSample> perfect = {{0.9, 1}, {0.8, 1}, {0.3, 0}, {0.1, 0}};
  CHECK(auroc(perfect) == 1.0);
  std::vector<ScoredSample> inverted = {{0.9, 0}, {0.8, 0}, {0.3, 1}, {0.1, 1}};
  CHECK(auroc(inverted) == 0.0);
  // all scores equal: coin flip
  std::vector<ScoredSample> flat = {{0.5, 1}, {0.5, 0}, {0.5, 1}, {0.5, 0}};
  CHECK(auroc(flat) == 0.5);
}

TEST_CASE("average precision matches the hand-worked example") {
  // ranks: pos, neg, pos, neg -> AP = (1/1 + 2/3) / 2 = 5/6
  std::vector<ScoredSample> s = {{0.9, 1}, {0.8, 0}, {0.7, 1}, {0.6, 0}};
  CHECK(aupr(s) == doctest::Approx(5.0 / 6.0).epsilon(1e-15));

  std::vector<ScoredSample> perfect = {{0.9, 1}, {0.8, 1}, {0.3, 0}};
  CHECK(aupr(perfect) == 1.0);

  // single positive ranked dead last among n samples -> AP = 1/n
  std::vector<ScoredSample> worst = {{0.9, 0}, {0.8, 0}, {0.7, 0}, {0.1, 1}};
  CHECK(aupr(worst) == doctest::Approx(0.25).epsilon(1e-15));
}

TEST_CASE("tied scores resolve by original index and report the orderings range") {
  // index 0 is negative, index 1 positive, same score: stable order puts the
  // negative first, so the positive sits at rank 2
  std::vector<ScoredSample> s = {{0.5, 0}, {0.5, 1}};
  AuprTieRange range;
  CHECK(aupr(s, &range) == 0.5);
  CHECK(range.lo == 0.5);
  CHECK(range.hi == 1.0);

  // flipping the indices flips the stable value but not the range
  std::vector<ScoredSample> flipped = {{0.5, 1}, {0.5, 0}};
  AuprTieRange range2;
  CHECK(aupr(flipped, &range2) == 1.0);
  CHECK(range2.lo == 0.5);
  CHECK(range2.hi == 1.0);
}

TEST_CASE("tie range matches exhaustive enumeration of tied orderings") {
  Rng rng(515);
  int tested = 0;
  while (tested < 300) {
    const int n = 2 + rng.uniform_int(7);  // at most 8: enumeration stays cheap
    const int levels = 1 + rng.uniform_int(3);
    auto s = random_samples(rng, n, levels, 0.5);
    bool any_pos = false;
    for (const auto& x : s) any_pos = any_pos || x.label == 1;
    if (!any_pos) continue;
    ++tested;

    double lo = 0, hi = 0;
    oracle::ap_permutation_range(s, &lo, &hi);
    AuprTieRange range;
    const double stable = aupr(s, &range);
    CHECK(range.lo == lo);
    CHECK(range.hi == hi);
    CHECK(stable >= range.lo);
    CHECK(stable <= range.hi);
  }
}

TEST_CASE("large uninformative samples sit at the chance asymptotes") {
  Rng rng(99);
  const int n = 10000;
  std::vector<ScoredSample> s(n);
  int pos = 0;
  for (auto& x : s) {
    x.score = rng.uniform01();
    x.label = rng.uniform01() < 0.3 ? 1 : 0;
    pos += x.label;
  }
  const double prevalence = static_cast<double>(pos) / n;
  CHECK(std::abs(auroc(s) - 0.5) < 0.02);
  CHECK(std::abs(aupr(s) - prevalence) < 0.05);
}

TEST_CASE("degenerate metric inputs are rejected") {
  std::vector<ScoredSample> all_pos = {{0.5, 1}, {0.4, 1}};
  std::vector<ScoredSample> all_neg = {{0.5, 0}, {0.4, 0}};
  CHECK_THROWS_AS(auroc(all_pos), Error);
  CHECK_THROWS_AS(auroc(all_neg), Error);
  CHECK_THROWS_AS(auroc({}), Error);
  CHECK_THROWS_AS(aupr(all_neg), Error);
  CHECK(aupr(all_pos) == 1.0);  // positives only: every rank is precise

  std::vector<ScoredSample> bad_label = {{0.5, 2}, {0.4, 0}};
  CHECK_THROWS_AS(auroc(bad_label), Error);
  std::vector<ScoredSample> bad_score = {{std::nan(""), 1}, {0.4, 0}};
  CHECK_THROWS_AS(auroc(bad_score), Error);
  CHECK_THROWS_AS(aupr(bad_score), Error);
}

TEST_CASE("moving average warms up with NaN and then averages the window") {
  const std::vector<double> series = {1.0, 2.0, 4.0, 8.0, 16.0};
  const auto ma = moving_average(series, 2);
  REQUIRE(ma.size() == 5);
  CHECK(std::isnan(ma[0]));
  CHECK(ma[1] == doctest::Approx(1.5));
  CHECK(ma[2] == doctest::Approx(3.0));
  CHECK(ma[3] == doctest::Approx(6.0));
  CHECK(ma[4] == doctest::Approx(12.0));

  const auto ma3 = moving_average(series, 3);
  CHECK(std::isnan(ma3[0]));
  CHECK(std::isnan(ma3[1]));
  CHECK(ma3[2] == doctest::Approx(7.0 / 3.0));

  // period 1 is the identity
  CHECK(moving_average(series, 1) == series);

  // a period longer than the series leaves everything NaN
  const auto long_ma = moving_average(series, 10);
  for (double v : long_ma) CHECK(std::isnan(v));

  CHECK_THROWS_AS(moving_average(series, 0), Error);
  CHECK(moving_average({}, 3).empty());
}

TEST_SUITE_END();
