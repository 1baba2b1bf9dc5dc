#pragma once

#include <vector>

namespace mp {

struct ScoredSample {
  double score = 0.0;
  int label = 0;  // 0 or 1
};

// P(score_pos > score_neg) + 0.5 * P(tie), computed with integer tie-group
// counting so it matches the O(P*N) pairwise oracle bit-for-bit.
double auroc(const std::vector<ScoredSample>& samples);

// Average precision: sum over positives, in score-descending order, of
// precision-at-rank times 1/P. Ties are broken by original sample index
// (ascending), which is the documented stable order. If `tie_range` is given
// it receives the [min, max] AP over all orderings of tied scores.
struct AuprTieRange {
  double lo = 0.0, hi = 0.0;
};
double aupr(const std::vector<ScoredSample>& samples, AuprTieRange* tie_range = nullptr);

// out[i] = mean(series[i-period+1 .. i]); the first period-1 entries are NaN.
std::vector<double> moving_average(const std::vector<double>& series, int period);

}  // namespace mp
