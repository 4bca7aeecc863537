#ifndef CARBONDAC_STATS_HPP_
#define CARBONDAC_STATS_HPP_

#include <span>
#include <vector>

namespace carbondac {

struct RankSumResult {
  double u = 0.0;  // Mann-Whitney U of the first sample
  double p = 1.0;  // two-sided
  bool exact = false;
  bool degenerate = false;  // every value identical
};

// Wilcoxon rank-sum test. Exact (conditional on ties) when the pooled size
// is at most `exact_limit`; otherwise normal approximation with tie and
// continuity corrections. Throws std::invalid_argument for empty samples.
RankSumResult wilcoxon_rank_sum(std::span<const double> a, std::span<const double> b, int exact_limit = 16);

// Midranks (1-based) of the pooled values, in input order.
std::vector<double> midranks(std::span<const double> values);

double mean(std::span<const double> values);
// Population standard deviation.
double pstdev(std::span<const double> values);

}  // namespace carbondac

#endif  // CARBONDAC_STATS_HPP_
