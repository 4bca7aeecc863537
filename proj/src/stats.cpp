#include "carbondac/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace carbondac {

std::vector<double> midranks(std::span<const double> values) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return values[x] < values[y]; });
  std::vector<double> ranks(n);
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
    const double rank = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = rank;
    i = j + 1;
  }
  return ranks;
}

double mean(std::span<const double> values) {
  if (values.empty()) return std::nan("");
  return std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
}

double pstdev(std::span<const double> values) {
  if (values.empty()) return std::nan("");
  const double m = mean(values);
  double sq = 0.0;
  for (double v : values) sq += (v - m) * (v - m);
  return std::sqrt(sq / static_cast<double>(values.size()));
}

RankSumResult wilcoxon_rank_sum(std::span<const double> a, std::span<const double> b, int exact_limit) {
  if (a.empty() || b.empty()) throw std::invalid_argument("wilcoxon_rank_sum needs two non-empty samples");
  const std::size_t na = a.size();
  const std::size_t nb = b.size();
  const std::size_t n = na + nb;
  std::vector<double> pooled(a.begin(), a.end());
  pooled.insert(pooled.end(), b.begin(), b.end());
  const std::vector<double> ranks = midranks(pooled);

  double rank_sum_a = 0.0;
  for (std::size_t i = 0; i < na; ++i) rank_sum_a += ranks[i];
  RankSumResult result;
  result.u = rank_sum_a - 0.5 * static_cast<double>(na * (na + 1));

  if (std::all_of(pooled.begin(), pooled.end(), [&](double v) { return v == pooled.front(); })) {
    result.degenerate = true;
    result.p = 1.0;
    return result;
  }

  if (static_cast<int>(n) <= exact_limit) {
    // Distribution of the doubled rank sum over all size-na subsets of the
    // pooled midranks, by dynamic programming.
    std::vector<int> doubled(n);
    int total_doubled = 0;
    for (std::size_t i = 0; i < n; ++i) {
      doubled[i] = static_cast<int>(std::lround(2.0 * ranks[i]));
      total_doubled += doubled[i];
    }
    const std::size_t max_sum = static_cast<std::size_t>(total_doubled);
    std::vector<std::vector<double>> count(na + 1, std::vector<double>(max_sum + 1, 0.0));
    count[0][0] = 1.0;
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t r = static_cast<std::size_t>(doubled[i]);
      for (std::size_t k = std::min(i + 1, na); k >= 1; --k) {
        for (std::size_t s = max_sum; s >= r; --s) count[k][s] += count[k - 1][s - r];
      }
    }
    int observed = 0;
    for (std::size_t i = 0; i < na; ++i) observed += doubled[i];
    const double centre = static_cast<double>(na) * static_cast<double>(n + 1);  // doubled expected rank sum
    const double distance = std::abs(observed - centre);
    double tail = 0.0;
    double all = 0.0;
    for (std::size_t s = 0; s <= max_sum; ++s) {
      all += count[na][s];
      if (std::abs(static_cast<double>(s) - centre) >= distance - 1e-9) tail += count[na][s];
    }
    result.exact = true;
    result.p = std::min(1.0, tail / all);
    return result;
  }

  std::vector<double> sorted(pooled);
  std::sort(sorted.begin(), sorted.end());
  double tie_term = 0.0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && sorted[j + 1] == sorted[i]) ++j;
    const double t = static_cast<double>(j - i + 1);
    tie_term += t * t * t - t;
    i = j + 1;
  }
  const double dn = static_cast<double>(n);
  const double mu = 0.5 * static_cast<double>(na) * static_cast<double>(nb);
  const double var = static_cast<double>(na) * static_cast<double>(nb) / 12.0 * ((dn + 1.0) - tie_term / (dn * (dn - 1.0)));
  if (!(var > 0.0)) {
    result.degenerate = true;
    result.p = 1.0;
    return result;
  }
  const double z = std::max(0.0, std::abs(result.u - mu) - 0.5) / std::sqrt(var);
  result.p = std::min(1.0, std::erfc(z / std::sqrt(2.0)));
  return result;
}

}  // namespace carbondac
