#include "pgx/stats.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>

#include "pgx/volume_io.hpp"

namespace pgx {

std::vector<double> midranks(std::span<const double> values) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(values.size());
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && values[order[j + 1]] == values[order[i]]) ++j;
    const double rank = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = rank;
    i = j + 1;
  }
  return ranks;
}

WilcoxonResult wilcoxon_signed_rank(std::span<const std::pair<double, double>> sample) {
  if (sample.empty()) throw InvalidArgument("Wilcoxon test needs at least one pair");
  std::vector<double> diffs;
  for (const auto& [a, b] : sample) {
    if (!std::isfinite(a) || !std::isfinite(b)) throw InvalidArgument("non-finite value in paired sample");
    if (a - b != 0.0) diffs.push_back(a - b);
  }
  WilcoxonResult r;
  r.n_effective = diffs.size();
  if (diffs.empty()) return r;  // no evidence either way: W = 0, p = 1

  std::vector<double> magnitudes(diffs.size());
  std::transform(diffs.begin(), diffs.end(), magnitudes.begin(), [](double d) { return std::abs(d); });
  const auto ranks = midranks(magnitudes);
  for (std::size_t i = 0; i < diffs.size(); ++i) (diffs[i] > 0 ? r.w_plus : r.w_minus) += ranks[i];
  r.w = std::min(r.w_plus, r.w_minus);

  const std::size_t n = diffs.size();
  if (n <= kWilcoxonExactLimit) {
    // Midranks are multiples of 1/2, so doubled ranks are integers and the null distribution
    // of 2·W+ can be counted exactly.
    std::vector<std::int64_t> doubled(n);
    std::int64_t total = 0;
    for (std::size_t i = 0; i < n; ++i) {
      doubled[i] = std::llround(2.0 * ranks[i]);
      total += doubled[i];
    }
    std::vector<std::uint64_t> counts(static_cast<std::size_t>(total) + 1, 0);
    counts[0] = 1;
    std::int64_t reach = 0;
    for (const auto r2 : doubled) {
      for (std::int64_t s = reach; s >= 0; --s) {
        if (counts[static_cast<std::size_t>(s)] != 0) {
          counts[static_cast<std::size_t>(s + r2)] += counts[static_cast<std::size_t>(s)];
        }
      }
      reach += r2;
    }
    const std::int64_t observed = std::llround(2.0 * r.w);
    std::uint64_t extreme = 0;
    for (std::int64_t s = 0; s <= total; ++s) {
      if (std::min(s, total - s) <= observed) extreme += counts[static_cast<std::size_t>(s)];
    }
    r.p_two_sided = static_cast<double>(extreme) / std::ldexp(1.0, static_cast<int>(n));
    r.exact = true;
    return r;
  }

  const double nd = static_cast<double>(n);
  const double mean = nd * (nd + 1.0) / 4.0;
  double tie_term = 0.0;
  {
    std::vector<double> sorted = magnitudes;
    std::sort(sorted.begin(), sorted.end());
    std::size_t i = 0;
    while (i < sorted.size()) {
      std::size_t j = i;
      while (j + 1 < sorted.size() && sorted[j + 1] == sorted[i]) ++j;
      const double t = static_cast<double>(j - i + 1);
      tie_term += t * t * t - t;
      i = j + 1;
    }
  }
  const double variance = nd * (nd + 1.0) * (2.0 * nd + 1.0) / 24.0 - tie_term / 48.0;
  const double z = (r.w - mean + 0.5) / std::sqrt(variance);
  r.p_two_sided = std::min(1.0, std::erfc(-z / std::sqrt(2.0)));  // 2·Φ(z), z <= 0
  r.exact = false;
  return r;
}

std::vector<bool> holm_correction(std::span<const double> p_values, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw InvalidArgument("alpha must lie in (0, 1)");
  for (double p : p_values) {
    if (!(p >= 0.0 && p <= 1.0)) throw InvalidArgument("p-value outside [0, 1]");
  }
  const std::size_t m = p_values.size();
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return p_values[a] < p_values[b]; });
  std::vector<bool> reject(m, false);
  for (std::size_t i = 0; i < m; ++i) {
    if (p_values[order[i]] > alpha / static_cast<double>(m - i)) break;
    reject[order[i]] = true;
  }
  return reject;
}

}  // namespace pgx
