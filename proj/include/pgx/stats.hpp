#pragma once

// Paired-sample statistics for the observer-variation study.

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

namespace pgx {

struct WilcoxonResult {
  double w = 0.0;        // min(W+, W-)
  double w_plus = 0.0;
  double w_minus = 0.0;
  std::size_t n_effective = 0;  // pairs with a nonzero difference
  double p_two_sided = 1.0;
  bool exact = true;
};

/// Number of effective pairs up to which the p-value is computed exactly.
inline constexpr std::size_t kWilcoxonExactLimit = 20;

/// Wilcoxon signed-rank test on differences a − b. Zero differences are dropped and tied
/// magnitudes receive midranks. For n_effective <= 20 the p-value is the exact fraction of the
/// 2^n sign assignments whose min(W+, W-) does not exceed the observed W; above that a normal
/// approximation with tie-corrected variance and continuity correction is used.
WilcoxonResult wilcoxon_signed_rank(std::span<const std::pair<double, double>> sample);

/// Holm step-down procedure; returns reject flags in the input order.
std::vector<bool> holm_correction(std::span<const double> p_values, double alpha);

/// Midranks (1-based) of `values`; ties share the mean of their positions.
std::vector<double> midranks(std::span<const double> values);

}  // namespace pgx
