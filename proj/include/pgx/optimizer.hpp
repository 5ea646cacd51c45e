#pragma once

// Real-valued estimation-of-distribution optimizer with a full-covariance normal model,
// adaptive variance scaling, anticipated mean shift, constraint domination and restarts.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace pgx {

struct Bounds {
  std::vector<double> lower;
  std::vector<double> upper;

  std::size_t dimension() const { return lower.size(); }
  /// Throws InvalidArgument unless both sides are finite, equally sized, non-empty and lower <= upper.
  void validate() const;
};

struct OptimizerConfig {
  std::size_t population_size = 50;
  std::size_t max_evaluations = 50'000;  // 0 disables the evaluation cap
  double time_budget_seconds = 90.0;     // <= 0 disables the wall-clock cap
  std::uint64_t seed = 1;

  double selection_fraction = 0.35;
  /// Generations without improving the run's best before the run restarts.
  std::size_t stagnation_generations = 30;
  /// Population growth applied at every restart (1 keeps the size fixed).
  double restart_population_factor = 1.0;
  /// Distribution multiplier below which the run restarts.
  double min_multiplier = 1e-10;

  void validate() const;
};

using ObjectiveFn = std::function<double(std::span<const double>)>;

struct OptimizationResult {
  std::vector<double> best;
  double objective = 0.0;
  double violation = 0.0;
  bool feasible = false;
  std::size_t evaluations = 0;
  std::size_t generations = 0;
  std::size_t restarts = 0;
  bool hit_time_budget = false;
};

/// True when (obj_a, viol_a) is strictly better than (obj_b, viol_b): feasible beats infeasible,
/// infeasible points compare by violation, feasible points by objective. NaN counts as +inf.
bool constraint_better(double obj_a, double viol_a, double obj_b, double viol_b);

/// Minimizes `objective` over the box subject to `violation(x) == 0`. Deterministic for a given
/// seed as long as the wall-clock cap is not what stops the search.
OptimizationResult optimize(const ObjectiveFn& objective, const ObjectiveFn& violation,
                            const Bounds& bounds, const OptimizerConfig& config);

}  // namespace pgx
