#include "pgx/optimizer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include <Eigen/Dense>

#include "pgx/volume_io.hpp"

namespace pgx {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Adaptive variance scaling constants.
constexpr double kMultiplierDecrease = 0.9;
constexpr double kMultiplierIncrease = 1.0 / kMultiplierDecrease;
constexpr double kStdDevRatioThreshold = 1.0;
// Anticipated mean shift step.
constexpr double kAmsDelta = 2.0;

double sanitize(double v) { return std::isnan(v) ? kInf : v; }

struct Individual {
  Eigen::VectorXd x;
  double objective = kInf;
  double violation = kInf;
};

bool better(const Individual& a, const Individual& b) {
  return constraint_better(a.objective, a.violation, b.objective, b.violation);
}

class Search {
 public:
  Search(const ObjectiveFn& objective, const ObjectiveFn& violation, const Bounds& bounds,
         const OptimizerConfig& config)
      : objective_(objective),
        violation_(violation),
        config_(config),
        dim_(bounds.dimension()),
        lower_(Eigen::Map<const Eigen::VectorXd>(bounds.lower.data(), static_cast<Eigen::Index>(dim_))),
        upper_(Eigen::Map<const Eigen::VectorXd>(bounds.upper.data(), static_cast<Eigen::Index>(dim_))),
        rng_(config.seed),
        start_(std::chrono::steady_clock::now()) {}

  OptimizationResult run() {
    double population = static_cast<double>(config_.population_size);
    while (!budget_exhausted()) {
      run_once(static_cast<std::size_t>(population));
      if (budget_exhausted()) break;
      ++result_.restarts;
      population *= config_.restart_population_factor;
    }
    result_.best.assign(best_.x.data(), best_.x.data() + best_.x.size());
    result_.objective = best_.objective;
    result_.violation = best_.violation;
    result_.feasible = best_.violation == 0.0;
    return result_;
  }

 private:
  bool budget_exhausted() {
    if (config_.max_evaluations > 0 && result_.evaluations >= config_.max_evaluations) return true;
    if (config_.time_budget_seconds > 0.0) {
      const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - start_;
      if (elapsed.count() >= config_.time_budget_seconds) {
        result_.hit_time_budget = true;
        return true;
      }
    }
    return false;
  }

  bool can_evaluate() const {
    return config_.max_evaluations == 0 || result_.evaluations < config_.max_evaluations;
  }

  void evaluate(Individual& ind) {
    const std::span<const double> x(ind.x.data(), static_cast<std::size_t>(ind.x.size()));
    ind.objective = sanitize(objective_(x));
    ind.violation = std::max(0.0, sanitize(violation_(x)));
    ++result_.evaluations;
    if (result_.evaluations == 1 || better(ind, best_)) best_ = ind;
  }

  Eigen::VectorXd clamp(Eigen::VectorXd x) const { return x.cwiseMax(lower_).cwiseMin(upper_); }

  void run_once(std::size_t population_size) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<Individual> pop;
    pop.reserve(population_size);
    for (std::size_t i = 0; i < population_size && can_evaluate(); ++i) {
      Individual ind;
      ind.x.resize(static_cast<Eigen::Index>(dim_));
      for (std::size_t d = 0; d < dim_; ++d) {
        const auto di = static_cast<Eigen::Index>(d);
        ind.x[di] = lower_[di] + unit(rng_) * (upper_[di] - lower_[di]);
      }
      evaluate(ind);
      pop.push_back(std::move(ind));
    }
    if (pop.size() < 2) return;

    const auto n_sel = std::max<std::size_t>(
        2, static_cast<std::size_t>(std::floor(config_.selection_fraction * static_cast<double>(population_size))));
    const auto n_ams = static_cast<std::size_t>(
        std::floor(0.5 * config_.selection_fraction * static_cast<double>(population_size)));
    const std::size_t nis_shrink = 25 + dim_;

    double multiplier = 1.0;
    std::size_t no_improvement = 0;
    Eigen::VectorXd previous_mean;
    std::normal_distribution<double> normal(0.0, 1.0);
    const Eigen::VectorXd range = upper_ - lower_;

    while (!budget_exhausted()) {
      ++result_.generations;
      std::stable_sort(pop.begin(), pop.end(), better);
      const Individual elite = pop.front();
      const std::size_t sel = std::min(n_sel, pop.size());

      Eigen::VectorXd mean = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dim_));
      for (std::size_t i = 0; i < sel; ++i) mean += pop[i].x;
      mean /= static_cast<double>(sel);
      Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(dim_), static_cast<Eigen::Index>(dim_));
      for (std::size_t i = 0; i < sel; ++i) {
        const Eigen::VectorXd d = pop[i].x - mean;
        cov.noalias() += d * d.transpose();
      }
      cov /= static_cast<double>(sel);
      const Eigen::VectorXd shift =
          previous_mean.size() == 0 ? Eigen::VectorXd::Zero(mean.size()) : Eigen::VectorXd(mean - previous_mean);
      previous_mean = mean;

      // A collapsed distribution cannot move any more.
      if ((cov.diagonal().array().sqrt() <= 1e-14 * range.array().max(1e-300)).all()) return;

      Eigen::LLT<Eigen::MatrixXd> llt(multiplier * cov);
      if (llt.info() != Eigen::Success) {
        Eigen::MatrixXd reg = multiplier * cov;
        reg.diagonal() += (1e-12 * range.array().square()).matrix();
        llt.compute(reg);
        if (llt.info() != Eigen::Success) return;
      }
      const Eigen::MatrixXd chol = llt.matrixL();

      std::vector<Individual> next;
      next.reserve(population_size);
      next.push_back(elite);
      std::size_t improvements = 0;
      Eigen::VectorXd improvement_sum = Eigen::VectorXd::Zero(mean.size());
      for (std::size_t i = 1; i < population_size && can_evaluate(); ++i) {
        Eigen::VectorXd z(static_cast<Eigen::Index>(dim_));
        for (Eigen::Index d = 0; d < z.size(); ++d) z[d] = normal(rng_);
        Eigen::VectorXd x = mean + chol * z;
        if (i <= n_ams) x += multiplier * kAmsDelta * shift;
        Individual ind;
        ind.x = clamp(std::move(x));
        evaluate(ind);
        if (better(ind, elite)) {
          ++improvements;
          improvement_sum += ind.x;
        }
        next.push_back(std::move(ind));
      }
      pop = std::move(next);

      if (improvements > 0) {
        no_improvement = 0;
        if (multiplier < 1.0) multiplier = 1.0;
        const Eigen::VectorXd z = chol.triangularView<Eigen::Lower>().solve(
            Eigen::VectorXd(improvement_sum / static_cast<double>(improvements) - mean));
        if (z.cwiseAbs().maxCoeff() > kStdDevRatioThreshold) multiplier *= kMultiplierIncrease;
      } else {
        ++no_improvement;
        if (multiplier > 1.0 || no_improvement >= nis_shrink) multiplier *= kMultiplierDecrease;
        if (no_improvement < nis_shrink && multiplier < 1.0) multiplier = 1.0;
      }

      if (no_improvement >= config_.stagnation_generations || multiplier < config_.min_multiplier) return;
    }
  }

  const ObjectiveFn& objective_;
  const ObjectiveFn& violation_;
  const OptimizerConfig& config_;
  std::size_t dim_;
  Eigen::VectorXd lower_;
  Eigen::VectorXd upper_;
  std::mt19937_64 rng_;
  std::chrono::steady_clock::time_point start_;
  Individual best_;
  OptimizationResult result_;
};

}  // namespace

void Bounds::validate() const {
  if (lower.empty() || lower.size() != upper.size()) throw InvalidArgument("invalid bounds: size mismatch");
  for (std::size_t i = 0; i < lower.size(); ++i) {
    if (!std::isfinite(lower[i]) || !std::isfinite(upper[i]) || lower[i] > upper[i]) {
      throw InvalidArgument("invalid bounds in dimension " + std::to_string(i));
    }
  }
}

void OptimizerConfig::validate() const {
  if (population_size < 10) throw InvalidArgument("population size must be at least 10");
  if (max_evaluations == 0 && !(time_budget_seconds > 0.0)) {
    throw InvalidArgument("either an evaluation or a time budget must be set");
  }
  if (!(selection_fraction > 0.0 && selection_fraction < 1.0)) {
    throw InvalidArgument("selection fraction must lie in (0, 1)");
  }
  if (!(restart_population_factor >= 1.0)) throw InvalidArgument("restart population factor must be >= 1");
  if (stagnation_generations == 0) throw InvalidArgument("stagnation generations must be positive");
}

bool constraint_better(double obj_a, double viol_a, double obj_b, double viol_b) {
  obj_a = sanitize(obj_a);
  obj_b = sanitize(obj_b);
  viol_a = sanitize(viol_a);
  viol_b = sanitize(viol_b);
  const bool feas_a = viol_a <= 0.0;
  const bool feas_b = viol_b <= 0.0;
  if (feas_a != feas_b) return feas_a;
  if (!feas_a) return viol_a < viol_b;
  return obj_a < obj_b;
}

OptimizationResult optimize(const ObjectiveFn& objective, const ObjectiveFn& violation,
                            const Bounds& bounds, const OptimizerConfig& config) {
  bounds.validate();
  config.validate();
  return Search(objective, violation, bounds, config).run();
}

}  // namespace pgx
