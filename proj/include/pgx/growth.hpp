#pragma once

// Parametric tumour-growth curves and their constrained fitting.
//
// Time is age in years with t = 0 at birth. Closed forms and the ODEs they solve:
//
//   Linear       v0 + a·t                                   dV/dt = a
//   Exponential  v0·exp(a·t)                                dV/dt = a·V
//   Mendelsohn   (v0^(1−b) + (1−b)·a·t)^(1/(1−b))           dV/dt = a·V^b
//   Gompertz     k·(v0/k)^exp(−a·t)                         dV/dt = a·V·ln(k/V)
//   Logistic     k / (1 + ((k−v0)/v0)·exp(−a·t))            dV/dt = a·V·(1 − V/k)
//   Spratt       k / (1 + ((k/v0)^b − 1)·exp(−a·t))^(1/b)   dV/dt = (a/b)·V·(1 − (V/k)^b)
//   Bertalanffy  (k^⅓ − (k^⅓ − v0^⅓)·exp(−a·t))^3           dV/dt = 3a·(k^⅓·V^⅔ − V)

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pgx/linking.hpp"
#include "pgx/optimizer.hpp"

namespace pgx {

enum class GrowthModelKind { Linear, Exponential, Mendelsohn, Gompertz, Logistic, Spratt, Bertalanffy };

inline constexpr std::array<GrowthModelKind, 7> kAllGrowthModels{
    GrowthModelKind::Linear,   GrowthModelKind::Exponential, GrowthModelKind::Mendelsohn,
    GrowthModelKind::Gompertz, GrowthModelKind::Logistic,    GrowthModelKind::Spratt,
    GrowthModelKind::Bertalanffy};

std::string_view to_string(GrowthModelKind kind);
/// Case-insensitive; throws InvalidArgument for unknown names.
GrowthModelKind growth_model_from_string(std::string_view name);
/// Comma-separated names or "all", duplicates removed, canonical order.
std::vector<GrowthModelKind> parse_model_selector(std::string_view selector);

bool is_s_shaped(GrowthModelKind kind);
bool has_capacity(GrowthModelKind kind);
bool has_shape(GrowthModelKind kind);
std::size_t parameter_count(GrowthModelKind kind);

struct GrowthParams {
  double v0 = 0.0;                // cc at age 0
  double alpha = 0.0;             // growth rate
  std::optional<double> k;        // carrying capacity, s-shaped models
  std::optional<double> b;        // shape exponent, Mendelsohn and Spratt

  friend bool operator==(const GrowthParams&, const GrowthParams&) = default;
};

/// Packs into the optimizer's parameter order (v0, alpha, [k], [b]).
std::vector<double> to_vector(GrowthModelKind kind, const GrowthParams& params);
GrowthParams from_vector(GrowthModelKind kind, std::span<const double> x);

/// Throws InvalidArgument when the parameters are outside the model's domain.
void validate_params(GrowthModelKind kind, const GrowthParams& params);

double eval_model(GrowthModelKind kind, const GrowthParams& params, double t);
/// Right-hand side of the model's ODE at volume v.
double growth_rate(GrowthModelKind kind, const GrowthParams& params, double v);

struct FitConstraints {
  double v0_max = 0.01;
  double v_at_100_max = 1500.0;
  double plausibility_threshold = 1000.0;

  void validate() const;
};

/// max(0, V(0) − v0_max) + max(0, V(100) − v_at_100_max).
double constraint_violation(GrowthModelKind kind, const GrowthParams& params, const FitConstraints& c);

/// Search box for (v0, alpha, [k], [b]); v0's upper end sits just below v0_max.
Bounds parameter_box(GrowthModelKind kind, const FitConstraints& c);

struct GrowthFit {
  GrowthModelKind kind = GrowthModelKind::Linear;
  GrowthParams params;
  double rmse = 0.0;
  double constraint_violation = 0.0;
  double v_at_100 = 0.0;
  std::size_t evaluations_used = 0;
  std::uint64_t seed = 0;

  bool feasible() const { return constraint_violation == 0.0; }
};

double rmse(GrowthModelKind kind, const GrowthParams& params, std::span<const VolumeSample> samples);
inline double rmse(const GrowthFit& fit, std::span<const VolumeSample> samples) {
  return rmse(fit.kind, fit.params, samples);
}

/// Minimizes RMSE under constraint domination. Needs at least kMinSamplesForFit samples.
GrowthFit fit_model(std::span<const VolumeSample> samples, GrowthModelKind kind,
                    const FitConstraints& constraints, const OptimizerConfig& config);
inline GrowthFit fit_model(const TumorTimeSeries& series, GrowthModelKind kind,
                           const FitConstraints& constraints, const OptimizerConfig& config) {
  return fit_model(series.samples, kind, constraints, config);
}

// --- cohort report ---------------------------------------------------------------

inline constexpr double kRmseOutlierThreshold = 5.0;
/// Fits within this fraction of v_at_100_max count as pinned at the cap.
inline constexpr double kPinnedRelativeTolerance = 1e-3;

struct ModelReport {
  GrowthModelKind kind = GrowthModelKind::Linear;
  std::size_t fits = 0;
  double rmse_min = 0.0;
  double rmse_q1 = 0.0;
  double rmse_median = 0.0;
  double rmse_q3 = 0.0;
  double rmse_max = 0.0;
  std::size_t rmse_above_5 = 0;
  std::size_t implausible = 0;  // v_at_100 above the plausibility threshold
  std::size_t pinned_at_max = 0;
  std::size_t infeasible = 0;
};

/// One row per model present in `fits`, in canonical model order.
std::vector<ModelReport> aggregate_report(std::span<const GrowthFit> fits, const FitConstraints& constraints);
std::string report_to_csv(std::span<const ModelReport> report);

}  // namespace pgx
