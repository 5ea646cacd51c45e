#include "pgx/growth.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <sstream>

#include "pgx/io_util.hpp"
#include "pgx/metrics.hpp"

namespace pgx {

std::string_view to_string(GrowthModelKind kind) {
  switch (kind) {
    case GrowthModelKind::Linear: return "linear";
    case GrowthModelKind::Exponential: return "exponential";
    case GrowthModelKind::Mendelsohn: return "mendelsohn";
    case GrowthModelKind::Gompertz: return "gompertz";
    case GrowthModelKind::Logistic: return "logistic";
    case GrowthModelKind::Spratt: return "spratt";
    case GrowthModelKind::Bertalanffy: return "bertalanffy";
  }
  return "unknown";
}

GrowthModelKind growth_model_from_string(std::string_view name) {
  std::string lower;
  for (char c : name) {
    if (!std::isspace(static_cast<unsigned char>(c))) lower += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  }
  for (auto kind : kAllGrowthModels) {
    if (to_string(kind) == lower) return kind;
  }
  throw InvalidArgument("unknown growth model '" + std::string(name) + "'");
}

std::vector<GrowthModelKind> parse_model_selector(std::string_view selector) {
  std::vector<bool> chosen(kAllGrowthModels.size(), false);
  std::size_t start = 0;
  while (start <= selector.size()) {
    const std::size_t comma = std::min(selector.find(',', start), selector.size());
    const std::string_view token = selector.substr(start, comma - start);
    std::string trimmed;
    for (char c : token) {
      if (!std::isspace(static_cast<unsigned char>(c))) trimmed += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    }
    if (trimmed == "all") {
      std::fill(chosen.begin(), chosen.end(), true);
    } else if (!trimmed.empty()) {
      chosen[static_cast<std::size_t>(growth_model_from_string(trimmed))] = true;
    }
    start = comma + 1;
  }
  std::vector<GrowthModelKind> out;
  for (std::size_t i = 0; i < chosen.size(); ++i) {
    if (chosen[i]) out.push_back(kAllGrowthModels[i]);
  }
  if (out.empty()) throw InvalidArgument("model selector selects no models");
  return out;
}

bool is_s_shaped(GrowthModelKind kind) { return has_capacity(kind); }

bool has_capacity(GrowthModelKind kind) {
  return kind == GrowthModelKind::Gompertz || kind == GrowthModelKind::Logistic ||
         kind == GrowthModelKind::Spratt || kind == GrowthModelKind::Bertalanffy;
}

bool has_shape(GrowthModelKind kind) {
  return kind == GrowthModelKind::Mendelsohn || kind == GrowthModelKind::Spratt;
}

std::size_t parameter_count(GrowthModelKind kind) {
  return 2 + (has_capacity(kind) ? 1 : 0) + (has_shape(kind) ? 1 : 0);
}

std::vector<double> to_vector(GrowthModelKind kind, const GrowthParams& p) {
  std::vector<double> x{p.v0, p.alpha};
  if (has_capacity(kind)) x.push_back(p.k.value());
  if (has_shape(kind)) x.push_back(p.b.value());
  return x;
}

GrowthParams from_vector(GrowthModelKind kind, std::span<const double> x) {
  if (x.size() != parameter_count(kind)) throw InvalidArgument("wrong parameter count for model");
  GrowthParams p{x[0], x[1], std::nullopt, std::nullopt};
  std::size_t i = 2;
  if (has_capacity(kind)) p.k = x[i++];
  if (has_shape(kind)) p.b = x[i++];
  return p;
}

void validate_params(GrowthModelKind kind, const GrowthParams& p) {
  if (!(p.v0 > 0.0) || !std::isfinite(p.v0)) throw InvalidArgument("v0 must be positive");
  if (!(p.alpha >= 0.0) || !std::isfinite(p.alpha)) throw InvalidArgument("alpha must be non-negative");
  if (has_capacity(kind) && !(p.k && *p.k > 0.0 && std::isfinite(*p.k))) {
    throw InvalidArgument("capacity k must be positive");
  }
  if (kind == GrowthModelKind::Mendelsohn && !(p.b && *p.b > 0.0 && *p.b < 1.0)) {
    throw InvalidArgument("Mendelsohn exponent b must lie in (0, 1)");
  }
  if (kind == GrowthModelKind::Spratt && !(p.b && *p.b > 0.0 && std::isfinite(*p.b))) {
    throw InvalidArgument("Spratt exponent b must be positive");
  }
}

double eval_model(GrowthModelKind kind, const GrowthParams& p, double t) {
  validate_params(kind, p);
  if (!(t >= 0.0)) throw InvalidArgument("time must be non-negative");
  const double v0 = p.v0;
  const double a = p.alpha;
  switch (kind) {
    case GrowthModelKind::Linear: return v0 + a * t;
    case GrowthModelKind::Exponential: return v0 * std::exp(a * t);
    case GrowthModelKind::Mendelsohn: {
      const double e = 1.0 - *p.b;
      return std::pow(std::pow(v0, e) + e * a * t, 1.0 / e);
    }
    case GrowthModelKind::Gompertz: {
      const double k = *p.k;
      // k·exp(ln(v0/k)·e^{−at}) avoids pow underflow for tiny v0/k
      return k * std::exp(std::log(v0 / k) * std::exp(-a * t));
    }
    case GrowthModelKind::Logistic: {
      const double k = *p.k;
      return k / (1.0 + ((k - v0) / v0) * std::exp(-a * t));
    }
    case GrowthModelKind::Spratt: {
      const double k = *p.k;
      const double b = *p.b;
      return k / std::pow(1.0 + (std::pow(k / v0, b) - 1.0) * std::exp(-a * t), 1.0 / b);
    }
    case GrowthModelKind::Bertalanffy: {
      const double ck = std::cbrt(*p.k);
      const double r = ck - (ck - std::cbrt(v0)) * std::exp(-a * t);
      return r * r * r;
    }
  }
  return std::numeric_limits<double>::quiet_NaN();
}

double growth_rate(GrowthModelKind kind, const GrowthParams& p, double v) {
  validate_params(kind, p);
  const double a = p.alpha;
  switch (kind) {
    case GrowthModelKind::Linear: return a;
    case GrowthModelKind::Exponential: return a * v;
    case GrowthModelKind::Mendelsohn: return a * std::pow(v, *p.b);
    case GrowthModelKind::Gompertz: return a * v * std::log(*p.k / v);
    case GrowthModelKind::Logistic: return a * v * (1.0 - v / *p.k);
    case GrowthModelKind::Spratt: return (a / *p.b) * v * (1.0 - std::pow(v / *p.k, *p.b));
    case GrowthModelKind::Bertalanffy: return 3.0 * a * (std::cbrt(*p.k) * std::cbrt(v * v) - v);
  }
  return std::numeric_limits<double>::quiet_NaN();
}

void FitConstraints::validate() const {
  if (!(v0_max > 0.0 && v0_max < v_at_100_max)) {
    throw InvalidArgument("constraints need 0 < v0_max < v_at_100_max");
  }
  if (!(plausibility_threshold > 0.0)) throw InvalidArgument("plausibility threshold must be positive");
}

double constraint_violation(GrowthModelKind kind, const GrowthParams& params, const FitConstraints& c) {
  const double at_birth = eval_model(kind, params, 0.0);
  const double at_100 = eval_model(kind, params, 100.0);
  return std::max(0.0, at_birth - c.v0_max) + std::max(0.0, at_100 - c.v_at_100_max);
}

Bounds parameter_box(GrowthModelKind kind, const FitConstraints& c) {
  Bounds b;
  b.lower = {1e-6, 0.0};
  b.upper = {std::nextafter(c.v0_max, 0.0), 10.0};
  if (has_capacity(kind)) {
    b.lower.push_back(0.01);
    b.upper.push_back(c.v_at_100_max);
  }
  if (kind == GrowthModelKind::Mendelsohn) {
    b.lower.push_back(0.01);
    b.upper.push_back(0.99);
  } else if (kind == GrowthModelKind::Spratt) {
    b.lower.push_back(0.01);
    b.upper.push_back(10.0);
  }
  return b;
}

double rmse(GrowthModelKind kind, const GrowthParams& params, std::span<const VolumeSample> samples) {
  if (samples.empty()) throw InvalidArgument("RMSE of an empty series");
  double sum = 0.0;
  for (const auto& s : samples) {
    const double r = eval_model(kind, params, s.age) - s.volume_cc;
    sum += r * r;
  }
  return std::sqrt(sum / static_cast<double>(samples.size()));
}

GrowthFit fit_model(std::span<const VolumeSample> samples, GrowthModelKind kind,
                    const FitConstraints& constraints, const OptimizerConfig& config) {
  if (samples.size() < kMinSamplesForFit) {
    throw InvalidArgument("too few samples: " + std::to_string(samples.size()) + " < " +
                          std::to_string(kMinSamplesForFit));
  }
  constraints.validate();
  const std::vector<VolumeSample> data(samples.begin(), samples.end());
  const ObjectiveFn objective = [&](std::span<const double> x) {
    return rmse(kind, from_vector(kind, x), data);
  };
  const ObjectiveFn violation = [&](std::span<const double> x) {
    return constraint_violation(kind, from_vector(kind, x), constraints);
  };
  const OptimizationResult opt = optimize(objective, violation, parameter_box(kind, constraints), config);

  GrowthFit fit;
  fit.kind = kind;
  fit.params = from_vector(kind, opt.best);
  fit.rmse = rmse(kind, fit.params, data);
  fit.constraint_violation = constraint_violation(kind, fit.params, constraints);
  fit.v_at_100 = eval_model(kind, fit.params, 100.0);
  fit.evaluations_used = opt.evaluations;
  fit.seed = config.seed;
  return fit;
}

std::vector<ModelReport> aggregate_report(std::span<const GrowthFit> fits, const FitConstraints& constraints) {
  std::vector<ModelReport> out;
  for (auto kind : kAllGrowthModels) {
    std::vector<double> rmses;
    ModelReport row;
    row.kind = kind;
    for (const auto& f : fits) {
      if (f.kind != kind) continue;
      rmses.push_back(f.rmse);
      if (f.rmse > kRmseOutlierThreshold) ++row.rmse_above_5;
      if (f.v_at_100 > constraints.plausibility_threshold) ++row.implausible;
      if (f.v_at_100 >= constraints.v_at_100_max * (1.0 - kPinnedRelativeTolerance)) ++row.pinned_at_max;
      if (!f.feasible()) ++row.infeasible;
    }
    if (rmses.empty()) continue;
    row.fits = rmses.size();
    row.rmse_min = *std::min_element(rmses.begin(), rmses.end());
    row.rmse_max = *std::max_element(rmses.begin(), rmses.end());
    row.rmse_q1 = percentile(rmses, 0.25);
    row.rmse_median = percentile(rmses, 0.5);
    row.rmse_q3 = percentile(rmses, 0.75);
    out.push_back(row);
  }
  return out;
}

std::string report_to_csv(std::span<const ModelReport> report) {
  std::ostringstream os;
  os << "model,fits,rmse_min,rmse_q1,rmse_median,rmse_q3,rmse_max,rmse_gt_5,implausible_v100,"
        "pinned_v100_max,infeasible\n";
  for (const auto& r : report) {
    os << to_string(r.kind) << ',' << r.fits << ',' << format_double(r.rmse_min) << ','
       << format_double(r.rmse_q1) << ',' << format_double(r.rmse_median) << ','
       << format_double(r.rmse_q3) << ',' << format_double(r.rmse_max) << ',' << r.rmse_above_5 << ','
       << r.implausible << ',' << r.pinned_at_max << ',' << r.infeasible << '\n';
  }
  return os.str();
}

}  // namespace pgx
