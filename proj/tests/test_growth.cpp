#include <cmath>
#include <random>

#include "doctest.h"
#include "pgx/growth.hpp"

using namespace pgx;

namespace {

GrowthParams random_params(GrowthModelKind kind, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> v0(1e-4, 0.01), alpha(0.01, 0.3), k(1.0, 1500.0), bm(0.05, 0.95),
      bs(0.1, 5.0);
  GrowthParams p{v0(rng), alpha(rng), std::nullopt, std::nullopt};
  if (has_capacity(kind)) p.k = k(rng);
  if (kind == GrowthModelKind::Mendelsohn) p.b = bm(rng);
  if (kind == GrowthModelKind::Spratt) p.b = bs(rng);
  return p;
}

OptimizerConfig budget(std::uint64_t seed, std::size_t evals = 50'000) {
  OptimizerConfig c;
  c.seed = seed;
  c.max_evaluations = evals;
  return c;
}

}  // namespace

TEST_CASE("names and selectors") {
  for (auto kind : kAllGrowthModels) CHECK(growth_model_from_string(to_string(kind)) == kind);
  CHECK(growth_model_from_string("GOMPERTZ") == GrowthModelKind::Gompertz);
  CHECK(parse_model_selector("all").size() == 7);
  CHECK(parse_model_selector("spratt,linear,spratt") ==
        std::vector<GrowthModelKind>{GrowthModelKind::Linear, GrowthModelKind::Spratt});
  CHECK_THROWS_AS(parse_model_selector("cubic"), InvalidArgument);
  CHECK(parameter_count(GrowthModelKind::Spratt) == 4);
  CHECK(parameter_count(GrowthModelKind::Linear) == 2);
}

TEST_CASE("closed-form examples") {
  std::mt19937_64 rng(1);
  for (auto kind : kAllGrowthModels) {
    const auto p = random_params(kind, rng);
    CHECK(eval_model(kind, p, 0.0) == doctest::Approx(p.v0).epsilon(1e-12));
  }
  CHECK(eval_model(GrowthModelKind::Exponential, {1.0, std::log(2.0), {}, {}}, 3.0) == doctest::Approx(8.0));
  CHECK(eval_model(GrowthModelKind::Mendelsohn, {0.01, 0.2, {}, 0.5}, 10.0) == doctest::Approx(1.21).epsilon(1e-12));
  for (auto kind : kAllGrowthModels) {
    if (!is_s_shaped(kind)) continue;
    const auto p = random_params(kind, rng);
    CHECK(eval_model(kind, p, 1e6) == doctest::Approx(*p.k).epsilon(1e-6));
  }
  CHECK_THROWS_AS(eval_model(GrowthModelKind::Logistic, {0.01, 0.1, {}, {}}, 1.0), InvalidArgument);
  CHECK_THROWS_AS(eval_model(GrowthModelKind::Mendelsohn, {0.01, 0.1, {}, 1.0}, 1.0), InvalidArgument);
}

TEST_CASE("closed forms satisfy their ODEs") {
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> age(1.0, 99.0);
  for (int draw = 0; draw < 1000; ++draw) {
    const auto kind = kAllGrowthModels[static_cast<std::size_t>(draw) % kAllGrowthModels.size()];
    const auto p = random_params(kind, rng);
    const double t = age(rng);
    const double h = 1e-4;
    const double v = eval_model(kind, p, t);
    const double fd = (eval_model(kind, p, t + h) - eval_model(kind, p, t - h)) / (2 * h);
    const double rhs = growth_rate(kind, p, v);
    // near saturation rhs underflows relative to v; floor the scale at 1e-3·v per year
    CHECK(std::abs(fd - rhs) / std::max(std::abs(rhs), 1e-3 * v) < 1e-6);
  }
}

TEST_CASE("Spratt with b = 1 is Logistic") {
  std::mt19937_64 rng(8);
  for (int i = 0; i < 200; ++i) {
    auto p = random_params(GrowthModelKind::Logistic, rng);
    auto s = p;
    s.b = 1.0;
    for (double t : {0.0, 10.0, 37.5, 80.0, 100.0}) {
      CHECK(eval_model(GrowthModelKind::Spratt, s, t) ==
            doctest::Approx(eval_model(GrowthModelKind::Logistic, p, t)).epsilon(1e-9));
    }
  }
}

TEST_CASE("monotone growth and saturation") {
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> age(0.0, 99.0);
  for (int draw = 0; draw < 1000; ++draw) {
    const auto kind = kAllGrowthModels[static_cast<std::size_t>(draw) % kAllGrowthModels.size()];
    const auto p = random_params(kind, rng);
    const double t = age(rng);
    const double a = eval_model(kind, p, t);
    const double b = eval_model(kind, p, t + 0.5);
    CHECK(b > a);
    if (is_s_shaped(kind)) CHECK(b < *p.k);
  }
  const GrowthParams lin{0.01, 0.1, {}, {}};
  CHECK(eval_model(GrowthModelKind::Linear, lin, 1e6) > 1e4);
}

TEST_CASE("constraint violation") {
  const FitConstraints c;
  CHECK(constraint_violation(GrowthModelKind::Linear, {0.005, 2.99995, {}, {}}, c) == 0.0);
  CHECK(constraint_violation(GrowthModelKind::Linear, {0.02, 0.0, {}, {}}, c) == doctest::Approx(0.01));
  CHECK(constraint_violation(GrowthModelKind::Linear, {0.01, 15.9999, {}, {}}, c) ==
        doctest::Approx(100.0).epsilon(1e-9));
  const Bounds box = parameter_box(GrowthModelKind::Spratt, c);
  CHECK(box.dimension() == 4);
  CHECK(box.upper[0] < c.v0_max);
  CHECK(box.upper[2] == 1500.0);
  CHECK(box.upper[3] == 10.0);
  CHECK(parameter_box(GrowthModelKind::Mendelsohn, c).upper[2] == 0.99);
}

TEST_CASE("rmse") {
  const std::vector<VolumeSample> s{{10, 1.0}, {20, 2.0}};
  CHECK(rmse(GrowthModelKind::Linear, {1e-9, 0.1, {}, {}}, s) == doctest::Approx(0.0).epsilon(1e-6));
  const std::vector<VolumeSample> r{{0, 3.0 + 0.001}, {1, 4.0 + 0.001 + 1.0}};
  CHECK(rmse(GrowthModelKind::Linear, {0.001, 1.0, {}, {}}, r) == doctest::Approx(std::sqrt(12.5)));
  CHECK(rmse(GrowthModelKind::Linear, {0.001, 0.0, {}, {}}, std::vector<VolumeSample>{{5, 2.001}}) ==
        doctest::Approx(2.0));
}

TEST_CASE("linear fit recovers the slope") {
  const std::vector<VolumeSample> s{{10, 1.0}, {20, 2.0}, {30, 3.0}};
  const GrowthFit f = fit_model(s, GrowthModelKind::Linear, {}, budget(3));
  CHECK(f.feasible());
  CHECK(f.params.alpha == doctest::Approx(0.1).epsilon(0.01));
  CHECK(f.params.v0 < 0.01);
  CHECK(f.rmse < 0.01);
  CHECK_THROWS_AS(fit_model(std::vector<VolumeSample>{{1, 1}, {2, 2}}, GrowthModelKind::Linear, {}, budget(1)),
                  InvalidArgument);
}

TEST_CASE("gompertz fit recovers a noiseless curve") {
  const GrowthParams truth{0.008, 0.08, 50.0, {}};
  std::vector<VolumeSample> s;
  for (double t = 30; t <= 65; t += 5) s.push_back({t, eval_model(GrowthModelKind::Gompertz, truth, t)});
  const GrowthFit f = fit_model(s, GrowthModelKind::Gompertz, {}, budget(11));
  CHECK(f.feasible());
  CHECK(f.rmse < 0.05);
  CHECK(f.v_at_100 <= 1500.0);
  const GrowthFit again = fit_model(s, GrowthModelKind::Gompertz, {}, budget(11));
  CHECK(again.params == f.params);
  CHECK(again.rmse == f.rmse);
}

TEST_CASE("every model produces a feasible fit on plausible data") {
  const std::vector<VolumeSample> s{{45, 1.2}, {47, 1.5}, {50, 1.9}, {53, 2.6}};
  for (auto kind : kAllGrowthModels) {
    const GrowthFit f = fit_model(s, kind, {}, budget(5, 20'000));
    CHECK(f.feasible());
    CHECK(f.constraint_violation == constraint_violation(kind, f.params, {}));
    CHECK(f.rmse < 1.0);
  }
}

TEST_CASE("report aggregation") {
  std::vector<GrowthFit> fits(3);
  fits[0].rmse = 1;
  fits[1].rmse = 6;
  fits[2].rmse = 7;
  fits[2].v_at_100 = 1200;
  fits[1].v_at_100 = 1499.9;
  const auto report = aggregate_report(fits, {});
  REQUIRE(report.size() == 1);
  CHECK(report[0].fits == 3);
  CHECK(report[0].rmse_above_5 == 2);
  CHECK(report[0].implausible == 2);
  CHECK(report[0].pinned_at_max == 1);
  CHECK(report[0].rmse_median == 6);
  CHECK(aggregate_report({}, {}).empty());
  const std::string csv = report_to_csv(report);
  CHECK(csv.rfind("model,fits,rmse_min", 0) == 0);
  CHECK(csv.find("\nlinear,3,1,") != std::string::npos);
}
