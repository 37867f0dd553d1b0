#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "helpers.hpp"
#include "translate/baselines.hpp"
#include "translate/errors.hpp"
#include "translate/functionals.hpp"

using namespace translate;

namespace {

Dataset tiny(const std::vector<int>& labels, const std::vector<double>& y1, const std::vector<double>& y2 = {}) {
  const auto n = static_cast<Eigen::Index>(labels.size());
  Eigen::MatrixXd x(n, 1);
  Eigen::MatrixXd y(n, y2.empty() ? 1 : 2);
  for (Eigen::Index i = 0; i < n; ++i) {
    x(i, 0) = static_cast<double>(i % 2);
    y(i, 0) = y1[static_cast<std::size_t>(i)];
    if (!y2.empty()) y(i, 1) = y2[static_cast<std::size_t>(i)];
  }
  std::vector<std::string> yn{"y1"};
  if (!y2.empty()) yn.push_back("y2");
  return Dataset(labels, x, y, {"x1"}, yn);
}

WeightSet unit_weights(Eigen::Index n) { return normalize_weights(Eigen::VectorXd::Ones(n)); }

FeatureSpec spec(FeatureKind k, Eigen::Index a = 0, Eigen::Index b = 0) {
  FeatureSpec f;
  f.kind = k;
  f.outcome_a = a;
  f.outcome_b = b;
  return f;
}

}  // namespace

TEST_CASE("phi rows") {
  const auto ds = tiny({0, 1, 1}, {1, 2, 3}, {4, 5, 6});
  const auto m = evaluate_phi(spec(FeatureKind::mean), ds);
  CHECK(m.rows() == 1);
  CHECK(m(0, 2) == 3.0);

  auto cdf = spec(FeatureKind::cdf_at);
  cdf.grid = {2.0};
  const auto c = evaluate_phi(cdf, ds);
  CHECK(c(0, 0) == 1.0);
  CHECK(c(0, 1) == 1.0);
  CHECK(c(0, 2) == 0.0);

  const auto cov = evaluate_phi(spec(FeatureKind::covariance, 0, 1), ds);
  CHECK(cov.rows() == 3);
  CHECK(cov(2, 1) == 10.0);
}

TEST_CASE("weighted lambda hand example") {
  const auto ds = tiny({0, 1}, {2, 4});
  WeightSet w{(Eigen::VectorXd(2) << 0.5, 1.5).finished(), {}, "x"};
  const auto lam = weighted_lambda(w, evaluate_phi(spec(FeatureKind::mean), ds));
  CHECK(lam(0) == doctest::Approx(3.5).epsilon(1e-15));
  CHECK_THROWS_AS(weighted_lambda(w, Eigen::MatrixXd::Ones(1, 3)), ShapeError);
}

TEST_CASE("sd from lambda (1, 2) is one") {
  // y in {0, 2} with equal weight: t1 = 1, t2 = 2.
  const auto ds = tiny({0, 1}, {0, 2});
  const auto est = estimate_feature(spec(FeatureKind::sd), unit_weights(2), ds);
  CHECK(est.lambda_hat(0) == doctest::Approx(1.0));
  CHECK(est.lambda_hat(1) == doctest::Approx(2.0));
  CHECK(est.value() == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("correlation of duplicated columns is one") {
  CounterRng rng(4);
  std::vector<int> labels;
  std::vector<double> y;
  for (int i = 0; i < 50; ++i) {
    labels.push_back(i < 10 ? 0 : 1);
    y.push_back(rng.normal());
  }
  const auto ds = tiny(labels, y, y);
  Eigen::VectorXd raw(50);
  for (int i = 0; i < 50; ++i) raw(i) = rng.uniform(0.1, 3.0);
  const auto est = estimate_feature(spec(FeatureKind::correlation, 0, 1), normalize_weights(raw), ds);
  CHECK(std::abs(est.value() - 1.0) < 1e-12);
}

TEST_CASE("covariance can be negative") {
  const auto ds = tiny({0, 0, 1, 1}, {1, 2, 3, 4}, {4, 3, 2, 1});
  const auto est = estimate_feature(spec(FeatureKind::covariance, 0, 1), unit_weights(4), ds);
  CHECK(est.value() == doctest::Approx(-1.25));
}

TEST_CASE("median and quantile with ties take the smaller grid point") {
  const auto ds = tiny({0, 0, 1, 1}, {1, 2, 3, 4});
  // CDF on the distinct values is (0.25, 0.5, 0.75, 1).
  CHECK(estimate_feature(spec(FeatureKind::median), unit_weights(4), ds).value() == 2.0);
  auto q = spec(FeatureKind::quantile_at);
  q.quantile = 0.375;  // equidistant from 0.25 and 0.5
  CHECK(estimate_feature(q, unit_weights(4), ds).value() == 1.0);
  q.quantile = 0.8;
  CHECK(estimate_feature(q, unit_weights(4), ds).value() == 3.0);
  q.quantile = 1.5;
  CHECK_THROWS_AS(validate_spec(q, ds), SpecError);
}

TEST_CASE("spec validation") {
  const auto ds = tiny({0, 1}, {1, 2});
  CHECK_THROWS_AS(validate_spec(spec(FeatureKind::mean, 3), ds), SpecError);
  CHECK_THROWS_AS(validate_spec(spec(FeatureKind::subgroup_mean), ds), SpecError);
  auto cdf = spec(FeatureKind::cdf_at);
  CHECK_THROWS_AS(validate_spec(cdf, ds), SpecError);
  cdf.grid = {2.0, 1.0};
  CHECK_THROWS_AS(validate_spec(cdf, ds), SpecError);
  auto g = spec(FeatureKind::subgroup_mean);
  g.subgroup = Subgroup{"x1", "7"};
  CHECK_THROWS_AS(validate_spec(g, ds), SpecError);
}

TEST_CASE("subgroup mean, difference and zero weighted mass") {
  // x1 alternates 0, 1.
  const auto ds = tiny({0, 0, 0, 0, 1, 1}, {1, 10, 3, 20, 5, 30});
  auto g = spec(FeatureKind::subgroup_mean);
  g.subgroup = Subgroup{"x1", "1"};
  CHECK(estimate_feature(g, unit_weights(6), ds).value() == doctest::Approx(20.0));
  auto d = spec(FeatureKind::subgroup_difference);
  d.subgroup = Subgroup{"x1", "1"};
  d.contrast = Subgroup{"x1", "0"};
  CHECK(estimate_feature(d, unit_weights(6), ds).value() == doctest::Approx(20.0 - 3.0));

  // Weight only on rows where x1 = 0.
  WeightSet w = normalize_weights((Eigen::VectorXd(6) << 1, 0, 1, 0, 1, 0).finished());
  CHECK_THROWS_AS(estimate_feature(g, w, ds), SubgroupSupportError);
  CHECK_THROWS_AS(estimate_feature(d, w, ds), SubgroupSupportError);

  auto sd = spec(FeatureKind::sd);
  sd.subgroup = Subgroup{"x1", "0"};
  const auto v = estimate_feature(sd, unit_weights(6), ds).value();
  CHECK(v == doctest::Approx(std::sqrt(testing::direct_cov({1, 3, 5}, {1, 3, 5}))));
}

TEST_CASE("correlation with a constant outcome is degenerate") {
  const auto ds = tiny({0, 1, 1}, {1, 2, 3}, {5, 5, 5});
  CHECK_THROWS_AS(estimate_feature(spec(FeatureKind::correlation, 0, 1), unit_weights(3), ds),
                  DegenerateVarianceError);
}

TEST_CASE("labels") {
  const auto ds = tiny({0, 1}, {1, 2}, {3, 4});
  CHECK(spec(FeatureKind::covariance, 0, 1).label(ds) == "cov(y1,y2)");
  auto d = spec(FeatureKind::subgroup_difference);
  d.subgroup = Subgroup{"sex", "F"};
  d.contrast = Subgroup{"sex", "M"};
  CHECK(d.label(ds) == "mean(y1|sex=F)-mean(y1|sex=M)");
}

// Randomized invariants: bounds, monotone CDF, linearity and reductions to
// direct computation under unit and anchor-only weights.
TEST_CASE("property cases") {
  CounterRng rng(20240607);
  for (int c = 0; c < 200; ++c) {
    const auto ds = testing::random_dataset(rng, 1 + static_cast<int>(rng.below(4)), 2, 3, 5, 40);
    const Eigen::Index n = ds.size();
    Eigen::VectorXd raw(n);
    for (Eigen::Index i = 0; i < n; ++i) raw(i) = rng.bernoulli(0.2) ? 0.0 : std::exp(rng.normal(0, 2));
    if (raw.sum() == 0.0) raw(0) = 1.0;
    const auto w = normalize_weights(raw);

    const auto corr = estimate_feature(spec(FeatureKind::correlation, 0, 1), w, ds).value();
    CHECK(corr >= -1.0);
    CHECK(corr <= 1.0);
    CHECK(estimate_feature(spec(FeatureKind::variance, 2), w, ds).value() >= 0.0);

    auto cdf = spec(FeatureKind::cdf_at, 1);
    for (int m = -3; m <= 3; ++m) cdf.grid.push_back(0.7 * m);
    const auto cv = estimate_feature(cdf, w, ds).values;
    CHECK(cv.minCoeff() >= 0.0);
    CHECK(cv.maxCoeff() <= 1.0);
    for (Eigen::Index m = 1; m < cv.size(); ++m) CHECK(cv(m) >= cv(m - 1));

    // mean(a Y + b) = a mean(Y) + b.
    const double a = rng.normal(0, 3), b = rng.normal(0, 3);
    Eigen::MatrixXd y2 = ds.outcomes();
    y2.col(0) = (a * y2.col(0).array() + b).matrix();
    const Dataset shifted(std::vector<int>(ds.labels().begin(), ds.labels().end()), ds.covariates(), y2,
                          ds.covariate_names(), ds.outcome_names());
    const double m0 = estimate_feature(spec(FeatureKind::mean), w, ds).value();
    const double m1 = estimate_feature(spec(FeatureKind::mean), w, shifted).value();
    CHECK(std::abs(m1 - (a * m0 + b)) < 1e-9 * (1 + std::abs(m1)));

    // Reductions.
    const auto all = testing::all_rows(n);
    const auto anchor = testing::cohort_rows(ds, 0);
    for (const auto& [ws, rows] : {std::pair{naive_weights(ds), all}, std::pair{anchor_only_weights(ds), anchor}}) {
      const auto y0 = testing::column(ds.outcomes(), 0, rows);
      const auto y1 = testing::column(ds.outcomes(), 1, rows);
      const double mean = testing::direct_mean(y0);
      const double var = testing::direct_cov(y0, y0);
      const double cov = testing::direct_cov(y0, y1);
      CHECK(std::abs(estimate_feature(spec(FeatureKind::mean), ws, ds).value() - mean) < 1e-12);
      CHECK(std::abs(estimate_feature(spec(FeatureKind::variance), ws, ds).value() - var) < 1e-12);
      CHECK(std::abs(estimate_feature(spec(FeatureKind::covariance, 0, 1), ws, ds).value() - cov) < 1e-12);
    }
  }
}
