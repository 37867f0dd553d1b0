#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "translate/errors.hpp"
#include "translate/resampling.hpp"

using namespace translate;

namespace {

FeatureSpec mean_of(Eigen::Index l) {
  FeatureSpec f;
  f.outcome_a = l;
  return f;
}

BootstrapConfig two_methods() {
  BootstrapConfig cfg;
  WeightingConfig t;
  WeightingConfig n;
  n.method = Method::naive;
  cfg.methods = {t, n};
  cfg.features = {mean_of(0), mean_of(1)};
  return cfg;
}

}  // namespace

TEST_CASE("constant outcome has zero bootstrap SE") {
  CounterRng rng(3);
  auto base = testing::random_dataset(rng, 2, 2, 1, 40, 60);
  Eigen::MatrixXd y = base.outcomes();
  y.col(0).setConstant(2.5);
  const Dataset ds(std::vector<int>(base.labels().begin(), base.labels().end()), base.covariates(), y,
                   base.covariate_names(), base.outcome_names());
  BootstrapConfig cfg;
  cfg.features = {mean_of(0)};
  // A constant outcome makes the joint logistic design rank deficient.
  CHECK_THROWS_AS(bootstrap_pipeline(ds, cfg, 30, 11), RankDeficiencyError);
  cfg.methods = {WeightingConfig{Method::naive}, WeightingConfig{Method::importance}};
  const auto run = bootstrap_pipeline(ds, cfg, 30, 11);
  for (const auto* q : {"naive/mean(y1)", "importance/mean(y1)"}) {
    const auto& r = run.find(q);
    CHECK(r.se == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(r.ci_low == doctest::Approx(2.5));
    CHECK(r.ci_high == doctest::Approx(2.5));
  }
}

TEST_CASE("bootstrap is identical across runs and thread counts") {
  CounterRng rng(8);
  const auto ds = testing::random_dataset(rng, 3, 2, 2, 40, 60);
  const auto cfg = two_methods();
  const auto a = bootstrap_pipeline(ds, cfg, 24, 5, 0.05, 1);
  const auto b = bootstrap_pipeline(ds, cfg, 24, 5, 0.05, 4);
  const auto c = bootstrap_pipeline(ds, cfg, 24, 5, 0.05, 1);
  REQUIRE(a.results.size() == b.results.size());
  for (std::size_t k = 0; k < a.results.size(); ++k) {
    CHECK(a.results[k].quantity == b.results[k].quantity);
    CHECK(a.results[k].replicate_values == b.results[k].replicate_values);
    CHECK(a.results[k].replicate_values == c.results[k].replicate_values);
    CHECK(a.results[k].provenance == b.results[k].provenance);
  }
  CHECK(a.replicate_hashes == b.replicate_hashes);
  const auto d = bootstrap_pipeline(ds, cfg, 24, 6, 0.05, 1);
  CHECK(d.results[0].replicate_values != a.results[0].replicate_values);
}

TEST_CASE("paired differences") {
  CounterRng rng(12);
  const auto ds = testing::random_dataset(rng, 2, 2, 2, 50, 70);
  const auto run = bootstrap_pipeline(ds, two_methods(), 20, 9);
  const auto& t = run.find("translate/ess");
  const auto self = paired_difference(t, t);
  CHECK(self.ci_low == 0.0);
  CHECK(self.ci_high == 0.0);
  CHECK_FALSE(self.significant);
  CHECK(self.replicate_values.cwiseAbs().maxCoeff() == 0.0);

  const auto& n = run.find("naive/ess");
  const auto diff = paired_difference(n, t);
  CHECK(diff.replicate_values == n.replicate_values - t.replicate_values);
  // Naive ESS is always N, so the difference is never negative.
  CHECK(diff.replicate_values.minCoeff() >= -1e-9);

  const auto other = bootstrap_pipeline(ds, two_methods(), 20, 10);
  CHECK_THROWS_AS(paired_difference(t, other.find("translate/ess")), PairingError);
  const auto shorter = bootstrap_pipeline(ds, two_methods(), 19, 9);
  CHECK_THROWS_AS(paired_difference(t, shorter.find("translate/ess")), PairingError);
  CHECK_THROWS_AS(run.find("nope"), SpecError);
}

TEST_CASE("percentile interval endpoints are order statistics") {
  BootstrapResult r;
  r.replicate_values = Eigen::VectorXd::LinSpaced(100, 1.0, 100.0);
  r.alpha = 0.1;
  summarize_replicates(r);
  CHECK(r.ci_low == 5.0);
  CHECK(r.ci_high == 95.0);
  CHECK(r.significant);
  CHECK(r.se == doctest::Approx(std::sqrt(100.0 * 101.0 / 12.0)));
}

TEST_CASE("stratified resampling keeps cohort sizes") {
  CounterRng rng(14);
  const auto ds = testing::random_dataset(rng, 3, 1, 1, 10, 20);
  BootstrapConfig cfg;
  cfg.methods = {WeightingConfig{Method::anchor_only}};
  cfg.stratified = true;
  cfg.features = {mean_of(0)};
  const auto run = bootstrap_pipeline(ds, cfg, 40, 3);
  // Anchor-only ESS equals N0 in every replicate when cohort sizes are fixed.
  const auto& ess = run.find("anchor_only/ess");
  CHECK((ess.replicate_values.array() - static_cast<double>(ds.anchor_count())).abs().maxCoeff() < 1e-9);
  CHECK(run.redraw_count == 0);
}

TEST_CASE("small anchor forces redraws and reports them") {
  // One anchor subject out of 40: a pooled resample misses it about a third of the time.
  std::vector<int> labels(40, 1);
  labels[0] = 0;
  CounterRng rng(2);
  Eigen::MatrixXd x(40, 1), y(40, 1);
  for (int i = 0; i < 40; ++i) {
    x(i, 0) = rng.normal();
    y(i, 0) = rng.normal();
  }
  const Dataset ds(labels, x, y, {"x"}, {"y"});
  BootstrapConfig cfg;
  cfg.methods = {WeightingConfig{Method::anchor_only}};
  cfg.features = {mean_of(0)};
  const auto run = bootstrap_pipeline(ds, cfg, 50, 17);
  CHECK(run.redraw_count > 0);
  CHECK(run.results.front().redraw_count == run.redraw_count);
  CHECK_FALSE(run.warnings.empty());
}

TEST_CASE("bootstrap input validation") {
  CounterRng rng(15);
  const auto ds = testing::random_dataset(rng, 2, 1, 1);
  BootstrapConfig cfg;
  cfg.features = {mean_of(0)};
  CHECK_THROWS(bootstrap_pipeline(ds, cfg, 1, 1));
  CHECK_THROWS(bootstrap_pipeline(ds, cfg, 10, 1, 1.5));
  cfg.features = {mean_of(4)};
  CHECK_THROWS_AS(bootstrap_pipeline(ds, cfg, 10, 1), SpecError);
}

TEST_CASE("fixed-model fast path") {
  CounterRng rng(16);
  const auto ds = testing::random_dataset(rng, 2, 2, 1, 60, 80);
  BootstrapConfig cfg;
  cfg.features = {mean_of(0)};
  cfg.refit = false;
  const auto run = bootstrap_pipeline(ds, cfg, 20, 4);
  CHECK(run.find("translate/mean(y1)").se > 0.0);
}
