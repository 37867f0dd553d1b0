#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "translate/alignment.hpp"
#include "translate/baselines.hpp"
#include "translate/errors.hpp"
#include "translate/pipeline.hpp"

using namespace translate;

namespace {

EtaMatrix eta_from(const Eigen::MatrixXd& v) { return EtaMatrix{v}; }

PrevalenceVector prev_of(std::vector<int> labels, int k) { return cohort_prevalences(labels, k); }

}  // namespace

TEST_CASE("psi is exactly one on anchor rows") {
  const std::vector<int> labels{0, 0, 1, 1, 1};
  Eigen::MatrixXd e(5, 2);
  e << 0, 3.7, 0, -2.1, 0, 0.4, 0, 1.0, 0, -5.0;
  const auto psi = alignment_factors(eta_from(e), labels, prev_of(labels, 2));
  CHECK(psi.psi(0) == 1.0);
  CHECK(psi.psi(1) == 1.0);
}

TEST_CASE("psi: indistinguishable cohorts and the log 1.5 example") {
  // pi_hat = (0.1, 0.9).
  std::vector<int> labels(10, 1);
  labels[0] = 0;
  const auto prev = prev_of(labels, 2);
  Eigen::MatrixXd e = Eigen::MatrixXd::Zero(10, 2);
  e(1, 1) = std::log(9.0);
  e(2, 1) = std::log(0.6 / 0.4);
  const auto psi = alignment_factors(eta_from(e), labels, prev);
  CHECK(psi.psi(1) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(psi.psi(2) == doctest::Approx(6.0).epsilon(1e-12));
}

TEST_CASE("cohort ESS: anchor pinned, identical cohorts, hand example") {
  SUBCASE("hand example Q = 0.4") {
    const std::vector<int> labels{0, 0, 1, 1};
    Eigen::MatrixXd e = Eigen::MatrixXd::Zero(4, 2);
    // exp(-2 eta) = 1 and 9.
    e(2, 1) = 0.0;
    e(3, 1) = -std::log(9.0) / 2.0;
    const auto q = cohort_ess(eta_from(e), labels, prev_of(labels, 2));
    CHECK(q(0) == 2.0);
    CHECK(q(1) == doctest::Approx(0.4).epsilon(1e-12));
  }
  SUBCASE("constant log odds gives Q = N_s") {
    const std::vector<int> labels{0, 0, 0, 1, 1, 1, 1, 1, 2, 2};
    const auto prev = prev_of(labels, 3);
    Eigen::MatrixXd e = Eigen::MatrixXd::Zero(10, 3);
    e.col(1).setConstant(std::log(prev.pi_hat(1) / prev.pi_hat(0)));
    e.col(2).setConstant(std::log(prev.pi_hat(2) / prev.pi_hat(0)));
    const auto q = cohort_ess(eta_from(e), labels, prev);
    CHECK(q(0) == doctest::Approx(3.0).epsilon(1e-12));
    CHECK(q(1) == doctest::Approx(5.0).epsilon(1e-12));
    CHECK(q(2) == doctest::Approx(2.0).epsilon(1e-12));
  }
}

TEST_CASE("translate proportions") {
  Eigen::VectorXd q(3);
  q << 50, 450, 100;
  const auto g = translate_proportions(q);
  CHECK(g.gamma(0) == doctest::Approx(1.0 / 12.0).epsilon(1e-14));
  CHECK(g.gamma(1) == doctest::Approx(0.75).epsilon(1e-14));
  CHECK(g.gamma(2) == doctest::Approx(1.0 / 6.0).epsilon(1e-14));

  const auto single = translate_proportions(Eigen::VectorXd::Constant(1, 7.0));
  CHECK(single.gamma(0) == 1.0);

  Eigen::VectorXd bad(2);
  bad << 3.0, 0.0;
  CHECK_THROWS_AS(translate_proportions(bad), DomainError);
}

TEST_CASE("closed-form composite ESS") {
  Eigen::VectorXd q(3);
  q << 50, 450, 100;
  const std::vector<int> labels{0, 1, 1, 2};
  const auto prev = prev_of(labels, 3);
  const auto g = translate_proportions(q);
  CHECK(closed_form_composite_ess(g, q, prev) == doctest::Approx(600.0).epsilon(1e-12));
  const auto corner = AlignmentProportions::validated((Eigen::VectorXd(3) << 1, 0, 0).finished());
  CHECK(closed_form_composite_ess(corner, q, prev) == doctest::Approx(50.0).epsilon(1e-12));

  const std::vector<int> one{0, 0, 0};
  const auto single = AlignmentProportions::validated(Eigen::VectorXd::Constant(1, 1.0));
  CHECK(closed_form_composite_ess(single, Eigen::VectorXd::Constant(1, 3.0), prev_of(one, 1)) ==
        doctest::Approx(3.0));

  Eigen::VectorXd zero_q(3);
  zero_q << 50, 0, 100;
  CHECK_THROWS_AS(closed_form_composite_ess(g, zero_q, prev), DomainError);
}

TEST_CASE("gamma validation") {
  CHECK_THROWS_AS(AlignmentProportions::validated((Eigen::VectorXd(2) << 0.6, 0.6).finished()), DomainError);
  CHECK_THROWS_AS(AlignmentProportions::validated((Eigen::VectorXd(2) << -0.1, 1.1).finished()), DomainError);
}

TEST_CASE("raw alignment weights") {
  // gamma_1 = 0.75, pi_hat_1 = 0.9, psi = 6 -> 5.
  std::vector<int> labels(10, 1);
  labels[0] = 0;
  const auto prev = prev_of(labels, 2);
  AlignmentFactors psi{Eigen::VectorXd::Ones(10)};
  psi.psi(1) = 6.0;
  const auto g = AlignmentProportions::validated((Eigen::VectorXd(2) << 0.25, 0.75).finished());
  const auto raw = alignment_weights(g, prev, psi, labels);
  CHECK(raw(1) == doctest::Approx(5.0).epsilon(1e-12));

  // gamma_0 = pi_hat_0 on an anchor row -> 1.
  const auto g0 = AlignmentProportions::validated(prev.pi_hat);
  CHECK(alignment_weights(g0, prev, psi, labels)(0) == doctest::Approx(1.0).epsilon(1e-12));

  // Simplex corner reproduces anchor-only.
  const auto corner = AlignmentProportions::validated((Eigen::VectorXd(2) << 1.0, 0.0).finished());
  const auto w = normalize_weights(alignment_weights(corner, prev, psi, labels));
  CHECK(w.weights(0) == doctest::Approx(10.0));
  CHECK(w.weights.tail(9).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("normalization examples") {
  const auto a = normalize_weights((Eigen::VectorXd(3) << 2, 2, 2).finished());
  CHECK((a.weights.array() - 1.0).abs().maxCoeff() < 1e-15);
  const auto b = normalize_weights((Eigen::VectorXd(2) << 1, 3).finished());
  CHECK(b.weights(0) == doctest::Approx(0.5));
  CHECK(b.weights(1) == doctest::Approx(1.5));
  const auto c = normalize_weights((Eigen::VectorXd(2) << 0, 5).finished());
  CHECK(c.weights(0) == 0.0);
  CHECK(c.weights(1) == doctest::Approx(2.0));
  CHECK_THROWS_AS(normalize_weights(Eigen::VectorXd::Zero(3)), DegenerateWeightsError);
}

TEST_CASE("composite ESS examples") {
  CHECK(composite_ess(Eigen::VectorXd::Ones(100)) == doctest::Approx(100.0));
  CHECK(composite_ess((Eigen::VectorXd(4) << 2, 2, 0, 0).finished()) == doctest::Approx(2.0));
}

TEST_CASE("weight capping at a quantile") {
  Eigen::VectorXd raw(5);
  raw << 1, 2, 3, 4, 100;
  const auto capped = cap_weights(raw, 0.75);
  CHECK(capped(4) == doctest::Approx(4.0));
  CHECK(capped(0) == 1.0);
  CHECK(cap_weights(raw, 1.0)(4) == 100.0);
}

TEST_CASE("forced constant eta reduces to unit weights") {
  CounterRng rng(5);
  const auto ds = testing::random_dataset(rng, 3, 2, 1);
  const auto prev = cohort_prevalences(ds);
  Eigen::MatrixXd e = Eigen::MatrixXd::Zero(ds.size(), 3);
  for (int s = 1; s < 3; ++s) e.col(s).setConstant(std::log(prev.pi_hat(s) / prev.pi_hat(0)));
  const auto psi = alignment_factors(eta_from(e), ds.labels(), prev);
  const auto q = cohort_ess(eta_from(e), ds.labels(), prev);
  const auto g = translate_proportions(q);
  const auto w = normalize_weights(alignment_weights(g, prev, psi, ds.labels()));
  CHECK((w.weights.array() - 1.0).abs().maxCoeff() < 1e-12);
}

TEST_CASE("pipeline: anchor identity and closed form equals sum Q on real fits") {
  CounterRng rng(9);
  for (int rep = 0; rep < 5; ++rep) {
    const auto ds = testing::random_dataset(rng, 3, 2, 2, 60, 120);
    WeightingConfig cfg;
    const auto res = compute_weights(ds, cfg);
    CHECK(res.ess.cohort_ess(0) == doctest::Approx(static_cast<double>(ds.anchor_count())).epsilon(1e-9));
    CHECK(res.weights.weights.sum() == doctest::Approx(static_cast<double>(ds.size())).epsilon(1e-10));
    CHECK(res.ess.composite_ess_closed_form == doctest::Approx(res.ess.cohort_ess.sum()).epsilon(1e-9));
    CHECK(res.ess.composite_ess_empirical > 0.0);
    CHECK(res.ess.composite_ess_empirical <= static_cast<double>(ds.size()) * (1 + 1e-12));
  }
}

TEST_CASE("pipeline: prespecified gamma and method parsing") {
  CounterRng rng(10);
  const auto ds = testing::random_dataset(rng, 2, 2, 1, 80, 120);
  WeightingConfig cfg;
  cfg.method = Method::prespecified;
  cfg.gamma = (Eigen::VectorXd(2) << 1.0, 0.0).finished();
  const auto res = compute_weights(ds, cfg);
  const auto ref = anchor_only_weights(ds);
  CHECK((res.weights.weights - ref.weights).cwiseAbs().maxCoeff() < 1e-9);
  CHECK(parse_method("iw") == Method::importance);
  CHECK(parse_method("anchor-only") == Method::anchor_only);
  CHECK_THROWS_AS(parse_method("hpp"), SpecError);
}
