#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "translate/dataset.hpp"
#include "translate/functionals.hpp"
#include "translate/pipeline.hpp"
#include "translate/rng.hpp"

namespace translate {

// How the second parameter of "N(mu, v)" in the covariate laws is read.
enum class VarianceConvention { variance, sd };

std::string to_string(VarianceConvention c);

// Two-cohort generator with four covariates and two outcomes:
//   x1 ~ Bernoulli(x1_prob), x2 ~ Uniform(0, x2_upper),
//   x3 ~ N(0, x3_param), x4 | s ~ N(phi_x s, x4_param),
//   y_l | x, s ~ N(sum(x) + phi_y s, sigma_s^2), corr(y1, y2 | x, s) = (-1)^(1+s) outcome_corr.
struct ScenarioConfig {
  std::string name = "custom";
  Eigen::Index N = 5000;
  // Probability that a subject is in the anchor cohort.
  double pi0 = 0.05;
  double phi_x = 0.0;
  double phi_y = 1.5;
  double sigma0 = 0.5;
  double sigma1 = 0.6;
  double x1_prob = 0.2;
  double x2_upper = 0.1;
  double x3_param = 0.1;
  double x4_param = 0.1;
  double outcome_corr = 0.5;
  VarianceConvention convention = VarianceConvention::variance;

  // Throws DomainError on out-of-range parameters.
  void validate() const;
  double normal_sd(double param) const;
  nlohmann::json to_json() const;
  static ScenarioConfig from_json(const nlohmann::json& j);
};

// Outcome shift only.
ScenarioConfig dissimilar_y();
// Covariate (x4) and outcome shift.
ScenarioConfig dissimilar_xy();
// Parameter set whose naive biases match the published comparison table:
// anchor prevalence 0.1, phi_y = 0.5 and x2 ~ Uniform(0, sqrt(0.1)).
ScenarioConfig calibrated_y();
ScenarioConfig calibrated_xy();
// dissimilar_y, dissimilar_xy, calibrated_y, calibrated_xy.
ScenarioConfig scenario_by_name(const std::string& name);
std::vector<std::string> scenario_names();

Dataset generate_dataset(const ScenarioConfig& cfg, std::uint64_t seed);
Dataset generate_dataset(const ScenarioConfig& cfg, CounterRng& rng);

// mean(y1), sd(y2), cov(y1, y2).
std::vector<FeatureSpec> oracle_features();

// Anchor-population value of a mean, variance, sd, covariance or correlation
// feature by moment algebra. Throws SpecError for other kinds.
double closed_form_truth(const FeatureSpec& spec, const ScenarioConfig& cfg);

struct OracleTruths {
  std::array<std::string, 3> names{"mean", "sd", "covariance"};
  Eigen::Vector3d closed_form = Eigen::Vector3d::Zero();
  Eigen::Vector3d monte_carlo = Eigen::Vector3d::Zero();
  Eigen::Vector3d mc_se = Eigen::Vector3d::Zero();
  // |closed_form - monte_carlo| > 5 mc_se.
  std::array<bool, 3> disagrees{false, false, false};
  std::size_t mc_size = 0;

  bool agree() const { return !disagrees[0] && !disagrees[1] && !disagrees[2]; }
  nlohmann::json to_json() const;
};

// Closed-form anchor truths and a Monte Carlo check from mc_size draws of
// the anchor law.
OracleTruths oracle_truths(const ScenarioConfig& cfg, std::size_t mc_size, std::uint64_t seed,
                           unsigned threads = 1);

std::vector<WeightingConfig> default_study_methods(ModelKind kind = ModelKind::qda);

struct StudyConfig {
  std::vector<ScenarioConfig> scenarios{dissimilar_y(), dissimilar_xy()};
  std::size_t R = 100;
  std::vector<WeightingConfig> methods = default_study_methods();
  std::vector<FeatureSpec> features = oracle_features();
  std::uint64_t seed = 1;
  unsigned threads = 1;
  double max_failure_fraction = 0.05;

  nlohmann::json to_json() const;
};

struct CellSummary {
  std::string scenario;
  std::string method;
  std::string feature;
  double truth = 0.0;
  double mean_estimate = 0.0;
  double bias = 0.0;
  double abs_bias = 0.0;
  double abs_bias_se = 0.0;
  double rmse = 0.0;
  double rmse_se = 0.0;
  std::size_t replicates = 0;
};

struct EssSummary {
  std::string scenario;
  std::string method;
  double mean = 0.0;
  double median = 0.0;
  double min = 0.0;
  double max = 0.0;
  // Against N * pi0 of the scenario.
  double frac_above_npi0 = 0.0;
  double frac_below_npi0 = 0.0;
  double sum_q_median = 0.0;
  // Median of |ESS - sum_s Q_s| / sum_s Q_s.
  double additivity_median = 0.0;
  double anchor_count_mean = 0.0;
};

struct ScenarioReplicates {
  std::string scenario;
  std::vector<bool> ok;
  // One R x F matrix per method.
  std::vector<Eigen::MatrixXd> estimates;
  // R x M.
  Eigen::MatrixXd ess;
  Eigen::MatrixXd sum_q;
  Eigen::VectorXd anchor_count;
  std::size_t failures = 0;
  std::vector<std::string> failure_messages;
};

struct StudyResult {
  StudyConfig config;
  std::vector<std::string> feature_labels;
  std::vector<std::string> method_tags;
  // scenarios x features.
  std::vector<std::vector<double>> truths;
  std::vector<CellSummary> cells;
  std::vector<EssSummary> ess;
  std::vector<ScenarioReplicates> replicates;

  const CellSummary& cell(const std::string& scenario, const std::string& method, const std::string& feature) const;
  const EssSummary& ess_for(const std::string& scenario, const std::string& method) const;
};

// R replicates per scenario: generate, weight with every method, estimate
// every feature. Replicate (scenario k, r) uses the stream keyed by the
// scenario name and r. Throws StudyError when more than
// max_failure_fraction of a scenario's replicates fail.
StudyResult run_study(const StudyConfig& cfg);

// Delimited table: scenario blocks, bias and RMSE panels, one column per method.
std::string render_study_table(const StudyResult& r, char delimiter = ',', int precision = 4);
nlohmann::json to_json(const StudyResult& r);

}  // namespace translate
