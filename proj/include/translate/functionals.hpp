#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "translate/alignment.hpp"
#include "translate/dataset.hpp"

namespace translate {

enum class FeatureKind {
  mean,
  sd,
  variance,
  covariance,
  correlation,
  cdf_at,
  median,
  quantile_at,
  subgroup_mean,
  subgroup_difference,
};

std::string to_string(FeatureKind kind);

struct Subgroup {
  std::string covariate;
  std::string value;
};

// A derived anchor feature h(lambda) with lambda = E[Phi(Z) | S = 0].
//
// `subgroup` conditions any kind on a covariate category (subgroup_mean
// requires it). subgroup_difference compares the mean of outcome_a between
// `subgroup` and `contrast`.
struct FeatureSpec {
  FeatureKind kind = FeatureKind::mean;
  Eigen::Index outcome_a = 0;
  Eigen::Index outcome_b = 0;
  std::optional<Subgroup> subgroup;
  std::optional<Subgroup> contrast;
  // cdf_at / median / quantile_at evaluation points; empty means every
  // distinct value of the outcome in the dataset.
  std::vector<double> grid;
  double quantile = 0.5;

  std::string label(const Dataset& ds) const;
  std::string label(const std::vector<std::string>& outcome_names) const;
};

// Throws SpecError when indices, subgroups or the grid are invalid for ds.
void validate_spec(const FeatureSpec& spec, const Dataset& ds);

// M x N matrix of Phi_m(z_i).
Eigen::MatrixXd evaluate_phi(const FeatureSpec& spec, const Dataset& ds);

// lambda_m = (1/N) sum_i w_i Phi_m(z_i).
Eigen::VectorXd weighted_lambda(const WeightSet& w, const Eigen::MatrixXd& phi);

struct FunctionalEstimate {
  Eigen::VectorXd lambda_hat;
  // h(lambda_hat); one entry per grid point for cdf_at, otherwise one.
  Eigen::VectorXd values;
  FeatureSpec feature;
  std::string weight_method;

  double value() const { return values(0); }
};

FunctionalEstimate estimate_feature(const FeatureSpec& spec, const WeightSet& w, const Dataset& ds);

// Evaluation grid used for a quantile-type spec on this dataset.
std::vector<double> resolved_grid(const FeatureSpec& spec, const Dataset& ds);

}  // namespace translate
