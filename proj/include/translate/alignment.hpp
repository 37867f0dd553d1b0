#pragma once

#include <Eigen/Dense>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "translate/cohort_model.hpp"
#include "translate/dataset.hpp"

namespace translate {

// psi_i = estimated density ratio f0(z_i) / f_{s_i}(z_i); exactly 1 on anchor rows.
struct AlignmentFactors {
  Eigen::VectorXd psi;
};

// Probability vector over cohorts 0..J.
struct AlignmentProportions {
  Eigen::VectorXd gamma;

  // Throws DomainError unless entries are >= 0 and sum to 1 within 1e-12.
  static AlignmentProportions validated(Eigen::VectorXd gamma);
};

struct WeightSet {
  Eigen::VectorXd weights;  // sums to N
  AlignmentProportions gamma;
  std::string method_tag;
};

struct EssReport {
  std::vector<std::string> cohort_names;
  std::vector<std::size_t> cohort_counts;
  Eigen::VectorXd cohort_ess;
  double composite_ess_empirical = 0.0;
  double composite_ess_closed_form = 0.0;
  AlignmentProportions gamma;
  std::string method_tag;
  std::vector<std::string> warnings;

  std::size_t total() const;
};

AlignmentFactors alignment_factors(const EtaMatrix& eta, std::span<const int> labels,
                                   const PrevalenceVector& prev);

// Q_s = N pi0^2 / g_s with g_s = (1/N) sum_{i in s} exp(-2 eta_{s}(z_i)).
Eigen::VectorXd cohort_ess(const EtaMatrix& eta, std::span<const int> labels, const PrevalenceVector& prev);

// gamma_s proportional to Q_s (the ESS-maximizing choice).
AlignmentProportions translate_proportions(const Eigen::VectorXd& cohort_ess);

// Unnormalized w_i = (gamma_{s_i} / pi_{s_i}) psi_i.
Eigen::VectorXd alignment_weights(const AlignmentProportions& gamma, const PrevalenceVector& prev,
                                  const AlignmentFactors& psi, std::span<const int> labels);

// Caps raw weights at their `quantile` order statistic (linear interpolation).
Eigen::VectorXd cap_weights(const Eigen::VectorXd& raw, double quantile);

// Rescales so the weights sum to N. Throws DegenerateWeightsError when the
// raw weights have no positive mass.
WeightSet normalize_weights(const Eigen::VectorXd& raw, AlignmentProportions gamma = {},
                            std::string method_tag = "");

// N^2 / sum w_i^2 for weights that sum to N.
double composite_ess(const WeightSet& w);
double composite_ess(const Eigen::VectorXd& weights);

// (sum_s gamma_s^2 / Q_s * (pi_hat_s / pi_s))^-1. Without true prevalences
// the ratio is one; pass them in simulation mode where pi is known.
double closed_form_composite_ess(const AlignmentProportions& gamma, const Eigen::VectorXd& cohort_ess,
                                 const PrevalenceVector& prev,
                                 const std::optional<Eigen::VectorXd>& true_prevalence = std::nullopt);

}  // namespace translate
