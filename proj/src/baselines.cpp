#include "translate/baselines.hpp"

#include "translate/errors.hpp"

namespace translate {

WeightSet naive_weights(const Dataset& ds) {
  const auto prev = cohort_prevalences(ds);
  return WeightSet{Eigen::VectorXd::Ones(ds.size()), AlignmentProportions{prev.pi_hat}, "naive"};
}

WeightSet anchor_only_weights(const Dataset& ds) {
  const double scale = static_cast<double>(ds.size()) / static_cast<double>(ds.anchor_count());
  Eigen::VectorXd w(ds.size());
  const auto labels = ds.labels();
  for (Eigen::Index i = 0; i < ds.size(); ++i) {
    w(i) = labels[static_cast<std::size_t>(i)] == 0 ? scale : 0.0;
  }
  Eigen::VectorXd gamma = Eigen::VectorXd::Zero(ds.num_cohorts());
  gamma(0) = 1.0;
  return WeightSet{std::move(w), AlignmentProportions{std::move(gamma)}, "anchor_only"};
}

WeightSet importance_weights(const Dataset& ds, const CohortProbabilityModel& model, double clip) {
  if (model.source() != FeatureSource::covariates_only) {
    throw SpecError("importance weighting needs a covariate-only cohort model");
  }
  const auto prev = cohort_prevalences(ds);
  const auto eta = predict_eta(model, ds, clip);
  const auto psi = alignment_factors(eta, ds.labels(), prev);
  const AlignmentProportions gamma{prev.pi_hat};
  // gamma = pi_hat, so the raw weight reduces to psi.
  return normalize_weights(alignment_weights(gamma, prev, psi, ds.labels()), gamma, "importance");
}

WeightSet importance_weights(const Dataset& ds, const ModelConfig& model_cfg) {
  const auto model = fit_cohort_model(ds, model_cfg, FeatureSource::covariates_only);
  return importance_weights(ds, *model, model_cfg.clip);
}

}  // namespace translate
