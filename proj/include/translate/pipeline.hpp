#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "translate/alignment.hpp"
#include "translate/cohort_model.hpp"
#include "translate/dataset.hpp"

namespace translate {

enum class Method { translate, naive, anchor_only, importance, prespecified };

std::string to_string(Method m);
Method parse_method(const std::string& text);

struct WeightingConfig {
  Method method = Method::translate;
  ModelConfig model;
  // Upper quantile at which raw weights are capped; unset leaves them alone.
  std::optional<double> weight_cap;
  // Alignment proportions for Method::prespecified.
  std::optional<Eigen::VectorXd> gamma;
  // Warn when empirical and closed-form composite ESS differ by more than
  // this factor in either direction.
  double ess_discrepancy_ratio = 1.25;
};

nlohmann::json to_json(const WeightingConfig& cfg);

struct WeightingResult {
  WeightSet weights;
  EssReport ess;
  // Cohort model used (null for naive and anchor-only).
  std::shared_ptr<const CohortProbabilityModel> model;
};

// Stage 1 end to end: fit the cohort model the method needs, build the
// weights and the ESS diagnostics. A non-null `fixed_model` is used instead
// of fitting; it must have the input source the method expects.
WeightingResult compute_weights(const Dataset& ds, const WeightingConfig& cfg,
                                std::shared_ptr<const CohortProbabilityModel> fixed_model = nullptr);

// Input source of the cohort model the method fits (nullopt if none).
std::optional<FeatureSource> model_source(Method m);

}  // namespace translate
