#pragma once

#include "translate/alignment.hpp"
#include "translate/cohort_model.hpp"
#include "translate/dataset.hpp"

namespace translate {

// Unit weights: every cohort pooled as one population.
WeightSet naive_weights(const Dataset& ds);

// N / N0 on anchor rows, zero elsewhere.
WeightSet anchor_only_weights(const Dataset& ds);

// Covariate-shift weights. The cohort model sees covariates only; each
// subject gets (pi_s / pi_0) theta_0(x) / theta_s(x) and the result is
// rescaled to sum to N.
WeightSet importance_weights(const Dataset& ds, const ModelConfig& model_cfg = {});
// Same, with an already fitted covariate-only model.
WeightSet importance_weights(const Dataset& ds, const CohortProbabilityModel& model,
                             double clip = kProbabilityClip);

}  // namespace translate
