#include "translate/pipeline.hpp"

#include <cmath>
#include <sstream>

#include "translate/baselines.hpp"
#include "translate/errors.hpp"

namespace translate {

std::string to_string(Method m) {
  switch (m) {
    case Method::translate: return "translate";
    case Method::naive: return "naive";
    case Method::anchor_only: return "anchor_only";
    case Method::importance: return "importance";
    case Method::prespecified: return "prespecified";
  }
  return "unknown";
}

Method parse_method(const std::string& text) {
  if (text == "translate") return Method::translate;
  if (text == "naive") return Method::naive;
  if (text == "anchor_only" || text == "anchor-only") return Method::anchor_only;
  if (text == "importance" || text == "iw") return Method::importance;
  if (text == "prespecified") return Method::prespecified;
  throw SpecError("unknown method '" + text + "' (expected translate, naive, anchor_only or importance)");
}

nlohmann::json to_json(const WeightingConfig& cfg) {
  nlohmann::json j{{"method", to_string(cfg.method)},
                   {"model", to_json(cfg.model)},
                   {"ess_discrepancy_ratio", cfg.ess_discrepancy_ratio}};
  j["weight_cap"] = cfg.weight_cap ? nlohmann::json(*cfg.weight_cap) : nlohmann::json(nullptr);
  if (cfg.gamma) j["gamma"] = std::vector<double>(cfg.gamma->data(), cfg.gamma->data() + cfg.gamma->size());
  return j;
}

std::optional<FeatureSource> model_source(Method m) {
  switch (m) {
    case Method::translate:
    case Method::prespecified:
      return FeatureSource::covariates_and_outcomes;
    case Method::importance:
      return FeatureSource::covariates_only;
    default:
      return std::nullopt;
  }
}

namespace {

EssReport base_report(const Dataset& ds, const WeightSet& w, const PrevalenceVector& prev) {
  EssReport r;
  r.cohort_names = ds.cohort_names();
  r.cohort_counts = prev.counts;
  r.composite_ess_empirical = composite_ess(w);
  r.gamma = w.gamma;
  r.method_tag = w.method_tag;
  return r;
}

std::string ratio_text(double v) {
  std::ostringstream os;
  os.precision(4);
  os << v;
  return os.str();
}

}  // namespace

WeightingResult compute_weights(const Dataset& ds, const WeightingConfig& cfg,
                                std::shared_ptr<const CohortProbabilityModel> fixed_model) {
  const auto prev = cohort_prevalences(ds);
  Eigen::VectorXd counts(ds.num_cohorts());
  for (int s = 0; s < ds.num_cohorts(); ++s) counts(s) = static_cast<double>(prev.counts[static_cast<std::size_t>(s)]);

  WeightingResult out;
  const auto source = model_source(cfg.method);
  if (!source) {
    // Without a cohort model every cohort is treated as indistinguishable
    // from the anchor, so Q_s = N_s.
    out.weights = cfg.method == Method::naive ? naive_weights(ds) : anchor_only_weights(ds);
    out.ess = base_report(ds, out.weights, prev);
    out.ess.cohort_ess = counts;
    out.ess.composite_ess_closed_form = closed_form_composite_ess(out.weights.gamma, counts, prev);
    return out;
  }

  if (fixed_model) {
    if (fixed_model->source() != *source) throw SpecError("fixed cohort model has the wrong input source");
    if (fixed_model->num_cohorts() != ds.num_cohorts()) {
      throw ShapeError("fixed cohort model has the wrong number of cohorts");
    }
    out.model = std::move(fixed_model);
  } else {
    out.model = fit_cohort_model(ds, cfg.model, *source);
  }

  const auto eta = predict_eta(*out.model, ds, cfg.model.clip);
  const auto psi = alignment_factors(eta, ds.labels(), prev);
  const Eigen::VectorXd q = cohort_ess(eta, ds.labels(), prev);
  AlignmentProportions gamma;
  std::string tag = to_string(cfg.method);
  switch (cfg.method) {
    case Method::translate:
      gamma = translate_proportions(q);
      break;
    case Method::prespecified:
      if (!cfg.gamma) throw SpecError("prespecified method needs alignment proportions");
      if (cfg.gamma->size() != ds.num_cohorts()) throw ShapeError("gamma length must equal J+1");
      gamma = AlignmentProportions::validated(*cfg.gamma);
      break;
    default:
      gamma = AlignmentProportions{prev.pi_hat};
      break;
  }
  Eigen::VectorXd raw = alignment_weights(gamma, prev, psi, ds.labels());
  if (cfg.weight_cap) raw = cap_weights(raw, *cfg.weight_cap);
  out.weights = normalize_weights(raw, gamma, tag);

  out.ess = base_report(ds, out.weights, prev);
  out.ess.cohort_ess = q;
  out.ess.composite_ess_closed_form = closed_form_composite_ess(gamma, q, prev);
  const double ratio = out.ess.composite_ess_empirical / out.ess.composite_ess_closed_form;
  if (ratio > cfg.ess_discrepancy_ratio || ratio < 1.0 / cfg.ess_discrepancy_ratio) {
    out.ess.warnings.push_back("empirical/closed-form composite ESS ratio " + ratio_text(ratio) +
                               " is outside [1/" + ratio_text(cfg.ess_discrepancy_ratio) + ", " +
                               ratio_text(cfg.ess_discrepancy_ratio) + "]; the cohort model may be misfit");
  }
  if (const auto* lm = dynamic_cast<const MultinomialLogisticModel*>(out.model.get())) {
    if (lm->separation_warning()) {
      out.ess.warnings.push_back("cohort model hit quasi-separation; refit with ridge " + ratio_text(lm->ridge()));
    }
    if (!lm->converged()) out.ess.warnings.push_back("cohort model did not converge");
  }
  return out;
}

}  // namespace translate
