#include "translate/functionals.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "translate/errors.hpp"

namespace translate {

namespace {

bool grid_kind(FeatureKind k) {
  return k == FeatureKind::cdf_at || k == FeatureKind::median || k == FeatureKind::quantile_at;
}

std::string format_number(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

std::string condition_text(const std::optional<Subgroup>& g) {
  return g ? "|" + g->covariate + "=" + g->value : "";
}

// Unconditional Phi rows for the kind (subgroup kinds excluded).
Eigen::MatrixXd base_phi(const FeatureSpec& spec, const Dataset& ds, const std::vector<double>& grid) {
  const auto ya = ds.outcomes().col(spec.outcome_a);
  const Eigen::Index n = ds.size();
  switch (spec.kind) {
    case FeatureKind::mean: {
      return ya.transpose();
    }
    case FeatureKind::variance:
    case FeatureKind::sd: {
      Eigen::MatrixXd phi(2, n);
      phi.row(0) = ya.transpose();
      phi.row(1) = ya.array().square().matrix().transpose();
      return phi;
    }
    case FeatureKind::covariance:
    case FeatureKind::correlation: {
      const auto yb = ds.outcomes().col(spec.outcome_b);
      Eigen::MatrixXd phi(spec.kind == FeatureKind::covariance ? 3 : 5, n);
      phi.row(0) = ya.transpose();
      phi.row(1) = yb.transpose();
      phi.row(2) = ya.cwiseProduct(yb).transpose();
      if (spec.kind == FeatureKind::correlation) {
        phi.row(3) = ya.array().square().matrix().transpose();
        phi.row(4) = yb.array().square().matrix().transpose();
      }
      return phi;
    }
    case FeatureKind::cdf_at:
    case FeatureKind::median:
    case FeatureKind::quantile_at: {
      Eigen::MatrixXd phi(static_cast<Eigen::Index>(grid.size()), n);
      for (std::size_t m = 0; m < grid.size(); ++m) {
        phi.row(static_cast<Eigen::Index>(m)) = (ya.array() <= grid[m]).cast<double>().matrix().transpose();
      }
      return phi;
    }
    default:
      break;
  }
  throw SpecError("no unconditional moments for this feature kind");
}

double variance_from(double t1, double t2) { return std::max(0.0, t2 - t1 * t1); }

Eigen::VectorXd base_h(const FeatureSpec& spec, const Eigen::VectorXd& t, const std::vector<double>& grid) {
  switch (spec.kind) {
    case FeatureKind::mean:
      return Eigen::VectorXd::Constant(1, t(0));
    case FeatureKind::variance:
      return Eigen::VectorXd::Constant(1, variance_from(t(0), t(1)));
    case FeatureKind::sd:
      return Eigen::VectorXd::Constant(1, std::sqrt(variance_from(t(0), t(1))));
    case FeatureKind::covariance:
      return Eigen::VectorXd::Constant(1, t(2) - t(0) * t(1));
    case FeatureKind::correlation: {
      const double va = variance_from(t(0), t(3));
      const double vb = variance_from(t(1), t(4));
      if (va <= 1e-14 * std::abs(t(3)) || vb <= 1e-14 * std::abs(t(4))) {
        throw DegenerateVarianceError("correlation undefined: an outcome has zero weighted variance");
      }
      const double r = (t(2) - t(0) * t(1)) / std::sqrt(va * vb);
      return Eigen::VectorXd::Constant(1, std::clamp(r, -1.0, 1.0));
    }
    case FeatureKind::cdf_at:
      return t.cwiseMax(0.0).cwiseMin(1.0);
    case FeatureKind::median:
    case FeatureKind::quantile_at: {
      const double q = spec.kind == FeatureKind::median ? 0.5 : spec.quantile;
      std::size_t best = 0;
      for (std::size_t m = 1; m < grid.size(); ++m) {
        // Strict comparison keeps the smaller grid point on ties.
        if (std::abs(t(static_cast<Eigen::Index>(m)) - q) < std::abs(t(static_cast<Eigen::Index>(best)) - q)) {
          best = m;
        }
      }
      return Eigen::VectorXd::Constant(1, grid[best]);
    }
    default:
      break;
  }
  throw SpecError("no plug-in map for this feature kind");
}

}  // namespace

std::string to_string(FeatureKind kind) {
  switch (kind) {
    case FeatureKind::mean: return "mean";
    case FeatureKind::sd: return "sd";
    case FeatureKind::variance: return "variance";
    case FeatureKind::covariance: return "covariance";
    case FeatureKind::correlation: return "correlation";
    case FeatureKind::cdf_at: return "cdf_at";
    case FeatureKind::median: return "median";
    case FeatureKind::quantile_at: return "quantile_at";
    case FeatureKind::subgroup_mean: return "subgroup_mean";
    case FeatureKind::subgroup_difference: return "subgroup_difference";
  }
  return "unknown";
}

std::string FeatureSpec::label(const Dataset& ds) const { return label(ds.outcome_names()); }

std::string FeatureSpec::label(const std::vector<std::string>& names) const {
  const auto name = [&](Eigen::Index i) {
    return i >= 0 && static_cast<std::size_t>(i) < names.size() ? names[static_cast<std::size_t>(i)]
                                                                 : "?" + std::to_string(i);
  };
  const std::string a = name(outcome_a);
  const std::string cond = condition_text(subgroup);
  switch (kind) {
    case FeatureKind::mean: return "mean(" + a + cond + ")";
    case FeatureKind::sd: return "sd(" + a + cond + ")";
    case FeatureKind::variance: return "var(" + a + cond + ")";
    case FeatureKind::covariance: return "cov(" + a + "," + name(outcome_b) + cond + ")";
    case FeatureKind::correlation: return "corr(" + a + "," + name(outcome_b) + cond + ")";
    case FeatureKind::cdf_at: return "cdf(" + a + cond + ")";
    case FeatureKind::median: return "median(" + a + cond + ")";
    case FeatureKind::quantile_at: return "quantile(" + a + cond + "," + format_number(quantile) + ")";
    case FeatureKind::subgroup_mean: return "mean(" + a + cond + ")";
    case FeatureKind::subgroup_difference:
      return "mean(" + a + cond + ")-mean(" + a + condition_text(contrast) + ")";
  }
  return "unknown";
}

std::vector<double> resolved_grid(const FeatureSpec& spec, const Dataset& ds) {
  if (!spec.grid.empty() || !grid_kind(spec.kind)) return spec.grid;
  const auto col = ds.outcomes().col(spec.outcome_a);
  std::set<double> values(col.data(), col.data() + col.size());
  return {values.begin(), values.end()};
}

void validate_spec(const FeatureSpec& spec, const Dataset& ds) {
  const auto check_outcome = [&](Eigen::Index i) {
    if (i < 0 || i >= ds.L()) {
      throw SpecError("outcome index " + std::to_string(i) + " out of range [0, " +
                      std::to_string(ds.L()) + ")");
    }
  };
  const auto check_group = [&](const std::optional<Subgroup>& g) {
    if (!g) return;
    const Eigen::VectorXd ind = ds.subgroup_indicator(g->covariate, g->value);
    if (ind.sum() <= 0.0) {
      throw SpecError("subgroup " + g->covariate + "=" + g->value + " has no subjects");
    }
  };
  check_outcome(spec.outcome_a);
  if (spec.kind == FeatureKind::covariance || spec.kind == FeatureKind::correlation) {
    check_outcome(spec.outcome_b);
  }
  if (spec.kind == FeatureKind::subgroup_mean && !spec.subgroup) {
    throw SpecError("subgroup_mean requires a subgroup");
  }
  if (spec.kind == FeatureKind::subgroup_difference && (!spec.subgroup || !spec.contrast)) {
    throw SpecError("subgroup_difference requires two subgroup categories");
  }
  check_group(spec.subgroup);
  check_group(spec.contrast);
  if (spec.kind == FeatureKind::quantile_at && !(spec.quantile > 0.0 && spec.quantile < 1.0)) {
    throw SpecError("quantile level must lie in (0, 1)");
  }
  if (spec.kind == FeatureKind::cdf_at && spec.grid.empty()) {
    throw SpecError("cdf_at requires an evaluation grid");
  }
  for (std::size_t m = 1; m < spec.grid.size(); ++m) {
    if (!(spec.grid[m] > spec.grid[m - 1])) throw SpecError("grid must be strictly increasing");
  }
}

Eigen::MatrixXd evaluate_phi(const FeatureSpec& spec, const Dataset& ds) {
  validate_spec(spec, ds);
  const auto ya = ds.outcomes().col(spec.outcome_a);
  if (spec.kind == FeatureKind::subgroup_difference) {
    const Eigen::VectorXd i1 = ds.subgroup_indicator(spec.subgroup->covariate, spec.subgroup->value);
    const Eigen::VectorXd i2 = ds.subgroup_indicator(spec.contrast->covariate, spec.contrast->value);
    Eigen::MatrixXd phi(4, ds.size());
    phi.row(0) = ya.cwiseProduct(i1).transpose();
    phi.row(1) = i1.transpose();
    phi.row(2) = ya.cwiseProduct(i2).transpose();
    phi.row(3) = i2.transpose();
    return phi;
  }
  FeatureSpec base = spec;
  if (base.kind == FeatureKind::subgroup_mean) base.kind = FeatureKind::mean;
  const Eigen::MatrixXd phi = base_phi(base, ds, resolved_grid(spec, ds));
  if (!spec.subgroup) return phi;
  const Eigen::VectorXd ind = ds.subgroup_indicator(spec.subgroup->covariate, spec.subgroup->value);
  Eigen::MatrixXd out(phi.rows() + 1, phi.cols());
  out.topRows(phi.rows()) = phi.array().rowwise() * ind.transpose().array();
  out.row(phi.rows()) = ind.transpose();
  return out;
}

Eigen::VectorXd weighted_lambda(const WeightSet& w, const Eigen::MatrixXd& phi) {
  if (phi.cols() != w.weights.size()) throw ShapeError("Phi matrix and weights disagree on N");
  return phi * w.weights / static_cast<double>(w.weights.size());
}

FunctionalEstimate estimate_feature(const FeatureSpec& spec, const WeightSet& w, const Dataset& ds) {
  if (w.weights.size() != ds.size()) throw ShapeError("weights and dataset disagree on N");
  const Eigen::MatrixXd phi = evaluate_phi(spec, ds);
  FunctionalEstimate est;
  est.lambda_hat = weighted_lambda(w, phi);
  est.feature = spec;
  est.weight_method = w.method_tag;
  const auto& t = est.lambda_hat;

  if (spec.kind == FeatureKind::subgroup_difference) {
    if (!(t(1) > 0.0) || !(t(3) > 0.0)) {
      throw SubgroupSupportError("subgroup difference has a subgroup with zero weighted mass");
    }
    est.values = Eigen::VectorXd::Constant(1, t(0) / t(1) - t(2) / t(3));
    return est;
  }

  FeatureSpec base = spec;
  if (base.kind == FeatureKind::subgroup_mean) base.kind = FeatureKind::mean;
  const auto grid = resolved_grid(spec, ds);
  if (spec.subgroup) {
    const Eigen::Index m = t.size() - 1;
    const double mass = t(m);
    if (!(mass > 0.0)) {
      throw SubgroupSupportError("subgroup " + spec.subgroup->covariate + "=" + spec.subgroup->value +
                                 " has zero weighted mass");
    }
    est.values = base_h(base, t.head(m) / mass, grid);
  } else {
    est.values = base_h(base, t, grid);
  }
  return est;
}

}  // namespace translate
