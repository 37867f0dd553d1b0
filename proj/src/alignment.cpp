#include "translate/alignment.hpp"

#include <algorithm>
#include <cmath>

#include "translate/errors.hpp"

namespace translate {

AlignmentProportions AlignmentProportions::validated(Eigen::VectorXd gamma) {
  if (gamma.size() == 0) throw DomainError("alignment proportions are empty");
  if (!gamma.allFinite() || gamma.minCoeff() < 0.0) {
    throw DomainError("alignment proportions must be finite and non-negative");
  }
  if (std::abs(gamma.sum() - 1.0) > 1e-12) throw DomainError("alignment proportions must sum to 1");
  return AlignmentProportions{std::move(gamma)};
}

std::size_t EssReport::total() const {
  std::size_t n = 0;
  for (const auto c : cohort_counts) n += c;
  return n;
}

AlignmentFactors alignment_factors(const EtaMatrix& eta, std::span<const int> labels,
                                   const PrevalenceVector& prev) {
  const auto n = static_cast<Eigen::Index>(labels.size());
  if (eta.values.rows() != n || eta.values.cols() != prev.pi_hat.size()) {
    throw ShapeError("eta matrix does not match labels and prevalences");
  }
  AlignmentFactors out{Eigen::VectorXd(n)};
  for (Eigen::Index i = 0; i < n; ++i) {
    const int s = labels[static_cast<std::size_t>(i)];
    const double e = eta.values(i, s);
    if (!std::isfinite(e)) throw DomainError("non-finite eta for subject " + std::to_string(i));
    out.psi(i) = s == 0 ? 1.0 : (prev.pi_hat(s) / prev.pi_hat(0)) * std::exp(-e);
  }
  return out;
}

Eigen::VectorXd cohort_ess(const EtaMatrix& eta, std::span<const int> labels, const PrevalenceVector& prev) {
  const auto n = static_cast<Eigen::Index>(labels.size());
  const Eigen::Index cohorts = prev.pi_hat.size();
  if (eta.values.rows() != n || eta.values.cols() != cohorts) {
    throw ShapeError("eta matrix does not match labels and prevalences");
  }
  Eigen::VectorXd g = Eigen::VectorXd::Zero(cohorts);
  for (Eigen::Index i = 0; i < n; ++i) {
    const int s = labels[static_cast<std::size_t>(i)];
    g(s) += std::exp(-2.0 * eta.values(i, s));
  }
  g /= static_cast<double>(n);
  Eigen::VectorXd q(cohorts);
  const double pi0 = prev.pi_hat(0);
  for (Eigen::Index s = 0; s < cohorts; ++s) {
    if (!(g(s) > 0.0)) throw SupportError("cohort " + std::to_string(s) + " has no subjects");
    q(s) = static_cast<double>(n) * pi0 * pi0 / g(s);
  }
  // g_0 = N_0 / N exactly, so Q_0 = N_0 up to rounding; pin it.
  q(0) = static_cast<double>(prev.counts.front());
  return q;
}

AlignmentProportions translate_proportions(const Eigen::VectorXd& q) {
  if (q.size() == 0) throw DomainError("no cohort ESS values");
  if (!q.allFinite() || q.minCoeff() <= 0.0) throw DomainError("cohort ESS values must be positive");
  return AlignmentProportions{q / q.sum()};
}

Eigen::VectorXd alignment_weights(const AlignmentProportions& gamma, const PrevalenceVector& prev,
                                  const AlignmentFactors& psi, std::span<const int> labels) {
  const auto n = static_cast<Eigen::Index>(labels.size());
  if (psi.psi.size() != n || gamma.gamma.size() != prev.pi_hat.size()) {
    throw ShapeError("alignment weight inputs have mismatched dimensions");
  }
  Eigen::VectorXd raw(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const int s = labels[static_cast<std::size_t>(i)];
    raw(i) = gamma.gamma(s) / prev.pi_hat(s) * psi.psi(i);
  }
  return raw;
}

Eigen::VectorXd cap_weights(const Eigen::VectorXd& raw, double quantile) {
  if (!(quantile > 0.0 && quantile <= 1.0)) throw DomainError("cap quantile must be in (0, 1]");
  if (raw.size() == 0) return raw;
  std::vector<double> sorted(raw.data(), raw.data() + raw.size());
  std::sort(sorted.begin(), sorted.end());
  const double pos = quantile * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  const double cap = sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
  return raw.cwiseMin(cap);
}

WeightSet normalize_weights(const Eigen::VectorXd& raw, AlignmentProportions gamma, std::string method_tag) {
  if (raw.size() == 0) throw DegenerateWeightsError("no weights to normalize");
  if (!raw.allFinite() || raw.minCoeff() < 0.0) {
    throw DegenerateWeightsError("raw weights must be finite and non-negative");
  }
  const double total = raw.sum();
  if (!(total > 0.0)) throw DegenerateWeightsError("raw weights are all zero");
  return WeightSet{raw * (static_cast<double>(raw.size()) / total), std::move(gamma), std::move(method_tag)};
}

double composite_ess(const Eigen::VectorXd& weights) {
  const double n = static_cast<double>(weights.size());
  return n * n / weights.squaredNorm();
}

double composite_ess(const WeightSet& w) { return composite_ess(w.weights); }

double closed_form_composite_ess(const AlignmentProportions& gamma, const Eigen::VectorXd& q,
                                 const PrevalenceVector& prev,
                                 const std::optional<Eigen::VectorXd>& true_prevalence) {
  if (gamma.gamma.size() != q.size() || q.size() != prev.pi_hat.size()) {
    throw ShapeError("closed-form ESS inputs have mismatched dimensions");
  }
  if (true_prevalence && true_prevalence->size() != q.size()) {
    throw ShapeError("true prevalence vector has the wrong length");
  }
  double denom = 0.0;
  for (Eigen::Index s = 0; s < q.size(); ++s) {
    const double g = gamma.gamma(s);
    if (g == 0.0) continue;
    if (!(q(s) > 0.0)) {
      throw DomainError("cohort " + std::to_string(s) + " has zero ESS but positive proportion");
    }
    const double ratio = true_prevalence ? prev.pi_hat(s) / (*true_prevalence)(s) : 1.0;
    denom += g * g / q(s) * ratio;
  }
  return 1.0 / denom;
}

}  // namespace translate
