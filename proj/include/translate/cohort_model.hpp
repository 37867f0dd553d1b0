#pragma once

#include <Eigen/Dense>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "translate/dataset.hpp"

namespace translate {

enum class ModelKind { multinomial_logistic, qda };
enum class FeatureMap { identity, quadratic };
// Which columns of the dataset the cohort model conditions on. The weighting
// methods use the full z = (x, y); covariate-shift importance weighting uses
// x only.
enum class FeatureSource { covariates_and_outcomes, covariates_only };

std::string to_string(ModelKind kind);
std::string to_string(FeatureMap map);
std::string to_string(FeatureSource source);
ModelKind parse_model_kind(const std::string& text);

Eigen::MatrixXd model_inputs(const Dataset& ds, FeatureSource source);
std::vector<std::string> model_input_names(const Dataset& ds, FeatureSource source);

// Fitted map z -> (theta_0(z), ..., theta_J(z)) = P(S = s | Z = z).
//
// This is the extension point for other cohort classifiers (tree ensembles
// and the like): anything that yields per-subject log class probabilities
// can drive the weighting pipeline.
class CohortProbabilityModel {
 public:
  virtual ~CohortProbabilityModel() = default;

  virtual std::string kind_name() const = 0;
  virtual int num_cohorts() const = 0;
  virtual Eigen::Index input_dim() const = 0;
  // N x (J+1) matrix of log theta_s(z_i); every row log-sum-exps to zero.
  virtual Eigen::MatrixXd log_probabilities(const Eigen::MatrixXd& inputs) const = 0;
  virtual nlohmann::json to_json() const = 0;

  FeatureSource source() const { return source_; }

 protected:
  explicit CohortProbabilityModel(FeatureSource source) : source_(source) {}

 private:
  FeatureSource source_;
};

struct LogisticOptions {
  double ridge = 1e-4;
  double tol = 1e-8;
  int max_iter = 100;
  FeatureMap feature_map = FeatureMap::identity;
  // Largest |coefficient| (standardized scale) before the fit is treated as
  // diverging under separation.
  double separation_threshold = 30.0;
  // Ridge applied on refit once separation is detected.
  double ridge_floor = 1e-2;
  int max_halvings = 10;
};

class MultinomialLogisticModel final : public CohortProbabilityModel {
 public:
  std::string kind_name() const override { return "multinomial-logistic"; }
  int num_cohorts() const override { return static_cast<int>(coef_.rows()) + 1; }
  Eigen::Index input_dim() const override { return input_dim_; }
  Eigen::MatrixXd log_probabilities(const Eigen::MatrixXd& inputs) const override;
  nlohmann::json to_json() const override;

  // J x (1 + q) coefficients on the original feature scale; row s-1 holds
  // (intercept, slopes) of eta_s. Feature q follows feature_names().
  Eigen::MatrixXd coefficients() const;
  // Standard errors matching coefficients(), from the inverse penalized
  // observed information at the optimum.
  Eigen::MatrixXd standard_errors() const;
  const std::vector<std::string>& feature_names() const { return feature_names_; }

  bool converged() const { return converged_; }
  bool separation_warning() const { return separation_warning_; }
  int iterations() const { return iterations_; }
  double ridge() const { return ridge_; }
  double penalized_log_likelihood() const { return penalized_ll_; }
  // Penalized log-likelihood after every accepted Newton step.
  const std::vector<double>& objective_trace() const { return trace_; }

  static MultinomialLogisticModel from_json(const nlohmann::json& j);

 private:
  friend MultinomialLogisticModel fit_multinomial_logistic(const Eigen::MatrixXd&, std::span<const int>,
                                                           int, const LogisticOptions&,
                                                           std::vector<std::string>, FeatureSource);
  explicit MultinomialLogisticModel(FeatureSource source) : CohortProbabilityModel(source) {}

  Eigen::MatrixXd expand(const Eigen::MatrixXd& inputs) const;

  FeatureMap feature_map_ = FeatureMap::identity;
  Eigen::Index input_dim_ = 0;
  std::vector<std::string> feature_names_;
  Eigen::RowVectorXd center_;
  Eigen::RowVectorXd scale_;
  Eigen::MatrixXd coef_;        // J x (1 + q), standardized features
  Eigen::MatrixXd covariance_;  // J(1+q) square, standardized; row-major (s, j) order
  bool converged_ = false;
  bool separation_warning_ = false;
  int iterations_ = 0;
  double ridge_ = 0.0;
  double penalized_ll_ = 0.0;
  std::vector<double> trace_;
};

// Ridge-penalized multinomial logistic regression with the anchor (label 0)
// as reference category, fitted by Newton/IRLS with step halving. Design is
// [1 | features]; features are standardized internally and the intercept is
// never penalized.
MultinomialLogisticModel fit_multinomial_logistic(const Eigen::MatrixXd& inputs,
                                                  std::span<const int> labels, int num_cohorts,
                                                  const LogisticOptions& options = {},
                                                  std::vector<std::string> input_names = {},
                                                  FeatureSource source = FeatureSource::covariates_and_outcomes);
MultinomialLogisticModel fit_multinomial_logistic(const Dataset& ds, const LogisticOptions& options = {},
                                                  FeatureSource source = FeatureSource::covariates_and_outcomes);

// Gaussian class-conditional model with per-cohort mean and covariance;
// posterior by Bayes rule with priors pi_hat.
class QdaModel final : public CohortProbabilityModel {
 public:
  std::string kind_name() const override { return "qda"; }
  int num_cohorts() const override { return static_cast<int>(means_.size()); }
  Eigen::Index input_dim() const override { return means_.empty() ? 0 : means_.front().size(); }
  Eigen::MatrixXd log_probabilities(const Eigen::MatrixXd& inputs) const override;
  nlohmann::json to_json() const override;

  const Eigen::VectorXd& log_priors() const { return log_priors_; }
  const std::vector<Eigen::VectorXd>& means() const { return means_; }
  const std::vector<Eigen::MatrixXd>& covariances() const { return covariances_; }

  static QdaModel from_json(const nlohmann::json& j);

 private:
  friend QdaModel fit_qda(const Eigen::MatrixXd&, std::span<const int>, int, double, FeatureSource);
  explicit QdaModel(FeatureSource source) : CohortProbabilityModel(source) {}
  void factorize();

  Eigen::VectorXd log_priors_;
  std::vector<Eigen::VectorXd> means_;
  std::vector<Eigen::MatrixXd> covariances_;
  std::vector<Eigen::MatrixXd> chol_lower_;
  std::vector<double> log_dets_;
};

QdaModel fit_qda(const Eigen::MatrixXd& inputs, std::span<const int> labels, int num_cohorts,
                 double reg = 0.0, FeatureSource source = FeatureSource::covariates_and_outcomes);
QdaModel fit_qda(const Dataset& ds, double reg = 0.0,
                 FeatureSource source = FeatureSource::covariates_and_outcomes);

std::unique_ptr<CohortProbabilityModel> model_from_json(const nlohmann::json& j);

inline constexpr double kProbabilityClip = 1e-6;

struct ModelConfig {
  ModelKind kind = ModelKind::multinomial_logistic;
  LogisticOptions logistic;
  double qda_reg = 0.0;
  double clip = kProbabilityClip;
};

nlohmann::json to_json(const ModelConfig& cfg);

std::shared_ptr<const CohortProbabilityModel> fit_cohort_model(const Dataset& ds, const ModelConfig& cfg,
                                                               FeatureSource source);

// eta_s(z_i) = log(theta_s(z_i) / theta_0(z_i)); column 0 is zero.
struct EtaMatrix {
  Eigen::MatrixXd values;
};

// Probabilities are clipped into [clip, 1 - clip] before taking logs.
EtaMatrix predict_eta(const CohortProbabilityModel& model, const Dataset& ds,
                      double clip = kProbabilityClip);
EtaMatrix predict_eta(const CohortProbabilityModel& model, const Eigen::MatrixXd& inputs,
                      double clip = kProbabilityClip);

}  // namespace translate
