#include "translate/cohort_model.hpp"

#include <cmath>
#include <numbers>

#include "translate/errors.hpp"

namespace translate {

namespace {

constexpr int kModelFormatVersion = 1;

nlohmann::json matrix_to_json(const Eigen::MatrixXd& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    std::vector<double> row(static_cast<std::size_t>(m.cols()));
    for (Eigen::Index j = 0; j < m.cols(); ++j) row[static_cast<std::size_t>(j)] = m(i, j);
    rows.push_back(row);
  }
  return rows;
}

Eigen::MatrixXd matrix_from_json(const nlohmann::json& j) {
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = rows ? static_cast<Eigen::Index>(j.at(0).size()) : 0;
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) {
      m(r, c) = j.at(static_cast<std::size_t>(r)).at(static_cast<std::size_t>(c)).get<double>();
    }
  }
  return m;
}

nlohmann::json vector_to_json(const Eigen::VectorXd& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

Eigen::VectorXd vector_from_json(const nlohmann::json& j) {
  const auto values = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
}

void check_header(const nlohmann::json& j, const std::string& kind) {
  if (j.value("format", "") != "translate-cohort-model") {
    throw SchemaError("not a serialized cohort model");
  }
  if (j.value("version", 0) != kModelFormatVersion) {
    throw SchemaError("unsupported cohort model format version");
  }
  if (j.value("kind", "") != kind) throw SchemaError("cohort model kind mismatch");
}

FeatureSource parse_source(const std::string& s) {
  if (s == "covariates_and_outcomes") return FeatureSource::covariates_and_outcomes;
  if (s == "covariates_only") return FeatureSource::covariates_only;
  throw SchemaError("unknown feature source '" + s + "'");
}

FeatureMap parse_feature_map(const std::string& s) {
  if (s == "identity") return FeatureMap::identity;
  if (s == "quadratic") return FeatureMap::quadratic;
  throw SchemaError("unknown feature map '" + s + "'");
}

Eigen::MatrixXd quadratic_expand(const Eigen::MatrixXd& x) {
  const Eigen::Index q = x.cols();
  Eigen::MatrixXd out(x.rows(), q + q * (q + 1) / 2);
  out.leftCols(q) = x;
  Eigen::Index c = q;
  for (Eigen::Index a = 0; a < q; ++a) {
    for (Eigen::Index b = a; b < q; ++b) out.col(c++) = x.col(a).cwiseProduct(x.col(b));
  }
  return out;
}

std::vector<std::string> quadratic_names(const std::vector<std::string>& names) {
  std::vector<std::string> out = names;
  for (std::size_t a = 0; a < names.size(); ++a) {
    for (std::size_t b = a; b < names.size(); ++b) out.push_back(names[a] + "*" + names[b]);
  }
  return out;
}

// Row-wise log-sum-exp.
Eigen::VectorXd row_lse(const Eigen::MatrixXd& m) {
  const Eigen::VectorXd mx = m.rowwise().maxCoeff();
  return mx.array() + (m.colwise() - mx).array().exp().rowwise().sum().log();
}

struct FitState {
  Eigen::MatrixXd log_prob;  // N x (J+1)
  double objective = 0.0;
};

FitState evaluate(const Eigen::MatrixXd& design, std::span<const int> labels, const Eigen::MatrixXd& coef,
                  double ridge) {
  const Eigen::Index n = design.rows();
  const Eigen::Index k = coef.rows();
  Eigen::MatrixXd scores(n, k + 1);
  scores.col(0).setZero();
  scores.rightCols(k) = design * coef.transpose();
  FitState st;
  st.log_prob = scores.colwise() - row_lse(scores);
  double ll = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) ll += st.log_prob(i, labels[static_cast<std::size_t>(i)]);
  const double penalty = coef.rightCols(coef.cols() - 1).squaredNorm();
  st.objective = ll - 0.5 * ridge * penalty;
  return st;
}

}  // namespace

std::string to_string(ModelKind kind) {
  return kind == ModelKind::qda ? "qda" : "logistic";
}

std::string to_string(FeatureMap map) {
  return map == FeatureMap::identity ? "identity" : "quadratic";
}

std::string to_string(FeatureSource source) {
  return source == FeatureSource::covariates_only ? "covariates_only" : "covariates_and_outcomes";
}

ModelKind parse_model_kind(const std::string& text) {
  if (text == "qda") return ModelKind::qda;
  if (text == "logistic" || text == "multinomial-logistic") return ModelKind::multinomial_logistic;
  throw SchemaError("unknown model kind '" + text + "' (expected logistic or qda)");
}

Eigen::MatrixXd model_inputs(const Dataset& ds, FeatureSource source) {
  return source == FeatureSource::covariates_only ? ds.covariates() : ds.joint_features();
}

std::vector<std::string> model_input_names(const Dataset& ds, FeatureSource source) {
  auto names = ds.covariate_names();
  if (source == FeatureSource::covariates_and_outcomes) {
    names.insert(names.end(), ds.outcome_names().begin(), ds.outcome_names().end());
  }
  return names;
}

// ---------------------------------------------------------------------------
// Multinomial logistic

Eigen::MatrixXd MultinomialLogisticModel::expand(const Eigen::MatrixXd& inputs) const {
  if (inputs.cols() != input_dim_) {
    throw ShapeError("model expects " + std::to_string(input_dim_) + " input columns, got " +
                     std::to_string(inputs.cols()));
  }
  const Eigen::MatrixXd raw =
      feature_map_ == FeatureMap::quadratic ? quadratic_expand(inputs) : inputs;
  Eigen::MatrixXd design(raw.rows(), raw.cols() + 1);
  design.col(0).setOnes();
  design.rightCols(raw.cols()) =
      (raw.rowwise() - center_).array().rowwise() / scale_.array();
  return design;
}

Eigen::MatrixXd MultinomialLogisticModel::log_probabilities(const Eigen::MatrixXd& inputs) const {
  const Eigen::MatrixXd design = expand(inputs);
  Eigen::MatrixXd scores(design.rows(), coef_.rows() + 1);
  scores.col(0).setZero();
  scores.rightCols(coef_.rows()) = design * coef_.transpose();
  return scores.colwise() - row_lse(scores);
}

namespace {
// Maps standardized coefficients (intercept, slopes) to the original scale.
Eigen::MatrixXd destandardize_map(const Eigen::RowVectorXd& center, const Eigen::RowVectorXd& scale) {
  const Eigen::Index d = center.size() + 1;
  Eigen::MatrixXd t = Eigen::MatrixXd::Zero(d, d);
  t(0, 0) = 1.0;
  for (Eigen::Index j = 0; j < center.size(); ++j) {
    t(0, j + 1) = -center(j) / scale(j);
    t(j + 1, j + 1) = 1.0 / scale(j);
  }
  return t;
}
}  // namespace

Eigen::MatrixXd MultinomialLogisticModel::coefficients() const {
  const Eigen::MatrixXd t = destandardize_map(center_, scale_);
  return coef_ * t.transpose();
}

Eigen::MatrixXd MultinomialLogisticModel::standard_errors() const {
  const Eigen::MatrixXd t = destandardize_map(center_, scale_);
  const Eigen::Index d = coef_.cols();
  Eigen::MatrixXd se(coef_.rows(), d);
  for (Eigen::Index k = 0; k < coef_.rows(); ++k) {
    const Eigen::MatrixXd block = covariance_.block(k * d, k * d, d, d);
    se.row(k) = (t * block * t.transpose()).diagonal().cwiseMax(0.0).cwiseSqrt().transpose();
  }
  return se;
}

nlohmann::json MultinomialLogisticModel::to_json() const {
  return {{"format", "translate-cohort-model"},
          {"version", kModelFormatVersion},
          {"kind", kind_name()},
          {"source", to_string(source())},
          {"feature_map", to_string(feature_map_)},
          {"input_dim", input_dim_},
          {"feature_names", feature_names_},
          {"center", vector_to_json(center_.transpose())},
          {"scale", vector_to_json(scale_.transpose())},
          {"coefficients", matrix_to_json(coef_)},
          {"covariance", matrix_to_json(covariance_)},
          {"ridge", ridge_},
          {"converged", converged_},
          {"separation_warning", separation_warning_},
          {"iterations", iterations_},
          {"penalized_log_likelihood", penalized_ll_}};
}

MultinomialLogisticModel MultinomialLogisticModel::from_json(const nlohmann::json& j) {
  check_header(j, "multinomial-logistic");
  MultinomialLogisticModel m(parse_source(j.at("source").get<std::string>()));
  m.feature_map_ = parse_feature_map(j.at("feature_map").get<std::string>());
  m.input_dim_ = j.at("input_dim").get<Eigen::Index>();
  m.feature_names_ = j.at("feature_names").get<std::vector<std::string>>();
  m.center_ = vector_from_json(j.at("center")).transpose();
  m.scale_ = vector_from_json(j.at("scale")).transpose();
  m.coef_ = matrix_from_json(j.at("coefficients"));
  m.covariance_ = matrix_from_json(j.at("covariance"));
  m.ridge_ = j.at("ridge").get<double>();
  m.converged_ = j.at("converged").get<bool>();
  m.separation_warning_ = j.at("separation_warning").get<bool>();
  m.iterations_ = j.at("iterations").get<int>();
  m.penalized_ll_ = j.at("penalized_log_likelihood").get<double>();
  return m;
}

MultinomialLogisticModel fit_multinomial_logistic(const Eigen::MatrixXd& inputs,
                                                  std::span<const int> labels, int num_cohorts,
                                                  const LogisticOptions& options,
                                                  std::vector<std::string> input_names,
                                                  FeatureSource source) {
  if (options.ridge < 0.0) throw DomainError("ridge must be non-negative");
  if (options.tol <= 0.0 || options.max_iter < 1) throw DomainError("invalid tolerance or max_iter");
  const Eigen::Index n = inputs.rows();
  if (static_cast<std::size_t>(n) != labels.size()) throw ShapeError("labels/inputs length mismatch");
  if (num_cohorts < 2) throw DomainError("multinomial logistic needs at least two cohorts");
  if (input_names.empty()) {
    for (Eigen::Index j = 0; j < inputs.cols(); ++j) input_names.push_back("z" + std::to_string(j));
  }
  if (static_cast<Eigen::Index>(input_names.size()) != inputs.cols()) {
    throw ShapeError("input names do not match input width");
  }

  MultinomialLogisticModel model(source);
  model.feature_map_ = options.feature_map;
  model.input_dim_ = inputs.cols();
  model.feature_names_ =
      options.feature_map == FeatureMap::quadratic ? quadratic_names(input_names) : input_names;

  const Eigen::MatrixXd raw =
      options.feature_map == FeatureMap::quadratic ? quadratic_expand(inputs) : inputs;
  const Eigen::Index q = raw.cols();
  model.center_ = raw.colwise().mean();
  model.scale_ = ((raw.rowwise() - model.center_).array().square().colwise().sum() /
                  static_cast<double>(n))
                     .sqrt();
  std::vector<std::string> constant;
  for (Eigen::Index j = 0; j < q; ++j) {
    if (!(model.scale_(j) > 1e-12 * std::max(1.0, std::abs(model.center_(j))))) {
      constant.push_back(model.feature_names_[static_cast<std::size_t>(j)]);
    }
  }
  if (!constant.empty()) {
    std::string msg = "design is rank deficient; constant columns collinear with the intercept:";
    for (const auto& c : constant) msg += " " + c;
    throw RankDeficiencyError(msg, constant);
  }

  const Eigen::MatrixXd design = model.expand(inputs);
  const Eigen::Index d = design.cols();
  {
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
    qr.setThreshold(1e-10);
    if (qr.rank() < d) {
      std::vector<std::string> collinear;
      for (Eigen::Index r = qr.rank(); r < d; ++r) {
        const auto col = qr.colsPermutation().indices()(r);
        collinear.push_back(col == 0 ? std::string("(intercept)")
                                     : model.feature_names_[static_cast<std::size_t>(col - 1)]);
      }
      std::string msg = "design is rank deficient; collinear columns:";
      for (const auto& c : collinear) msg += " " + c;
      throw RankDeficiencyError(msg, collinear);
    }
  }

  const Eigen::Index k = num_cohorts - 1;
  const auto prev = cohort_prevalences(labels, num_cohorts);
  Eigen::MatrixXd onehot = Eigen::MatrixXd::Zero(n, k);
  for (Eigen::Index i = 0; i < n; ++i) {
    const int s = labels[static_cast<std::size_t>(i)];
    if (s > 0) onehot(i, s - 1) = 1.0;
  }

  double ridge = options.ridge;
  for (int attempt = 0; attempt < 2; ++attempt) {
    // Start from the intercept-only solution: eta_s = log(N_s / N_0).
    Eigen::MatrixXd coef = Eigen::MatrixXd::Zero(k, d);
    for (Eigen::Index s = 1; s <= k; ++s) coef(s - 1, 0) = std::log(prev.pi_hat(s) / prev.pi_hat(0));

    FitState st = evaluate(design, labels, coef, ridge);
    model.trace_.assign(1, st.objective);
    bool converged = false;
    bool diverging = false;
    int iter = 0;
    Eigen::MatrixXd hessian(k * d, k * d);
    Eigen::VectorXd penalty_diag = Eigen::VectorXd::Constant(d, ridge);
    penalty_diag(0) = 0.0;

    auto build_hessian = [&](const Eigen::MatrixXd& prob) {
      for (Eigen::Index a = 0; a < k; ++a) {
        for (Eigen::Index b = a; b < k; ++b) {
          Eigen::VectorXd w = -prob.col(a + 1).cwiseProduct(prob.col(b + 1));
          if (a == b) w += prob.col(a + 1);
          const Eigen::MatrixXd block =
              design.transpose() * (design.array().colwise() * w.array()).matrix();
          hessian.block(a * d, b * d, d, d) = block;
          if (a != b) hessian.block(b * d, a * d, d, d) = block.transpose();
        }
        hessian.block(a * d, a * d, d, d).diagonal() += penalty_diag;
      }
    };

    for (iter = 1; iter <= options.max_iter; ++iter) {
      const Eigen::MatrixXd prob = st.log_prob.array().exp();
      // Gradient, laid out as (class, feature) row-major.
      const Eigen::MatrixXd resid = onehot - prob.rightCols(k);
      Eigen::MatrixXd grad = resid.transpose() * design;  // k x d
      grad -= coef * penalty_diag.asDiagonal();
      build_hessian(prob);

      Eigen::VectorXd g(k * d);
      for (Eigen::Index a = 0; a < k; ++a) g.segment(a * d, d) = grad.row(a).transpose();
      Eigen::LDLT<Eigen::MatrixXd> ldlt(hessian);
      Eigen::VectorXd step = ldlt.solve(g);
      if (ldlt.info() != Eigen::Success || !step.allFinite()) {
        const double jitter = 1e-8 * std::max(1.0, hessian.diagonal().maxCoeff());
        Eigen::MatrixXd h = hessian;
        h.diagonal().array() += jitter;
        step = h.ldlt().solve(g);
      }
      Eigen::MatrixXd delta(k, d);
      for (Eigen::Index a = 0; a < k; ++a) delta.row(a) = step.segment(a * d, d).transpose();

      double t = 1.0;
      bool accepted = false;
      FitState trial;
      for (int h = 0; h <= options.max_halvings; ++h, t *= 0.5) {
        trial = evaluate(design, labels, coef + t * delta, ridge);
        if (std::isfinite(trial.objective) && trial.objective >= st.objective) {
          accepted = true;
          break;
        }
      }
      if (!accepted) {
        // No ascent direction left at working precision.
        converged = true;
        break;
      }
      coef += t * delta;
      const double change = std::abs(trial.objective - st.objective) / (std::abs(st.objective) + 1e-12);
      st = std::move(trial);
      model.trace_.push_back(st.objective);
      if (coef.rightCols(d - 1).cwiseAbs().maxCoeff() > options.separation_threshold) {
        diverging = true;
      }
      if (change < options.tol) {
        converged = true;
        break;
      }
      if (diverging && ridge < options.ridge_floor) break;
    }

    if (diverging) model.separation_warning_ = true;
    if (diverging && ridge < options.ridge_floor && attempt == 0) {
      ridge = options.ridge_floor;
      continue;
    }

    const Eigen::MatrixXd prob = st.log_prob.array().exp();
    build_hessian(prob);
    model.coef_ = coef;
    model.covariance_ = hessian.ldlt().solve(Eigen::MatrixXd::Identity(k * d, k * d));
    model.converged_ = converged;
    model.iterations_ = std::min(iter, options.max_iter);
    model.ridge_ = ridge;
    model.penalized_ll_ = st.objective;
    break;
  }
  return model;
}

MultinomialLogisticModel fit_multinomial_logistic(const Dataset& ds, const LogisticOptions& options,
                                                  FeatureSource source) {
  return fit_multinomial_logistic(model_inputs(ds, source), ds.labels(), ds.num_cohorts(), options,
                                  model_input_names(ds, source), source);
}

// ---------------------------------------------------------------------------
// QDA

void QdaModel::factorize() {
  chol_lower_.clear();
  log_dets_.clear();
  for (std::size_t s = 0; s < covariances_.size(); ++s) {
    Eigen::LLT<Eigen::MatrixXd> llt(covariances_[s]);
    if (llt.info() != Eigen::Success || !(llt.rcond() > 1e-12)) {
      throw SingularityError("within-cohort covariance of cohort " + std::to_string(s) +
                                 " is singular; add regularization",
                             static_cast<int>(s));
    }
    const Eigen::MatrixXd lower = llt.matrixL();
    log_dets_.push_back(2.0 * lower.diagonal().array().log().sum());
    chol_lower_.push_back(lower);
  }
}

Eigen::MatrixXd QdaModel::log_probabilities(const Eigen::MatrixXd& inputs) const {
  if (inputs.cols() != input_dim()) {
    throw ShapeError("model expects " + std::to_string(input_dim()) + " input columns, got " +
                     std::to_string(inputs.cols()));
  }
  const Eigen::Index n = inputs.rows();
  const auto cohorts = static_cast<Eigen::Index>(means_.size());
  const double log_2pi = std::log(2.0 * std::numbers::pi);
  Eigen::MatrixXd joint(n, cohorts);
  for (Eigen::Index s = 0; s < cohorts; ++s) {
    const auto us = static_cast<std::size_t>(s);
    Eigen::MatrixXd centered = (inputs.rowwise() - means_[us].transpose()).transpose();
    chol_lower_[us].triangularView<Eigen::Lower>().solveInPlace(centered);
    const Eigen::VectorXd maha = centered.colwise().squaredNorm().transpose();
    joint.col(s) = (log_priors_(s) - 0.5 * (static_cast<double>(input_dim()) * log_2pi + log_dets_[us])) -
                   0.5 * maha.array();
  }
  return joint.colwise() - row_lse(joint);
}

nlohmann::json QdaModel::to_json() const {
  nlohmann::json means = nlohmann::json::array();
  nlohmann::json covs = nlohmann::json::array();
  for (std::size_t s = 0; s < means_.size(); ++s) {
    means.push_back(vector_to_json(means_[s]));
    covs.push_back(matrix_to_json(covariances_[s]));
  }
  return {{"format", "translate-cohort-model"},
          {"version", kModelFormatVersion},
          {"kind", kind_name()},
          {"source", to_string(source())},
          {"log_priors", vector_to_json(log_priors_)},
          {"means", means},
          {"covariances", covs}};
}

QdaModel QdaModel::from_json(const nlohmann::json& j) {
  check_header(j, "qda");
  QdaModel m(parse_source(j.at("source").get<std::string>()));
  m.log_priors_ = vector_from_json(j.at("log_priors"));
  for (const auto& mu : j.at("means")) m.means_.push_back(vector_from_json(mu));
  for (const auto& c : j.at("covariances")) m.covariances_.push_back(matrix_from_json(c));
  m.factorize();
  return m;
}

QdaModel fit_qda(const Eigen::MatrixXd& inputs, std::span<const int> labels, int num_cohorts,
                 double reg, FeatureSource source) {
  if (reg < 0.0) throw DomainError("QDA regularization must be non-negative");
  if (static_cast<std::size_t>(inputs.rows()) != labels.size()) {
    throw ShapeError("labels/inputs length mismatch");
  }
  const auto prev = cohort_prevalences(labels, num_cohorts);
  const Eigen::Index dim = inputs.cols();
  QdaModel model(source);
  model.log_priors_ = prev.pi_hat.array().log();

  std::vector<Eigen::VectorXd> sums(static_cast<std::size_t>(num_cohorts), Eigen::VectorXd::Zero(dim));
  for (Eigen::Index i = 0; i < inputs.rows(); ++i) {
    sums[static_cast<std::size_t>(labels[static_cast<std::size_t>(i)])] += inputs.row(i).transpose();
  }
  std::vector<Eigen::MatrixXd> scatter(static_cast<std::size_t>(num_cohorts),
                                       Eigen::MatrixXd::Zero(dim, dim));
  for (int s = 0; s < num_cohorts; ++s) {
    const auto us = static_cast<std::size_t>(s);
    const auto ns = static_cast<Eigen::Index>(prev.counts[us]);
    if (ns <= dim) {
      throw InsufficientDataError("cohort " + std::to_string(s) + " has " + std::to_string(ns) +
                                      " subjects, QDA needs more than the input dimension " +
                                      std::to_string(dim),
                                  s);
    }
    model.means_.push_back(sums[us] / static_cast<double>(ns));
  }
  for (Eigen::Index i = 0; i < inputs.rows(); ++i) {
    const auto us = static_cast<std::size_t>(labels[static_cast<std::size_t>(i)]);
    const Eigen::VectorXd c = inputs.row(i).transpose() - model.means_[us];
    scatter[us].selfadjointView<Eigen::Lower>().rankUpdate(c);
  }
  for (int s = 0; s < num_cohorts; ++s) {
    const auto us = static_cast<std::size_t>(s);
    Eigen::MatrixXd cov = scatter[us].selfadjointView<Eigen::Lower>();
    cov /= static_cast<double>(prev.counts[us] - 1);
    cov.diagonal().array() += reg;
    model.covariances_.push_back(std::move(cov));
  }
  model.factorize();
  return model;
}

QdaModel fit_qda(const Dataset& ds, double reg, FeatureSource source) {
  return fit_qda(model_inputs(ds, source), ds.labels(), ds.num_cohorts(), reg, source);
}

std::unique_ptr<CohortProbabilityModel> model_from_json(const nlohmann::json& j) {
  const auto kind = j.value("kind", "");
  if (kind == "qda") return std::make_unique<QdaModel>(QdaModel::from_json(j));
  if (kind == "multinomial-logistic") {
    return std::make_unique<MultinomialLogisticModel>(MultinomialLogisticModel::from_json(j));
  }
  throw SchemaError("unknown cohort model kind '" + kind + "'");
}

nlohmann::json to_json(const ModelConfig& cfg) {
  nlohmann::json j{{"kind", to_string(cfg.kind)}, {"clip", cfg.clip}};
  if (cfg.kind == ModelKind::qda) {
    j["qda_reg"] = cfg.qda_reg;
  } else {
    j["ridge"] = cfg.logistic.ridge;
    j["tol"] = cfg.logistic.tol;
    j["max_iter"] = cfg.logistic.max_iter;
    j["feature_map"] = to_string(cfg.logistic.feature_map);
  }
  return j;
}

std::shared_ptr<const CohortProbabilityModel> fit_cohort_model(const Dataset& ds, const ModelConfig& cfg,
                                                               FeatureSource source) {
  if (cfg.kind == ModelKind::qda) return std::make_shared<QdaModel>(fit_qda(ds, cfg.qda_reg, source));
  return std::make_shared<MultinomialLogisticModel>(fit_multinomial_logistic(ds, cfg.logistic, source));
}

// ---------------------------------------------------------------------------

EtaMatrix predict_eta(const CohortProbabilityModel& model, const Eigen::MatrixXd& inputs, double clip) {
  const Eigen::MatrixXd log_prob = model.log_probabilities(inputs);
  const double lo = std::log(clip);
  const double hi = std::log1p(-clip);
  const Eigen::MatrixXd clipped = log_prob.cwiseMax(lo).cwiseMin(hi);
  EtaMatrix eta;
  eta.values = clipped.colwise() - clipped.col(0);
  eta.values.col(0).setZero();
  if (!eta.values.allFinite()) throw DomainError("non-finite log probability ratio");
  return eta;
}

EtaMatrix predict_eta(const CohortProbabilityModel& model, const Dataset& ds, double clip) {
  return predict_eta(model, model_inputs(ds, model.source()), clip);
}

}  // namespace translate
