#include "translate/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "translate/errors.hpp"
#include "translate/parallel.hpp"
#include "translate/report.hpp"

namespace translate {

namespace {

struct Subject {
  std::array<double, 4> x;
  std::array<double, 2> y;
};

Subject draw_subject(const ScenarioConfig& cfg, int s, CounterRng& rng) {
  Subject out;
  out.x[0] = rng.bernoulli(cfg.x1_prob) ? 1.0 : 0.0;
  out.x[1] = rng.uniform(0.0, cfg.x2_upper);
  out.x[2] = rng.normal(0.0, cfg.normal_sd(cfg.x3_param));
  out.x[3] = rng.normal(cfg.phi_x * s, cfg.normal_sd(cfg.x4_param));
  const double m = out.x[0] + out.x[1] + out.x[2] + out.x[3] + cfg.phi_y * s;
  const double sigma = s == 0 ? cfg.sigma0 : cfg.sigma1;
  const double c = s == 0 ? -cfg.outcome_corr : cfg.outcome_corr;
  const double e1 = rng.normal();
  const double e2 = rng.normal();
  out.y[0] = m + sigma * e1;
  out.y[1] = m + sigma * (c * e1 + std::sqrt(1.0 - c * c) * e2);
  return out;
}

// Moments of sum(x) given S = 0.
double anchor_x_mean(const ScenarioConfig& cfg) { return cfg.x1_prob + cfg.x2_upper / 2.0; }

double anchor_x_variance(const ScenarioConfig& cfg) {
  const double sd3 = cfg.normal_sd(cfg.x3_param);
  const double sd4 = cfg.normal_sd(cfg.x4_param);
  return cfg.x1_prob * (1.0 - cfg.x1_prob) + cfg.x2_upper * cfg.x2_upper / 12.0 + sd3 * sd3 + sd4 * sd4;
}

std::uint64_t name_stream(const std::string& name) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const unsigned char c : name) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

double median_of(std::vector<double> v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

std::string to_string(VarianceConvention c) { return c == VarianceConvention::variance ? "variance" : "sd"; }

void ScenarioConfig::validate() const {
  if (N < 2) throw DomainError("scenario N must be at least 2");
  if (!(pi0 > 0.0 && pi0 < 1.0)) throw DomainError("pi0 must lie in (0, 1)");
  if (!(sigma0 > 0.0) || !(sigma1 > 0.0)) throw DomainError("outcome sigmas must be positive");
  if (!(x1_prob >= 0.0 && x1_prob <= 1.0)) throw DomainError("x1 probability must lie in [0, 1]");
  if (!(x2_upper > 0.0)) throw DomainError("x2 upper bound must be positive");
  if (!(x3_param >= 0.0) || !(x4_param >= 0.0)) throw DomainError("normal parameters must be non-negative");
  if (!(outcome_corr >= 0.0 && outcome_corr < 1.0)) throw DomainError("outcome correlation must lie in [0, 1)");
}

double ScenarioConfig::normal_sd(double param) const {
  return convention == VarianceConvention::variance ? std::sqrt(param) : param;
}

nlohmann::json ScenarioConfig::to_json() const {
  return nlohmann::json{{"name", name},          {"N", N},
                        {"pi0", pi0},            {"phi_x", phi_x},
                        {"phi_y", phi_y},        {"sigma0", sigma0},
                        {"sigma1", sigma1},      {"x1_prob", x1_prob},
                        {"x2_upper", x2_upper},  {"x3_param", x3_param},
                        {"x4_param", x4_param},  {"outcome_corr", outcome_corr},
                        {"variance_convention", to_string(convention)}};
}

ScenarioConfig ScenarioConfig::from_json(const nlohmann::json& j) {
  ScenarioConfig c;
  if (j.contains("base")) c = scenario_by_name(j.at("base").get<std::string>());
  c.name = j.value("name", c.name);
  c.N = j.value("N", c.N);
  c.pi0 = j.value("pi0", c.pi0);
  c.phi_x = j.value("phi_x", c.phi_x);
  c.phi_y = j.value("phi_y", c.phi_y);
  c.sigma0 = j.value("sigma0", c.sigma0);
  c.sigma1 = j.value("sigma1", c.sigma1);
  c.x1_prob = j.value("x1_prob", c.x1_prob);
  c.x2_upper = j.value("x2_upper", c.x2_upper);
  c.x3_param = j.value("x3_param", c.x3_param);
  c.x4_param = j.value("x4_param", c.x4_param);
  c.outcome_corr = j.value("outcome_corr", c.outcome_corr);
  const auto conv = j.value("variance_convention", to_string(c.convention));
  if (conv == "variance") {
    c.convention = VarianceConvention::variance;
  } else if (conv == "sd") {
    c.convention = VarianceConvention::sd;
  } else {
    throw SchemaError("variance_convention must be 'variance' or 'sd'");
  }
  c.validate();
  return c;
}

ScenarioConfig dissimilar_y() {
  ScenarioConfig c;
  c.name = "dissimilar_y";
  return c;
}

ScenarioConfig dissimilar_xy() {
  ScenarioConfig c;
  c.name = "dissimilar_xy";
  c.phi_x = 1.0;
  return c;
}

ScenarioConfig calibrated_y() {
  ScenarioConfig c;
  c.name = "calibrated_y";
  c.pi0 = 0.1;
  c.phi_y = 0.5;
  c.x2_upper = std::sqrt(0.1);
  return c;
}

ScenarioConfig calibrated_xy() {
  ScenarioConfig c = calibrated_y();
  c.name = "calibrated_xy";
  c.phi_x = 1.0;
  return c;
}

std::vector<std::string> scenario_names() { return {"dissimilar_y", "dissimilar_xy", "calibrated_y", "calibrated_xy"}; }

ScenarioConfig scenario_by_name(const std::string& name) {
  if (name == "dissimilar_y") return dissimilar_y();
  if (name == "dissimilar_xy") return dissimilar_xy();
  if (name == "calibrated_y") return calibrated_y();
  if (name == "calibrated_xy") return calibrated_xy();
  throw SpecError("unknown scenario '" + name + "'");
}

Dataset generate_dataset(const ScenarioConfig& cfg, CounterRng& rng) {
  cfg.validate();
  const Eigen::Index n = cfg.N;
  std::vector<int> labels(static_cast<std::size_t>(n));
  Eigen::MatrixXd x(n, 4);
  Eigen::MatrixXd y(n, 2);
  for (Eigen::Index i = 0; i < n; ++i) {
    const int s = rng.bernoulli(cfg.pi0) ? 0 : 1;
    const auto subject = draw_subject(cfg, s, rng);
    labels[static_cast<std::size_t>(i)] = s;
    for (int j = 0; j < 4; ++j) x(i, j) = subject.x[static_cast<std::size_t>(j)];
    y(i, 0) = subject.y[0];
    y(i, 1) = subject.y[1];
  }
  return Dataset(std::move(labels), std::move(x), std::move(y), {"x1", "x2", "x3", "x4"}, {"y1", "y2"},
                 {"0", "1"});
}

Dataset generate_dataset(const ScenarioConfig& cfg, std::uint64_t seed) {
  CounterRng rng(seed);
  return generate_dataset(cfg, rng);
}

std::vector<FeatureSpec> oracle_features() {
  FeatureSpec mean;
  mean.kind = FeatureKind::mean;
  mean.outcome_a = 0;
  FeatureSpec sd;
  sd.kind = FeatureKind::sd;
  sd.outcome_a = 1;
  FeatureSpec cov;
  cov.kind = FeatureKind::covariance;
  cov.outcome_a = 0;
  cov.outcome_b = 1;
  return {mean, sd, cov};
}

double closed_form_truth(const FeatureSpec& spec, const ScenarioConfig& cfg) {
  if (spec.subgroup || spec.contrast) throw SpecError("no closed-form truth for subgroup features");
  const auto in_range = [](Eigen::Index i) { return i == 0 || i == 1; };
  if (!in_range(spec.outcome_a)) throw SpecError("scenario outcomes are y1 and y2");
  const double vx = anchor_x_variance(cfg);
  const double var = vx + cfg.sigma0 * cfg.sigma0;
  const double cross = vx - cfg.outcome_corr * cfg.sigma0 * cfg.sigma0;
  switch (spec.kind) {
    case FeatureKind::mean:
      return anchor_x_mean(cfg);
    case FeatureKind::variance:
      return var;
    case FeatureKind::sd:
      return std::sqrt(var);
    case FeatureKind::covariance:
    case FeatureKind::correlation: {
      if (!in_range(spec.outcome_b)) throw SpecError("scenario outcomes are y1 and y2");
      const double c = spec.outcome_a == spec.outcome_b ? var : cross;
      return spec.kind == FeatureKind::covariance ? c : c / var;
    }
    default:
      throw SpecError("no closed-form truth for " + to_string(spec.kind));
  }
}

nlohmann::json OracleTruths::to_json() const {
  nlohmann::json rows = nlohmann::json::array();
  for (int k = 0; k < 3; ++k) {
    rows.push_back({{"quantity", names[static_cast<std::size_t>(k)]},
                    {"closed_form", closed_form(k)},
                    {"monte_carlo", monte_carlo(k)},
                    {"mc_se", mc_se(k)},
                    {"disagrees", disagrees[static_cast<std::size_t>(k)]}});
  }
  return nlohmann::json{{"mc_size", mc_size}, {"truths", rows}};
}

OracleTruths oracle_truths(const ScenarioConfig& cfg, std::size_t mc_size, std::uint64_t seed, unsigned threads) {
  cfg.validate();
  if (mc_size < 2) throw DomainError("Monte Carlo oracle needs at least two draws");
  OracleTruths out;
  const auto features = oracle_features();
  for (int k = 0; k < 3; ++k) out.closed_form(k) = closed_form_truth(features[static_cast<std::size_t>(k)], cfg);
  out.mc_size = mc_size;

  // Raw moments about the closed-form mean, accumulated per chunk and
  // combined in chunk order.
  const double pivot = out.closed_form(0);
  constexpr std::size_t kChunk = 1 << 18;
  const std::size_t chunks = (mc_size + kChunk - 1) / kChunk;
  struct Sums {
    long double d1 = 0, d1sq = 0, d2 = 0, d2sq = 0, d2cu = 0, d2qu = 0, p = 0, psq = 0;
  };
  std::vector<Sums> partial(chunks);
  parallel_for(chunks, threads, [&](std::size_t c) {
    CounterRng rng(seed, 0x6f7261636c65ULL, c);
    const std::size_t lo = c * kChunk;
    const std::size_t hi = std::min(mc_size, lo + kChunk);
    Sums s;
    for (std::size_t i = lo; i < hi; ++i) {
      const auto subject = draw_subject(cfg, 0, rng);
      const double a = subject.y[0] - pivot;
      const double b = subject.y[1] - pivot;
      const double b2 = b * b;
      s.d1 += a;
      s.d1sq += a * a;
      s.d2 += b;
      s.d2sq += b2;
      s.d2cu += b2 * b;
      s.d2qu += b2 * b2;
      s.p += a * b;
      s.psq += a * a * b2;
    }
    partial[c] = s;
  });
  Sums t;
  for (const auto& s : partial) {
    t.d1 += s.d1;
    t.d1sq += s.d1sq;
    t.d2 += s.d2;
    t.d2sq += s.d2sq;
    t.d2cu += s.d2cu;
    t.d2qu += s.d2qu;
    t.p += s.p;
    t.psq += s.psq;
  }
  const long double n = static_cast<long double>(mc_size);
  const double m1 = static_cast<double>(t.d1 / n);
  const double var1 = static_cast<double>(t.d1sq / n) - m1 * m1;
  const double m2 = static_cast<double>(t.d2 / n);
  const double e2 = static_cast<double>(t.d2sq / n);
  const double var2 = e2 - m2 * m2;
  const double m4 = static_cast<double>(t.d2qu / n) - 4.0 * m2 * static_cast<double>(t.d2cu / n) +
                    6.0 * m2 * m2 * e2 - 3.0 * m2 * m2 * m2 * m2;
  const double cov = static_cast<double>(t.p / n) - m1 * m2;
  const double prod_var = static_cast<double>(t.psq / n) - static_cast<double>(t.p / n) * static_cast<double>(t.p / n);
  const double dn = static_cast<double>(mc_size);

  out.monte_carlo(0) = pivot + m1;
  out.monte_carlo(1) = std::sqrt(var2);
  out.monte_carlo(2) = cov;
  out.mc_se(0) = std::sqrt(var1 / dn);
  // Delta method: Var(s^2) ~ (mu4 - sigma^4) / n and sd = sqrt(s^2).
  out.mc_se(1) = std::sqrt(std::max(0.0, m4 - var2 * var2) / dn) / (2.0 * out.monte_carlo(1));
  out.mc_se(2) = std::sqrt(std::max(0.0, prod_var) / dn);
  for (int k = 0; k < 3; ++k) {
    out.disagrees[static_cast<std::size_t>(k)] = std::abs(out.closed_form(k) - out.monte_carlo(k)) > 5.0 * out.mc_se(k);
  }
  return out;
}

std::vector<WeightingConfig> default_study_methods(ModelKind kind) {
  std::vector<WeightingConfig> out;
  for (const auto m : {Method::naive, Method::anchor_only, Method::importance, Method::translate}) {
    WeightingConfig w;
    w.method = m;
    w.model.kind = kind;
    out.push_back(w);
  }
  return out;
}

nlohmann::json StudyConfig::to_json() const {
  nlohmann::json sc = nlohmann::json::array();
  for (const auto& s : scenarios) sc.push_back(s.to_json());
  nlohmann::json ms = nlohmann::json::array();
  for (const auto& m : methods) ms.push_back(translate::to_json(m));
  nlohmann::json fs = nlohmann::json::array();
  for (const auto& f : features) fs.push_back(f.label(std::vector<std::string>{"y1", "y2"}));
  return nlohmann::json{{"scenarios", sc}, {"R", R},       {"methods", ms},
                        {"features", fs},  {"seed", seed}, {"max_failure_fraction", max_failure_fraction}};
}

const CellSummary& StudyResult::cell(const std::string& scenario, const std::string& method,
                                     const std::string& feature) const {
  for (const auto& c : cells) {
    if (c.scenario == scenario && c.method == method && c.feature == feature) return c;
  }
  throw SpecError("no study cell " + scenario + "/" + method + "/" + feature);
}

const EssSummary& StudyResult::ess_for(const std::string& scenario, const std::string& method) const {
  for (const auto& e : ess) {
    if (e.scenario == scenario && e.method == method) return e;
  }
  throw SpecError("no ESS summary " + scenario + "/" + method);
}

StudyResult run_study(const StudyConfig& cfg) {
  if (cfg.R < 2) throw DomainError("a study needs R >= 2");
  if (cfg.scenarios.empty() || cfg.methods.empty() || cfg.features.empty()) {
    throw SpecError("a study needs scenarios, methods and features");
  }
  StudyResult res;
  res.config = cfg;
  const std::vector<std::string> outcome_names{"y1", "y2"};
  for (const auto& f : cfg.features) res.feature_labels.push_back(f.label(outcome_names));
  for (const auto& m : cfg.methods) res.method_tags.push_back(to_string(m.method));
  const auto nm = static_cast<Eigen::Index>(cfg.methods.size());
  const auto nf = static_cast<Eigen::Index>(cfg.features.size());
  const auto R = static_cast<Eigen::Index>(cfg.R);

  for (const auto& sc : cfg.scenarios) {
    sc.validate();
    std::vector<double> truth;
    for (const auto& f : cfg.features) truth.push_back(closed_form_truth(f, sc));

    ScenarioReplicates rep;
    rep.scenario = sc.name;
    rep.estimates.assign(cfg.methods.size(), Eigen::MatrixXd::Zero(R, nf));
    rep.ess = Eigen::MatrixXd::Zero(R, nm);
    rep.sum_q = Eigen::MatrixXd::Zero(R, nm);
    rep.anchor_count = Eigen::VectorXd::Zero(R);
    std::vector<std::string> errors(cfg.R);
    const std::uint64_t stream = name_stream(sc.name);

    parallel_for(cfg.R, cfg.threads, [&](std::size_t r) {
      const auto ri = static_cast<Eigen::Index>(r);
      try {
        CounterRng rng(cfg.seed, stream, r);
        const Dataset ds = generate_dataset(sc, rng);
        rep.anchor_count(ri) = static_cast<double>(ds.anchor_count());
        for (Eigen::Index m = 0; m < nm; ++m) {
          const auto w = compute_weights(ds, cfg.methods[static_cast<std::size_t>(m)]);
          rep.ess(ri, m) = w.ess.composite_ess_empirical;
          rep.sum_q(ri, m) = w.ess.cohort_ess.sum();
          for (Eigen::Index f = 0; f < nf; ++f) {
            rep.estimates[static_cast<std::size_t>(m)](ri, f) =
                estimate_feature(cfg.features[static_cast<std::size_t>(f)], w.weights, ds).value();
          }
        }
      } catch (const Error& e) {
        errors[r] = e.what();
      }
    });

    rep.ok.assign(cfg.R, true);
    for (std::size_t r = 0; r < cfg.R; ++r) {
      if (errors[r].empty()) continue;
      rep.ok[r] = false;
      ++rep.failures;
      if (rep.failure_messages.size() < 5) rep.failure_messages.push_back("replicate " + std::to_string(r) + ": " + errors[r]);
    }
    if (static_cast<double>(rep.failures) > cfg.max_failure_fraction * static_cast<double>(cfg.R)) {
      std::string msg = "scenario " + sc.name + ": " + std::to_string(rep.failures) + " of " +
                        std::to_string(cfg.R) + " replicates failed";
      if (!rep.failure_messages.empty()) msg += " (" + rep.failure_messages.front() + ")";
      throw StudyError(msg);
    }
    const std::size_t used = cfg.R - rep.failures;
    if (used < 2) throw StudyError("scenario " + sc.name + ": fewer than two usable replicates");
    const double du = static_cast<double>(used);

    for (Eigen::Index m = 0; m < nm; ++m) {
      for (Eigen::Index f = 0; f < nf; ++f) {
        CellSummary c;
        c.scenario = sc.name;
        c.method = res.method_tags[static_cast<std::size_t>(m)];
        c.feature = res.feature_labels[static_cast<std::size_t>(f)];
        c.truth = truth[static_cast<std::size_t>(f)];
        c.replicates = used;
        double s_est = 0, s_err = 0, s_abs = 0, s_abs2 = 0, s_sq = 0, s_sq2 = 0;
        for (Eigen::Index r = 0; r < R; ++r) {
          if (!rep.ok[static_cast<std::size_t>(r)]) continue;
          const double est = rep.estimates[static_cast<std::size_t>(m)](r, f);
          const double err = est - c.truth;
          s_est += est;
          s_err += err;
          s_abs += std::abs(err);
          s_abs2 += err * err;
          s_sq += err * err;
          s_sq2 += err * err * err * err;
        }
        c.mean_estimate = s_est / du;
        c.bias = s_err / du;
        c.abs_bias = s_abs / du;
        c.abs_bias_se = std::sqrt(std::max(0.0, s_abs2 / du - c.abs_bias * c.abs_bias) / (du - 1.0));
        const double mse = s_sq / du;
        c.rmse = std::sqrt(mse);
        const double mse_se = std::sqrt(std::max(0.0, s_sq2 / du - mse * mse) / (du - 1.0));
        c.rmse_se = c.rmse > 0.0 ? mse_se / (2.0 * c.rmse) : 0.0;
        res.cells.push_back(c);
      }

      EssSummary e;
      e.scenario = sc.name;
      e.method = res.method_tags[static_cast<std::size_t>(m)];
      std::vector<double> ess_values, sum_q, additivity;
      double anchor_sum = 0.0;
      const double threshold = static_cast<double>(sc.N) * sc.pi0;
      for (Eigen::Index r = 0; r < R; ++r) {
        if (!rep.ok[static_cast<std::size_t>(r)]) continue;
        const double v = rep.ess(r, m);
        const double q = rep.sum_q(r, m);
        ess_values.push_back(v);
        sum_q.push_back(q);
        additivity.push_back(std::abs(v - q) / q);
        anchor_sum += rep.anchor_count(r);
        if (v > threshold) e.frac_above_npi0 += 1.0;
        if (v < threshold) e.frac_below_npi0 += 1.0;
      }
      e.frac_above_npi0 /= du;
      e.frac_below_npi0 /= du;
      e.mean = std::accumulate(ess_values.begin(), ess_values.end(), 0.0) / du;
      e.min = *std::min_element(ess_values.begin(), ess_values.end());
      e.max = *std::max_element(ess_values.begin(), ess_values.end());
      e.median = median_of(ess_values);
      e.sum_q_median = median_of(sum_q);
      e.additivity_median = median_of(additivity);
      e.anchor_count_mean = anchor_sum / du;
      res.ess.push_back(e);
    }
    res.truths.push_back(std::move(truth));
    res.replicates.push_back(std::move(rep));
  }
  return res;
}

std::string render_study_table(const StudyResult& r, char delimiter, int precision) {
  std::ostringstream os;
  std::vector<std::string> header{"scenario", "panel", "feature"};
  for (const auto& m : r.method_tags) header.push_back(m);
  os << delimited_row(header, delimiter) << '\n';
  for (const auto& sc : r.config.scenarios) {
    for (const std::string panel : {"abs_bias", "rmse"}) {
      for (const auto& f : r.feature_labels) {
        std::vector<std::string> row{sc.name, panel, f};
        for (const auto& m : r.method_tags) {
          const auto& c = r.cell(sc.name, m, f);
          row.push_back(format_number(panel == "abs_bias" ? c.abs_bias : c.rmse, precision));
        }
        os << delimited_row(row, delimiter) << '\n';
      }
    }
    std::vector<std::string> row{sc.name, "ess_median", "composite_ess"};
    for (const auto& m : r.method_tags) row.push_back(format_number(r.ess_for(sc.name, m).median, precision));
    os << delimited_row(row, delimiter) << '\n';
  }
  return os.str();
}

nlohmann::json to_json(const StudyResult& r) {
  nlohmann::json cells = nlohmann::json::array();
  for (const auto& c : r.cells) {
    cells.push_back({{"scenario", c.scenario},
                     {"method", c.method},
                     {"feature", c.feature},
                     {"truth", c.truth},
                     {"mean_estimate", c.mean_estimate},
                     {"bias", c.bias},
                     {"abs_bias", c.abs_bias},
                     {"abs_bias_se", c.abs_bias_se},
                     {"rmse", c.rmse},
                     {"rmse_se", c.rmse_se},
                     {"replicates", c.replicates}});
  }
  nlohmann::json ess = nlohmann::json::array();
  for (const auto& e : r.ess) {
    ess.push_back({{"scenario", e.scenario},
                   {"method", e.method},
                   {"mean", e.mean},
                   {"median", e.median},
                   {"min", e.min},
                   {"max", e.max},
                   {"frac_above_npi0", e.frac_above_npi0},
                   {"frac_below_npi0", e.frac_below_npi0},
                   {"sum_q_median", e.sum_q_median},
                   {"additivity_median", e.additivity_median},
                   {"anchor_count_mean", e.anchor_count_mean}});
  }
  nlohmann::json failures = nlohmann::json::object();
  for (const auto& rep : r.replicates) {
    failures[rep.scenario] = {{"count", rep.failures}, {"messages", rep.failure_messages}};
  }
  return nlohmann::json{{"config", r.config.to_json()}, {"cells", cells}, {"ess", ess}, {"failures", failures}};
}

}  // namespace translate
