#include "cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <memory>
#include <sstream>

#include <CLI11.hpp>

#include "translate/alignment.hpp"
#include "translate/errors.hpp"
#include "translate/parallel.hpp"
#include "translate/pipeline.hpp"
#include "translate/report.hpp"
#include "translate/resampling.hpp"
#include "translate/simulation.hpp"

namespace translate::cli {

namespace fs = std::filesystem;

namespace {

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(s);
  while (std::getline(is, cur, sep)) out.push_back(cur);
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

char delimiter_char(const std::string& d) {
  if (d == "," || d == "comma") return ',';
  if (d == "\\t" || d == "tab" || d == "\t") return '\t';
  if (d == ";") return ';';
  if (d == "|") return '|';
  throw SpecError("unsupported delimiter '" + d + "'");
}

// Writes every output to a temporary sibling and renames on commit; anything
// not committed is deleted.
class OutputSet {
 public:
  ~OutputSet() {
    std::error_code ec;
    for (const auto& [tmp, final_path] : files_) fs::remove(tmp, ec);
    if (!committed_) {
      for (const auto& p : renamed_) fs::remove(p, ec);
    }
  }

  std::ofstream& open(const fs::path& final_path) {
    const fs::path tmp = final_path.string() + ".tmp";
    if (final_path.has_parent_path()) fs::create_directories(final_path.parent_path());
    streams_.push_back(std::make_unique<std::ofstream>(tmp, std::ios::binary));
    if (!*streams_.back()) throw SchemaError("cannot write " + final_path.string());
    files_.emplace_back(tmp, final_path);
    return *streams_.back();
  }

  void commit() {
    for (auto& s : streams_) {
      s->close();
      if (!*s) throw SchemaError("failed writing output file");
    }
    for (const auto& [tmp, final_path] : files_) {
      fs::rename(tmp, final_path);
      renamed_.push_back(final_path);
    }
    files_.clear();
    committed_ = true;
  }

  std::vector<std::string> paths() const {
    std::vector<std::string> out;
    for (const auto& [tmp, final_path] : files_) out.push_back(final_path.string());
    return out;
  }

 private:
  std::vector<std::unique_ptr<std::ofstream>> streams_;
  std::vector<std::pair<fs::path, fs::path>> files_;
  std::vector<fs::path> renamed_;
  bool committed_ = false;
};

std::string header_line(const nlohmann::json& config) {
  const std::string text = config.dump();
  return "# config_hash=" + config_hash(text) + " config=" + text;
}

std::vector<std::string> header_columns(const std::string& path, char delimiter) {
  std::ifstream in(path);
  if (!in) throw SchemaError("cannot open input file " + path);
  std::string line;
  std::getline(in, line);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (delimiter == '\0') delimiter = line.find('\t') != std::string::npos ? '\t' : ',';
  auto cols = split(line, delimiter);
  for (auto& c : cols) {
    if (c.size() >= 2 && c.front() == '"' && c.back() == '"') c = c.substr(1, c.size() - 2);
  }
  return cols;
}

struct Loaded {
  Dataset ds;
  LoadReport report;
};

Loaded load_input(const RunConfig& cfg) {
  if (cfg.inputs.empty()) throw SchemaError("no --input file given");
  if (cfg.outcomes.empty()) throw SchemaError("no --outcomes given");
  Schema schema;
  schema.label_column = cfg.label_col;
  schema.anchor_label = cfg.anchor;
  schema.outcomes = cfg.outcomes;
  schema.categorical = cfg.categorical;
  schema.delimiter = cfg.delimiter == "auto" ? '\0' : delimiter_char(cfg.delimiter);
  if (cfg.missing == "drop") {
    schema.missing = MissingPolicy::drop;
  } else if (cfg.missing == "fail") {
    schema.missing = MissingPolicy::fail;
  } else {
    throw SpecError("--missing must be drop or fail");
  }
  schema.covariates = cfg.covariates;
  if (schema.covariates.empty()) {
    // Every column that is neither the label nor an outcome.
    for (const auto& c : header_columns(cfg.inputs.front(), schema.delimiter)) {
      if (c == cfg.label_col) continue;
      if (std::find(cfg.outcomes.begin(), cfg.outcomes.end(), c) != cfg.outcomes.end()) continue;
      schema.covariates.push_back(c);
    }
  }
  std::vector<fs::path> paths(cfg.inputs.begin(), cfg.inputs.end());
  auto res = load_dataset(paths, schema);
  return {std::move(res.dataset), res.report};
}

ModelConfig model_config(const RunConfig& cfg) {
  ModelConfig m;
  m.kind = parse_model_kind(cfg.model);
  return m;
}

WeightingConfig weighting_config(const RunConfig& cfg, const std::string& method) {
  WeightingConfig w;
  w.method = parse_method(method);
  w.model = model_config(cfg);
  w.weight_cap = cfg.weight_cap;
  return w;
}

Subgroup parse_subgroup(const std::string& text) {
  const auto eq = text.find('=');
  if (eq == std::string::npos || eq == 0) throw SpecError("subgroup '" + text + "' must look like covariate=level");
  return Subgroup{text.substr(0, eq), text.substr(eq + 1)};
}

double parse_double(const std::string& s, const std::string& what) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw SpecError("cannot read " + what + " from '" + s + "'");
  }
}

std::string fmt(double v, int precision) { return format_number(v, precision); }

struct EstimateRow {
  std::string kind;
  BootstrapResult result;
  bool has_bootstrap = true;
};

}  // namespace

nlohmann::json RunConfig::resolved() const {
  nlohmann::json j{{"command", command},
                   {"input", inputs},
                   {"label_col", label_col},
                   {"anchor", anchor},
                   {"covariates", covariates},
                   {"outcomes", outcomes},
                   {"categorical", categorical},
                   {"missing", missing},
                   {"delimiter", delimiter},
                   {"method", methods},
                   {"model", model},
                   {"seed", seed},
                   {"precision", precision},
                   {"out", out}};
  j["weight_cap"] = weight_cap ? nlohmann::json(*weight_cap) : nlohmann::json(nullptr);
  if (command == "estimate") {
    j["bootstrap"] = bootstrap;
    j["alpha"] = alpha;
    j["stratified"] = stratified;
    j["refit"] = refit;
    j["feature"] = features;
    j["by"] = by;
    j["pairwise_corr"] = pairwise_corr;
  }
  if (command == "simulate") {
    for (const auto* key : {"input", "label_col", "anchor", "covariates", "outcomes", "categorical", "missing",
                            "weight_cap"}) {
      j.erase(key);
    }
    j["scenarios"] = scenarios;
    j["scenario_overrides"] = scenario_overrides;
    j["R"] = R;
    j["N"] = N ? nlohmann::json(*N) : nlohmann::json(nullptr);
    j["mc_size"] = mc_size;
  }
  return j;
}

FeatureSpec parse_feature(const std::string& text, const Dataset& ds) {
  auto parts = split(text, '@');
  const auto head = split(parts.front(), ':');
  if (head.size() < 2) throw SpecError("feature '" + text + "' must look like kind:outcome");
  const std::string& kind = head[0];
  FeatureSpec f;
  f.outcome_a = ds.outcome_index(head[1]);
  const auto need_b = [&] {
    if (head.size() < 3) throw SpecError("feature '" + text + "' needs a second outcome");
    f.outcome_b = ds.outcome_index(head[2]);
  };
  if (kind == "mean") {
    f.kind = FeatureKind::mean;
  } else if (kind == "sd") {
    f.kind = FeatureKind::sd;
  } else if (kind == "var" || kind == "variance") {
    f.kind = FeatureKind::variance;
  } else if (kind == "cov" || kind == "covariance") {
    f.kind = FeatureKind::covariance;
    need_b();
  } else if (kind == "corr" || kind == "correlation") {
    f.kind = FeatureKind::correlation;
    need_b();
  } else if (kind == "median") {
    f.kind = FeatureKind::median;
  } else if (kind == "quantile") {
    f.kind = FeatureKind::quantile_at;
    if (head.size() < 3) throw SpecError("quantile feature needs a level, e.g. quantile:y1:0.25");
    f.quantile = parse_double(head[2], "quantile level");
  } else if (kind == "cdf") {
    f.kind = FeatureKind::cdf_at;
    if (head.size() < 3) throw SpecError("cdf feature needs grid points, e.g. cdf:y1:0;1;2");
    for (const auto& g : split(head[2], ';')) f.grid.push_back(parse_double(g, "grid point"));
  } else if (kind == "diff") {
    f.kind = FeatureKind::subgroup_difference;
    if (parts.size() != 3) throw SpecError("diff feature needs two subgroups, e.g. diff:y1@sex=F@sex=M");
  } else {
    throw SpecError("unknown feature kind '" + kind + "'");
  }
  if (parts.size() > 3) throw SpecError("feature '" + text + "' has too many subgroups");
  if (parts.size() >= 2) f.subgroup = parse_subgroup(parts[1]);
  if (parts.size() == 3) {
    if (f.kind != FeatureKind::subgroup_difference) throw SpecError("only diff features take two subgroups");
    f.contrast = parse_subgroup(parts[2]);
  }
  if (f.kind == FeatureKind::mean && f.subgroup) f.kind = FeatureKind::subgroup_mean;
  validate_spec(f, ds);
  return f;
}

namespace {

int cmd_weights(const RunConfig& cfg, std::ostream& out) {
  if (cfg.methods.size() != 1) throw SpecError("weights takes exactly one --method");
  const auto loaded = load_input(cfg);
  const auto& ds = loaded.ds;
  const auto result = compute_weights(ds, weighting_config(cfg, cfg.methods.front()));
  const nlohmann::json config = cfg.resolved();

  OutputSet files;
  auto& w = files.open(cfg.out + ".weights.csv");
  w << header_line(config) << '\n' << "index,label,weight\n";
  const auto labels = ds.labels();
  for (Eigen::Index i = 0; i < ds.size(); ++i) {
    w << i << ',' << ds.cohort_names()[static_cast<std::size_t>(labels[static_cast<std::size_t>(i)])] << ','
      << format_number(result.weights.weights(i), 17) << '\n';
  }
  auto& e = files.open(cfg.out + ".ess.json");
  nlohmann::json report{{"config", config},
                        {"config_hash", config_hash(config.dump())},
                        {"dataset", dataset_summary(ds)},
                        {"rows_read", loaded.report.rows_read},
                        {"rows_dropped", loaded.report.rows_dropped},
                        {"ess", to_json(result.ess)}};
  if (result.model) report["model"] = result.model->to_json();
  e << report.dump(2) << '\n';
  const auto written = files.paths();
  files.commit();

  std::vector<std::vector<std::string>> rows{{"cohort", "N_s", "Q_s", "gamma_s"}};
  for (std::size_t s = 0; s < result.ess.cohort_counts.size(); ++s) {
    const auto i = static_cast<Eigen::Index>(s);
    rows.push_back({result.ess.cohort_names[s], std::to_string(result.ess.cohort_counts[s]),
                    fmt(result.ess.cohort_ess(i), cfg.precision), fmt(result.ess.gamma.gamma(i), cfg.precision)});
  }
  out << "method: " << result.weights.method_tag << "  seed: " << cfg.seed << '\n';
  out << aligned_table(rows);
  const double n = static_cast<double>(ds.size());
  out << "composite ESS: " << fmt(result.ess.composite_ess_empirical, cfg.precision) << " ("
      << fmt(100.0 * result.ess.composite_ess_empirical / n, 3) << "% of N)  closed form: "
      << fmt(result.ess.composite_ess_closed_form, cfg.precision) << '\n';
  for (const auto& msg : result.ess.warnings) out << "warning: " << msg << '\n';
  for (const auto& p : written) out << "wrote " << p << '\n';
  return 0;
}

int cmd_estimate(const RunConfig& cfg, std::ostream& out) {
  const auto loaded = load_input(cfg);
  const auto& ds = loaded.ds;

  std::vector<FeatureSpec> features;
  for (const auto& text : cfg.features) features.push_back(parse_feature(text, ds));
  // Groups of subgroup quantities to contrast, as (feature index, level).
  std::vector<std::vector<std::size_t>> contrast_groups;
  std::vector<std::string> levels;
  if (!cfg.by.empty()) {
    levels = ds.subgroup_levels(cfg.by);
    for (Eigen::Index l = 0; l < ds.L(); ++l) {
      FeatureSpec overall;
      overall.kind = FeatureKind::mean;
      overall.outcome_a = l;
      features.push_back(overall);
      std::vector<std::size_t> group;
      for (const auto& level : levels) {
        FeatureSpec f = overall;
        f.kind = FeatureKind::subgroup_mean;
        f.subgroup = Subgroup{cfg.by, level};
        validate_spec(f, ds);
        group.push_back(features.size());
        features.push_back(f);
      }
      contrast_groups.push_back(group);
    }
  }
  if (cfg.pairwise_corr) {
    for (Eigen::Index a = 0; a < ds.L(); ++a) {
      for (Eigen::Index b = a + 1; b < ds.L(); ++b) {
        FeatureSpec f;
        f.kind = FeatureKind::correlation;
        f.outcome_a = a;
        f.outcome_b = b;
        if (cfg.by.empty()) {
          features.push_back(f);
          continue;
        }
        std::vector<std::size_t> group;
        for (const auto& level : levels) {
          FeatureSpec g = f;
          g.subgroup = Subgroup{cfg.by, level};
          group.push_back(features.size());
          features.push_back(g);
        }
        contrast_groups.push_back(group);
      }
    }
  }
  if (features.empty()) throw SpecError("estimate needs at least one --feature, --by or --pairwise-corr");

  BootstrapConfig bcfg;
  bcfg.methods.clear();
  for (const auto& m : cfg.methods) bcfg.methods.push_back(weighting_config(cfg, m));
  bcfg.features = features;
  bcfg.stratified = cfg.stratified;
  bcfg.refit = cfg.refit;

  std::vector<EstimateRow> rows;
  std::vector<std::string> warnings;
  nlohmann::json ess_reports = nlohmann::json::array();
  for (const auto& mc : bcfg.methods) {
    const auto w = compute_weights(ds, mc);
    ess_reports.push_back(to_json(w.ess));
    for (const auto& msg : w.ess.warnings) warnings.push_back(to_string(mc.method) + ": " + msg);
  }

  if (cfg.bootstrap == 0) {
    for (const auto& mc : bcfg.methods) {
      const auto w = compute_weights(ds, mc);
      const std::string tag = to_string(mc.method);
      for (const auto& f : features) {
        const auto est = estimate_feature(f, w.weights, ds);
        for (Eigen::Index k = 0; k < est.values.size(); ++k) {
          BootstrapResult r;
          r.method = tag;
          r.feature = f.label(ds);
          if (f.kind == FeatureKind::cdf_at) r.feature += "[" + fmt(f.grid[static_cast<std::size_t>(k)], 6) + "]";
          r.quantity = tag + "/" + r.feature;
          r.point_estimate = est.values(k);
          r.seed = cfg.seed;
          rows.push_back({"estimate", r, false});
        }
      }
      BootstrapResult r;
      r.method = tag;
      r.feature = "ess";
      r.quantity = tag + "/ess";
      r.point_estimate = w.ess.composite_ess_empirical;
      r.seed = cfg.seed;
      rows.push_back({"estimate", r, false});
    }
  } else {
    const auto run = bootstrap_pipeline(ds, bcfg, cfg.bootstrap, cfg.seed, cfg.alpha, cfg.threads);
    for (const auto& msg : run.warnings) warnings.push_back(msg);
    for (const auto& r : run.results) rows.push_back({"estimate", r, true});
    for (const auto& mc : bcfg.methods) {
      const std::string tag = to_string(mc.method);
      for (const auto& group : contrast_groups) {
        for (std::size_t i = 0; i < group.size(); ++i) {
          for (std::size_t j = i + 1; j < group.size(); ++j) {
            const auto& a = run.find(tag + "/" + features[group[j]].label(ds));
            const auto& b = run.find(tag + "/" + features[group[i]].label(ds));
            rows.push_back({"difference", paired_difference(a, b), true});
          }
        }
      }
    }
    // ESS gain of TRANSLATE over every other method, replicate by replicate.
    const auto has = [&](const std::string& m) {
      return std::find(cfg.methods.begin(), cfg.methods.end(), m) != cfg.methods.end();
    };
    if (has("translate")) {
      for (const auto& mc : bcfg.methods) {
        const std::string tag = to_string(mc.method);
        if (tag == "translate") continue;
        rows.push_back({"ess_difference", paired_difference(run.find("translate/ess"), run.find(tag + "/ess")), true});
      }
    }
  }

  const nlohmann::json config = cfg.resolved();
  const int p = cfg.precision;
  const char d = delimiter_char(cfg.delimiter == "auto" ? "," : cfg.delimiter);
  OutputSet files;
  auto& csv = files.open(cfg.out + ".estimates.csv");
  csv << header_line(config) << '\n';
  csv << delimited_row({"row", "method", "feature", "estimate", "se", "ci_low", "ci_high", "significant", "rep_min",
                        "rep_median", "rep_max", "B", "seed", "redraw_count"},
                       d)
      << '\n';
  nlohmann::json json_rows = nlohmann::json::array();
  std::vector<std::vector<std::string>> table{{"row", "method", "feature", "estimate", "se", "ci", "sig"}};
  for (const auto& row : rows) {
    const auto& r = row.result;
    std::vector<std::string> cells{row.kind, r.method, r.feature, fmt(r.point_estimate, p)};
    std::string rep_min, rep_med, rep_max, sig;
    if (row.has_bootstrap) {
      cells.push_back(fmt(r.se, p));
      cells.push_back(fmt(r.ci_low, p));
      cells.push_back(fmt(r.ci_high, p));
      if (row.kind != "estimate") {
        sig = r.significant ? "yes" : "no";
        std::vector<double> v(r.replicate_values.data(), r.replicate_values.data() + r.B());
        std::sort(v.begin(), v.end());
        const std::size_t n = v.size();
        rep_min = fmt(v.front(), p);
        rep_max = fmt(v.back(), p);
        rep_med = fmt(n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]), p);
      }
    } else {
      cells.insert(cells.end(), {"", "", ""});
    }
    cells.push_back(sig);
    cells.push_back(rep_min);
    cells.push_back(rep_med);
    cells.push_back(rep_max);
    cells.push_back(std::to_string(row.has_bootstrap ? r.B() : 0));
    cells.push_back(std::to_string(cfg.seed));
    cells.push_back(std::to_string(r.redraw_count));
    csv << delimited_row(cells, d) << '\n';

    nlohmann::json jr = row.has_bootstrap ? to_json(r) : nlohmann::json{{"quantity", r.quantity},
                                                                        {"method", r.method},
                                                                        {"feature", r.feature},
                                                                        {"estimate", r.point_estimate},
                                                                        {"B", 0},
                                                                        {"seed", cfg.seed}};
    jr["row"] = row.kind;
    json_rows.push_back(jr);
    table.push_back({row.kind, r.method, r.feature, cells[3], cells[4],
                     row.has_bootstrap ? "(" + cells[5] + ", " + cells[6] + ")" : "", sig});
  }
  auto& js = files.open(cfg.out + ".estimates.json");
  js << nlohmann::json{{"config", config},
                       {"config_hash", config_hash(config.dump())},
                       {"dataset", dataset_summary(ds)},
                       {"ess", ess_reports},
                       {"rows", json_rows},
                       {"warnings", warnings}}
            .dump(2)
     << '\n';
  const auto written = files.paths();
  files.commit();

  out << "seed: " << cfg.seed << "  B: " << cfg.bootstrap << "  alpha: " << cfg.alpha << '\n';
  out << aligned_table(table);
  for (const auto& msg : warnings) out << "warning: " << msg << '\n';
  for (const auto& p2 : written) out << "wrote " << p2 << '\n';
  return 0;
}

int cmd_simulate(const RunConfig& cfg, std::ostream& out) {
  StudyConfig study;
  study.scenarios.clear();
  for (const auto& name : cfg.scenarios) study.scenarios.push_back(scenario_by_name(name));
  for (const auto& o : cfg.scenario_overrides) study.scenarios.push_back(ScenarioConfig::from_json(o));
  if (study.scenarios.empty()) throw SpecError("simulate needs at least one scenario");
  if (cfg.N) {
    for (auto& s : study.scenarios) s.N = static_cast<Eigen::Index>(*cfg.N);
  }
  study.R = cfg.R;
  study.seed = cfg.seed;
  study.threads = cfg.threads;
  study.methods.clear();
  for (const auto& m : cfg.methods) study.methods.push_back(weighting_config(cfg, m));

  const auto result = run_study(study);
  const nlohmann::json config = cfg.resolved();
  const char d = delimiter_char(cfg.delimiter == "auto" ? "," : cfg.delimiter);

  OutputSet files;
  auto& csv = files.open(cfg.out + ".study.csv");
  csv << header_line(config) << '\n' << render_study_table(result, d, cfg.precision);
  auto& js = files.open(cfg.out + ".study.json");
  auto jr = to_json(result);
  jr["run_config"] = config;
  jr["config_hash"] = config_hash(config.dump());
  js << jr.dump(2) << '\n';
  auto& oj = files.open(cfg.out + ".oracle.json");
  nlohmann::json oracle = nlohmann::json::array();
  for (const auto& s : study.scenarios) {
    auto o = oracle_truths(s, cfg.mc_size, cfg.seed, cfg.threads).to_json();
    o["scenario"] = s.to_json();
    oracle.push_back(o);
  }
  oj << nlohmann::json{{"config", config}, {"config_hash", config_hash(config.dump())}, {"oracles", oracle}}.dump(2)
     << '\n';
  const auto written = files.paths();
  files.commit();

  out << "seed: " << cfg.seed << "  R: " << cfg.R << '\n';
  std::vector<std::vector<std::string>> table;
  std::istringstream is(render_study_table(result, '\t', cfg.precision));
  std::string line;
  while (std::getline(is, line)) table.push_back(split(line, '\t'));
  out << aligned_table(table);
  for (const auto& p : written) out << "wrote " << p << '\n';
  return 0;
}

void apply_json(RunConfig& cfg, const nlohmann::json& j) {
  const auto str_list = [&](const char* key, std::vector<std::string>& dst) {
    if (!j.contains(key)) return;
    const auto& v = j.at(key);
    dst = v.is_array() ? v.get<std::vector<std::string>>() : split(v.get<std::string>(), ',');
  };
  str_list("input", cfg.inputs);
  str_list("covariates", cfg.covariates);
  str_list("outcomes", cfg.outcomes);
  str_list("categorical", cfg.categorical);
  str_list("method", cfg.methods);
  str_list("feature", cfg.features);
  str_list("scenarios", cfg.scenarios);
  cfg.label_col = j.value("label_col", cfg.label_col);
  cfg.anchor = j.value("anchor", cfg.anchor);
  cfg.missing = j.value("missing", cfg.missing);
  cfg.delimiter = j.value("delimiter", cfg.delimiter);
  cfg.model = j.value("model", cfg.model);
  if (j.contains("weight_cap") && !j.at("weight_cap").is_null()) cfg.weight_cap = j.at("weight_cap").get<double>();
  cfg.bootstrap = j.value("bootstrap", cfg.bootstrap);
  cfg.seed = j.value("seed", cfg.seed);
  cfg.alpha = j.value("alpha", cfg.alpha);
  cfg.stratified = j.value("stratified", cfg.stratified);
  cfg.refit = j.value("refit", cfg.refit);
  cfg.by = j.value("by", cfg.by);
  cfg.pairwise_corr = j.value("pairwise_corr", cfg.pairwise_corr);
  cfg.precision = j.value("precision", cfg.precision);
  cfg.out = j.value("out", cfg.out);
  cfg.R = j.value("R", cfg.R);
  if (j.contains("N") && !j.at("N").is_null()) cfg.N = j.at("N").get<long long>();
  cfg.mc_size = j.value("mc_size", cfg.mc_size);
  if (j.contains("scenario_overrides")) cfg.scenario_overrides = j.at("scenario_overrides");
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Anchor-aligned weighting of multi-cohort data"};
  app.require_subcommand(1);
  RunConfig flags;
  flags.threads = default_threads();
  std::string config_path;
  double weight_cap = 0.0;
  long long n_override = 0;
  // Option name -> copy from `flags` into the merged config.
  std::vector<std::pair<std::string, std::function<void(RunConfig&)>>> copies;

  const auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON file of option values; flags override it");
    sub->add_option("--method", flags.methods, "translate, naive, anchor_only, importance")->delimiter(',');
    sub->add_option("--model", flags.model, "Cohort model: logistic or qda");
    sub->add_option("--seed", flags.seed, "Random seed");
    sub->add_option("--out", flags.out, "Output path prefix");
    sub->add_option("--threads", flags.threads, "Worker threads");
    sub->add_option("--precision", flags.precision, "Significant digits in tables");
    sub->add_option("--delimiter", flags.delimiter, "Field delimiter: ',', tab, ';' or auto for input");
  };
  const auto add_data = [&](CLI::App* sub) {
    sub->add_option("--input", flags.inputs, "Delimited input file (repeatable)");
    sub->add_option("--label-col", flags.label_col, "Cohort label column");
    sub->add_option("--anchor", flags.anchor, "Label value of the anchor cohort");
    sub->add_option("--covariates", flags.covariates, "Covariate columns (default: all others)")->delimiter(',');
    sub->add_option("--outcomes", flags.outcomes, "Outcome columns")->delimiter(',');
    sub->add_option("--categorical", flags.categorical, "Categorical covariates")->delimiter(',');
    sub->add_option("--missing", flags.missing, "drop or fail");
    sub->add_option("--weight-cap", weight_cap, "Cap raw weights at this upper quantile");
  };

  auto* weights = app.add_subcommand("weights", "Write anchor-aligned weights and ESS diagnostics");
  add_common(weights);
  add_data(weights);
  auto* estimate = app.add_subcommand("estimate", "Estimate anchor features with bootstrap SEs");
  add_common(estimate);
  add_data(estimate);
  estimate->add_option("--bootstrap", flags.bootstrap, "Bootstrap replicates B (0 disables)");
  estimate->add_option("--alpha", flags.alpha, "Percentile interval level");
  estimate->add_option("--feature", flags.features, "Feature, e.g. mean:y1, corr:y1:y2, diff:y1@sex=F@sex=M");
  estimate->add_option("--by", flags.by, "Subgroup covariate for per-level means and contrasts");
  estimate->add_flag("--pairwise-corr", flags.pairwise_corr, "All outcome correlations");
  estimate->add_flag("--stratified", flags.stratified, "Resample within cohorts");
  estimate->add_flag("!--no-refit", flags.refit, "Reuse the full-data cohort model in replicates");
  auto* simulate = app.add_subcommand("simulate", "Run the simulation study");
  add_common(simulate);
  simulate->add_option("--scenarios", flags.scenarios, "dissimilar_y, dissimilar_xy, calibrated_y, calibrated_xy")
      ->delimiter(',');
  simulate->add_option("--R", flags.R, "Replicates per scenario");
  simulate->add_option("--N", n_override, "Sample size override");
  simulate->add_option("--mc-size", flags.mc_size, "Monte Carlo oracle draws");

  copies = {
      {"--input", [&](RunConfig& c) { c.inputs = flags.inputs; }},
      {"--label-col", [&](RunConfig& c) { c.label_col = flags.label_col; }},
      {"--anchor", [&](RunConfig& c) { c.anchor = flags.anchor; }},
      {"--covariates", [&](RunConfig& c) { c.covariates = flags.covariates; }},
      {"--outcomes", [&](RunConfig& c) { c.outcomes = flags.outcomes; }},
      {"--categorical", [&](RunConfig& c) { c.categorical = flags.categorical; }},
      {"--missing", [&](RunConfig& c) { c.missing = flags.missing; }},
      {"--weight-cap", [&](RunConfig& c) { c.weight_cap = weight_cap; }},
      {"--method", [&](RunConfig& c) { c.methods = flags.methods; }},
      {"--model", [&](RunConfig& c) { c.model = flags.model; }},
      {"--seed", [&](RunConfig& c) { c.seed = flags.seed; }},
      {"--out", [&](RunConfig& c) { c.out = flags.out; }},
      {"--precision", [&](RunConfig& c) { c.precision = flags.precision; }},
      {"--delimiter", [&](RunConfig& c) { c.delimiter = flags.delimiter; }},
      {"--bootstrap", [&](RunConfig& c) { c.bootstrap = flags.bootstrap; }},
      {"--alpha", [&](RunConfig& c) { c.alpha = flags.alpha; }},
      {"--feature", [&](RunConfig& c) { c.features = flags.features; }},
      {"--by", [&](RunConfig& c) { c.by = flags.by; }},
      {"--pairwise-corr", [&](RunConfig& c) { c.pairwise_corr = flags.pairwise_corr; }},
      {"--stratified", [&](RunConfig& c) { c.stratified = flags.stratified; }},
      {"--no-refit", [&](RunConfig& c) { c.refit = flags.refit; }},
      {"--scenarios", [&](RunConfig& c) { c.scenarios = flags.scenarios; }},
      {"--R", [&](RunConfig& c) { c.R = flags.R; }},
      {"--N", [&](RunConfig& c) { c.N = n_override; }},
      {"--mc-size", [&](RunConfig& c) { c.mc_size = flags.mc_size; }},
  };

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  CLI::App* sub = app.get_subcommands().front();
  RunConfig cfg;
  cfg.command = sub->get_name();
  if (cfg.command == "simulate") {
    cfg.model = "qda";
    cfg.methods = {"naive", "anchor_only", "importance", "translate"};
  }
  try {
    if (!config_path.empty()) {
      std::ifstream in(config_path);
      if (!in) throw SchemaError("cannot open config file " + config_path);
      nlohmann::json j;
      try {
        in >> j;
      } catch (const nlohmann::json::exception& e) {
        throw SchemaError("config file " + config_path + " is not valid JSON: " + e.what());
      }
      apply_json(cfg, j);
    }
    for (const auto& [name, copy] : copies) {
      const CLI::Option* opt = nullptr;
      try {
        opt = sub->get_option(name);
      } catch (const CLI::OptionNotFound&) {
        continue;
      }
      if (opt->count() > 0) copy(cfg);
    }
    cfg.threads = std::max(1u, flags.threads);
    if (cfg.methods.empty()) throw SpecError("no --method given");
    if (cfg.precision < 1 || cfg.precision > 17) throw SpecError("--precision must be between 1 and 17");

    if (cfg.command == "weights") return cmd_weights(cfg, out);
    if (cfg.command == "estimate") return cmd_estimate(cfg, out);
    return cmd_simulate(cfg, out);
  } catch (const ParseError& e) {
    err << "error: " << e.what() << '\n';
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
  }
  return 1;
}

}  // namespace translate::cli
