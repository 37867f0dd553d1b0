#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include <unistd.h>

#include <json.hpp>

#include "cli.hpp"
#include "helpers.hpp"
#include "translate/dataset.hpp"
#include "translate/errors.hpp"
#include "translate/simulation.hpp"

namespace fs = std::filesystem;
using namespace translate;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    path = fs::temp_directory_path() / ("translate_cli_" + tag + "_" + std::to_string(::getpid()));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
  std::string operator/(const std::string& name) const { return (path / name).string(); }
};

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run_cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

// cohort, sex, x1, x2, y1, y2 with cohort-dependent shifts.
void write_small_csv(const std::string& path, std::uint64_t seed, int n = 300) {
  CounterRng rng(seed);
  std::ofstream f(path);
  f << "cohort,sex,x1,x2,y1,y2\n";
  const char* names[] = {"A", "B", "C"};
  for (int i = 0; i < n; ++i) {
    const int s = static_cast<int>(rng.below(3));
    const double x1 = rng.normal(0.4 * s, 1.0);
    const double x2 = rng.normal();
    f << names[s] << ',' << (rng.bernoulli(0.5) ? "F" : "M") << ',' << x1 << ',' << x2 << ','
      << x1 + 0.5 * s + rng.normal() << ',' << x2 - 0.3 * s + rng.normal() << '\n';
  }
}

std::vector<std::string> data_args(const std::string& csv) {
  return {"--input", csv, "--label-col", "cohort", "--anchor", "A", "--outcomes", "y1,y2", "--categorical", "sex"};
}

std::vector<std::string> concat(std::vector<std::string> a, const std::vector<std::string>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

}  // namespace

TEST_CASE("weights command writes weights and ESS report") {
  TempDir dir("weights");
  const auto csv = dir / "d.csv";
  write_small_csv(csv, 1);
  const auto r = run_cli(concat({"weights"}, concat(data_args(csv), {"--out", dir / "run"})));
  REQUIRE_MESSAGE(r.code == 0, r.err);
  CHECK(r.out.find("composite ESS") != std::string::npos);
  const auto text = slurp(dir / "run.weights.csv");
  CHECK(text.rfind("# config_hash=", 0) == 0);
  std::istringstream is(text);
  std::string line;
  std::getline(is, line);
  std::getline(is, line);
  CHECK(line == "index,label,weight");
  double sum = 0.0;
  int rows = 0;
  while (std::getline(is, line)) {
    sum += std::stod(line.substr(line.rfind(',') + 1));
    ++rows;
  }
  CHECK(rows == 300);
  CHECK(sum == doctest::Approx(300.0).epsilon(1e-10));
  const auto ess = nlohmann::json::parse(slurp(dir / "run.ess.json"));
  CHECK(ess["ess"]["cohorts"].size() == 3);
  CHECK(ess["ess"]["cohorts"][0]["label"] == "A");
  CHECK(ess["dataset"]["N"] == 300);
}

TEST_CASE("weights output is byte-identical across runs") {
  TempDir dir("determinism");
  const auto csv = dir / "d.csv";
  write_small_csv(csv, 2);
  const auto args = concat({"weights"}, concat(data_args(csv), {"--out", dir / "a", "--model", "qda"}));
  REQUIRE(run_cli(args).code == 0);
  const auto first = slurp(dir / "a.weights.csv");
  REQUIRE(run_cli(args).code == 0);
  CHECK(slurp(dir / "a.weights.csv") == first);
}

TEST_CASE("estimate command: features, subgroup contrasts and ESS differences") {
  TempDir dir("estimate");
  const auto csv = dir / "d.csv";
  write_small_csv(csv, 3, 400);
  const auto args = concat({"estimate"}, concat(data_args(csv), {"--out", dir / "e", "--method", "translate,naive",
                                                                  "--bootstrap", "20", "--seed", "5", "--feature",
                                                                  "sd:y1", "--feature", "diff:y1@sex=F@sex=M", "--by",
                                                                  "sex", "--pairwise-corr", "--threads", "3"}));
  const auto r = run_cli(args);
  REQUIRE_MESSAGE(r.code == 0, r.err);
  const auto j = nlohmann::json::parse(slurp(dir / "e.estimates.json"));
  int differences = 0, ess_diff = 0, corr = 0;
  for (const auto& row : j["rows"]) {
    if (row["row"] == "difference") ++differences;
    if (row["row"] == "ess_difference") ++ess_diff;
    if (row["row"] == "estimate" && row["feature"].get<std::string>().rfind("corr(", 0) == 0) ++corr;
    if (row["row"] == "estimate") CHECK(row["B"] == 20);
  }
  // Per method: one contrast per outcome mean and one for the correlation.
  CHECK(differences == 2 * 3);
  CHECK(ess_diff == 1);
  CHECK(corr == 2 * 2);
  const auto csv_text = slurp(dir / "e.estimates.csv");
  CHECK(csv_text.find("row,method,feature,estimate,se,ci_low,ci_high,significant") != std::string::npos);

  // Same seed, other thread count: identical output files.
  auto again = args;
  again.back() = "1";
  REQUIRE(run_cli(again).code == 0);
  CHECK(slurp(dir / "e.estimates.csv") == csv_text);
}

TEST_CASE("estimate without bootstrap gives point estimates only") {
  TempDir dir("point");
  const auto csv = dir / "d.csv";
  write_small_csv(csv, 4);
  const auto r = run_cli(concat({"estimate"}, concat(data_args(csv), {"--out", dir / "p", "--bootstrap", "0",
                                                                       "--feature", "mean:y1", "--feature",
                                                                       "cdf:y2:-1;0;1", "--feature",
                                                                       "quantile:y1:0.25"})));
  REQUIRE_MESSAGE(r.code == 0, r.err);
  const auto j = nlohmann::json::parse(slurp(dir / "p.estimates.json"));
  // mean, three cdf points, quantile, ess.
  CHECK(j["rows"].size() == 6);
}

TEST_CASE("config file values are overridden by flags") {
  TempDir dir("config");
  const auto csv = dir / "d.csv";
  write_small_csv(csv, 5);
  nlohmann::json c{{"input", {csv}},       {"label_col", "cohort"}, {"anchor", "A"},     {"outcomes", "y1,y2"},
                   {"categorical", "sex"}, {"method", "naive"},     {"seed", 99},        {"out", dir / "c"},
                   {"bootstrap", 0},       {"feature", {"mean:y1"}}};
  std::ofstream(dir / "cfg.json") << c.dump();
  const auto r = run_cli({"estimate", "--config", dir / "cfg.json", "--seed", "7"});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  const auto j = nlohmann::json::parse(slurp(dir / "c.estimates.json"));
  CHECK(j["config"]["seed"] == 7);
  CHECK(j["config"]["method"] == nlohmann::json::array({"naive"}));
}

TEST_CASE("simulate command") {
  TempDir dir("simulate");
  const auto r = run_cli({"simulate", "--R", "3", "--N", "1500", "--mc-size", "20000", "--out", dir / "s",
                          "--scenarios", "calibrated_y", "--threads", "2"});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  const auto table = slurp(dir / "s.study.csv");
  CHECK(table.find("calibrated_y,abs_bias,mean(y1)") != std::string::npos);
  const auto oracle = nlohmann::json::parse(slurp(dir / "s.oracle.json"));
  CHECK(oracle["oracles"].size() == 1);
  const auto study = nlohmann::json::parse(slurp(dir / "s.study.json"));
  CHECK(study["cells"].size() == 4 * 3);
}

TEST_CASE("errors exit non-zero and leave no partial outputs") {
  TempDir dir("errors");
  const auto csv = dir / "d.csv";
  write_small_csv(csv, 6);
  SUBCASE("unknown anchor label") {
    auto args = concat({"weights"}, data_args(csv));
    args[6] = "Z";
    args.insert(args.end(), {"--out", dir / "x"});
    const auto r = run_cli(args);
    CHECK(r.code != 0);
    CHECK(r.err.rfind("error: ", 0) == 0);
    CHECK_FALSE(fs::exists(dir / "x.weights.csv"));
    CHECK_FALSE(fs::exists(dir / "x.weights.csv.tmp"));
  }
  SUBCASE("bad feature") {
    const auto r = run_cli(concat({"estimate"}, concat(data_args(csv), {"--feature", "mode:y1", "--out", dir / "y"})));
    CHECK(r.code != 0);
    CHECK(r.err.find("unknown feature kind") != std::string::npos);
  }
  SUBCASE("missing file") {
    const auto r = run_cli(concat({"weights"}, data_args(dir / "nope.csv")));
    CHECK(r.code != 0);
  }
  SUBCASE("unknown flag") {
    const auto r = run_cli({"weights", "--bogus"});
    CHECK(r.code != 0);
  }
}

TEST_CASE("missing label column names the column") {
  TempDir dir("nolabel");
  const auto csv = dir / "d.csv";
  write_small_csv(csv, 8);
  auto args = concat({"weights"}, data_args(csv));
  args[4] = "hospital";
  args.insert(args.end(), {"--out", dir / "z"});
  const auto r = run_cli(args);
  CHECK(r.code != 0);
  CHECK(r.err.find("'hospital'") != std::string::npos);
  CHECK_FALSE(fs::exists(dir / "z.ess.json"));
}

TEST_CASE("weights on identical cohorts are near one") {
  TempDir dir("identical");
  const auto csv = dir / "d.csv";
  {
    CounterRng rng(21);
    std::ofstream f(csv);
    f << "cohort,x,y\n";
    for (int i = 0; i < 4000; ++i) {
      const double x = rng.uniform();
      f << (rng.bernoulli(0.4) ? "A" : "B") << ',' << x << ',' << x + rng.normal() << '\n';
    }
  }
  const auto r = run_cli({"weights", "--input", csv, "--label-col", "cohort", "--anchor", "A", "--outcomes", "y",
                          "--out", dir / "w"});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  const auto ess = nlohmann::json::parse(slurp(dir / "w.ess.json"));
  CHECK(ess["ess"]["composite_ess_empirical"].get<double>() > 0.97 * 4000);
}

TEST_CASE("weights on a simulated scenario file") {
  TempDir dir("scenario");
  const auto csv = dir / "d.csv";
  const auto ds = generate_dataset(dissimilar_y(), 31);
  {
    std::ofstream f(csv);
    write_dataset(f, ds);
  }
  const auto schema = schema_for(ds);
  std::string outcomes;
  for (const auto& o : schema.outcomes) outcomes += (outcomes.empty() ? "" : ",") + o;
  const auto r = run_cli({"weights", "--input", csv, "--label-col", schema.label_column, "--anchor",
                          schema.anchor_label, "--outcomes", outcomes, "--method", "translate", "--out", dir / "w"});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  const auto ess = nlohmann::json::parse(slurp(dir / "w.ess.json"))["ess"];
  double gamma = 0.0;
  for (const auto& c : ess["cohorts"]) gamma += c["gamma_s"].get<double>();
  CHECK(gamma == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(ess["composite_ess_closed_form"].get<double>() > static_cast<double>(ds.anchor_count()));
}

TEST_CASE("overall and subgroup means give three rows per method") {
  TempDir dir("block");
  const auto csv = dir / "d.csv";
  write_small_csv(csv, 9, 400);
  const auto r = run_cli(concat({"estimate"}, concat(data_args(csv), {"--out", dir / "b", "--method", "translate,naive",
                                                                       "--bootstrap", "2", "--feature", "mean:y1",
                                                                       "--feature", "mean:y1@sex=M", "--feature",
                                                                       "mean:y1@sex=F"})));
  REQUIRE_MESSAGE(r.code == 0, r.err);
  const auto j = nlohmann::json::parse(slurp(dir / "b.estimates.json"));
  std::map<std::string, int> per_method;
  for (const auto& row : j["rows"]) {
    if (row["row"] != "estimate" || row["feature"] == "ess") continue;
    ++per_method[row["method"].get<std::string>()];
    CHECK(std::isfinite(row["se"].get<double>()));
  }
  CHECK(per_method.size() == 2);
  for (const auto& [m, n] : per_method) CHECK_MESSAGE(n == 3, m);
}

TEST_CASE("simulate is byte-identical for a fixed seed") {
  TempDir dir("simdet");
  const std::vector<std::string> args{"simulate", "--R", "10", "--N", "1500", "--mc-size", "20000", "--seed", "4",
                                      "--out", dir / "s"};
  REQUIRE(run_cli(args).code == 0);
  const auto first = slurp(dir / "s.study.csv");
  const auto oracle = slurp(dir / "s.oracle.json");
  REQUIRE(run_cli(args).code == 0);
  CHECK(slurp(dir / "s.study.csv") == first);
  CHECK(slurp(dir / "s.oracle.json") == oracle);
  CHECK(first.find("nan") == std::string::npos);
}

TEST_CASE("feature grammar") {
  CounterRng rng(1);
  TempDir dir("grammar");
  const auto csv = dir / "d.csv";
  write_small_csv(csv, 7);
  Schema schema;
  schema.label_column = "cohort";
  schema.anchor_label = "A";
  schema.covariates = {"sex", "x1", "x2"};
  schema.outcomes = {"y1", "y2"};
  schema.categorical = {"sex"};
  const auto ds = load_dataset(fs::path(csv), schema).dataset;
  CHECK(cli::parse_feature("mean:y1@sex=F", ds).kind == FeatureKind::subgroup_mean);
  CHECK(cli::parse_feature("corr:y1:y2", ds).outcome_b == 1);
  CHECK(cli::parse_feature("quantile:y2:0.9", ds).quantile == doctest::Approx(0.9));
  CHECK_THROWS_AS(cli::parse_feature("corr:y1", ds), SpecError);
  CHECK_THROWS_AS(cli::parse_feature("mean:y1@sex=F@sex=M", ds), SpecError);
  CHECK_THROWS_AS(cli::parse_feature("mean:y1@sex=X", ds), SpecError);
  CHECK_THROWS_AS(cli::parse_feature("diff:y1@sex=F", ds), SpecError);
}

// Four hospitals, 46 covariates (with a
// categorical sex column), four outcomes.
TEST_CASE("four-cohort run with 46 covariates and pairwise correlations by sex") {
  TempDir dir("icu");
  const auto csv = dir / "icu.csv";
  CounterRng rng(2024);
  {
    std::ofstream f(csv);
    f << "hospital,sex";
    for (int j = 1; j <= 45; ++j) f << ",c" << j;
    f << ",hr,sbp,temp,rr\n";
    // Counts follow the prevalence split 0.06 / 0.48 / 0.22 / 0.24.
    const int counts[] = {408, 3312, 1551, 1695};
    for (int s = 0; s < 4; ++s) {
      for (int i = 0; i < counts[s]; ++i) {
        f << "H" << s << ',' << (rng.bernoulli(0.45) ? "F" : "M");
        double sum = 0.0;
        for (int j = 1; j <= 45; ++j) {
          const double v = rng.normal(0.1 * s * (j % 3), 1.0);
          sum += v;
          f << ',' << v;
        }
        for (int l = 0; l < 4; ++l) f << ',' << 0.05 * sum + 0.3 * s + rng.normal();
        f << '\n';
      }
    }
  }
  const auto r = run_cli({"estimate", "--input", csv, "--label-col", "hospital", "--anchor", "H0", "--outcomes",
                          "hr,sbp,temp,rr", "--categorical", "sex", "--method", "translate,importance",
                          "--bootstrap", "4", "--by", "sex", "--pairwise-corr", "--out", dir / "icu", "--threads",
                          "4"});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  const auto j = nlohmann::json::parse(slurp(dir / "icu.estimates.json"));
  CHECK(j["dataset"]["N"] == 6966);
  CHECK(j["dataset"]["J"] == 3);
  CHECK(j["dataset"]["p"] == 46);
  CHECK(j["dataset"]["L"] == 4);
  int corr_rows = 0;
  for (const auto& row : j["rows"]) {
    const auto f = row["feature"].get<std::string>();
    if (row["row"] == "estimate" && row["method"] == "translate" && f.rfind("corr(", 0) == 0) ++corr_rows;
  }
  // Six outcome pairs for each of two sexes.
  CHECK(corr_rows == 12);
  bool has_ess_diff = false;
  for (const auto& row : j["rows"]) has_ess_diff = has_ess_diff || row["row"] == "ess_difference";
  CHECK(has_ess_diff);
}
