#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "translate/dataset.hpp"
#include "translate/functionals.hpp"

namespace translate::cli {

struct RunConfig {
  std::string command;
  std::vector<std::string> inputs;
  std::string label_col = "cohort";
  std::string anchor = "0";
  std::vector<std::string> covariates;
  std::vector<std::string> outcomes;
  std::vector<std::string> categorical;
  std::string missing = "drop";
  std::string delimiter = ",";
  std::vector<std::string> methods{"translate"};
  std::string model = "logistic";
  std::optional<double> weight_cap;
  std::size_t bootstrap = 500;
  std::uint64_t seed = 20240101;
  double alpha = 0.05;
  bool stratified = false;
  bool refit = true;
  std::vector<std::string> features;
  std::string by;
  bool pairwise_corr = false;
  int precision = 4;
  std::string out = "translate_out";
  unsigned threads = 1;
  // simulate
  std::vector<std::string> scenarios{"dissimilar_y", "dissimilar_xy"};
  nlohmann::json scenario_overrides = nlohmann::json::array();
  std::size_t R = 100;
  std::optional<long long> N;
  std::size_t mc_size = 1000000;

  // Everything that affects outputs (thread count excluded).
  nlohmann::json resolved() const;
};

// Parses "kind:outcome[:arg][@covariate=level[@covariate=level]]" where kind
// is mean, sd, var, cov, corr, cdf, median, quantile or diff.
FeatureSpec parse_feature(const std::string& text, const Dataset& ds);

// Full command line including the subcommand; returns the exit status.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace translate::cli
