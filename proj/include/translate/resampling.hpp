#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "translate/dataset.hpp"
#include "translate/functionals.hpp"
#include "translate/pipeline.hpp"

namespace translate {

struct BootstrapResult {
  std::string quantity;
  std::string method;
  std::string feature;
  double point_estimate = 0.0;
  Eigen::VectorXd replicate_values;
  double se = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  double alpha = 0.05;
  // Percentile interval excludes zero.
  bool significant = false;
  std::uint64_t seed = 0;
  std::size_t redraw_count = 0;
  // Hash of every replicate's resample indices; results sharing it are paired.
  std::uint64_t provenance = 0;

  Eigen::Index B() const { return replicate_values.size(); }
};

struct BootstrapConfig {
  std::vector<WeightingConfig> methods{WeightingConfig{}};
  std::vector<FeatureSpec> features;
  bool track_ess = true;
  // Resample within each cohort instead of from the pooled sample.
  bool stratified = false;
  // Refit the cohort model in every replicate; false reuses the full-data fit.
  bool refit = true;
  // Redraws allowed per replicate before giving up.
  int max_attempts = 100;
};

nlohmann::json to_json(const BootstrapConfig& cfg, const Dataset& ds);

struct BootstrapRun {
  std::vector<BootstrapResult> results;
  std::size_t B = 0;
  std::uint64_t seed = 0;
  double alpha = 0.05;
  std::size_t redraw_count = 0;
  std::vector<std::uint64_t> replicate_hashes;
  std::vector<std::string> warnings;

  // Throws SpecError if no quantity has this name.
  const BootstrapResult& find(const std::string& quantity) const;
};

// Nonparametric bootstrap of Stage 1 + Stage 2. Replicate r draws from the
// stream (seed, r, attempt), so results are identical for any thread count.
// Replicates that leave a cohort or subgroup empty, or where the cohort
// model cannot be fitted, are redrawn and counted.
BootstrapRun bootstrap_pipeline(const Dataset& ds, const BootstrapConfig& cfg, std::size_t B, std::uint64_t seed,
                                double alpha = 0.05, unsigned threads = 1);

// SE (B - 1 denominator), percentile interval and significance for a
// replicate vector.
void summarize_replicates(BootstrapResult& r);

// Per-replicate a_r - b_r. Throws PairingError unless a and b share B, seed
// and resample provenance.
BootstrapResult paired_difference(const BootstrapResult& a, const BootstrapResult& b);

nlohmann::json to_json(const BootstrapResult& r);

}  // namespace translate
