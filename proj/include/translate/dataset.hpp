#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

namespace translate {

enum class MissingPolicy { drop, fail };

// Column roles for a delimited input file.
struct Schema {
  std::string label_column;
  std::string anchor_label = "0";
  std::vector<std::string> covariates;
  std::vector<std::string> outcomes;
  // Covariates holding category strings; each is one-hot expanded with the
  // first level (in sorted order) as the reference category.
  std::vector<std::string> categorical;
  MissingPolicy missing = MissingPolicy::drop;
  // '\0' selects comma or tab from the header line.
  char delimiter = '\0';
};

// One-hot expansion record for a categorical covariate. levels[0] is the
// reference level and has no dummy column; levels[k] (k >= 1) maps to
// covariate column dummy_columns[k - 1].
struct CategoricalCovariate {
  std::string name;
  std::vector<std::string> levels;
  std::vector<Eigen::Index> dummy_columns;
};

// Multi-cohort sample. Labels are contiguous 0..J with the anchor at 0;
// original label strings are kept in cohort_names(). Immutable once built.
class Dataset {
 public:
  Dataset(std::vector<int> labels, Eigen::MatrixXd covariates, Eigen::MatrixXd outcomes,
          std::vector<std::string> covariate_names, std::vector<std::string> outcome_names,
          std::vector<std::string> cohort_names = {},
          std::vector<CategoricalCovariate> categoricals = {});

  Eigen::Index size() const { return static_cast<Eigen::Index>(labels_.size()); }
  int num_cohorts() const { return static_cast<int>(counts_.size()); }
  // Number of external cohorts.
  int J() const { return num_cohorts() - 1; }
  Eigen::Index p() const { return covariates_.cols(); }
  Eigen::Index L() const { return outcomes_.cols(); }

  std::span<const int> labels() const { return labels_; }
  const Eigen::MatrixXd& covariates() const { return covariates_; }
  const Eigen::MatrixXd& outcomes() const { return outcomes_; }
  const std::vector<std::string>& covariate_names() const { return covariate_names_; }
  const std::vector<std::string>& outcome_names() const { return outcome_names_; }
  const std::vector<std::string>& cohort_names() const { return cohort_names_; }
  const std::vector<CategoricalCovariate>& categoricals() const { return categoricals_; }
  const std::vector<std::size_t>& cohort_counts() const { return counts_; }
  std::size_t anchor_count() const { return counts_.front(); }

  // [covariates | outcomes], the z vector of every subject.
  Eigen::MatrixXd joint_features() const;

  // Rows in the given order (repeats allowed). Throws SupportError if any
  // cohort ends up empty.
  Dataset subset(std::span<const std::size_t> rows) const;

  Eigen::Index outcome_index(const std::string& name) const;
  Eigen::Index covariate_index(const std::string& name) const;

  // 0/1 indicator of `covariate == value`. `covariate` is either a
  // categorical source column (value is a level) or a numeric covariate
  // (value parsed as a number). Throws SpecError for unknown names or values
  // that never occur.
  Eigen::VectorXd subgroup_indicator(const std::string& covariate, const std::string& value) const;

  // Levels a subgroup column can take, in display order.
  std::vector<std::string> subgroup_levels(const std::string& covariate) const;

  bool operator==(const Dataset& other) const;

 private:
  std::vector<int> labels_;
  Eigen::MatrixXd covariates_;
  Eigen::MatrixXd outcomes_;
  std::vector<std::string> covariate_names_;
  std::vector<std::string> outcome_names_;
  std::vector<std::string> cohort_names_;
  std::vector<CategoricalCovariate> categoricals_;
  std::vector<std::size_t> counts_;
};

struct PrevalenceVector {
  std::vector<std::size_t> counts;
  Eigen::VectorXd pi_hat;
  std::size_t total = 0;
};

PrevalenceVector cohort_prevalences(const Dataset& ds);
PrevalenceVector cohort_prevalences(std::span<const int> labels, int num_cohorts);

struct LoadReport {
  std::size_t rows_read = 0;
  std::size_t rows_dropped = 0;
};

struct LoadResult {
  Dataset dataset;
  LoadReport report;
};

LoadResult load_dataset(std::istream& in, const Schema& schema);
LoadResult load_dataset(const std::filesystem::path& path, const Schema& schema);
// Concatenates files that share a header.
LoadResult load_dataset(const std::vector<std::filesystem::path>& paths, const Schema& schema);

// Writes the dataset back as delimited text (categorical covariates as their
// level strings, numbers with round-trip precision). schema_for() returns
// the schema that reloads it.
void write_dataset(std::ostream& out, const Dataset& ds, char delimiter = ',');
Schema schema_for(const Dataset& ds, const std::string& label_column = "cohort");

nlohmann::json dataset_summary(const Dataset& ds);

}  // namespace translate
