#include "translate/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <unordered_map>

#include "translate/errors.hpp"

namespace translate {

namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split_line(const std::string& line, char delim) {
  std::vector<std::string> out;
  std::string cell;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cell += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cell += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == delim) {
      out.push_back(trim(cell));
      cell.clear();
    } else {
      cell += c;
    }
  }
  out.push_back(trim(cell));
  return out;
}

bool is_missing(const std::string& cell) {
  return cell.empty() || cell == "NA" || cell == "NaN" || cell == "nan" || cell == "null" ||
         cell == "NULL" || cell == ".";
}

std::optional<double> parse_double(const std::string& cell) {
  if (cell.empty()) return std::nullopt;
  char* end = nullptr;
  const double v = std::strtod(cell.c_str(), &end);
  if (end != cell.c_str() + cell.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

std::optional<long long> parse_integer(const std::string& s) {
  long long v = 0;
  const auto* first = s.data();
  const auto* last = s.data() + s.size();
  if (first != last && *first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last || first == last) return std::nullopt;
  return v;
}

// Integer-valued labels compare by value ("01" == "1"); others verbatim.
std::string canonical_label(const std::string& raw) {
  if (auto v = parse_integer(raw)) return std::to_string(*v);
  return raw;
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string format_level(double v) {
  // Shortest representation that round-trips.
  char buf[32];
  for (int precision = 1; precision <= 17; ++precision) {
    std::snprintf(buf, sizeof buf, "%.*g", precision, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

}  // namespace

Dataset::Dataset(std::vector<int> labels, Eigen::MatrixXd covariates, Eigen::MatrixXd outcomes,
                 std::vector<std::string> covariate_names, std::vector<std::string> outcome_names,
                 std::vector<std::string> cohort_names,
                 std::vector<CategoricalCovariate> categoricals)
    : labels_(std::move(labels)),
      covariates_(std::move(covariates)),
      outcomes_(std::move(outcomes)),
      covariate_names_(std::move(covariate_names)),
      outcome_names_(std::move(outcome_names)),
      cohort_names_(std::move(cohort_names)),
      categoricals_(std::move(categoricals)) {
  const auto n = static_cast<Eigen::Index>(labels_.size());
  if (n < 1) throw SupportError("dataset has no subjects");
  if (covariates_.rows() != n || outcomes_.rows() != n) {
    throw ShapeError("covariate/outcome row count does not match number of labels");
  }
  if (static_cast<Eigen::Index>(covariate_names_.size()) != covariates_.cols() ||
      static_cast<Eigen::Index>(outcome_names_.size()) != outcomes_.cols()) {
    throw ShapeError("column names do not match matrix widths");
  }
  if (!covariates_.allFinite() || !outcomes_.allFinite()) {
    throw DomainError("dataset contains non-finite covariate or outcome values");
  }

  int max_label = -1;
  for (const int s : labels_) {
    if (s < 0) throw DomainError("cohort labels must be non-negative");
    max_label = std::max(max_label, s);
  }
  if (cohort_names_.empty()) {
    for (int s = 0; s <= max_label; ++s) cohort_names_.push_back(std::to_string(s));
  }
  const auto cohorts = static_cast<int>(cohort_names_.size());
  if (max_label >= cohorts) throw DomainError("cohort label exceeds number of named cohorts");

  counts_.assign(static_cast<std::size_t>(cohorts), 0);
  for (const int s : labels_) ++counts_[static_cast<std::size_t>(s)];
  if (counts_[0] == 0) {
    throw SupportError("anchor cohort '" + cohort_names_[0] + "' has no subjects");
  }
  for (int s = 1; s < cohorts; ++s) {
    if (counts_[static_cast<std::size_t>(s)] == 0) {
      throw SupportError("cohort '" + cohort_names_[static_cast<std::size_t>(s)] +
                         "' has no subjects");
    }
  }
}

Eigen::MatrixXd Dataset::joint_features() const {
  Eigen::MatrixXd z(size(), p() + L());
  z << covariates_, outcomes_;
  return z;
}

Dataset Dataset::subset(std::span<const std::size_t> rows) const {
  const auto m = static_cast<Eigen::Index>(rows.size());
  std::vector<int> labels(rows.size());
  Eigen::MatrixXd x(m, p());
  Eigen::MatrixXd y(m, L());
  for (Eigen::Index i = 0; i < m; ++i) {
    const auto r = rows[static_cast<std::size_t>(i)];
    if (r >= labels_.size()) throw ShapeError("subset row index out of range");
    labels[static_cast<std::size_t>(i)] = labels_[r];
    x.row(i) = covariates_.row(static_cast<Eigen::Index>(r));
    y.row(i) = outcomes_.row(static_cast<Eigen::Index>(r));
  }
  return Dataset(std::move(labels), std::move(x), std::move(y), covariate_names_, outcome_names_,
                 cohort_names_, categoricals_);
}

Eigen::Index Dataset::outcome_index(const std::string& name) const {
  const auto it = std::find(outcome_names_.begin(), outcome_names_.end(), name);
  if (it == outcome_names_.end()) throw SpecError("unknown outcome '" + name + "'");
  return it - outcome_names_.begin();
}

Eigen::Index Dataset::covariate_index(const std::string& name) const {
  const auto it = std::find(covariate_names_.begin(), covariate_names_.end(), name);
  if (it == covariate_names_.end()) throw SpecError("unknown covariate '" + name + "'");
  return it - covariate_names_.begin();
}

Eigen::VectorXd Dataset::subgroup_indicator(const std::string& covariate,
                                            const std::string& value) const {
  for (const auto& cat : categoricals_) {
    if (cat.name != covariate) continue;
    const auto it = std::find(cat.levels.begin(), cat.levels.end(), value);
    if (it == cat.levels.end()) {
      throw SpecError("covariate '" + covariate + "' has no category '" + value + "'");
    }
    const auto level = it - cat.levels.begin();
    if (level > 0) return covariates_.col(cat.dummy_columns[static_cast<std::size_t>(level - 1)]);
    Eigen::VectorXd ind = Eigen::VectorXd::Ones(size());
    for (const auto c : cat.dummy_columns) ind -= covariates_.col(c);
    return ind;
  }
  const Eigen::Index col = covariate_index(covariate);
  const auto v = parse_double(value);
  if (!v) throw SpecError("subgroup value '" + value + "' for numeric covariate is not a number");
  return (covariates_.col(col).array() == *v).cast<double>().matrix();
}

std::vector<std::string> Dataset::subgroup_levels(const std::string& covariate) const {
  for (const auto& cat : categoricals_) {
    if (cat.name == covariate) return cat.levels;
  }
  const Eigen::Index col = covariate_index(covariate);
  std::set<double> values(covariates_.col(col).data(), covariates_.col(col).data() + size());
  std::vector<std::string> out;
  for (const double v : values) out.push_back(format_level(v));
  return out;
}

bool Dataset::operator==(const Dataset& o) const {
  if (labels_ != o.labels_ || covariate_names_ != o.covariate_names_ ||
      outcome_names_ != o.outcome_names_ || cohort_names_ != o.cohort_names_) {
    return false;
  }
  if (categoricals_.size() != o.categoricals_.size()) return false;
  for (std::size_t k = 0; k < categoricals_.size(); ++k) {
    const auto& a = categoricals_[k];
    const auto& b = o.categoricals_[k];
    if (a.name != b.name || a.levels != b.levels || a.dummy_columns != b.dummy_columns) return false;
  }
  return covariates_ == o.covariates_ && outcomes_ == o.outcomes_;
}

PrevalenceVector cohort_prevalences(std::span<const int> labels, int num_cohorts) {
  PrevalenceVector prev;
  prev.total = labels.size();
  prev.counts.assign(static_cast<std::size_t>(num_cohorts), 0);
  for (const int s : labels) {
    if (s < 0 || s >= num_cohorts) throw DomainError("cohort label out of range");
    ++prev.counts[static_cast<std::size_t>(s)];
  }
  prev.pi_hat.resize(num_cohorts);
  for (int s = 0; s < num_cohorts; ++s) {
    const auto ns = prev.counts[static_cast<std::size_t>(s)];
    if (ns == 0) throw SupportError("cohort " + std::to_string(s) + " has no subjects");
    prev.pi_hat(s) = static_cast<double>(ns) / static_cast<double>(prev.total);
  }
  return prev;
}

PrevalenceVector cohort_prevalences(const Dataset& ds) {
  return cohort_prevalences(ds.labels(), ds.num_cohorts());
}

LoadResult load_dataset(std::istream& in, const Schema& schema) {
  if (schema.label_column.empty()) throw SchemaError("schema does not name a label column");
  if (schema.covariates.empty()) throw SchemaError("schema names no covariate columns");
  if (schema.outcomes.empty()) throw SchemaError("schema names no outcome columns");

  std::string header_line;
  if (!std::getline(in, header_line)) throw SchemaError("input has no header row");
  char delim = schema.delimiter;
  if (delim == '\0') {
    delim = (header_line.find('\t') != std::string::npos &&
             header_line.find(',') == std::string::npos)
                ? '\t'
                : ',';
  }
  const auto header = split_line(header_line, delim);
  std::unordered_map<std::string, std::size_t> column;
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (!column.emplace(header[c], c).second) {
      throw SchemaError("duplicate column '" + header[c] + "' in header");
    }
  }
  auto require = [&](const std::string& name) {
    const auto it = column.find(name);
    if (it == column.end()) throw SchemaError("missing required column '" + name + "'");
    return it->second;
  };

  const std::size_t label_col = require(schema.label_column);
  const std::set<std::string> categorical(schema.categorical.begin(), schema.categorical.end());
  for (const auto& c : schema.categorical) {
    if (std::find(schema.covariates.begin(), schema.covariates.end(), c) ==
        schema.covariates.end()) {
      throw SchemaError("categorical column '" + c + "' is not listed as a covariate");
    }
  }
  std::vector<std::size_t> cov_cols;
  std::vector<std::size_t> out_cols;
  for (const auto& name : schema.covariates) {
    if (name == schema.label_column) throw SchemaError("label column used as covariate");
    cov_cols.push_back(require(name));
  }
  for (const auto& name : schema.outcomes) {
    if (name == schema.label_column) throw SchemaError("label column used as outcome");
    out_cols.push_back(require(name));
  }

  const std::size_t p_raw = cov_cols.size();
  const std::size_t L = out_cols.size();

  std::vector<std::string> raw_labels;
  std::set<std::string> dropped_labels;
  std::vector<std::vector<double>> numeric_cov;    // per kept row
  std::vector<std::vector<std::string>> cat_cells;  // per kept row, per categorical covariate
  std::vector<std::vector<double>> out_rows;
  LoadReport report;

  std::string line;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    ++row;
    ++report.rows_read;
    const auto cells = split_line(line, delim);
    if (cells.size() != header.size()) {
      throw ParseError("row " + std::to_string(row) + " has " + std::to_string(cells.size()) +
                           " fields, header has " + std::to_string(header.size()),
                       row);
    }

    bool missing = is_missing(cells[label_col]);
    std::vector<double> xs(p_raw, 0.0);
    std::vector<std::string> cats;
    for (std::size_t j = 0; j < p_raw; ++j) {
      const auto& cell = cells[cov_cols[j]];
      if (is_missing(cell)) {
        missing = true;
        continue;
      }
      if (categorical.count(schema.covariates[j])) {
        cats.push_back(cell);
        continue;
      }
      const auto v = parse_double(cell);
      if (!v) {
        throw ParseError("row " + std::to_string(row) + ": non-numeric value '" + cell +
                             "' in covariate '" + schema.covariates[j] + "'",
                         row);
      }
      xs[j] = *v;
    }
    std::vector<double> ys(L, 0.0);
    for (std::size_t l = 0; l < L; ++l) {
      const auto& cell = cells[out_cols[l]];
      if (is_missing(cell)) {
        missing = true;
        continue;
      }
      const auto v = parse_double(cell);
      if (!v) {
        throw ParseError("row " + std::to_string(row) + ": non-numeric value '" + cell +
                             "' in outcome '" + schema.outcomes[l] + "'",
                         row);
      }
      ys[l] = *v;
    }
    if (missing) {
      if (schema.missing == MissingPolicy::fail) {
        throw ParseError("row " + std::to_string(row) + " has a missing value", row);
      }
      ++report.rows_dropped;
      if (!is_missing(cells[label_col])) dropped_labels.insert(canonical_label(cells[label_col]));
      continue;
    }
    raw_labels.push_back(canonical_label(cells[label_col]));
    numeric_cov.push_back(std::move(xs));
    cat_cells.push_back(std::move(cats));
    out_rows.push_back(std::move(ys));
  }

  // Cohort label mapping: anchor -> 0, the rest in numeric or lexicographic order.
  const std::string anchor = canonical_label(schema.anchor_label);
  std::set<std::string> distinct(raw_labels.begin(), raw_labels.end());
  if (!distinct.count(anchor)) {
    throw SupportError("anchor cohort '" + schema.anchor_label + "' has no subjects" +
                       (report.rows_dropped ? " after dropping rows with missing values" : ""));
  }
  for (const auto& d : dropped_labels) {
    if (!distinct.count(d)) {
      throw SupportError("cohort '" + d + "' has no subjects after dropping rows with missing values");
    }
  }
  distinct.erase(anchor);
  std::vector<std::string> others(distinct.begin(), distinct.end());
  const bool all_integer = std::all_of(others.begin(), others.end(),
                                       [](const std::string& s) { return parse_integer(s).has_value(); });
  if (all_integer) {
    std::sort(others.begin(), others.end(), [](const std::string& a, const std::string& b) {
      return *parse_integer(a) < *parse_integer(b);
    });
  }
  std::vector<std::string> cohort_names{anchor};
  cohort_names.insert(cohort_names.end(), others.begin(), others.end());
  std::map<std::string, int> label_index;
  for (std::size_t s = 0; s < cohort_names.size(); ++s) {
    label_index[cohort_names[s]] = static_cast<int>(s);
  }

  // Categorical levels and the expanded column layout (dummies in place).
  std::vector<std::vector<std::string>> levels;
  {
    std::size_t k = 0;
    for (std::size_t j = 0; j < p_raw; ++j) {
      if (!categorical.count(schema.covariates[j])) continue;
      std::set<std::string> lv;
      for (const auto& r : cat_cells) lv.insert(r[k]);
      levels.emplace_back(lv.begin(), lv.end());
      ++k;
    }
  }
  std::vector<std::string> cov_names;
  std::vector<CategoricalCovariate> cats;
  {
    std::size_t k = 0;
    for (std::size_t j = 0; j < p_raw; ++j) {
      const auto& name = schema.covariates[j];
      if (!categorical.count(name)) {
        cov_names.push_back(name);
        continue;
      }
      CategoricalCovariate cat{name, levels[k], {}};
      for (std::size_t lv = 1; lv < cat.levels.size(); ++lv) {
        cat.dummy_columns.push_back(static_cast<Eigen::Index>(cov_names.size()));
        cov_names.push_back(name + "=" + cat.levels[lv]);
      }
      cats.push_back(std::move(cat));
      ++k;
    }
  }

  const auto n = static_cast<Eigen::Index>(raw_labels.size());
  std::vector<int> labels(raw_labels.size());
  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(n, static_cast<Eigen::Index>(cov_names.size()));
  Eigen::MatrixXd y(n, static_cast<Eigen::Index>(L));
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto ui = static_cast<std::size_t>(i);
    labels[ui] = label_index.at(raw_labels[ui]);
    Eigen::Index col = 0;
    std::size_t k = 0;
    for (std::size_t j = 0; j < p_raw; ++j) {
      if (!categorical.count(schema.covariates[j])) {
        x(i, col++) = numeric_cov[ui][j];
        continue;
      }
      const auto& lv = levels[k];
      const auto level = std::find(lv.begin(), lv.end(), cat_cells[ui][k]) - lv.begin();
      if (level > 0) x(i, col + level - 1) = 1.0;
      col += static_cast<Eigen::Index>(lv.size()) - 1;
      ++k;
    }
    for (std::size_t l = 0; l < L; ++l) y(i, static_cast<Eigen::Index>(l)) = out_rows[ui][l];
  }

  return LoadResult{Dataset(std::move(labels), std::move(x), std::move(y), std::move(cov_names),
                            schema.outcomes, std::move(cohort_names), std::move(cats)),
                    report};
}

LoadResult load_dataset(const std::filesystem::path& path, const Schema& schema) {
  std::ifstream in(path);
  if (!in) throw SchemaError("cannot open input file '" + path.string() + "'");
  return load_dataset(in, schema);
}

LoadResult load_dataset(const std::vector<std::filesystem::path>& paths, const Schema& schema) {
  if (paths.empty()) throw SchemaError("no input files given");
  if (paths.size() == 1) return load_dataset(paths.front(), schema);
  std::stringstream merged;
  std::string first_header;
  for (const auto& path : paths) {
    std::ifstream in(path);
    if (!in) throw SchemaError("cannot open input file '" + path.string() + "'");
    std::string header;
    std::getline(in, header);
    if (first_header.empty()) {
      first_header = header;
      merged << header << '\n';
    } else if (trim(header) != trim(first_header)) {
      throw SchemaError("input file '" + path.string() + "' has a different header");
    }
    merged << in.rdbuf() << '\n';
  }
  return load_dataset(merged, schema);
}

void write_dataset(std::ostream& out, const Dataset& ds, char delimiter) {
  const auto schema = schema_for(ds);
  std::map<Eigen::Index, const CategoricalCovariate*> first_dummy;
  std::set<Eigen::Index> dummy;
  for (const auto& cat : ds.categoricals()) {
    if (!cat.dummy_columns.empty()) first_dummy[cat.dummy_columns.front()] = &cat;
    dummy.insert(cat.dummy_columns.begin(), cat.dummy_columns.end());
  }

  out << schema.label_column;
  for (const auto& c : schema.covariates) out << delimiter << c;
  for (const auto& c : schema.outcomes) out << delimiter << c;
  out << '\n';
  for (Eigen::Index i = 0; i < ds.size(); ++i) {
    out << ds.cohort_names()[static_cast<std::size_t>(ds.labels()[static_cast<std::size_t>(i)])];
    for (Eigen::Index j = 0; j < ds.p(); ++j) {
      if (const auto it = first_dummy.find(j); it != first_dummy.end()) {
        const auto& cat = *it->second;
        std::size_t level = 0;
        for (std::size_t k = 0; k < cat.dummy_columns.size(); ++k) {
          if (ds.covariates()(i, cat.dummy_columns[k]) == 1.0) level = k + 1;
        }
        out << delimiter << cat.levels[level];
      } else if (!dummy.count(j)) {
        out << delimiter << format_double(ds.covariates()(i, j));
      }
    }
    for (Eigen::Index l = 0; l < ds.L(); ++l) out << delimiter << format_double(ds.outcomes()(i, l));
    out << '\n';
  }
}

Schema schema_for(const Dataset& ds, const std::string& label_column) {
  Schema schema;
  schema.label_column = label_column;
  schema.anchor_label = ds.cohort_names().front();
  std::map<Eigen::Index, const CategoricalCovariate*> first_dummy;
  std::set<Eigen::Index> dummy;
  for (const auto& cat : ds.categoricals()) {
    if (!cat.dummy_columns.empty()) first_dummy[cat.dummy_columns.front()] = &cat;
    dummy.insert(cat.dummy_columns.begin(), cat.dummy_columns.end());
  }
  for (Eigen::Index j = 0; j < ds.p(); ++j) {
    if (const auto it = first_dummy.find(j); it != first_dummy.end()) {
      schema.covariates.push_back(it->second->name);
      schema.categorical.push_back(it->second->name);
    } else if (!dummy.count(j)) {
      schema.covariates.push_back(ds.covariate_names()[static_cast<std::size_t>(j)]);
    }
  }
  schema.outcomes = ds.outcome_names();
  return schema;
}

nlohmann::json dataset_summary(const Dataset& ds) {
  const auto prev = cohort_prevalences(ds);
  nlohmann::json cohorts = nlohmann::json::array();
  for (int s = 0; s < ds.num_cohorts(); ++s) {
    cohorts.push_back({{"index", s},
                       {"label", ds.cohort_names()[static_cast<std::size_t>(s)]},
                       {"count", prev.counts[static_cast<std::size_t>(s)]},
                       {"prevalence", prev.pi_hat(s)}});
  }
  return {{"N", ds.size()},
          {"J", ds.J()},
          {"p", ds.p()},
          {"L", ds.L()},
          {"anchor", ds.cohort_names().front()},
          {"covariates", ds.covariate_names()},
          {"outcomes", ds.outcome_names()},
          {"cohorts", cohorts}};
}

}  // namespace translate
