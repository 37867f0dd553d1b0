#include "translate/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace translate {

std::string format_number(double v, int precision) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", precision, v);
  return buf;
}

std::string delimited_row(const std::vector<std::string>& cells, char delimiter) {
  std::string out;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i) out += delimiter;
    const auto& c = cells[i];
    if (c.find(delimiter) != std::string::npos || c.find('"') != std::string::npos) {
      out += '"';
      for (const char ch : c) {
        if (ch == '"') out += '"';
        out += ch;
      }
      out += '"';
    } else {
      out += c;
    }
  }
  return out;
}

std::string aligned_table(const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> width;
  for (const auto& row : rows) {
    if (width.size() < row.size()) width.resize(row.size(), 0);
    for (std::size_t j = 0; j < row.size(); ++j) width[j] = std::max(width[j], row[j].size());
  }
  std::ostringstream os;
  for (const auto& row : rows) {
    std::string line;
    for (std::size_t j = 0; j < row.size(); ++j) {
      if (j) line += "  ";
      line += row[j];
      if (j + 1 < row.size()) line.append(width[j] - row[j].size(), ' ');
    }
    os << line << '\n';
  }
  return os.str();
}

nlohmann::json to_json(const EssReport& r) {
  nlohmann::json cohorts = nlohmann::json::array();
  for (std::size_t s = 0; s < r.cohort_counts.size(); ++s) {
    const auto i = static_cast<Eigen::Index>(s);
    cohorts.push_back({{"label", s < r.cohort_names.size() ? r.cohort_names[s] : std::to_string(s)},
                       {"N_s", r.cohort_counts[s]},
                       {"Q_s", i < r.cohort_ess.size() ? r.cohort_ess(i) : 0.0},
                       {"gamma_s", i < r.gamma.gamma.size() ? r.gamma.gamma(i) : 0.0}});
  }
  const double n = static_cast<double>(r.total());
  return nlohmann::json{{"method", r.method_tag},
                        {"N", r.total()},
                        {"cohorts", cohorts},
                        {"composite_ess_empirical", r.composite_ess_empirical},
                        {"composite_ess_closed_form", r.composite_ess_closed_form},
                        {"ess_percent_of_N", n > 0 ? 100.0 * r.composite_ess_empirical / n : 0.0},
                        {"prevalence_plugin", "pi_s = pi_hat_s"},
                        {"warnings", r.warnings}};
}

nlohmann::json to_json(const FunctionalEstimate& e, const Dataset& ds) {
  return nlohmann::json{
      {"feature", e.feature.label(ds)},
      {"kind", to_string(e.feature.kind)},
      {"method", e.weight_method},
      {"values", std::vector<double>(e.values.data(), e.values.data() + e.values.size())},
      {"lambda_hat", std::vector<double>(e.lambda_hat.data(), e.lambda_hat.data() + e.lambda_hat.size())}};
}

std::string config_hash(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace translate
