#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "translate/dataset.hpp"
#include "translate/rng.hpp"

namespace testing {

// J+1 cohorts of random size in [min_size, max_size]; cohort s has covariate
// and outcome means shifted by shift * s.
inline translate::Dataset random_dataset(translate::CounterRng& rng, int cohorts, Eigen::Index p, Eigen::Index L,
                                         int min_size = 20, int max_size = 80, double shift = 0.5) {
  std::vector<int> labels;
  for (int s = 0; s < cohorts; ++s) {
    const auto n = min_size + static_cast<int>(rng.below(static_cast<std::uint64_t>(max_size - min_size + 1)));
    for (int i = 0; i < n; ++i) labels.push_back(s);
  }
  const auto n = static_cast<Eigen::Index>(labels.size());
  Eigen::MatrixXd x(n, p);
  Eigen::MatrixXd y(n, L);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double s = labels[static_cast<std::size_t>(i)];
    double sum = 0.0;
    for (Eigen::Index j = 0; j < p; ++j) {
      x(i, j) = rng.normal(shift * s, 1.0);
      sum += x(i, j);
    }
    for (Eigen::Index l = 0; l < L; ++l) y(i, l) = 0.3 * sum + rng.normal(shift * s, 1.0 + 0.1 * s);
  }
  std::vector<std::string> xn, yn;
  for (Eigen::Index j = 0; j < p; ++j) xn.push_back("x" + std::to_string(j + 1));
  for (Eigen::Index l = 0; l < L; ++l) yn.push_back("y" + std::to_string(l + 1));
  return translate::Dataset(std::move(labels), std::move(x), std::move(y), xn, yn);
}

inline double direct_mean(const std::vector<double>& v) {
  double s = 0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

// Population (divide-by-n) moments, computed with plain loops.
inline double direct_cov(const std::vector<double>& a, const std::vector<double>& b) {
  const double ma = direct_mean(a), mb = direct_mean(b);
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - ma) * (b[i] - mb);
  return s / static_cast<double>(a.size());
}

inline std::vector<double> column(const Eigen::MatrixXd& m, Eigen::Index c, const std::vector<std::size_t>& rows) {
  std::vector<double> out;
  for (auto r : rows) out.push_back(m(static_cast<Eigen::Index>(r), c));
  return out;
}

inline std::vector<std::size_t> all_rows(Eigen::Index n) {
  std::vector<std::size_t> out(static_cast<std::size_t>(n));
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = i;
  return out;
}

inline std::vector<std::size_t> cohort_rows(const translate::Dataset& ds, int s) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < static_cast<std::size_t>(ds.size()); ++i) {
    if (ds.labels()[i] == s) out.push_back(i);
  }
  return out;
}

// Order-statistic quantile (nearest rank).
inline double quantile_of(const Eigen::ArrayXd& v, double q) {
  std::vector<double> s(v.data(), v.data() + v.size());
  std::sort(s.begin(), s.end());
  const auto k = static_cast<std::size_t>(std::ceil(q * static_cast<double>(s.size()))) - 1;
  return s[std::min(k, s.size() - 1)];
}

inline double sample_skewness(const std::vector<double>& v) {
  const double m = direct_mean(v);
  double m2 = 0, m3 = 0;
  for (double x : v) {
    m2 += (x - m) * (x - m);
    m3 += (x - m) * (x - m) * (x - m);
  }
  m2 /= static_cast<double>(v.size());
  m3 /= static_cast<double>(v.size());
  return m3 / std::pow(m2, 1.5);
}

inline double sample_excess_kurtosis(const std::vector<double>& v) {
  const double m = direct_mean(v);
  double m2 = 0, m4 = 0;
  for (double x : v) {
    const double d2 = (x - m) * (x - m);
    m2 += d2;
    m4 += d2 * d2;
  }
  m2 /= static_cast<double>(v.size());
  m4 /= static_cast<double>(v.size());
  return m4 / (m2 * m2) - 3.0;
}

}  // namespace testing
