#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <stdexcept>
#include <vector>

#include "rde/rng.hpp"

namespace rde {

inline double mean(const std::vector<double>& x) {
  if (x.empty()) throw std::invalid_argument("mean: empty sample");
  double s = 0.0;
  for (double v : x) s += v;
  return s / static_cast<double>(x.size());
}

inline double sample_variance(const std::vector<double>& x) {
  if (x.size() < 2) return 0.0;
  const double m = mean(x);
  double s = 0.0;
  for (double v : x) s += (v - m) * (v - m);
  return s / static_cast<double>(x.size() - 1);
}

inline double stderr_of_mean(const std::vector<double>& x) {
  return std::sqrt(sample_variance(x) / static_cast<double>(x.size()));
}

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / 1.4142135623730950488); }

// Order-statistic quantile: smallest value with at least ceil(q*N) sample
// points at or below it.
inline double percentile(std::vector<double> values, double q) {
  if (values.empty()) throw std::invalid_argument("percentile: empty sample");
  if (q < 0.0 || q > 1.0) throw std::invalid_argument("percentile: q in [0,1]");
  std::sort(values.begin(), values.end());
  const std::size_t rank =
      std::min(values.size() - 1,
               static_cast<std::size_t>(std::max(0.0, std::ceil(q * values.size()) - 1.0)));
  return values[rank];
}

// One-sample Kolmogorov-Smirnov statistic against a reference CDF evaluated
// as a right-continuous function. Convention (matters only for references
// with atoms): both one-sided gaps at each sample point are compared against
// F(x), i.e. D = max_i max(|i/m - F(x_i)|, |(i-1)/m - F(x_i)|). For a
// continuous reference this is the classical statistic; for sample {0}
// against a point mass at 0 it yields 1.
inline double ks_statistic(std::vector<double> sample, const std::function<double(double)>& cdf) {
  if (sample.empty()) throw std::invalid_argument("ks_statistic: empty sample");
  std::sort(sample.begin(), sample.end());
  const double m = static_cast<double>(sample.size());
  double d = 0.0;
  for (std::size_t i = 0; i < sample.size(); ++i) {
    const double f = cdf(sample[i]);
    d = std::max({d, std::fabs((static_cast<double>(i) + 1.0) / m - f),
                  std::fabs(static_cast<double>(i) / m - f)});
  }
  return d;
}

// Two-sample variant: sup over the pooled points of |F_a - F_b| with both
// empirical CDFs right-continuous. Identical multisets give 0.
inline double ks_statistic_two_sample(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) throw std::invalid_argument("ks_statistic: empty sample");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  double d = 0.0;
  std::size_t i = 0, j = 0;
  while (i < a.size() || j < b.size()) {
    const double x = (j == b.size() || (i < a.size() && a[i] <= b[j])) ? a[i] : b[j];
    while (i < a.size() && a[i] <= x) ++i;
    while (j < b.size() && b[j] <= x) ++j;
    d = std::max(d, std::fabs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  return d;
}

// Bootstrap standard error of a statistic of one sample.
inline double bootstrap_stderr(const std::vector<double>& sample,
                               const std::function<double(const std::vector<double>&)>& statistic,
                               std::size_t replicates, Seed seed) {
  if (replicates < 2) throw std::invalid_argument("bootstrap_stderr: need >= 2 replicates");
  std::vector<double> values(replicates);
  std::vector<double> resampled(sample.size());
  for (std::size_t b = 0; b < replicates; ++b) {
    Rng rng(seed.child(b));
    for (std::size_t i = 0; i < sample.size(); ++i)
      resampled[i] = sample[rng.uniform_index(sample.size())];
    values[b] = statistic(resampled);
  }
  return std::sqrt(sample_variance(values));
}

}  // namespace rde
