#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "rde/assignment.hpp"
#include "rde/ensemble.hpp"
#include "rde/parallel.hpp"
#include "rde/path.hpp"
#include "rde/stats.hpp"

namespace rde {

enum class DistanceEstimator { kExact1d, kAssignment, kPerMarginalBound };

inline const char* to_string(DistanceEstimator e) {
  switch (e) {
    case DistanceEstimator::kExact1d:
      return "exact_1d";
    case DistanceEstimator::kAssignment:
      return "assignment";
    case DistanceEstimator::kPerMarginalBound:
      return "per_marginal_bound";
  }
  return "?";
}

class SizeCapError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct DistanceReport {
  double value = 0.0;
  DistanceEstimator estimator = DistanceEstimator::kAssignment;
  double p_or_s = 2.0;
  std::vector<double> grid;  // empty for path-level distances
  std::size_t size_a = 0, size_b = 0;
  double stderr_value = 0.0;
  std::size_t bootstrap_replicates = 0;
  bool chunked = false;  // chunked averaging biases upward; flagged
  std::size_t chunk_size = 0;
  std::size_t chunks = 0;
  bool lower_bound = false;  // per-marginal estimator reports a lower bound

  nlohmann::json to_json() const {
    nlohmann::json j{{"value", value},
                     {"estimator", std::string(rde::to_string(estimator))},
                     {"p_or_s", p_or_s},
                     {"sizes", {size_a, size_b}},
                     {"stderr", stderr_value},
                     {"bootstrap", bootstrap_replicates},
                     {"chunked", chunked}};
    if (!grid.empty()) j["grid"] = grid;
    if (chunked) {
      j["chunk_size"] = chunk_size;
      j["chunks"] = chunks;
    }
    if (lower_bound) j["lower_bound"] = true;
    return j;
  }
};

// Exact empirical minimal l_p between two equally sized real samples:
// sorted pairing is the optimal coupling for convex costs on the line.
inline double wasserstein_1d(std::vector<double> a, std::vector<double> b, double p) {
  if (a.empty() || b.empty()) throw std::invalid_argument("wasserstein_1d: empty sample");
  if (a.size() != b.size())
    throw std::invalid_argument("wasserstein_1d: sizes differ; resample to equal sizes");
  if (p < 1.0) throw std::invalid_argument("wasserstein_1d: p must be >= 1");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::pow(std::fabs(a[i] - b[i]), p);
  return std::pow(s / static_cast<double>(a.size()), 1.0 / p);
}

// Row-major m x k matrix of real vectors (grid projections of an ensemble,
// or any point cloud the assignment estimator runs on).
struct Matrix {
  std::size_t rows = 0, cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}
  double* row(std::size_t i) { return data.data() + i * cols; }
  const double* row(std::size_t i) const { return data.data() + i * cols; }
};

struct DistanceOptions {
  std::size_t assignment_cap = 2048;  // largest single assignment problem
  std::size_t chunk_size = 0;         // 0: reject above cap; else chunked averaging
  std::size_t bootstrap_replicates = 0;
  Seed bootstrap_seed{0xb00757ULL};
  unsigned threads = 1;
};

namespace detail {

// Mean optimal-assignment cost (cost already raised to the p-th power),
// chunked into near-equal consecutive blocks when requested. Returns the
// per-block values so callers can attach a between-block spread.
template <class CostFn>
std::vector<double> assignment_block_costs(std::size_t m, const DistanceOptions& opt,
                                           CostFn&& cost_into, std::size_t* chunk_size_out) {
  std::size_t block = m;
  if (m > opt.assignment_cap) {
    if (opt.chunk_size == 0)
      throw SizeCapError(
          "ensemble size " + std::to_string(m) + " exceeds the assignment cap " +
          std::to_string(opt.assignment_cap) +
          "; request chunked averaging (chunk_size > 0) to average independent blocks");
    block = std::min(opt.chunk_size, opt.assignment_cap);
  }
  const std::size_t n_blocks = (m + block - 1) / block;
  if (chunk_size_out) *chunk_size_out = block;
  std::vector<double> block_costs(n_blocks, 0.0);
  parallel_for(n_blocks, opt.threads, [&](std::size_t bi) {
    const std::size_t lo = m * bi / n_blocks;
    const std::size_t hi = m * (bi + 1) / n_blocks;
    const std::size_t bm = hi - lo;
    std::vector<double> cost(bm * bm);
    cost_into(lo, hi, cost);
    block_costs[bi] = solve_assignment(cost, bm) / static_cast<double>(bm);
  });
  return block_costs;
}

inline double finish_min_lp(const std::vector<double>& block_costs, double p,
                            DistanceReport* report) {
  // Mean of block values (spec's chunked-averaging semantics); the exponent
  // follows the minimal l_p convention (1/p for p > 1, none for p <= 1).
  std::vector<double> block_values(block_costs.size());
  for (std::size_t i = 0; i < block_costs.size(); ++i)
    block_values[i] = p > 1.0 ? std::pow(block_costs[i], 1.0 / p) : block_costs[i];
  const double value = mean(block_values);
  if (report) {
    report->value = value;
    if (block_values.size() > 1) {
      report->chunked = true;
      report->chunks = block_values.size();
      report->stderr_value = stderr_of_mean(block_values);
    }
  }
  return value;
}

}  // namespace detail

// Empirical minimal l_p in path space with the sup-norm ground distance,
// computed by exact optimal assignment on |sup_norm(x_i - y_j)|^p. An
// upper-bound estimator of the population l_p (empirical measures).
inline DistanceReport path_lp_distance(const Ensemble& a, const Ensemble& b, double p,
                                       const DistanceOptions& opt = {}) {
  if (p < 1.0) throw std::invalid_argument("path_lp_distance: p must be >= 1");
  if (a.size() != b.size())
    throw std::invalid_argument("path_lp_distance: sizes differ; resample to equal sizes");
  DistanceReport report;
  report.estimator = DistanceEstimator::kAssignment;
  report.p_or_s = p;
  report.size_a = a.size();
  report.size_b = b.size();
  const auto cost_into = [&](std::size_t lo, std::size_t hi, std::vector<double>& cost) {
    const std::size_t bm = hi - lo;
    for (std::size_t i = 0; i < bm; ++i)
      for (std::size_t j = 0; j < bm; ++j)
        cost[i * bm + j] = std::pow(diff_sup_norm(a.samples[lo + i], b.samples[lo + j]), p);
  };
  std::size_t used_block = 0;
  const auto blocks = detail::assignment_block_costs(a.size(), opt, cost_into, &used_block);
  report.chunk_size = used_block;
  detail::finish_min_lp(blocks, p, &report);
  return report;
}

namespace detail {

// Internal minimal l_s on paths for any s > 0 (the public surface requires
// p >= 1; the zeta bound needs s <= 1 as well, where l_s carries no root).
inline double minimal_path_ls(const Ensemble& a, const Ensemble& b, double s,
                              const DistanceOptions& opt) {
  const auto cost_into = [&](std::size_t lo, std::size_t hi, std::vector<double>& cost) {
    const std::size_t bm = hi - lo;
    for (std::size_t i = 0; i < bm; ++i)
      for (std::size_t j = 0; j < bm; ++j)
        cost[i * bm + j] = std::pow(diff_sup_norm(a.samples[lo + i], b.samples[lo + j]), s);
  };
  const auto blocks = assignment_block_costs(a.size(), opt, cost_into, nullptr);
  return finish_min_lp(blocks, s, nullptr);
}

}  // namespace detail

// Computable surrogate of the Zolotarev distance between the two empirical
// measures: zeta_s = l_s for s <= 1, and for s > 1 the upper bound
//   (E||X||^s)^(1-1/s) + (E||Y||^s)^(1-1/s)) * l_s(X, Y)
// with empirical moments. An upper bound on the empirical-measure zeta_s,
// not the population value.
inline double zeta_upper_bound(const Ensemble& a, const Ensemble& b, const MetricOrder& order,
                               const DistanceOptions& opt = {}) {
  if (a.size() != b.size())
    throw std::invalid_argument("zeta_upper_bound: sizes differ; resample to equal sizes");
  const double s = order.s;
  const double ls = detail::minimal_path_ls(a, b, s, opt);
  if (s <= 1.0) return ls;
  double ma = 0.0, mb = 0.0;
  for (const Path& x : a.samples) ma += std::pow(sup_norm(x), s);
  for (const Path& y : b.samples) mb += std::pow(sup_norm(y), s);
  ma /= static_cast<double>(a.size());
  mb /= static_cast<double>(b.size());
  if (!std::isfinite(ma) || !std::isfinite(mb))
    throw std::domain_error("zeta_upper_bound: non-finite s-th moment estimate");
  const double w = std::pow(ma, 1.0 - 1.0 / s) + std::pow(mb, 1.0 - 1.0 / s);
  return w * ls;
}

inline Matrix grid_eval(const Ensemble& e, const std::vector<double>& times) {
  Matrix m(e.size(), times.size());
  for (std::size_t i = 0; i < e.size(); ++i)
    for (std::size_t d = 0; d < times.size(); ++d)
      m.row(i)[d] = e.samples[i].eval(times[d]);
  return m;
}

// Empirical p-Wasserstein (Euclidean cost) between two equally sized point
// clouds: exact sorted pairing in one dimension, exact optimal assignment
// otherwise, chunked averaging above the cap.
inline DistanceReport point_cloud_distance(const Matrix& a, const Matrix& b, double p,
                                           const DistanceOptions& opt = {}) {
  if (a.rows == 0 || b.rows == 0) throw std::invalid_argument("distance: empty ensemble");
  if (a.rows != b.rows)
    throw std::invalid_argument("distance: sizes differ; resample to equal sizes");
  if (a.cols != b.cols) throw std::invalid_argument("distance: dimension mismatch");
  if (p < 1.0) throw std::invalid_argument("distance: p must be >= 1");
  DistanceReport report;
  report.p_or_s = p;
  report.size_a = a.rows;
  report.size_b = b.rows;

  if (a.cols == 1) {
    report.estimator = DistanceEstimator::kExact1d;
    report.value = wasserstein_1d(a.data, b.data, p);
    return report;
  }

  report.estimator = DistanceEstimator::kAssignment;
  const std::size_t k = a.cols;
  const auto cost_into = [&](std::size_t lo, std::size_t hi, std::vector<double>& cost) {
    const std::size_t bm = hi - lo;
    for (std::size_t i = 0; i < bm; ++i) {
      const double* xi = a.row(lo + i);
      for (std::size_t j = 0; j < bm; ++j) {
        const double* yj = b.row(lo + j);
        double sq = 0.0;
        for (std::size_t d = 0; d < k; ++d) {
          const double diff = xi[d] - yj[d];
          sq += diff * diff;
        }
        cost[i * bm + j] = (p == 2.0) ? sq : std::pow(sq, 0.5 * p);
      }
    }
  };
  std::size_t used_block = 0;
  const auto blocks = detail::assignment_block_costs(a.rows, opt, cost_into, &used_block);
  report.chunk_size = used_block;
  detail::finish_min_lp(blocks, p, &report);
  return report;
}

// Attaches a bootstrap standard error to a point-cloud distance: replicates
// resample both clouds with replacement (independently) and recompute the
// estimator with identical settings.
inline DistanceReport with_bootstrap_stderr(const Matrix& a, const Matrix& b, double p,
                                            DistanceOptions opt) {
  const std::size_t replicates = opt.bootstrap_replicates;
  DistanceReport report = point_cloud_distance(a, b, p, opt);
  if (replicates < 2) return report;
  std::vector<double> values(replicates);
  opt.bootstrap_replicates = 0;
  const unsigned threads = opt.threads;
  opt.threads = 1;  // parallelize across replicates instead
  parallel_for(replicates, threads, [&](std::size_t r) {
    Rng rng(opt.bootstrap_seed.child(r));
    Matrix ra(a.rows, a.cols), rb(b.rows, b.cols);
    for (std::size_t i = 0; i < a.rows; ++i) {
      const std::size_t ia = rng.uniform_index(a.rows);
      const std::size_t ib = rng.uniform_index(b.rows);
      std::copy(a.row(ia), a.row(ia) + a.cols, ra.row(i));
      std::copy(b.row(ib), b.row(ib) + b.cols, rb.row(i));
    }
    values[r] = point_cloud_distance(ra, rb, p, opt).value;
  });
  report.stderr_value = std::sqrt(sample_variance(values));
  report.bootstrap_replicates = replicates;
  return report;
}

// Finite-dimensional-distribution distance: evaluate both ensembles on the
// grid and transport the k-dimensional projections.
inline DistanceReport fdd_distance(const Ensemble& a, const Ensemble& b,
                                   const std::vector<double>& times, double p,
                                   const DistanceOptions& opt = {}) {
  if (times.empty()) throw std::invalid_argument("fdd_distance: empty grid");
  for (double t : times)
    if (t < 0.0 || t > 1.0) throw std::invalid_argument("fdd_distance: grid point outside [0,1]");
  const Matrix xa = grid_eval(a, times);
  const Matrix xb = grid_eval(b, times);
  DistanceReport report = opt.bootstrap_replicates >= 2
                              ? with_bootstrap_stderr(xa, xb, p, opt)
                              : point_cloud_distance(xa, xb, p, opt);
  report.grid = times;
  return report;
}

// Cheap per-marginal lower bound: for p = 2, sqrt(sum_d W_2(marginal_d)^2);
// otherwise max_d W_p(marginal_d). Both are valid lower bounds of the joint
// Euclidean W_p.
inline DistanceReport per_marginal_bound(const Matrix& a, const Matrix& b, double p) {
  if (a.rows != b.rows || a.cols != b.cols)
    throw std::invalid_argument("per_marginal_bound: shape mismatch");
  DistanceReport report;
  report.estimator = DistanceEstimator::kPerMarginalBound;
  report.p_or_s = p;
  report.size_a = a.rows;
  report.size_b = b.rows;
  report.lower_bound = true;
  double acc = 0.0;
  for (std::size_t d = 0; d < a.cols; ++d) {
    std::vector<double> xa(a.rows), xb(b.rows);
    for (std::size_t i = 0; i < a.rows; ++i) {
      xa[i] = a.row(i)[d];
      xb[i] = b.row(i)[d];
    }
    const double w = wasserstein_1d(std::move(xa), std::move(xb), p);
    if (p == 2.0)
      acc += w * w;
    else
      acc = std::max(acc, w);
  }
  report.value = (p == 2.0) ? std::sqrt(acc) : acc;
  return report;
}

// Empirical checks of the moment-matching conditions behind finiteness of
// zeta_s: finite s-th sup moments, mean equality on the grid (for s > 1) and
// covariance equality on the grid (for s > 2), each with 3-standard-error
// bands.
struct MomentCondition {
  bool required = false;
  bool passed = true;
  double max_gap = 0.0;
  double max_band = 0.0;
};

struct MomentMatchReport {
  double sup_moment_a = 0.0, sup_moment_b = 0.0;
  MomentCondition finiteness;  // zeil1
  MomentCondition mean_match;  // zeil2
  MomentCondition cov_match;   // zeil3
  double max_mean_gap = 0.0;
  double max_cov_gap = 0.0;

  bool all_required_pass() const {
    return (!finiteness.required || finiteness.passed) &&
           (!mean_match.required || mean_match.passed) &&
           (!cov_match.required || cov_match.passed);
  }

  nlohmann::json to_json() const {
    const auto cond = [](const MomentCondition& c) {
      return nlohmann::json{{"required", c.required},
                            {"passed", c.passed},
                            {"max_gap", c.max_gap},
                            {"max_band", c.max_band}};
    };
    return nlohmann::json{{"sup_moment_a", sup_moment_a}, {"sup_moment_b", sup_moment_b},
                          {"zeil1", cond(finiteness)},   {"zeil2", cond(mean_match)},
                          {"zeil3", cond(cov_match)},    {"max_mean_gap", max_mean_gap},
                          {"max_cov_gap", max_cov_gap}};
  }
};

inline MomentMatchReport moment_match(const Ensemble& a, const Ensemble& b,
                                      const MetricOrder& order, const std::vector<double>& times,
                                      double tol = 0.0) {
  if (times.empty()) throw std::invalid_argument("moment_match: empty grid");
  MomentMatchReport report;
  const std::size_t ma = a.size(), mb = b.size();

  for (const Path& x : a.samples) report.sup_moment_a += std::pow(sup_norm(x), order.s);
  for (const Path& y : b.samples) report.sup_moment_b += std::pow(sup_norm(y), order.s);
  report.sup_moment_a /= static_cast<double>(ma);
  report.sup_moment_b /= static_cast<double>(mb);
  report.finiteness.required = true;
  report.finiteness.passed =
      std::isfinite(report.sup_moment_a) && std::isfinite(report.sup_moment_b);

  const Matrix xa = grid_eval(a, times);
  const Matrix xb = grid_eval(b, times);
  const std::size_t k = times.size();

  std::vector<double> mean_a(k, 0.0), mean_b(k, 0.0), var_a(k, 0.0), var_b(k, 0.0);
  for (std::size_t d = 0; d < k; ++d) {
    for (std::size_t i = 0; i < ma; ++i) mean_a[d] += xa.row(i)[d];
    for (std::size_t i = 0; i < mb; ++i) mean_b[d] += xb.row(i)[d];
    mean_a[d] /= static_cast<double>(ma);
    mean_b[d] /= static_cast<double>(mb);
    for (std::size_t i = 0; i < ma; ++i) {
      const double c = xa.row(i)[d] - mean_a[d];
      var_a[d] += c * c;
    }
    for (std::size_t i = 0; i < mb; ++i) {
      const double c = xb.row(i)[d] - mean_b[d];
      var_b[d] += c * c;
    }
    var_a[d] /= static_cast<double>(ma > 1 ? ma - 1 : 1);
    var_b[d] /= static_cast<double>(mb > 1 ? mb - 1 : 1);
  }

  report.mean_match.required = order.s > 1.0;
  for (std::size_t d = 0; d < k; ++d) {
    const double gap = std::fabs(mean_a[d] - mean_b[d]);
    const double band =
        3.0 * std::sqrt(var_a[d] / static_cast<double>(ma) + var_b[d] / static_cast<double>(mb)) +
        tol;
    report.max_mean_gap = std::max(report.max_mean_gap, gap);
    report.mean_match.max_band = std::max(report.mean_match.max_band, band);
    if (gap > band) report.mean_match.passed = false;
  }
  report.mean_match.max_gap = report.max_mean_gap;

  report.cov_match.required = order.s > 2.0;
  for (std::size_t d = 0; d < k; ++d) {
    for (std::size_t e = d; e < k; ++e) {
      double cov_a = 0.0, cov_b = 0.0, m22_a = 0.0, m22_b = 0.0;
      for (std::size_t i = 0; i < ma; ++i) {
        const double u = xa.row(i)[d] - mean_a[d], v = xa.row(i)[e] - mean_a[e];
        cov_a += u * v;
        m22_a += u * u * v * v;
      }
      for (std::size_t i = 0; i < mb; ++i) {
        const double u = xb.row(i)[d] - mean_b[d], v = xb.row(i)[e] - mean_b[e];
        cov_b += u * v;
        m22_b += u * u * v * v;
      }
      cov_a /= static_cast<double>(ma);
      cov_b /= static_cast<double>(mb);
      m22_a /= static_cast<double>(ma);
      m22_b /= static_cast<double>(mb);
      // Delta-method variance of a sample covariance: (mu22 - cov^2) / m.
      const double se = std::sqrt(std::max(0.0, m22_a - cov_a * cov_a) / static_cast<double>(ma) +
                                  std::max(0.0, m22_b - cov_b * cov_b) / static_cast<double>(mb));
      const double gap = std::fabs(cov_a - cov_b);
      const double band = 3.0 * se + tol;
      report.max_cov_gap = std::max(report.max_cov_gap, gap);
      report.cov_match.max_band = std::max(report.cov_match.max_band, band);
      if (gap > band) report.cov_match.passed = false;
    }
  }
  report.cov_match.max_gap = report.max_cov_gap;
  return report;
}

// E[sup_norm^order] and E[(max_t f(t))^order] per requested order. Both
// functionals are reported side by side; the one-sided max of a canonical
// path is the largest stored value.
struct SupMomentRow {
  double order = 0.0;
  double two_sided = 0.0;  // E ||f||_inf^order
  double one_sided = 0.0;  // E (max_t f)^order
};

inline double one_sided_max(const Path& f) {
  double m = f.values().front();
  for (double v : f.values()) m = std::max(m, v);
  return m;
}

inline std::vector<SupMomentRow> sup_functional_moments(const Ensemble& e,
                                                        const std::vector<double>& orders) {
  std::vector<SupMomentRow> rows;
  rows.reserve(orders.size());
  for (double order : orders) {
    SupMomentRow row;
    row.order = order;
    for (const Path& f : e.samples) {
      row.two_sided += std::pow(sup_norm(f), order);
      row.one_sided += std::pow(one_sided_max(f), order);
    }
    row.two_sided /= static_cast<double>(e.size());
    row.one_sided /= static_cast<double>(e.size());
    rows.push_back(row);
  }
  return rows;
}

}  // namespace rde
