#pragma once

#include <atomic>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "rde/ensemble.hpp"
#include "rde/operators.hpp"
#include "rde/parallel.hpp"
#include "rde/path.hpp"
#include "rde/rng.hpp"

namespace rde {

class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ImproperSamplerError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using CoefficientSampler = std::function<CoefficientDraw(std::int64_t n, Rng& rng)>;

// Full description of a distributional recurrence
//   X_n =d sum_r A_r^{(n)} X_{I_r}^{(r)} + b^{(n)},  n >= n0,
// with explicit base-case ensembles for indices 0..n0-1 and a seeded
// coefficient sampler for (A^{(n)}, b^{(n)}, I^{(n)}).
struct RecursionSpec {
  int K = 0;
  std::int64_t n0 = 0;
  std::vector<Ensemble> base_ensembles;  // one per index 0..n0-1
  CoefficientSampler coefficient_sampler;
  std::uint64_t digest = 0;  // stable hash of the spec's serialized description

  void validate() const {
    if (K < 1) throw std::invalid_argument("RecursionSpec: K must be >= 1");
    if (n0 < 1) throw std::invalid_argument("RecursionSpec: n0 must be >= 1");
    if (base_ensembles.size() != static_cast<std::size_t>(n0))
      throw std::invalid_argument("RecursionSpec: need one base ensemble per index < n0");
    if (!coefficient_sampler) throw std::invalid_argument("RecursionSpec: missing sampler");
  }
};

// One draw of the limit coefficients (A_1..A_K, b).
struct LimitDraw {
  std::vector<PathOperator> operators;
  std::optional<Path> shift;
};

using LimitSampler = std::function<LimitDraw(Rng& rng)>;

// The limit map T: mu |-> Law(sum_r A_r Z^{(r)} + b) with Z^{(r)} iid mu.
// `deterministic` marks maps whose coefficient draw is a point mass, in which
// case contraction constants are exact rather than Monte Carlo estimates.
struct FixedPointMap {
  int K = 0;
  LimitSampler limit_sampler;
  bool deterministic = false;

  void validate() const {
    if (K < 1) throw std::invalid_argument("FixedPointMap: K must be >= 1");
    if (!limit_sampler) throw std::invalid_argument("FixedPointMap: missing sampler");
  }
};

inline int default_max_depth(std::int64_t n) {
  return static_cast<int>(std::ceil(10.0 * std::log2(static_cast<double>(n) + 2.0)));
}

namespace detail {

inline Path assemble(const std::vector<PathOperator>& ops, const std::vector<Path>& parts,
                     const std::optional<Path>& shift) {
  std::vector<Path> applied;
  applied.reserve(parts.size());
  for (std::size_t r = 0; r < parts.size(); ++r) applied.push_back(apply(ops[r], parts[r]));
  return affine_combine(std::vector<double>(applied.size(), 1.0), applied, shift);
}

// Draws coefficients, rejecting draws that keep a subproblem at full size n
// (those never terminate when expanded). Rejections are counted so callers
// can flag that the sampled law was altered.
inline CoefficientDraw draw_proper(const RecursionSpec& spec, std::int64_t n, Rng& rng,
                                   std::atomic<std::uint64_t>* rejections) {
  for (int attempt = 0; attempt < 100; ++attempt) {
    CoefficientDraw d = spec.coefficient_sampler(n, rng);
    if (static_cast<int>(d.indices.size()) != spec.K ||
        d.operators.size() != d.indices.size())
      throw std::invalid_argument("coefficient sampler: K operators and K indices required");
    bool self = false;
    for (std::int64_t idx : d.indices) {
      if (idx < 0 || idx > n) throw std::invalid_argument("coefficient sampler: index out of {0..n}");
      if (idx == n) self = true;
    }
    if (!self) return d;
    if (rejections) rejections->fetch_add(1, std::memory_order_relaxed);
  }
  throw ImproperSamplerError("coefficient sampler kept drawing I_r = n (100 rejections at n=" +
                             std::to_string(n) + ")");
}

inline Path sample_impl(const RecursionSpec& spec, std::int64_t n, Seed seed, int depth,
                        int max_depth, std::atomic<std::uint64_t>* rejections) {
  if (depth > max_depth)
    throw DivergenceError("sample_process: recursion depth " + std::to_string(depth) +
                          " exceeds bound " + std::to_string(max_depth));
  if (n < spec.n0) {
    const Ensemble& base = spec.base_ensembles[static_cast<std::size_t>(n)];
    Rng rng(seed.child(0));
    return base.samples[rng.uniform_index(base.size())];
  }
  Rng coeff_rng(seed.child(0));
  const CoefficientDraw draw = draw_proper(spec, n, coeff_rng, rejections);
  std::vector<Path> parts;
  parts.reserve(draw.indices.size());
  for (std::size_t r = 0; r < draw.indices.size(); ++r)
    parts.push_back(sample_impl(spec, draw.indices[r], seed.child(r + 1), depth + 1, max_depth,
                                rejections));
  return detail::assemble(draw.operators, parts, draw.shift);
}

}  // namespace detail

// One draw of X_n by recursive expansion of the recurrence. Subtrees use
// disjoint child seed streams (position r+1 for subproblem r, position 0 for
// the coefficient draw), so samples are reproducible and independent of
// evaluation order.
inline Path sample_process(const RecursionSpec& spec, std::int64_t n, Seed seed,
                           int max_depth = -1,
                           std::atomic<std::uint64_t>* rejections = nullptr) {
  spec.validate();
  if (n < 0) throw std::invalid_argument("sample_process: n must be >= 0");
  if (max_depth < 0) max_depth = default_max_depth(n);
  return detail::sample_impl(spec, n, seed, 0, max_depth, rejections);
}

// size independent draws of X_n; embarrassingly parallel, deterministic per
// sample index.
inline Ensemble process_ensemble(const RecursionSpec& spec, std::int64_t n, std::size_t size,
                                 Seed seed, unsigned threads = 1) {
  spec.validate();
  if (size == 0) throw std::invalid_argument("process_ensemble: size must be >= 1");
  std::vector<std::optional<Path>> slots(size);
  std::atomic<std::uint64_t> rejections{0};
  parallel_for(size, threads, [&](std::size_t i) {
    slots[i] = sample_process(spec, n, seed.child(i), -1, &rejections);
  });
  std::vector<Path> samples;
  samples.reserve(size);
  for (auto& s : slots) samples.push_back(std::move(*s));
  EnsembleMeta meta{"process:n=" + std::to_string(n), seed.value, spec.digest};
  return Ensemble::make(std::move(samples), std::move(meta));
}

// One application of the empirical limit map: out_size draws of
// sum_r A_r Z^{(r)} + b with the Z^{(r)} resampled with replacement,
// independently across r and across output samples, coefficients independent
// of the Z's.
inline Ensemble iterate_T(const FixedPointMap& map, const Ensemble& input, std::size_t out_size,
                          Seed seed, unsigned threads = 1) {
  map.validate();
  if (out_size == 0) throw std::invalid_argument("iterate_T: out_size must be >= 1");
  const std::size_t m = input.size();
  std::vector<std::optional<Path>> slots(out_size);
  parallel_for(out_size, threads, [&](std::size_t i) {
    const Seed s = seed.child(i);
    Rng coeff_rng(s.child(0));
    const LimitDraw draw = map.limit_sampler(coeff_rng);
    if (static_cast<int>(draw.operators.size()) != map.K)
      throw std::invalid_argument("limit sampler: wrong operator count");
    std::vector<Path> parts;
    parts.reserve(draw.operators.size());
    for (std::size_t r = 0; r < draw.operators.size(); ++r) {
      Rng pick(s.child(r + 1));
      parts.push_back(input.samples[pick.uniform_index(m)]);
    }
    slots[i] = detail::assemble(draw.operators, parts, draw.shift);
  });
  std::vector<Path> samples;
  samples.reserve(out_size);
  for (auto& sp : slots) samples.push_back(std::move(*sp));
  EnsembleMeta meta{"iterate_T", seed.value, input.meta.spec_digest};
  return Ensemble::make(std::move(samples), std::move(meta));
}

// One draw of the accompanying sequence Q_n: finite-n coefficients, base-case
// samples below n0 and fixed-point samples Z^{(r)} at or above n0. Raw
// coefficient draws are used (no I_r = n rejection): the substitution makes
// I_r = n harmless, and rejecting would change the law.
inline Path accompanying_sample(const RecursionSpec& spec, const Ensemble& fixed_ensemble,
                                std::int64_t n, Seed seed) {
  spec.validate();
  if (n < spec.n0) throw std::invalid_argument("accompanying_sample: n must be >= n0");
  Rng coeff_rng(seed.child(0));
  const CoefficientDraw draw = spec.coefficient_sampler(n, coeff_rng);
  if (static_cast<int>(draw.indices.size()) != spec.K ||
      draw.operators.size() != draw.indices.size())
    throw std::invalid_argument("coefficient sampler: K operators and K indices required");
  std::vector<Path> parts;
  parts.reserve(draw.indices.size());
  for (std::size_t r = 0; r < draw.indices.size(); ++r) {
    Rng pick(seed.child(r + 1));
    if (draw.indices[r] < spec.n0) {
      const Ensemble& base = spec.base_ensembles[static_cast<std::size_t>(draw.indices[r])];
      parts.push_back(base.samples[pick.uniform_index(base.size())]);
    } else {
      parts.push_back(fixed_ensemble.samples[pick.uniform_index(fixed_ensemble.size())]);
    }
  }
  return detail::assemble(draw.operators, parts, draw.shift);
}

// Monte Carlo estimate (exact for deterministic maps) of the contraction
// constant L = sum_r E ||A_r||_op^s of the limit map.
struct ContractionReport {
  double s = 0.0;
  double L_hat = 0.0;
  std::optional<double> L_exact;
  std::optional<double> Lstar_hat;
  double stderr_value = 0.0;
  std::size_t mc_samples = 0;
  bool norm_is_exact = true;  // false when any draw contained a Sum bound
};

inline ContractionReport contraction_constant(const FixedPointMap& map, const MetricOrder& order,
                                              std::size_t mc_samples, Seed seed) {
  map.validate();
  if (mc_samples == 0) throw std::invalid_argument("contraction_constant: mc_samples >= 1");
  if (map.deterministic) mc_samples = 1;
  double sum = 0.0, sumsq = 0.0;
  bool exact_norms = true;
  for (std::size_t i = 0; i < mc_samples; ++i) {
    Rng rng(seed.child(i));
    const LimitDraw draw = map.limit_sampler(rng);
    double value = 0.0;
    for (const PathOperator& op : draw.operators) {
      value += std::pow(op_norm(op), order.s);
      exact_norms = exact_norms && op_norm_is_exact(op);
    }
    sum += value;
    sumsq += value * value;
  }
  ContractionReport report;
  report.s = order.s;
  report.mc_samples = mc_samples;
  report.L_hat = sum / static_cast<double>(mc_samples);
  report.norm_is_exact = exact_norms;
  if (map.deterministic) {
    report.L_exact = report.L_hat;
    report.stderr_value = 0.0;
  } else if (mc_samples > 1) {
    const double var =
        std::max(0.0, (sumsq - sum * sum / static_cast<double>(mc_samples)) /
                          static_cast<double>(mc_samples - 1));
    report.stderr_value = std::sqrt(var / static_cast<double>(mc_samples));
  }
  return report;
}

// Rate functions for the C4-style factor: R(n) = n^-delta or log^-k(n+1).
// Index 0 is evaluated as R(1) (both forms are singular at 0).
struct RateFunction {
  enum class Kind { kPower, kLogPower };
  Kind kind = Kind::kPower;
  double delta = 0.0;
  int k = 0;

  static RateFunction power(double delta) { return RateFunction{Kind::kPower, delta, 0}; }
  static RateFunction log_power(int k) { return RateFunction{Kind::kLogPower, 0.0, k}; }

  double operator()(std::int64_t n) const {
    const double x = static_cast<double>(n < 1 ? 1 : n);
    if (kind == Kind::kPower) return std::pow(x, -delta);
    return std::pow(std::log(x + 1.0), -static_cast<double>(k));
  }

  std::string name() const {
    if (kind == Kind::kPower) return "power(" + std::to_string(delta) + ")";
    return "log_power(" + std::to_string(k) + ")";
  }
};

// Monte Carlo estimate of E[ sum_r ||A_r^{(n)}||_op^s R(I_r^{(n)}) / R(n) ]
// at a single size n (raw coefficient draws).
inline double rate_factor(const RecursionSpec& spec, const MetricOrder& order,
                          const RateFunction& rate, std::int64_t n, std::size_t mc_samples,
                          Seed seed = Seed{0x7261746566ULL}) {
  spec.validate();
  if (n < spec.n0) throw std::invalid_argument("rate_factor: n must be >= n0");
  if (mc_samples == 0) throw std::invalid_argument("rate_factor: mc_samples >= 1");
  const double rn = rate(n);
  double sum = 0.0;
  for (std::size_t i = 0; i < mc_samples; ++i) {
    Rng rng(seed.child(i));
    const CoefficientDraw draw = spec.coefficient_sampler(n, rng);
    double value = 0.0;
    for (std::size_t r = 0; r < draw.operators.size(); ++r)
      value += std::pow(op_norm(draw.operators[r]), order.s) * rate(draw.indices[r]) / rn;
    sum += value;
  }
  return sum / static_cast<double>(mc_samples);
}

}  // namespace rde
