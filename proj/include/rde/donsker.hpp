#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "rde/ensemble.hpp"
#include "rde/metrics.hpp"
#include "rde/operators.hpp"
#include "rde/parallel.hpp"
#include "rde/path.hpp"
#include "rde/recursion.hpp"
#include "rde/rng.hpp"

namespace rde {

// Centered, unit-variance step laws for the rescaled random walk.
struct IncrementLaw {
  enum class Kind { kRademacher, kStandardNormal, kUniform, kUserTable };
  Kind kind = Kind::kRademacher;
  std::vector<double> values;  // user table
  std::vector<double> probs;
  // Largest s with E|V|^s known finite; bookkeeping for the 2+eps condition.
  double moment_order_available = std::numeric_limits<double>::infinity();

  static IncrementLaw rademacher() { return IncrementLaw{}; }

  static IncrementLaw standard_normal() {
    IncrementLaw law;
    law.kind = Kind::kStandardNormal;
    return law;
  }

  // Uniform on [-sqrt(3), sqrt(3)] (variance 1).
  static IncrementLaw uniform_pm_sqrt3() {
    IncrementLaw law;
    law.kind = Kind::kUniform;
    return law;
  }

  static IncrementLaw user_table(std::vector<double> values, std::vector<double> probs) {
    IncrementLaw law;
    law.kind = Kind::kUserTable;
    law.values = std::move(values);
    law.probs = std::move(probs);
    law.validate();
    return law;
  }

  void validate() const {
    if (kind != Kind::kUserTable) return;
    if (values.empty() || values.size() != probs.size())
      throw std::invalid_argument("IncrementLaw: table needs matching values/probs");
    double total = 0.0, m1 = 0.0, m2 = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
      if (probs[i] < 0.0) throw std::invalid_argument("IncrementLaw: negative probability");
      total += probs[i];
      m1 += probs[i] * values[i];
      m2 += probs[i] * values[i] * values[i];
    }
    if (std::fabs(total - 1.0) > 1e-12)
      throw std::invalid_argument("IncrementLaw: probabilities must sum to 1");
    if (std::fabs(m1) > 1e-12 || std::fabs(m2 - 1.0) > 1e-12)
      throw std::invalid_argument("IncrementLaw: table must have mean 0 and variance 1");
  }

  double sample(Rng& rng) const {
    switch (kind) {
      case Kind::kRademacher:
        return static_cast<double>(rng.rademacher());
      case Kind::kStandardNormal:
        return rng.normal();
      case Kind::kUniform:
        return (2.0 * rng.uniform01() - 1.0) * 1.7320508075688772935;
      case Kind::kUserTable: {
        const double u = rng.uniform01();
        double cum = 0.0;
        for (std::size_t i = 0; i < values.size(); ++i) {
          cum += probs[i];
          if (u < cum) return values[i];
        }
        return values.back();
      }
    }
    throw std::logic_error("IncrementLaw: unreachable");
  }

  std::string name() const {
    switch (kind) {
      case Kind::kRademacher:
        return "rademacher";
      case Kind::kStandardNormal:
        return "standard_normal";
      case Kind::kUniform:
        return "uniform";
      case Kind::kUserTable:
        return "user_table";
    }
    return "?";
  }
};

// The rescaled n-step walk as a path: breakpoints k/n, values S_k/sqrt(n).
// Linear interpolation gives the continuous path; constant interpolation the
// cadlag step path, whose value at 1 is S_n/sqrt(n) (final jump at t=1).
inline Path random_walk_path(std::size_t n, std::span<const double> increments,
                             PathKind interpolation) {
  if (n == 0) throw std::invalid_argument("random_walk_path: n must be >= 1");
  if (increments.size() != n)
    throw std::invalid_argument("random_walk_path: need exactly n increments");
  const double root_n = std::sqrt(static_cast<double>(n));
  std::vector<double> t(n + 1), v(n + 1);
  double s = 0.0;
  t[0] = 0.0;
  v[0] = 0.0;
  for (std::size_t k = 1; k <= n; ++k) {
    s += increments[k - 1];
    t[k] = static_cast<double>(k) / static_cast<double>(n);
    v[k] = s / root_n;
  }
  t[n] = 1.0;
  if (interpolation == PathKind::kPiecewiseLinear)
    return Path::piecewise_linear(std::move(t), std::move(v));
  const double at_one = v.back();
  v.pop_back();  // interval k holds S_k/sqrt(n) on [k/n, (k+1)/n)
  return Path::piecewise_constant(std::move(t), std::move(v), at_one);
}

// Covariance of the linearly interpolated walk (and of the linearized
// Brownian motion): s when floor(ns) < floor(nt), else
// (floor(ns) + (ns - floor(ns))(nt - floor(nt))) / n. Symmetric in (s,t).
inline double covariance_exact(std::int64_t n, double s, double t) {
  if (n < 1) throw std::invalid_argument("covariance_exact: n must be >= 1");
  if (s > t) std::swap(s, t);
  if (s < 0.0 || t > 1.0) throw std::domain_error("covariance_exact: times outside [0,1]");
  const double ns = static_cast<double>(n) * s;
  const double nt = static_cast<double>(n) * t;
  const double fs = std::floor(ns);
  const double ft = std::floor(nt);
  if (fs < ft) return s;
  return (fs + (ns - fs) * (nt - ft)) / static_cast<double>(n);
}

// Linearized Brownian motion on the grid k/n: the same construction as the
// walk with standard normal increments.
inline Path linearized_bm(std::size_t n, Seed seed) {
  Rng rng(seed);
  std::vector<double> inc(n);
  for (double& x : inc) x = rng.normal();
  return random_walk_path(n, inc, PathKind::kPiecewiseLinear);
}

// m iid walk paths; embarrassingly parallel with per-sample seed streams.
inline Ensemble walk_ensemble(std::size_t n, const IncrementLaw& law, PathKind interpolation,
                              std::size_t m, Seed seed, unsigned threads = 1) {
  if (m == 0) throw std::invalid_argument("walk_ensemble: size must be >= 1");
  std::vector<std::optional<Path>> slots(m);
  parallel_for(m, threads, [&](std::size_t i) {
    Rng rng(seed.child(i));
    std::vector<double> inc(n);
    for (double& x : inc) x = law.sample(rng);
    slots[i] = random_walk_path(n, inc, interpolation);
  });
  std::vector<Path> samples;
  samples.reserve(m);
  for (auto& s : slots) samples.push_back(std::move(*s));
  EnsembleMeta meta{"walk:n=" + std::to_string(n) + ":" + law.name(), seed.value, 0};
  return Ensemble::make(std::move(samples), std::move(meta));
}

// Grid projections of m iid walk paths without keeping the paths (large n).
inline Matrix walk_fdd(std::size_t n, const IncrementLaw& law, const std::vector<double>& grid,
                       std::size_t m, Seed seed, unsigned threads = 1) {
  Matrix out(m, grid.size());
  parallel_for(m, threads, [&](std::size_t i) {
    Rng rng(seed.child(i));
    std::vector<double> inc(n);
    for (double& x : inc) x = law.sample(rng);
    const Path p = random_walk_path(n, inc, PathKind::kPiecewiseLinear);
    for (std::size_t d = 0; d < grid.size(); ++d) out.row(i)[d] = p.eval(grid[d]);
  });
  return out;
}

// Exact Brownian finite-dimensional samples at the grid: cumulative normal
// increments with variances equal to the grid gaps.
inline Matrix exact_bm_fdd(const std::vector<double>& grid, std::size_t m, Seed seed,
                           unsigned threads = 1) {
  for (std::size_t d = 0; d + 1 < grid.size(); ++d)
    if (!(grid[d] < grid[d + 1])) throw std::invalid_argument("exact_bm_fdd: grid not increasing");
  if (!grid.empty() && (grid.front() < 0.0 || grid.back() > 1.0))
    throw std::invalid_argument("exact_bm_fdd: grid outside [0,1]");
  Matrix out(m, grid.size());
  parallel_for(m, threads, [&](std::size_t i) {
    Rng rng(seed.child(i));
    double w = 0.0, prev = 0.0;
    for (std::size_t d = 0; d < grid.size(); ++d) {
      const double dt = grid[d] - prev;
      w += std::sqrt(dt) * rng.normal();
      prev = grid[d];
      out.row(i)[d] = w;
    }
  });
  return out;
}

// Recursion spec of the divide-and-conquer walk decomposition: n0 = 2, base
// ensembles at n = 0 (zero path) and n = 1 (single-increment paths), and the
// deterministic size-n coefficients. Rademacher base cases are exact (the
// two signed paths); other increment laws fall back to base_size iid draws.
inline RecursionSpec donsker_spec(const IncrementLaw& law, PathKind interpolation,
                                  std::size_t base_size = 65536,
                                  Seed base_seed = Seed{0xba5eba5eULL}) {
  RecursionSpec spec;
  spec.K = 2;
  spec.n0 = 2;
  spec.base_ensembles.push_back(
      Ensemble::make({Path::zero(interpolation)}, EnsembleMeta{"donsker-base:n=0", 0, 0}));
  if (law.kind == IncrementLaw::Kind::kRademacher) {
    const double plus[] = {1.0};
    const double minus[] = {-1.0};
    spec.base_ensembles.push_back(Ensemble::make(
        {random_walk_path(1, plus, interpolation), random_walk_path(1, minus, interpolation)},
        EnsembleMeta{"donsker-base:n=1", 0, 0}));
  } else {
    spec.base_ensembles.push_back(
        walk_ensemble(1, law, interpolation, base_size, base_seed, 1));
  }
  spec.coefficient_sampler = [](std::int64_t n, Rng&) { return donsker_coefficients(n); };
  spec.digest = digest_of(nlohmann::json{{"spec", "donsker"},
                                         {"increment", law.name()},
                                         {"interpolation", to_string(interpolation)},
                                         {"n0", 2}});
  return spec;
}

// The Wiener fixed-point map: K = 2, A_1 = sqrt(1/beta) phi_beta,
// A_2 = sqrt((beta-1)/beta) psi_beta, b = 0; deterministic coefficients.
inline FixedPointMap wiener_map(double beta) {
  if (!(beta > 1.0)) throw std::invalid_argument("wiener_map: beta must be > 1");
  FixedPointMap map;
  map.K = 2;
  map.deterministic = true;
  const PathOperator a1 = PathOperator::compose(PathOperator::scale(std::sqrt(1.0 / beta)),
                                                PathOperator::front_split(beta));
  const PathOperator a2 = PathOperator::compose(
      PathOperator::scale(std::sqrt((beta - 1.0) / beta)), PathOperator::back_split(beta));
  map.limit_sampler = [a1, a2](Rng&) { return LimitDraw{{a1, a2}, std::nullopt}; };
  return map;
}

// Decomposition in space: X =d (X + X')/sqrt(2); both coefficients are the
// scalar 1/sqrt(2).
inline FixedPointMap spatial_map() {
  FixedPointMap map;
  map.K = 2;
  map.deterministic = true;
  const PathOperator half = PathOperator::scale(std::sqrt(0.5));
  map.limit_sampler = [half](Rng&) { return LimitDraw{{half, half}, std::nullopt}; };
  return map;
}

}  // namespace rde
