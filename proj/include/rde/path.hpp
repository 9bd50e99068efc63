#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

namespace rde {

inline constexpr double kBreakpointTol = 1e-12;  // dedupe gap for time points
inline constexpr double kCollinearTol = 1e-12;   // relative slack in the collinearity test

enum class PathKind { kPiecewiseLinear, kPiecewiseConstant };

inline const char* to_string(PathKind k) {
  return k == PathKind::kPiecewiseLinear ? "piecewise_linear" : "piecewise_constant";
}

// A sample path on [0,1]: either continuous piecewise-linear or cadlag
// piecewise-constant, held in canonical form (strictly increasing
// breakpoints containing 0 and 1, no redundant interior breakpoint).
//
// Storage is uniform across kinds: values.size() == breakpoints.size().
// Piecewise-linear: values[i] = f(breakpoints[i]), linear in between.
// Piecewise-constant: values[i] is the value on [t_i, t_{i+1}) for
// i < size-1 and values.back() is f(1). Building from interval values only
// defaults f(1) to the last interval value ("continuous in 1"); an explicit
// value at 1 is allowed so that cadlag step interpolations of walks, whose
// final jump sits at t = 1, are representable.
//
// Paths are immutable after construction; all operations on them are pure.
class Path {
 public:
  static Path piecewise_linear(std::vector<double> breakpoints, std::vector<double> values) {
    if (values.size() != breakpoints.size())
      throw std::invalid_argument("piecewise_linear: need one value per breakpoint");
    return Path(PathKind::kPiecewiseLinear, std::move(breakpoints), std::move(values));
  }

  // interval_values.size() must be breakpoints.size() - 1; value_at_one
  // defaults to the last interval value.
  static Path piecewise_constant(std::vector<double> breakpoints,
                                 std::vector<double> interval_values,
                                 std::optional<double> value_at_one = std::nullopt) {
    if (breakpoints.size() < 2 || interval_values.size() + 1 != breakpoints.size())
      throw std::invalid_argument("piecewise_constant: need one value per interval");
    std::vector<double> v = std::move(interval_values);
    v.push_back(value_at_one.value_or(v.back()));
    return Path(PathKind::kPiecewiseConstant, std::move(breakpoints), std::move(v));
  }

  static Path constant(double c, PathKind kind) {
    return Path(kind, {0.0, 1.0}, {c, c});
  }

  static Path zero(PathKind kind) { return constant(0.0, kind); }

  PathKind kind() const { return kind_; }
  const std::vector<double>& breakpoints() const { return t_; }
  const std::vector<double>& values() const { return v_; }
  std::size_t size() const { return t_.size(); }

  double value_at_zero() const {
    return v_.front();
  }
  double value_at_one() const { return v_.back(); }

  // f(t); right-continuous interpretation for piecewise-constant paths,
  // f(1) = stored final value.
  double eval(double t) const {
    if (t < 0.0 || t > 1.0) throw std::domain_error("Path::eval: t outside [0,1]");
    if (t >= 1.0) return v_.back();
    const std::size_t i = segment_index(t);
    if (kind_ == PathKind::kPiecewiseConstant) return v_[i];
    const double a = t_[i], b = t_[i + 1];
    const double w = (t - a) / (b - a);
    return v_[i] + w * (v_[i + 1] - v_[i]);
  }

  // Left limit f(t-); f(0-) := f(0).
  double eval_left(double t) const {
    if (t < 0.0 || t > 1.0) throw std::domain_error("Path::eval_left: t outside [0,1]");
    if (t <= 0.0) return v_.front();
    // Largest i with t_[i] < t; the segment [t_i, t_{i+1}) governs the limit.
    const auto it = std::lower_bound(t_.begin(), t_.end(), t);
    const std::size_t i = std::min(static_cast<std::size_t>(it - t_.begin()) - 1, t_.size() - 2);
    if (kind_ == PathKind::kPiecewiseConstant) return v_[i];
    const double a = t_[i], b = t_[i + 1];
    const double w = (t - a) / (b - a);
    return v_[i] + w * (v_[i + 1] - v_[i]);
  }

  bool operator==(const Path& other) const = default;

 private:
  Path(PathKind kind, std::vector<double> t, std::vector<double> v)
      : kind_(kind), t_(std::move(t)), v_(std::move(v)) {
    validate_and_canonicalize();
  }

  std::size_t segment_index(double t) const {
    // Largest i with t_[i] <= t, clamped to the final segment.
    const auto it = std::upper_bound(t_.begin(), t_.end(), t);
    const std::size_t i = static_cast<std::size_t>(it - t_.begin());
    return std::min(i == 0 ? 0 : i - 1, t_.size() - 2);
  }

  void validate_and_canonicalize() {
    if (t_.size() < 2) throw std::invalid_argument("Path: need at least breakpoints 0 and 1");
    if (t_.size() != v_.size()) throw std::invalid_argument("Path: size mismatch");
    for (double x : v_)
      if (!std::isfinite(x)) throw std::invalid_argument("Path: non-finite value");
    for (std::size_t i = 1; i < t_.size(); ++i)
      if (!(t_[i] > t_[i - 1] - kBreakpointTol))
        throw std::invalid_argument("Path: breakpoints not increasing");

    // Deduplicate breakpoints closer than the tolerance; the surviving
    // (first) breakpoint keeps its value.
    {
      std::vector<double> t2, v2;
      t2.reserve(t_.size());
      v2.reserve(v_.size());
      t2.push_back(t_.front());
      v2.push_back(v_.front());
      for (std::size_t i = 1; i < t_.size(); ++i) {
        if (t_[i] - t2.back() <= kBreakpointTol) {
          if (i + 1 == t_.size()) {  // keep the endpoint 1, drop its twin
            t2.back() = t_[i];
            v2.back() = v_[i];
          }
          continue;
        }
        t2.push_back(t_[i]);
        v2.push_back(v_[i]);
      }
      t_ = std::move(t2);
      v_ = std::move(v2);
    }
    if (t_.size() < 2) throw std::invalid_argument("Path: degenerate after dedupe");
    if (t_.front() != 0.0 || t_.back() != 1.0)
      throw std::invalid_argument("Path: breakpoints must start at 0 and end at 1");

    if (kind_ == PathKind::kPiecewiseLinear) {
      // Drop interior points collinear with their kept neighbours.
      std::vector<double> t2{t_.front()}, v2{v_.front()};
      for (std::size_t i = 1; i + 1 < t_.size(); ++i) {
        const double t0 = t2.back(), v0 = v2.back();
        const double t1 = t_[i], v1 = v_[i];
        const double t2n = t_[i + 1], v2n = v_[i + 1];
        const double cross = (t2n - t0) * (v1 - v0) - (t1 - t0) * (v2n - v0);
        const double scale =
            (t2n - t0) * std::max({1.0, std::fabs(v0), std::fabs(v1), std::fabs(v2n)});
        if (std::fabs(cross) <= kCollinearTol * scale) continue;
        t2.push_back(t1);
        v2.push_back(v1);
      }
      t2.push_back(t_.back());
      v2.push_back(v_.back());
      t_ = std::move(t2);
      v_ = std::move(v2);
    } else {
      // Merge adjacent intervals with (relatively) equal values. The stored
      // value at 1 is kept verbatim.
      const double vone = v_.back();
      std::vector<double> t2{t_.front()}, v2{v_.front()};
      for (std::size_t i = 1; i + 1 < t_.size(); ++i) {
        const double prev = v2.back(), cur = v_[i];
        const double scale = std::max({1.0, std::fabs(prev), std::fabs(cur)});
        if (std::fabs(cur - prev) <= kCollinearTol * scale) continue;
        t2.push_back(t_[i]);
        v2.push_back(cur);
      }
      t2.push_back(1.0);
      v2.push_back(vone);
      t_ = std::move(t2);
      v_ = std::move(v2);
    }
  }

  PathKind kind_;
  std::vector<double> t_;
  std::vector<double> v_;
};

// Order parameter of the Zolotarev metric: s = m + alpha with
// m = ceil(s) - 1 in {0,1,2} and alpha in (0,1].
struct MetricOrder {
  double s;
  int m;
  double alpha;

  explicit MetricOrder(double s_) : s(s_) {
    if (!(s > 0.0 && s <= 3.0)) throw std::invalid_argument("MetricOrder: s must be in (0,3]");
    m = static_cast<int>(std::ceil(s)) - 1;
    alpha = s - m;
  }
};

namespace detail {

// Union of two sorted breakpoint vectors, merging points within tolerance.
inline std::vector<double> merge_breakpoints(const std::vector<double>& a,
                                             const std::vector<double>& b) {
  std::vector<double> out;
  out.reserve(a.size() + b.size());
  std::size_t i = 0, j = 0;
  while (i < a.size() || j < b.size()) {
    double t;
    if (j == b.size() || (i < a.size() && a[i] <= b[j]))
      t = a[i++];
    else
      t = b[j++];
    if (out.empty() || t - out.back() > kBreakpointTol) out.push_back(t);
  }
  out.front() = 0.0;
  out.back() = 1.0;
  return out;
}

}  // namespace detail

// Visits the common refinement of f and g. fn(a, b, fa, fb, ga, gb) receives
// each merged segment [a,b) with right values at a and left limits at b, so
// both paths restricted to (a,b) are affine (or constant) between the
// reported endpoint values.
template <class Fn>
void for_each_merged_segment(const Path& f, const Path& g, Fn&& fn) {
  const std::vector<double> grid = detail::merge_breakpoints(f.breakpoints(), g.breakpoints());
  for (std::size_t i = 0; i + 1 < grid.size(); ++i) {
    const double a = grid[i], b = grid[i + 1];
    fn(a, b, f.eval(a), f.eval_left(b), g.eval(a), g.eval_left(b));
  }
}

// Exact supremum of |f|.
inline double sup_norm(const Path& f) {
  double m = 0.0;
  for (double v : f.values()) m = std::max(m, std::fabs(v));
  return m;
}

// Exact supremum of |f - g|; kinds may differ. The supremum of a piecewise
// affine difference is attained at segment endpoints (one-sided limits), plus
// the point values at t = 1.
inline double diff_sup_norm(const Path& f, const Path& g) {
  double m = std::fabs(f.value_at_one() - g.value_at_one());
  for_each_merged_segment(f, g, [&](double, double, double fa, double fb, double ga, double gb) {
    m = std::max({m, std::fabs(fa - ga), std::fabs(fb - gb)});
  });
  return m;
}

namespace detail {

// int_0^1 ((1-u) a + u b)^d du = (sum_{i=0}^{d} a^i b^{d-i}) / (d+1).
// The symmetric-sum form is exact for a == b and immune to the cancellation
// in (b^{d+1} - a^{d+1}) / (b - a).
inline double symmetric_power_integral(double a, double b, int d) {
  if (d == 0) return 1.0;
  double sum = 0.0;
  double ai = 1.0;  // a^i
  // b^{d-i}, computed down from b^d.
  std::vector<double> bp(static_cast<std::size_t>(d) + 1);
  bp[0] = 1.0;
  for (int i = 1; i <= d; ++i) bp[static_cast<std::size_t>(i)] = bp[static_cast<std::size_t>(i - 1)] * b;
  for (int i = 0; i <= d; ++i) {
    sum += ai * bp[static_cast<std::size_t>(d - i)];
    ai *= a;
  }
  return sum / (d + 1);
}

struct KahanSum {
  double sum = 0.0, c = 0.0;
  void add(double x) {
    const double y = x - c;
    const double t = sum + y;
    c = (t - sum) - y;
    sum = t;
  }
};

}  // namespace detail

// L_p norm, (int_0^1 f(t)^p dt)^{1/p} for even p >= 2, by closed-form
// per-segment integration. Values are rescaled by the sup norm first
// (1-homogeneity) so large even powers cannot overflow.
inline double lp_norm(const Path& f, int p) {
  if (p < 2 || p % 2 != 0) throw std::domain_error("lp_norm: p must be an even integer >= 2");
  const double scale = sup_norm(f);
  if (scale == 0.0) return 0.0;
  detail::KahanSum acc;
  const auto& t = f.breakpoints();
  const auto& v = f.values();
  const bool pl = f.kind() == PathKind::kPiecewiseLinear;
  for (std::size_t i = 0; i + 1 < t.size(); ++i) {
    const double a = v[i] / scale;
    const double b = (pl ? v[i + 1] : v[i]) / scale;
    acc.add((t[i + 1] - t[i]) * detail::symmetric_power_integral(a, b, p));
  }
  return scale * std::pow(std::min(acc.sum, 1.0), 1.0 / p);
}

// psi_{p,y}(f) = L_p((1 + (f-y)^2)^{1/2}) for even p >= 4; exact via the
// binomial expansion of (1+g^2)^{p/2} with g affine per merged segment.
// Always >= 1, with equality iff f == y almost everywhere.
inline double psi_smooth(const Path& f, const Path& y, int p) {
  if (p < 4 || p % 2 != 0) throw std::domain_error("psi_smooth: p must be an even integer >= 4");
  const int q = p / 2;
  std::vector<double> binom(static_cast<std::size_t>(q) + 1);
  binom[0] = 1.0;
  for (int j = 1; j <= q; ++j)
    binom[static_cast<std::size_t>(j)] =
        binom[static_cast<std::size_t>(j - 1)] * (q - j + 1) / j;
  detail::KahanSum acc;
  for_each_merged_segment(f, y, [&](double a, double b, double fa, double fb, double ya, double yb) {
    const double ga = fa - ya, gb = fb - yb;
    double seg = 0.0;
    for (int j = 0; j <= q; ++j)
      seg += binom[static_cast<std::size_t>(j)] * detail::symmetric_power_integral(ga, gb, 2 * j);
    acc.add((b - a) * seg);
  });
  return std::pow(std::max(acc.sum, 1.0), 1.0 / p);
}

// Largest r such that f lies in C_r[0,1] (resp. D_r[0,1]) relative to its
// canonical (minimal) decomposition: the smallest gap between consecutive
// canonical breakpoints. 1 for affine/constant paths.
inline double mesh(const Path& f) {
  const auto& t = f.breakpoints();
  double m = 1.0;
  for (std::size_t i = 0; i + 1 < t.size(); ++i) m = std::min(m, t[i + 1] - t[i]);
  return m;
}

// Lebesgue measure of {t : |f(t) - g(t)| >= level}, exact by solving the
// piecewise-affine difference against +-level on each merged segment.
inline double excursion_measure(const Path& f, const Path& g, double level) {
  if (level < 0.0) throw std::domain_error("excursion_measure: level must be >= 0");
  if (level == 0.0) return 1.0;
  double measure = 0.0;
  for_each_merged_segment(f, g, [&](double a, double b, double fa, double fb, double ga, double gb) {
    const double da = fa - ga, db = fb - gb;
    const double len = b - a;
    // Fraction of [0,1] where the affine chord from da to db is >= level.
    const auto above = [len](double ca, double cb, double L) {
      if (ca >= L && cb >= L) return 1.0;
      if (ca < L && cb < L) return 0.0;
      const double u = (L - ca) / (cb - ca);
      return (cb > ca) ? (1.0 - u) : u;
    };
    measure += len * (above(da, db, level) + above(-da, -db, level));
  });
  return measure;
}

// Sum_i coeffs[i] * paths[i] + shift, exact on the merged grid. All paths
// (and the shift, if any) must share one kind; mixing kinds is rejected.
inline Path affine_combine(const std::vector<double>& coeffs, const std::vector<Path>& paths,
                           const std::optional<Path>& shift = std::nullopt) {
  if (paths.empty() || coeffs.size() != paths.size())
    throw std::invalid_argument("affine_combine: need matching nonempty coefficient/path lists");
  const PathKind kind = paths.front().kind();
  for (const Path& p : paths)
    if (p.kind() != kind) throw std::invalid_argument("affine_combine: mixed path kinds");
  if (shift && shift->kind() != kind)
    throw std::invalid_argument("affine_combine: shift kind differs");

  std::vector<double> grid = paths.front().breakpoints();
  for (std::size_t i = 1; i < paths.size(); ++i)
    grid = detail::merge_breakpoints(grid, paths[i].breakpoints());
  if (shift) grid = detail::merge_breakpoints(grid, shift->breakpoints());

  const auto combined = [&](double t, bool left) {
    double s = 0.0;
    for (std::size_t i = 0; i < paths.size(); ++i)
      s += coeffs[i] * (left ? paths[i].eval_left(t) : paths[i].eval(t));
    if (shift) s += left ? shift->eval_left(t) : shift->eval(t);
    return s;
  };

  if (kind == PathKind::kPiecewiseLinear) {
    std::vector<double> vals(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) vals[i] = combined(grid[i], false);
    return Path::piecewise_linear(std::move(grid), std::move(vals));
  }
  std::vector<double> vals(grid.size() - 1);
  for (std::size_t i = 0; i + 1 < grid.size(); ++i) vals[i] = combined(grid[i], false);
  const double at_one = combined(1.0, false);
  return Path::piecewise_constant(std::move(grid), std::move(vals), at_one);
}

// Exact modulus of continuity omega_f(h) = sup{|f(u)-f(t)| : |u-t| <= h} for
// piecewise-linear f: the maximal oscillation over windows of length h, which
// is attained with the window start at a breakpoint or a breakpoint minus h.
inline double modulus_of_continuity(const Path& f, double h) {
  if (f.kind() != PathKind::kPiecewiseLinear)
    throw std::invalid_argument("modulus_of_continuity: piecewise-linear paths only");
  if (h <= 0.0) return 0.0;
  h = std::min(h, 1.0);
  const auto& t = f.breakpoints();
  std::vector<double> starts;
  starts.reserve(2 * t.size());
  for (double x : t) {
    starts.push_back(std::clamp(x, 0.0, 1.0 - h));
    starts.push_back(std::clamp(x - h, 0.0, 1.0 - h));
  }
  const auto window_oscillation = [&](double a) {
    const double b = a + h;
    double lo = f.eval(a), hi = lo;
    const double fb = f.eval(b);
    lo = std::min(lo, fb);
    hi = std::max(hi, fb);
    for (std::size_t i = 0; i < t.size(); ++i) {
      if (t[i] > a && t[i] < b) {
        lo = std::min(lo, f.values()[i]);
        hi = std::max(hi, f.values()[i]);
      }
    }
    return hi - lo;
  };
  double w = 0.0;
  for (double a : starts) w = std::max(w, window_oscillation(a));
  return w;
}

// Largest h with omega_f(h) <= gap, found by bisection on the exact modulus;
// returns 1 when f never oscillates more than gap. This is the constructive
// delta(g, gamma, theta) used with the excursion-measure bound: the paper
// asserts delta exists but leaves it implicit, so we take the exact-modulus
// inverse at gap = theta * gamma.
inline double modulus_inverse(const Path& f, double gap) {
  if (gap < 0.0) throw std::domain_error("modulus_inverse: gap must be >= 0");
  if (modulus_of_continuity(f, 1.0) <= gap) return 1.0;
  double lo = 0.0, hi = 1.0;
  for (int it = 0; it < 80; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (modulus_of_continuity(f, mid) <= gap)
      lo = mid;
    else
      hi = mid;
  }
  return lo;
}

inline void to_json(nlohmann::json& j, const Path& p) {
  j = nlohmann::json{{"kind", to_string(p.kind())},
                     {"breakpoints", p.breakpoints()},
                     {"values", p.values()}};
}

inline Path path_from_json(const nlohmann::json& j) {
  const std::string kind = j.at("kind").get<std::string>();
  std::vector<double> t = j.at("breakpoints").get<std::vector<double>>();
  std::vector<double> v = j.at("values").get<std::vector<double>>();
  if (kind == "piecewise_linear") return Path::piecewise_linear(std::move(t), std::move(v));
  if (kind == "piecewise_constant") {
    if (v.size() == t.size()) {
      const double at_one = v.back();
      v.pop_back();
      return Path::piecewise_constant(std::move(t), std::move(v), at_one);
    }
    return Path::piecewise_constant(std::move(t), std::move(v));
  }
  throw std::invalid_argument("Path: unknown kind '" + kind + "'");
}

// CSV export sampled on a caller-provided grid: lines "t,value".
inline void write_csv(std::ostream& os, const Path& p, const std::vector<double>& grid) {
  os << "t,value\n";
  for (double t : grid) {
    nlohmann::json tj = t, vj = p.eval(t);
    os << tj.dump() << "," << vj.dump() << "\n";
  }
}

}  // namespace rde
