#pragma once

#include <cmath>
#include <cstdint>
#include <memory>
#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

#include <json.hpp>

#include "rde/path.hpp"

namespace rde {

enum class OpKind { kScale, kFrontSplit, kBackSplit, kCompose, kSum };

// A continuous linear operator on path space, built from scalings, the time
// splits phi_beta / psi_beta, composition and sums. Immutable value type;
// children are shared.
//
//   phi_beta(f)(t) = f(beta t)              for t <= 1/beta, f(1) after
//   psi_beta(f)(t) = f(0)                   for t <= 1/beta,
//                    f((beta t - 1)/(beta - 1)) after
//
// Both splits preserve the sup norm exactly.
class PathOperator {
 public:
  static PathOperator scale(double c) { return PathOperator(OpKind::kScale, c, nullptr, nullptr); }

  static PathOperator front_split(double beta) {
    require_beta(beta);
    return PathOperator(OpKind::kFrontSplit, beta, nullptr, nullptr);
  }

  static PathOperator back_split(double beta) {
    require_beta(beta);
    return PathOperator(OpKind::kBackSplit, beta, nullptr, nullptr);
  }

  // compose(outer, inner) applies inner first: (outer . inner)(f).
  static PathOperator compose(PathOperator outer, PathOperator inner) {
    return PathOperator(OpKind::kCompose, 0.0,
                        std::make_shared<PathOperator>(std::move(outer)),
                        std::make_shared<PathOperator>(std::move(inner)));
  }

  static PathOperator sum(PathOperator left, PathOperator right) {
    return PathOperator(OpKind::kSum, 0.0, std::make_shared<PathOperator>(std::move(left)),
                        std::make_shared<PathOperator>(std::move(right)));
  }

  OpKind kind() const { return kind_; }
  double param() const { return param_; }
  const PathOperator& left() const { return *left_; }
  const PathOperator& right() const { return *right_; }

 private:
  static void require_beta(double beta) {
    if (!(beta > 1.0)) throw std::invalid_argument("split operator: beta must be > 1");
  }

  PathOperator(OpKind kind, double param, std::shared_ptr<const PathOperator> l,
               std::shared_ptr<const PathOperator> r)
      : kind_(kind), param_(param), left_(std::move(l)), right_(std::move(r)) {}

  OpKind kind_;
  double param_;
  std::shared_ptr<const PathOperator> left_, right_;
};

namespace detail {

inline Path apply_scale(double c, const Path& f) {
  std::vector<double> v = f.values();
  for (double& x : v) x *= c;
  std::vector<double> t = f.breakpoints();
  if (f.kind() == PathKind::kPiecewiseLinear)
    return Path::piecewise_linear(std::move(t), std::move(v));
  const double at_one = v.back();
  v.pop_back();
  return Path::piecewise_constant(std::move(t), std::move(v), at_one);
}

inline Path apply_front_split(double beta, const Path& f) {
  const auto& t = f.breakpoints();
  const auto& v = f.values();
  const double cut = 1.0 / beta;
  std::vector<double> t2, v2;
  t2.reserve(t.size() + 1);
  v2.reserve(v.size() + 1);
  for (std::size_t i = 0; i < t.size(); ++i) t2.push_back(t[i] * cut);
  if (f.kind() == PathKind::kPiecewiseLinear) {
    v2 = v;
    t2.push_back(1.0);
    v2.push_back(v.back());  // hold f(1) on (1/beta, 1]
    return Path::piecewise_linear(std::move(t2), std::move(v2));
  }
  // Intervals keep their values compressed into [0, 1/beta); from 1/beta on
  // the path sits at f(1).
  std::vector<double> iv(v.begin(), v.end() - 1);
  iv.push_back(v.back());  // [1/beta, 1) -> f(1)
  t2.push_back(1.0);
  return Path::piecewise_constant(std::move(t2), std::move(iv), v.back());
}

inline Path apply_back_split(double beta, const Path& f) {
  const auto& t = f.breakpoints();
  const auto& v = f.values();
  const double cut = 1.0 / beta;
  const auto map = [beta, cut](double u) { return std::min(u * (beta - 1.0) * cut + cut, 1.0); };
  std::vector<double> t2, v2;
  t2.reserve(t.size() + 1);
  v2.reserve(v.size() + 1);
  if (f.kind() == PathKind::kPiecewiseLinear) {
    t2.push_back(0.0);
    v2.push_back(v.front());  // hold f(0) on [0, 1/beta]
    for (std::size_t i = 0; i + 1 < t.size(); ++i) {
      t2.push_back(map(t[i]));
      v2.push_back(v[i]);
    }
    t2.push_back(1.0);  // map(1) == 1, pinned exactly
    v2.push_back(v.back());
    return Path::piecewise_linear(std::move(t2), std::move(v2));
  }
  // First interval value extends over [0, map(t_1)); the rest map through.
  std::vector<double> iv;
  t2.push_back(0.0);
  for (std::size_t i = 1; i + 1 < t.size(); ++i) {
    t2.push_back(map(t[i]));
  }
  t2.push_back(1.0);
  for (std::size_t i = 0; i + 1 < t.size(); ++i) iv.push_back(v[i]);
  return Path::piecewise_constant(std::move(t2), std::move(iv), v.back());
}

}  // namespace detail

inline Path apply(const PathOperator& op, const Path& f) {
  switch (op.kind()) {
    case OpKind::kScale:
      return detail::apply_scale(op.param(), f);
    case OpKind::kFrontSplit:
      return detail::apply_front_split(op.param(), f);
    case OpKind::kBackSplit:
      return detail::apply_back_split(op.param(), f);
    case OpKind::kCompose:
      return apply(op.left(), apply(op.right(), f));
    case OpKind::kSum: {
      return affine_combine({1.0, 1.0}, {apply(op.left(), f), apply(op.right(), f)});
    }
  }
  throw std::logic_error("apply: unreachable");
}

// Operator norm. Exact for scalings and splits and for compositions of
// those; for Sum (and compositions containing one) the value is the
// subadditive/submultiplicative upper bound.
inline double op_norm(const PathOperator& op) {
  switch (op.kind()) {
    case OpKind::kScale:
      return std::fabs(op.param());
    case OpKind::kFrontSplit:
    case OpKind::kBackSplit:
      return 1.0;
    case OpKind::kCompose:
      return op_norm(op.left()) * op_norm(op.right());
    case OpKind::kSum:
      return op_norm(op.left()) + op_norm(op.right());
  }
  throw std::logic_error("op_norm: unreachable");
}

// True when op_norm() is the exact norm: scalings and splits are exact, and
// so are their compositions (splits are isometries, scalings commute).
inline bool op_norm_is_exact(const PathOperator& op) {
  switch (op.kind()) {
    case OpKind::kScale:
    case OpKind::kFrontSplit:
    case OpKind::kBackSplit:
      return true;
    case OpKind::kCompose:
      return op_norm_is_exact(op.left()) && op_norm_is_exact(op.right());
    case OpKind::kSum:
      return false;
  }
  return false;
}

// One draw of the coefficient tuple (A_1..A_K, b, I) of a size-n recurrence
// level. A missing shift means the zero path.
struct CoefficientDraw {
  std::vector<PathOperator> operators;
  std::optional<Path> shift;
  std::vector<std::int64_t> indices;
};

// Deterministic coefficient tuple of the divide-and-conquer decomposition of
// the rescaled random walk:
//   A_1 = sqrt(ceil(n/2)/n) phi_{n/ceil(n/2)},
//   A_2 = sqrt(floor(n/2)/n) psi_{n/ceil(n/2)},
//   b = 0, I = (ceil(n/2), floor(n/2)).
inline CoefficientDraw donsker_coefficients(std::int64_t n) {
  if (n < 2) throw std::domain_error("donsker_coefficients: n must be >= 2");
  const std::int64_t hi = (n + 1) / 2;
  const std::int64_t lo = n / 2;
  const double beta = static_cast<double>(n) / static_cast<double>(hi);
  CoefficientDraw draw;
  draw.operators.push_back(PathOperator::compose(
      PathOperator::scale(std::sqrt(static_cast<double>(hi) / static_cast<double>(n))),
      PathOperator::front_split(beta)));
  draw.operators.push_back(PathOperator::compose(
      PathOperator::scale(std::sqrt(static_cast<double>(lo) / static_cast<double>(n))),
      PathOperator::back_split(beta)));
  draw.indices = {hi, lo};
  return draw;
}

inline void to_json(nlohmann::json& j, const PathOperator& op) {
  switch (op.kind()) {
    case OpKind::kScale:
      j = {{"kind", "scale"}, {"c", op.param()}};
      return;
    case OpKind::kFrontSplit:
      j = {{"kind", "front_split"}, {"beta", op.param()}};
      return;
    case OpKind::kBackSplit:
      j = {{"kind", "back_split"}, {"beta", op.param()}};
      return;
    case OpKind::kCompose: {
      nlohmann::json l, r;
      to_json(l, op.left());
      to_json(r, op.right());
      j = {{"kind", "compose"}, {"children", nlohmann::json::array({l, r})}};
      return;
    }
    case OpKind::kSum: {
      nlohmann::json l, r;
      to_json(l, op.left());
      to_json(r, op.right());
      j = {{"kind", "sum"}, {"children", nlohmann::json::array({l, r})}};
      return;
    }
  }
}

inline PathOperator operator_from_json(const nlohmann::json& j) {
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "scale") return PathOperator::scale(j.at("c").get<double>());
  if (kind == "front_split") return PathOperator::front_split(j.at("beta").get<double>());
  if (kind == "back_split") return PathOperator::back_split(j.at("beta").get<double>());
  if (kind == "compose" || kind == "sum") {
    const auto& ch = j.at("children");
    if (ch.size() != 2) throw std::invalid_argument("operator_from_json: need two children");
    PathOperator l = operator_from_json(ch[0]);
    PathOperator r = operator_from_json(ch[1]);
    return kind == "compose" ? PathOperator::compose(std::move(l), std::move(r))
                             : PathOperator::sum(std::move(l), std::move(r));
  }
  throw std::invalid_argument("operator_from_json: unknown kind '" + kind + "'");
}

}  // namespace rde
