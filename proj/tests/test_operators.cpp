#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "rde/operators.hpp"
#include "rde/rng.hpp"
#include "test_support.hpp"

using namespace rde;
using testsupport::random_pc_path;
using testsupport::random_pl_path;

namespace {

Path ramp() { return Path::piecewise_linear({0.0, 1.0}, {0.0, 1.0}); }

PathOperator random_operator(Rng& rng, int depth = 2) {
  const double u = rng.uniform01();
  if (depth == 0 || u < 0.5) {
    const double v = rng.uniform01();
    if (v < 0.4) return PathOperator::scale(2.0 * rng.uniform01() - 1.0);
    if (v < 0.7) return PathOperator::front_split(1.0 + 3.0 * rng.uniform01() + 1e-3);
    return PathOperator::back_split(1.0 + 3.0 * rng.uniform01() + 1e-3);
  }
  PathOperator l = random_operator(rng, depth - 1);
  PathOperator r = random_operator(rng, depth - 1);
  return u < 0.75 ? PathOperator::compose(std::move(l), std::move(r))
                  : PathOperator::sum(std::move(l), std::move(r));
}

}  // namespace

TEST_CASE("split operators on the identity ramp") {
  const Path fs = apply(PathOperator::front_split(2.0), ramp());
  CHECK(fs == Path::piecewise_linear({0.0, 0.5, 1.0}, {0.0, 1.0, 1.0}));

  const Path bs = apply(PathOperator::back_split(2.0), ramp());
  CHECK(bs == Path::piecewise_linear({0.0, 0.5, 1.0}, {0.0, 0.0, 1.0}));

  const Path id = apply(PathOperator::scale(1.0), ramp());
  CHECK(id == ramp());

  CHECK_THROWS_AS(PathOperator::front_split(1.0), std::invalid_argument);
  CHECK_THROWS_AS(PathOperator::back_split(0.5), std::invalid_argument);
}

TEST_CASE("splits preserve kind and match their pointwise definitions") {
  Rng rng(Seed{201});
  for (int i = 0; i < 50; ++i) {
    const bool pl = i % 2 == 0;
    const Path f = pl ? random_pl_path(rng) : random_pc_path(rng);
    const double beta = 1.0 + 3.0 * rng.uniform01() + 1e-3;
    const Path front = apply(PathOperator::front_split(beta), f);
    const Path back = apply(PathOperator::back_split(beta), f);
    CHECK(front.kind() == f.kind());
    CHECK(back.kind() == f.kind());
    for (int k = 0; k < 60; ++k) {
      const double t = rng.uniform01();
      const double expected_front = t <= 1.0 / beta ? f.eval(beta * t) : f.value_at_one();
      const double expected_back =
          t <= 1.0 / beta ? f.value_at_zero() : f.eval((beta * t - 1.0) / (beta - 1.0));
      REQUIRE(front.eval(t) == Catch::Approx(expected_front).margin(1e-9));
      REQUIRE(back.eval(t) == Catch::Approx(expected_back).margin(1e-9));
    }
  }
}

TEST_CASE("splits preserve the sup norm exactly") {
  Rng rng(Seed{202});
  for (int i = 0; i < 60; ++i) {
    const Path f = (i % 2 == 0) ? random_pl_path(rng) : random_pc_path(rng);
    const double beta = 1.0 + 4.0 * rng.uniform01() + 1e-3;
    CHECK(sup_norm(apply(PathOperator::front_split(beta), f)) == sup_norm(f));
    CHECK(sup_norm(apply(PathOperator::back_split(beta), f)) == sup_norm(f));
  }
}

TEST_CASE("operator norms") {
  CHECK(op_norm(PathOperator::front_split(1.5)) == 1.0);
  CHECK(op_norm(PathOperator::front_split(7.0)) == 1.0);
  CHECK(op_norm(PathOperator::back_split(2.0)) == 1.0);
  CHECK(op_norm(PathOperator::scale(-0.5)) == 0.5);
  const PathOperator c =
      PathOperator::compose(PathOperator::scale(2.0), PathOperator::front_split(3.0));
  CHECK(op_norm(c) == 2.0);
  CHECK(op_norm_is_exact(c));
  const PathOperator s = PathOperator::sum(PathOperator::scale(1.0), PathOperator::scale(-1.0));
  CHECK(op_norm(s) == 2.0);  // subadditive upper bound
  CHECK_FALSE(op_norm_is_exact(s));
}

TEST_CASE("linearity at random points") {
  Rng rng(Seed{203});
  for (int i = 0; i < 30; ++i) {
    const PathOperator op = random_operator(rng);
    const Path f = random_pl_path(rng);
    const Path g = random_pl_path(rng);
    const double a = 2.0 * rng.uniform01() - 1.0;
    const double b = 2.0 * rng.uniform01() - 1.0;
    const Path lhs = apply(op, affine_combine({a, b}, {f, g}));
    const Path rhs = affine_combine({a, b}, {apply(op, f), apply(op, g)});
    for (int k = 0; k < 100; ++k) {
      const double t = rng.uniform01();
      REQUIRE(lhs.eval(t) == Catch::Approx(rhs.eval(t)).margin(1e-10));
    }
  }
}

TEST_CASE("reported norm bounds every unit-ball probe") {
  Rng rng(Seed{204});
  for (int i = 0; i < 30; ++i) {
    const PathOperator op = random_operator(rng);
    const double bound = op_norm(op);
    for (int k = 0; k < 20; ++k) {
      Path f = random_pl_path(rng);
      const double sup = sup_norm(f);
      if (sup == 0.0) continue;
      f = affine_combine({1.0 / sup}, {f});
      REQUIRE(sup_norm(apply(op, f)) <= bound + 1e-10);
    }
  }
}

TEST_CASE("front and back splits glue continuously") {
  Rng rng(Seed{205});
  for (int i = 0; i < 30; ++i) {
    Path f = random_pl_path(rng);
    Path g = random_pl_path(rng);
    // Pin f(0) = 0 and g(0) = 0 so the recombination is continuous at 1/beta.
    std::vector<double> fv = f.values();
    fv[0] = 0.0;
    f = Path::piecewise_linear(f.breakpoints(), fv);
    std::vector<double> gv = g.values();
    gv[0] = 0.0;
    g = Path::piecewise_linear(g.breakpoints(), gv);
    const double beta = 1.0 + 3.0 * rng.uniform01() + 1e-3;
    const Path glued = affine_combine(
        {1.0, 1.0},
        {apply(PathOperator::front_split(beta), f), apply(PathOperator::back_split(beta), g)});
    const double at_cut = glued.eval(1.0 / beta);
    CHECK(at_cut == Catch::Approx(f.value_at_one() + g.value_at_zero()).margin(1e-9));
    CHECK(glued.eval_left(1.0 / beta) == Catch::Approx(at_cut).margin(1e-9));
  }
}

TEST_CASE("donsker coefficients") {
  const CoefficientDraw d2 = donsker_coefficients(2);
  REQUIRE(d2.operators.size() == 2);
  CHECK(d2.indices == std::vector<std::int64_t>{1, 1});
  CHECK(op_norm(d2.operators[0]) == Catch::Approx(std::sqrt(0.5)).epsilon(1e-14));
  CHECK(op_norm(d2.operators[1]) == Catch::Approx(std::sqrt(0.5)).epsilon(1e-14));
  CHECK_FALSE(d2.shift.has_value());

  const CoefficientDraw d3 = donsker_coefficients(3);
  CHECK(d3.indices == std::vector<std::int64_t>{2, 1});
  CHECK(op_norm(d3.operators[0]) == Catch::Approx(std::sqrt(2.0 / 3.0)).epsilon(1e-14));
  CHECK(op_norm(d3.operators[1]) == Catch::Approx(std::sqrt(1.0 / 3.0)).epsilon(1e-14));

  CHECK_THROWS_AS(donsker_coefficients(1), std::domain_error);

  // The operator norm of each coefficient equals its scalar prefactor.
  for (std::int64_t n : {2, 3, 5, 8, 13, 64}) {
    const CoefficientDraw d = donsker_coefficients(n);
    const double hi = static_cast<double>((n + 1) / 2) / static_cast<double>(n);
    const double lo = static_cast<double>(n / 2) / static_cast<double>(n);
    CHECK(op_norm(d.operators[0]) == Catch::Approx(std::sqrt(hi)).epsilon(1e-14));
    CHECK(op_norm(d.operators[1]) == Catch::Approx(std::sqrt(lo)).epsilon(1e-14));
    CHECK(op_norm_is_exact(d.operators[0]));
  }
}

TEST_CASE("operator json round trip") {
  Rng rng(Seed{206});
  const Path probe = random_pl_path(rng);
  for (int i = 0; i < 25; ++i) {
    const PathOperator op = random_operator(rng, 3);
    nlohmann::json j;
    to_json(j, op);
    const PathOperator back = operator_from_json(j);
    CHECK(op_norm(back) == op_norm(op));
    const Path a = apply(op, probe);
    const Path b = apply(back, probe);
    REQUIRE(diff_sup_norm(a, b) <= 1e-12);
  }
}
