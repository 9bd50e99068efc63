#pragma once

// Shared test-only helpers: independent oracles and random instance
// generators. Everything here is deliberately implemented without touching
// the library's own integration / transport code paths.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <vector>

#include "rde/path.hpp"
#include "rde/rng.hpp"

namespace testsupport {

// ---------------------------------------------------------------------------
// Adaptive Simpson quadrature (oracle for the closed-form path integrals).
// ---------------------------------------------------------------------------

inline double simpson(double a, double b, double fa, double fm, double fb) {
  return (b - a) / 6.0 * (fa + 4.0 * fm + fb);
}

inline double adaptive_simpson_rec(const std::function<double(double)>& f, double a, double b,
                                   double fa, double fm, double fb, double whole, double tol,
                                   int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  const double flm = f(lm), frm = f(rm);
  const double left = simpson(a, m, fa, flm, fm);
  const double right = simpson(m, b, fm, frm, fb);
  if (depth <= 0 || std::fabs(left + right - whole) <= 15.0 * tol)
    return left + right + (left + right - whole) / 15.0;
  return adaptive_simpson_rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
         adaptive_simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

// Integrates f over [a,b]; split at the supplied knots first so the
// quadrature never straddles a kink.
inline double adaptive_quadrature(const std::function<double(double)>& f,
                                  const std::vector<double>& knots, double tol = 1e-12) {
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < knots.size(); ++i) {
    const double a = knots[i], b = knots[i + 1];
    const double m = 0.5 * (a + b);
    const double fa = f(a), fm = f(m), fb = f(b);
    total += adaptive_simpson_rec(f, a, b, fa, fm, fb, simpson(a, b, fa, fm, fb), tol, 40);
  }
  return total;
}

// ---------------------------------------------------------------------------
// Brute-force optimal matching (oracle for the assignment solver), m <= ~8.
// ---------------------------------------------------------------------------

inline double brute_force_min_cost(const std::vector<double>& cost, std::size_t m) {
  std::vector<std::size_t> perm(m);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  double best = std::numeric_limits<double>::infinity();
  do {
    double total = 0.0;
    for (std::size_t i = 0; i < m; ++i) total += cost[i * m + perm[i]];
    best = std::min(best, total);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

// ---------------------------------------------------------------------------
// Random path generators.
// ---------------------------------------------------------------------------

inline std::vector<double> random_breakpoints(rde::Rng& rng, std::size_t interior) {
  std::vector<double> t{0.0, 1.0};
  for (std::size_t i = 0; i < interior; ++i) t.push_back(0.02 + 0.96 * rng.uniform01());
  std::sort(t.begin(), t.end());
  t.erase(std::unique(t.begin(), t.end(),
                      [](double a, double b) { return b - a < 1e-4; }),
          t.end());
  if (t.back() != 1.0) t.push_back(1.0);
  return t;
}

inline rde::Path random_pl_path(rde::Rng& rng, std::size_t interior = 6, double amp = 2.0) {
  std::vector<double> t = random_breakpoints(rng, interior);
  std::vector<double> v(t.size());
  for (double& x : v) x = amp * (2.0 * rng.uniform01() - 1.0);
  return rde::Path::piecewise_linear(std::move(t), std::move(v));
}

inline rde::Path random_pc_path(rde::Rng& rng, std::size_t interior = 6, double amp = 2.0) {
  std::vector<double> t = random_breakpoints(rng, interior);
  std::vector<double> v(t.size() - 1);
  for (double& x : v) x = amp * (2.0 * rng.uniform01() - 1.0);
  return rde::Path::piecewise_constant(std::move(t), std::move(v));
}

// ---------------------------------------------------------------------------
// Jacobi eigenvalue sweep for small symmetric matrices (PSD checks).
// ---------------------------------------------------------------------------

inline std::vector<double> symmetric_eigenvalues(std::vector<double> a, std::size_t n) {
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) off += a[p * n + q] * a[p * n + q];
    if (off < 1e-24) break;
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a[p * n + q];
        if (std::fabs(apq) < 1e-18) continue;
        const double app = a[p * n + p], aqq = a[q * n + q];
        const double theta = 0.5 * (aqq - app) / apq;
        const double sign = theta >= 0.0 ? 1.0 : -1.0;
        const double tt = sign / (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(tt * tt + 1.0), s = tt * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a[k * n + p], akq = a[k * n + q];
          a[k * n + p] = c * akp - s * akq;
          a[k * n + q] = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a[p * n + k], aqk = a[q * n + k];
          a[p * n + k] = c * apk - s * aqk;
          a[q * n + k] = s * apk + c * aqk;
        }
      }
    }
  }
  std::vector<double> eig(n);
  for (std::size_t i = 0; i < n; ++i) eig[i] = a[i * n + i];
  return eig;
}

}  // namespace testsupport
