#pragma once

#include <cstddef>
#include <limits>
#include <stdexcept>
#include <vector>

namespace rde {

// Exact minimum-cost perfect matching on a dense n x n cost matrix
// (row-major), Hungarian algorithm in the shortest-augmenting-path form with
// potentials, O(n^3). Single-threaded; callers parallelize across calls.
inline double solve_assignment(const std::vector<double>& cost, std::size_t n,
                               std::vector<int>* row_to_col = nullptr) {
  if (n == 0) throw std::invalid_argument("solve_assignment: empty problem");
  if (cost.size() != n * n) throw std::invalid_argument("solve_assignment: bad matrix size");
  constexpr double kInf = std::numeric_limits<double>::infinity();

  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
  std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);
  std::vector<char> used(n + 1);

  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::fill(minv.begin(), minv.end(), kInf);
    std::fill(used.begin(), used.end(), char{0});
    do {
      used[j0] = 1;
      const std::size_t i0 = p[j0];
      double delta = kInf;
      std::size_t j1 = 0;
      const double* row = cost.data() + (i0 - 1) * n;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = row[j - 1] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }

  if (row_to_col) row_to_col->assign(n, -1);
  double total = 0.0;
  for (std::size_t j = 1; j <= n; ++j) {
    total += cost[(p[j] - 1) * n + (j - 1)];
    if (row_to_col) (*row_to_col)[p[j] - 1] = static_cast<int>(j - 1);
  }
  return total;
}

}  // namespace rde
