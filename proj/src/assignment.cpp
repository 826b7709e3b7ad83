#include "wsalign/assignment.hpp"

#include <cmath>
#include <limits>

#include "wsalign/common.hpp"

namespace wsalign {

std::vector<int> linear_assignment_min(const std::vector<double>& cost,
                                       int n) {
  if (n < 1) throw InputError("assignment needs n >= 1");
  if (int(cost.size()) != n * n) {
    throw ShapeError("assignment cost matrix must be n*n");
  }
  for (double c : cost) {
    if (!std::isfinite(c)) {
      throw NumericError("assignment cost matrix contains non-finite entries");
    }
  }
  // Shortest augmenting paths over dual potentials (u, v); p[j] is the row
  // currently assigned to column j, 1-based with column 0 as the virtual root.
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(size_t(n) + 1, 0.0), v(size_t(n) + 1, 0.0);
  std::vector<int> p(size_t(n) + 1, 0), way(size_t(n) + 1, 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(size_t(n) + 1, inf);
    std::vector<char> used(size_t(n) + 1, 0);
    do {
      used[size_t(j0)] = 1;
      int i0 = p[size_t(j0)], j1 = 0;
      double delta = inf;
      for (int j = 1; j <= n; ++j) {
        if (used[size_t(j)]) continue;
        double cur = cost[size_t(i0 - 1) * size_t(n) + size_t(j - 1)] -
                     u[size_t(i0)] - v[size_t(j)];
        if (cur < minv[size_t(j)]) {
          minv[size_t(j)] = cur;
          way[size_t(j)] = j0;
        }
        if (minv[size_t(j)] < delta) {
          delta = minv[size_t(j)];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[size_t(j)]) {
          u[size_t(p[size_t(j)])] += delta;
          v[size_t(j)] -= delta;
        } else {
          minv[size_t(j)] -= delta;
        }
      }
      j0 = j1;
    } while (p[size_t(j0)] != 0);
    do {
      int j1 = way[size_t(j0)];
      p[size_t(j0)] = p[size_t(j1)];
      j0 = j1;
    } while (j0);
  }
  std::vector<int> row_to_col(size_t(n), -1);
  for (int j = 1; j <= n; ++j) {
    if (p[size_t(j)]) row_to_col[size_t(p[size_t(j)] - 1)] = j - 1;
  }
  return row_to_col;
}

std::vector<int> linear_assignment_max(const std::vector<double>& score,
                                       int n) {
  std::vector<double> cost(score.size());
  for (size_t i = 0; i < score.size(); ++i) cost[i] = -score[i];
  std::vector<int> a = linear_assignment_min(cost, n);
  // Exact-tie canonicalization: equal-objective pairwise swaps that lower the
  // earlier row's column. Each swap is a strict lexicographic decrease, so
  // the loop terminates; ties between identical units resolve to the
  // identity assignment.
  auto s = [&](int r, int c) { return score[size_t(r) * size_t(n) + size_t(c)]; };
  bool changed = true;
  while (changed) {
    changed = false;
    for (int i = 0; i < n; ++i) {
      for (int j = i + 1; j < n; ++j) {
        if (a[size_t(j)] < a[size_t(i)] &&
            s(i, a[size_t(i)]) + s(j, a[size_t(j)]) ==
                s(i, a[size_t(j)]) + s(j, a[size_t(i)])) {
          std::swap(a[size_t(i)], a[size_t(j)]);
          changed = true;
        }
      }
    }
  }
  return a;
}

}  // namespace wsalign
