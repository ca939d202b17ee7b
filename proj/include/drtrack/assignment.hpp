#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <utility>
#include <vector>

namespace drtrack {

/**
 * Dense rows x cols cost matrix. Entries are finite costs or the forbidden
 * sentinel; the solver never returns a forbidden pair. Optional row/col
 * identifier lists carry caller-side labels (track ids, detection indices).
 */
class CostMatrix {
public:
  static constexpr double kForbidden = std::numeric_limits<double>::infinity();

  CostMatrix() = default;
  CostMatrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {
    check_entry(fill);
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  bool empty() const noexcept { return rows_ == 0 || cols_ == 0; }

  double operator()(std::size_t r, std::size_t c) const { return data_.at(r * cols_ + c); }
  void set(std::size_t r, std::size_t c, double v) {
    check_entry(v);
    data_.at(r * cols_ + c) = v;
  }
  void forbid(std::size_t r, std::size_t c) { data_.at(r * cols_ + c) = kForbidden; }
  bool forbidden(std::size_t r, std::size_t c) const { return (*this)(r, c) == kForbidden; }

  std::vector<int> row_ids;
  std::vector<int> col_ids;

private:
  static void check_entry(double v) {
    if (std::isnan(v) || v == -std::numeric_limits<double>::infinity()) {
      throw std::invalid_argument("cost entries must be finite or the forbidden sentinel");
    }
  }

  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

struct Assignment {
  std::vector<std::pair<std::size_t, std::size_t>> matches;  // (row, col), sorted by row
  std::vector<std::size_t> unmatched_rows;
  std::vector<std::size_t> unmatched_cols;
};

namespace detail {

struct HungarianResult {
  std::vector<std::size_t> row_to_col;
  std::vector<double> u, v;  // dual potentials, 1-based as in the solver
};

// Shortest augmenting path Hungarian method with potentials, O(n^2 m) for n <= m.
// Scans run in index order, so the result is deterministic for a given matrix.
inline HungarianResult hungarian_rows_le_cols(const std::vector<double>& a, std::size_t n, std::size_t m) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0);
  std::vector<std::size_t> p(m + 1, 0), way(m + 1, 0);
  std::vector<double> minv(m + 1);
  std::vector<char> used(m + 1);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::fill(minv.begin(), minv.end(), inf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = p[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= m; ++j) {
        if (used[j]) continue;
        const double cur = a[(i0 - 1) * m + (j - 1)] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= m; ++j) {
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
  HungarianResult res{std::vector<std::size_t>(n, 0), std::move(u), std::move(v)};
  for (std::size_t j = 1; j <= m; ++j) {
    if (p[j] != 0) res.row_to_col[p[j] - 1] = j - 1;
  }
  return res;
}

inline double assignment_sum(const std::vector<double>& a, std::size_t m, const std::vector<std::size_t>& row_to_col) {
  double sum = 0.0;
  for (std::size_t i = 0; i < row_to_col.size(); ++i) sum += a[i * m + row_to_col[i]];
  return sum;
}

// Optimal row -> column map for n <= m that is lexicographically smallest
// (row 0's column first, then row 1's, ...) among all optima within `tol`.
// Only edges that are tight under the optimal duals can appear in an optimum,
// so the re-solve loop runs only when a genuine tie exists.
inline std::vector<std::size_t> solve_lexicographic(const std::vector<double>& a, std::size_t n, std::size_t m,
                                                    double tol) {
  HungarianResult base = hungarian_rows_le_cols(a, n, m);
  const double optimum = assignment_sum(a, m, base.row_to_col);
  std::vector<std::size_t> best = base.row_to_col;

  double max_abs = 0.0;
  for (double x : a) max_abs = std::max(max_abs, std::abs(x));
  const double lock = 1e3 * static_cast<double>(n + 1) * (max_abs + 1.0);

  std::vector<std::pair<std::size_t, std::size_t>> fixed;
  std::vector<char> col_taken(m, 0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < best[i]; ++j) {
      if (col_taken[j]) continue;
      const double reduced = a[i * m + j] - base.u[i + 1] - base.v[j + 1];
      if (reduced > tol) continue;
      std::vector<double> forced = a;
      auto pin = [&](std::size_t r, std::size_t k) {
        for (std::size_t kk = 0; kk < m; ++kk)
          if (kk != k) forced[r * m + kk] = lock;
        for (std::size_t rr = 0; rr < n; ++rr)
          if (rr != r) forced[rr * m + k] = lock;
      };
      for (const auto& [r, k] : fixed) pin(r, k);
      pin(i, j);
      const HungarianResult trial = hungarian_rows_le_cols(forced, n, m);
      bool uses_lock = false;
      for (std::size_t r = 0; r < n; ++r) uses_lock |= forced[r * m + trial.row_to_col[r]] == lock;
      if (uses_lock) continue;
      if (assignment_sum(a, m, trial.row_to_col) <= optimum + tol) {
        best = trial.row_to_col;
        break;
      }
    }
    fixed.emplace_back(i, best[i]);
    col_taken[best[i]] = 1;
  }
  return best;
}

}  // namespace detail

/**
 * Optimal one-to-one assignment on a rectangular cost matrix.
 *
 * Among all assignments that avoid forbidden entries, returns one with the
 * largest number of pairs and, among those, the minimum total cost. With no
 * forbidden entries this is the classic min(rows, cols)-pair optimum.
 * Forbidden entries are lifted to a penalty larger than any achievable cost
 * difference before solving and stripped afterwards.
 *
 * Ties between equal-cost optima resolve to the lexicographically smallest
 * row -> column assignment (row 0's column first, then row 1's, ...), where
 * leaving a row unmatched ranks after every real column.
 */
inline Assignment solve_assignment(const CostMatrix& c) {
  Assignment out;
  const std::size_t rows = c.rows(), cols = c.cols();
  if (rows == 0 || cols == 0) {
    for (std::size_t r = 0; r < rows; ++r) out.unmatched_rows.push_back(r);
    for (std::size_t k = 0; k < cols; ++k) out.unmatched_cols.push_back(k);
    return out;
  }

  double lo = 0.0, hi = 0.0;
  bool any_admissible = false;
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t k = 0; k < cols; ++k) {
      if (c.forbidden(r, k)) continue;
      const double v = c(r, k);
      lo = any_admissible ? std::min(lo, v) : v;
      hi = any_admissible ? std::max(hi, v) : v;
      any_admissible = true;
    }
  }
  // Surplus rows are absorbed by zero-cost dummy columns placed after the real ones.
  const std::size_t n = rows;
  const std::size_t m = std::max(rows, cols);
  const double penalty = static_cast<double>(n + 1) * (std::abs(lo) + std::abs(hi) + 1.0);

  std::vector<double> a(n * m, 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t k = 0; k < cols; ++k) a[r * m + k] = c.forbidden(r, k) ? penalty : c(r, k);
  }
  const double tol = 1e-10 * (std::abs(lo) + std::abs(hi) + 1.0);
  const std::vector<std::size_t> assigned = detail::solve_lexicographic(a, n, m, tol);

  std::vector<char> row_used(rows, 0), col_used(cols, 0);
  for (std::size_t r = 0; r < rows; ++r) {
    const std::size_t k = assigned[r];
    if (k >= cols || c.forbidden(r, k)) continue;
    out.matches.emplace_back(r, k);
    row_used[r] = col_used[k] = 1;
  }
  std::sort(out.matches.begin(), out.matches.end());
  for (std::size_t r = 0; r < rows; ++r)
    if (!row_used[r]) out.unmatched_rows.push_back(r);
  for (std::size_t k = 0; k < cols; ++k)
    if (!col_used[k]) out.unmatched_cols.push_back(k);
  return out;
}

/// Sum of matched costs, accumulated in row order.
inline double total_cost(const CostMatrix& c, const Assignment& a) {
  double sum = 0.0;
  for (const auto& [r, k] : a.matches) sum += c(r, k);
  return sum;
}

}  // namespace drtrack
