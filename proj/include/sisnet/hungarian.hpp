#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "sisnet/tensor.hpp"

namespace sisnet {

// Cost matrix between predictions (rows) and ground truths (columns).
// Either side may be empty.
struct CostMatrix {
  int preds = 0, gts = 0;
  std::vector<double> values;  // row-major, preds x gts

  CostMatrix() = default;
  CostMatrix(int p, int g) : preds(p), gts(g), values(static_cast<size_t>(p) * g, 0.0) {}

  double& at(int p, int g) { return values[static_cast<size_t>(p) * gts + g]; }
  double at(int p, int g) const { return values[static_cast<size_t>(p) * gts + g]; }

  void check_finite() const {
    for (double v : values)
      if (!std::isfinite(v)) throw value_error("cost matrix holds a non-finite entry");
  }

  static CostMatrix from_tensor(const Tensor& t) {
    if (t.rank() != 2)
      throw shape_error("cost matrix: expected rank 2, got " + shape_str(t.shape()));
    CostMatrix c(t.dim(0), t.dim(1));
    std::copy(t.data(), t.data() + t.size(), c.values.begin());
    return c;
  }
};

struct Assignment {
  std::vector<std::pair<int, int>> pairs;  // (prediction, gt), sorted by prediction
  double total_cost = 0.0;
};

namespace detail {

// Shortest-augmenting-path assignment with potentials. Requires
// rows <= cols; every row ends up matched. Returns col_of_row.
inline std::vector<int> solve_rect_assignment(
    int rows, int cols, const std::function<double(int, int)>& cost) {
  const double INF = std::numeric_limits<double>::infinity();
  std::vector<double> u(static_cast<size_t>(rows) + 1, 0.0);
  std::vector<double> v(static_cast<size_t>(cols) + 1, 0.0);
  std::vector<int> match(static_cast<size_t>(cols) + 1, 0);  // row matched to col, 1-based
  std::vector<int> way(static_cast<size_t>(cols) + 1, 0);

  for (int i = 1; i <= rows; ++i) {
    match[0] = i;
    int j0 = 0;
    std::vector<double> minv(static_cast<size_t>(cols) + 1, INF);
    std::vector<char> used(static_cast<size_t>(cols) + 1, 0);
    do {
      used[static_cast<size_t>(j0)] = 1;
      const int i0 = match[static_cast<size_t>(j0)];
      double delta = INF;
      int j1 = -1;
      for (int j = 1; j <= cols; ++j) {
        if (used[static_cast<size_t>(j)]) continue;
        const double cur =
            cost(i0 - 1, j - 1) - u[static_cast<size_t>(i0)] - v[static_cast<size_t>(j)];
        if (cur < minv[static_cast<size_t>(j)]) {
          minv[static_cast<size_t>(j)] = cur;
          way[static_cast<size_t>(j)] = j0;
        }
        if (minv[static_cast<size_t>(j)] < delta) {
          delta = minv[static_cast<size_t>(j)];
          j1 = j;
        }
      }
      for (int j = 0; j <= cols; ++j) {
        if (used[static_cast<size_t>(j)]) {
          u[static_cast<size_t>(match[static_cast<size_t>(j)])] += delta;
          v[static_cast<size_t>(j)] -= delta;
        } else {
          minv[static_cast<size_t>(j)] -= delta;
        }
      }
      j0 = j1;
    } while (match[static_cast<size_t>(j0)] != 0);
    do {
      const int j1 = way[static_cast<size_t>(j0)];
      match[static_cast<size_t>(j0)] = match[static_cast<size_t>(j1)];
      j0 = j1;
    } while (j0);
  }

  std::vector<int> col_of_row(static_cast<size_t>(rows), -1);
  for (int j = 1; j <= cols; ++j)
    if (match[static_cast<size_t>(j)] > 0)
      col_of_row[static_cast<size_t>(match[static_cast<size_t>(j)]) - 1] = j - 1;
  return col_of_row;
}

// Minimum total cost over matchings with exactly min(P, G) pairs, under
// forced pairs (fixed_col_of_pred) and excluded predictions (banned).
// Callers keep the constraint set feasible.
inline double optimal_cost_with_constraints(const CostMatrix& cost,
                                            const std::vector<int>& fixed_col_of_pred,
                                            const std::vector<char>& pred_banned) {
  double fixed_sum = 0.0;
  std::vector<char> col_taken(static_cast<size_t>(cost.gts), 0);
  for (int p = 0; p < cost.preds; ++p) {
    const int g = fixed_col_of_pred[static_cast<size_t>(p)];
    if (g >= 0) {
      fixed_sum += cost.at(p, g);
      col_taken[static_cast<size_t>(g)] = 1;
    }
  }
  std::vector<int> free_preds;
  for (int p = 0; p < cost.preds; ++p)
    if (fixed_col_of_pred[static_cast<size_t>(p)] < 0 && !pred_banned[static_cast<size_t>(p)])
      free_preds.push_back(p);
  std::vector<int> free_cols;
  for (int g = 0; g < cost.gts; ++g)
    if (!col_taken[static_cast<size_t>(g)]) free_cols.push_back(g);

  if (free_cols.empty() || free_preds.empty()) return fixed_sum;

  if (free_preds.size() <= free_cols.size()) {
    auto c = [&](int r, int j) {
      return cost.at(free_preds[static_cast<size_t>(r)], free_cols[static_cast<size_t>(j)]);
    };
    auto col_of_row = solve_rect_assignment(static_cast<int>(free_preds.size()),
                                            static_cast<int>(free_cols.size()), c);
    double s = fixed_sum;
    for (size_t r = 0; r < free_preds.size(); ++r)
      s += cost.at(free_preds[r], free_cols[static_cast<size_t>(col_of_row[r])]);
    return s;
  }

  auto c = [&](int r, int j) {
    return cost.at(free_preds[static_cast<size_t>(j)], free_cols[static_cast<size_t>(r)]);
  };
  auto row_of_col = solve_rect_assignment(static_cast<int>(free_cols.size()),
                                          static_cast<int>(free_preds.size()), c);
  double s = fixed_sum;
  for (size_t r = 0; r < free_cols.size(); ++r)
    s += cost.at(free_preds[static_cast<size_t>(row_of_col[r])], free_cols[r]);
  return s;
}

}  // namespace detail

// Minimum-cost one-to-one assignment with exactly min(P, G) pairs; all
// ground-truth columns are covered whenever P >= G. Among equal-cost optima
// the lexicographically smallest pair list is returned.
inline Assignment hungarian(const CostMatrix& cost) {
  Assignment out;
  if (cost.preds == 0 || cost.gts == 0) return out;
  cost.check_finite();

  std::vector<int> fixed(static_cast<size_t>(cost.preds), -1);
  std::vector<char> banned(static_cast<size_t>(cost.preds), 0);
  const double best = detail::optimal_cost_with_constraints(cost, fixed, banned);
  const double tol = 1e-9 * std::max(1.0, std::fabs(best));

  int bans_left = std::max(0, cost.preds - cost.gts);
  int remaining = std::min(cost.preds, cost.gts);
  std::vector<char> col_taken(static_cast<size_t>(cost.gts), 0);
  for (int p = 0; p < cost.preds && remaining > 0; ++p) {
    bool matched = false;
    for (int g = 0; g < cost.gts; ++g) {
      if (col_taken[static_cast<size_t>(g)]) continue;
      fixed[static_cast<size_t>(p)] = g;
      const double with_pair = detail::optimal_cost_with_constraints(cost, fixed, banned);
      if (with_pair <= best + tol) {
        out.pairs.emplace_back(p, g);
        col_taken[static_cast<size_t>(g)] = 1;
        matched = true;
        --remaining;
        break;
      }
      fixed[static_cast<size_t>(p)] = -1;
    }
    if (!matched) {
      if (bans_left <= 0)
        throw std::logic_error("hungarian: refinement could not match a required row");
      banned[static_cast<size_t>(p)] = 1;
      --bans_left;
    }
  }

  out.total_cost = 0.0;
  for (const auto& pr : out.pairs) out.total_cost += cost.at(pr.first, pr.second);
  return out;
}

inline Assignment hungarian(const Tensor& cost) {
  return hungarian(CostMatrix::from_tensor(cost));
}

}  // namespace sisnet
