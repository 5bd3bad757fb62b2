// Independent reference implementations used only to cross-check the library.
// Everything here recomputes from first principles with plain loops and no
// shared code paths with the implementations under test.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "sisnet/analytics.hpp"
#include "sisnet/eval.hpp"
#include "sisnet/hungarian.hpp"
#include "sisnet/tensor.hpp"

namespace oracles {

using sisnet::Tensor;

// Direct-summation same-padded cross-correlation.
inline Tensor conv2d_naive(const Tensor& x, const Tensor& w, const Tensor& b) {
  const int h = x.dim(0), wd = x.dim(1), cin = x.dim(2);
  const int k = w.dim(0), cout = w.dim(3);
  const int p = (k - 1) / 2;
  Tensor y({h, wd, cout});
  for (int i = 0; i < h; ++i)
    for (int j = 0; j < wd; ++j)
      for (int o = 0; o < cout; ++o) {
        double acc = b(o);
        for (int di = 0; di < k; ++di)
          for (int dj = 0; dj < k; ++dj) {
            const int ii = i + di - p, jj = j + dj - p;
            if (ii < 0 || ii >= h || jj < 0 || jj >= wd) continue;
            for (int ci = 0; ci < cin; ++ci) acc += x(ii, jj, ci) * w(di, dj, ci, o);
          }
        y(i, j, o) = acc;
      }
  return y;
}

// Half-pixel-centered bilinear sampling at arbitrary scale, edge-clamped.
inline double bilinear_sample(const Tensor& x, double src_i, double src_j, int c) {
  const int h = x.dim(0), w = x.dim(1);
  const int i0 = static_cast<int>(std::floor(src_i));
  const int j0 = static_cast<int>(std::floor(src_j));
  const double fi = src_i - i0, fj = src_j - j0;
  auto cl = [](int v, int n) { return std::max(0, std::min(v, n - 1)); };
  const double v00 = x(cl(i0, h), cl(j0, w), c);
  const double v01 = x(cl(i0, h), cl(j0 + 1, w), c);
  const double v10 = x(cl(i0 + 1, h), cl(j0, w), c);
  const double v11 = x(cl(i0 + 1, h), cl(j0 + 1, w), c);
  return (1 - fi) * ((1 - fj) * v00 + fj * v01) + fi * ((1 - fj) * v10 + fj * v11);
}

inline Tensor upsample_x2_naive(const Tensor& x) {
  const int h = x.dim(0), w = x.dim(1), c = x.dim(2);
  Tensor y({2 * h, 2 * w, c});
  for (int i = 0; i < 2 * h; ++i)
    for (int j = 0; j < 2 * w; ++j)
      for (int ci = 0; ci < c; ++ci)
        y(i, j, ci) = bilinear_sample(x, (i + 0.5) / 2 - 0.5, (j + 0.5) / 2 - 0.5, ci);
  return y;
}

// Exhaustive assignment search. Enumerates predictions in index order, each
// trying ground truths in ascending order before staying unmatched, so the
// first optimum found is the lexicographically smallest pair list.
struct BruteAssignment {
  std::vector<std::pair<int, int>> pairs;
  double cost = 0.0;
};

namespace detail {
inline void brute_recurse(const sisnet::CostMatrix& c, int p, int matched,
                          std::vector<int>& col_of_pred, double acc, int need,
                          double& best_cost, bool& have,
                          std::vector<int>& best_cols) {
  const int remaining_preds = c.preds - p;
  if (matched + remaining_preds < need) return;
  if (p == c.preds) {
    if (matched != need) return;
    if (!have || acc < best_cost - 1e-12) {
      have = true;
      best_cost = acc;
      best_cols = col_of_pred;
    }
    return;
  }
  std::vector<char> used(static_cast<size_t>(c.gts), 0);
  for (int q = 0; q < p; ++q)
    if (col_of_pred[static_cast<size_t>(q)] >= 0)
      used[static_cast<size_t>(col_of_pred[static_cast<size_t>(q)])] = 1;
  for (int g = 0; g < c.gts; ++g) {
    if (used[static_cast<size_t>(g)]) continue;
    col_of_pred[static_cast<size_t>(p)] = g;
    brute_recurse(c, p + 1, matched + 1, col_of_pred, acc + c.at(p, g), need, best_cost,
                  have, best_cols);
  }
  col_of_pred[static_cast<size_t>(p)] = -1;
  brute_recurse(c, p + 1, matched, col_of_pred, acc, need, best_cost, have, best_cols);
}
}  // namespace detail

inline BruteAssignment brute_force_assignment(const sisnet::CostMatrix& c) {
  BruteAssignment out;
  if (c.preds == 0 || c.gts == 0) return out;
  const int need = std::min(c.preds, c.gts);
  std::vector<int> cols(static_cast<size_t>(c.preds), -1);
  std::vector<int> best_cols;
  double best_cost = 0.0;
  bool have = false;
  detail::brute_recurse(c, 0, 0, cols, 0.0, need, best_cost, have, best_cols);
  out.cost = best_cost;
  for (int p = 0; p < c.preds; ++p)
    if (best_cols[static_cast<size_t>(p)] >= 0)
      out.pairs.emplace_back(p, best_cols[static_cast<size_t>(p)]);
  return out;
}

// Average precision by evaluating every score cutoff independently: for each
// prefix of the deterministic global order, the subset is rematched from
// scratch and contributes one PR point; the 101-point interpolation is then
// applied directly.
inline double ap_exhaustive_cutoffs(const std::vector<sisnet::EvalImage>& dataset,
                                    double tau) {
  struct Entry {
    double score;
    int image, index;
  };
  std::vector<Entry> order;
  for (size_t im = 0; im < dataset.size(); ++im)
    for (size_t p = 0; p < dataset[im].preds.size(); ++p)
      order.push_back({dataset[im].preds[p].score, static_cast<int>(im), static_cast<int>(p)});
  std::stable_sort(order.begin(), order.end(), [](const Entry& a, const Entry& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.image != b.image) return a.image < b.image;
    return a.index < b.index;
  });

  long long total_gt = 0;
  for (const auto& img : dataset) total_gt += static_cast<long long>(img.gts.size());
  if (total_gt == 0) return 0.0;

  std::vector<std::pair<double, double>> points;  // (recall, precision)
  for (size_t cut = 1; cut <= order.size(); ++cut) {
    // Rematch the top-`cut` subset from scratch.
    std::vector<std::vector<char>> claimed(dataset.size());
    for (size_t im = 0; im < dataset.size(); ++im)
      claimed[im].assign(dataset[im].gts.size(), 0);
    long long tp = 0;
    for (size_t r = 0; r < cut; ++r) {
      const auto& e = order[r];
      const auto& img = dataset[static_cast<size_t>(e.image)];
      int best_g = -1;
      double best_iou = 0.0;
      for (size_t g = 0; g < img.gts.size(); ++g) {
        if (claimed[static_cast<size_t>(e.image)][g]) continue;
        const double iou =
            sisnet::mask_iou(img.preds[static_cast<size_t>(e.index)].mask, img.gts[g]);
        if (iou >= tau && iou > best_iou) {
          best_iou = iou;
          best_g = static_cast<int>(g);
        }
      }
      if (best_g >= 0) {
        claimed[static_cast<size_t>(e.image)][static_cast<size_t>(best_g)] = 1;
        ++tp;
      }
    }
    points.emplace_back(static_cast<double>(tp) / static_cast<double>(total_gt),
                        static_cast<double>(tp) / static_cast<double>(cut));
  }

  double acc = 0.0;
  for (int k = 0; k <= 100; ++k) {
    const double r = k / 100.0;
    double best = 0.0;
    for (const auto& [rec, prec] : points)
      if (rec >= r) best = std::max(best, prec);
    acc += best;
  }
  return acc / 101.0;
}

// Exhaustive between-class variance search: for every threshold the class
// sums are rebuilt by scanning all pixels, with integer accumulators.
inline int otsu_brute_force(const sisnet::GrayImage& img) {
  int mn = 255, mx = 0;
  for (uint8_t v : img.px) {
    mn = std::min<int>(mn, v);
    mx = std::max<int>(mx, v);
  }
  if (mn == mx) return mn;
  int best_t = 0;
  double best_score = -1.0;
  for (int t = 0; t < 256; ++t) {
    long long n0 = 0, n1 = 0, s0 = 0, s1 = 0;
    for (uint8_t v : img.px) {
      if (v <= t) {
        ++n0;
        s0 += v;
      } else {
        ++n1;
        s1 += v;
      }
    }
    if (n0 == 0 || n1 == 0) continue;
    const long long d = s0 * n1 - s1 * n0;
    const double score = static_cast<double>(d) * static_cast<double>(d) /
                         (static_cast<double>(n0) * static_cast<double>(n1));
    if (score > best_score) {
      best_score = score;
      best_t = t;
    }
  }
  return best_t;
}

}  // namespace oracles
