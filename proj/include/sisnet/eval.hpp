#pragma once

#include <algorithm>
#include <array>
#include <vector>

#include "sisnet/tensor.hpp"

namespace sisnet {

// |a & b| / |a | b| on binary masks; 1 when both empty, 0 when exactly one is.
inline double mask_iou(const Tensor& a, const Tensor& b) {
  detail::require_same_shape(a, b, "mask_iou");
  long long inter = 0, uni = 0;
  for (long long i = 0; i < a.size(); ++i) {
    const bool pa = a[i] > 0.5;
    const bool pb = b[i] > 0.5;
    inter += (pa && pb) ? 1 : 0;
    uni += (pa || pb) ? 1 : 0;
  }
  if (uni == 0) return 1.0;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

struct EvalInstance {
  Tensor mask;  // binary
  double score = 0.0;
};

struct EvalImage {
  std::vector<EvalInstance> preds;
  std::vector<Tensor> gts;  // binary
};

struct APReport {
  double ap = 0.0;    // mean over IoU thresholds 0.50:0.05:0.95
  double ap50 = 0.0;  // IoU 0.50
  double ap70 = 0.0;  // IoU 0.70
  std::vector<std::pair<double, double>> per_threshold;  // (tau, ap)
};

inline std::vector<double> ap_iou_thresholds() {
  std::vector<double> taus;
  for (int k = 0; k < 10; ++k) taus.push_back(0.50 + 0.05 * k);
  return taus;
}

struct PrPoint {
  double recall = 0.0;
  double precision = 0.0;
};

namespace detail {

struct RankedPred {
  double score;
  int image;
  int index;  // within image
};

// Dataset-wide order: score descending, ties by image then prediction index.
inline std::vector<RankedPred> ranked_predictions(const std::vector<EvalImage>& dataset) {
  std::vector<RankedPred> order;
  for (size_t im = 0; im < dataset.size(); ++im)
    for (size_t p = 0; p < dataset[im].preds.size(); ++p)
      order.push_back({dataset[im].preds[p].score, static_cast<int>(im), static_cast<int>(p)});
  std::stable_sort(order.begin(), order.end(), [](const RankedPred& a, const RankedPred& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.image != b.image) return a.image < b.image;
    return a.index < b.index;
  });
  return order;
}

// 101-point interpolated area under the precision/recall points.
inline double interpolated_ap(const std::vector<PrPoint>& pts) {
  double acc = 0.0;
  for (int k = 0; k <= 100; ++k) {
    const double r = k / 100.0;
    double best = 0.0;
    for (const PrPoint& pt : pts)
      if (pt.recall >= r) best = std::max(best, pt.precision);
    acc += best;
  }
  return acc / 101.0;
}

}  // namespace detail

// Precision/recall trace at one IoU threshold, walking predictions in the
// dataset-wide score order; each prediction greedily claims the unclaimed
// ground truth with the highest IoU >= tau (ties to the lowest index).
inline std::vector<PrPoint> pr_curve(const std::vector<EvalImage>& dataset, double tau,
                                     const std::vector<std::vector<std::vector<double>>>& ious,
                                     long long total_gt) {
  auto order = detail::ranked_predictions(dataset);
  std::vector<std::vector<char>> claimed;
  claimed.reserve(dataset.size());
  for (const auto& img : dataset)
    claimed.emplace_back(img.gts.size(), 0);

  std::vector<PrPoint> pts;
  long long tp = 0, fp = 0;
  for (const auto& rp : order) {
    const auto& iou_row = ious[static_cast<size_t>(rp.image)][static_cast<size_t>(rp.index)];
    int best_g = -1;
    double best_iou = 0.0;
    for (size_t g = 0; g < iou_row.size(); ++g) {
      if (claimed[static_cast<size_t>(rp.image)][g]) continue;
      if (iou_row[g] >= tau && iou_row[g] > best_iou) {
        best_iou = iou_row[g];
        best_g = static_cast<int>(g);
      }
    }
    if (best_g >= 0) {
      claimed[static_cast<size_t>(rp.image)][static_cast<size_t>(best_g)] = 1;
      ++tp;
    } else {
      ++fp;
    }
    if (total_gt > 0) {
      pts.push_back({static_cast<double>(tp) / static_cast<double>(total_gt),
                     static_cast<double>(tp) / static_cast<double>(tp + fp)});
    }
  }
  return pts;
}

// COCO-like class-agnostic mask AP: greedy score-ordered matching per image
// at each threshold, 101-point interpolation, mean over the threshold grid.
inline APReport evaluate_ap(const std::vector<EvalImage>& dataset) {
  if (dataset.empty()) throw value_error("evaluate_ap: empty dataset");

  long long total_gt = 0;
  for (const auto& img : dataset) total_gt += static_cast<long long>(img.gts.size());

  // IoU matrices once per image.
  std::vector<std::vector<std::vector<double>>> ious(dataset.size());
  for (size_t im = 0; im < dataset.size(); ++im) {
    ious[im].resize(dataset[im].preds.size());
    for (size_t p = 0; p < dataset[im].preds.size(); ++p) {
      ious[im][p].resize(dataset[im].gts.size());
      for (size_t g = 0; g < dataset[im].gts.size(); ++g)
        ious[im][p][g] = mask_iou(dataset[im].preds[p].mask, dataset[im].gts[g]);
    }
  }

  APReport report;
  double acc = 0.0;
  for (double tau : ap_iou_thresholds()) {
    const auto pts = pr_curve(dataset, tau, ious, total_gt);
    const double ap_tau = total_gt > 0 ? detail::interpolated_ap(pts) : 0.0;
    report.per_threshold.emplace_back(tau, ap_tau);
    acc += ap_tau;
    if (std::fabs(tau - 0.50) < 1e-9) report.ap50 = ap_tau;
    if (std::fabs(tau - 0.70) < 1e-9) report.ap70 = ap_tau;
  }
  report.ap = acc / static_cast<double>(report.per_threshold.size());
  return report;
}

}  // namespace sisnet
