#pragma once

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "sisnet/grad_check.hpp"
#include "sisnet/hungarian.hpp"
#include "sisnet/tensor.hpp"

namespace sisnet {

constexpr double kProbClampLo = 1e-7;
constexpr double kProbClampHi = 1.0 - 1e-7;
constexpr double kDiceEps = 1.0;

inline double clamp_prob(double p, SigHash* sig = nullptr) {
  const bool low = p < kProbClampLo;
  const bool high = p > kProbClampHi;
  if (sig) {
    sig->bit(low);
    sig->bit(high);
  }
  if (low) return kProbClampLo;
  if (high) return kProbClampHi;
  return p;
}

struct LossWeights {
  double lambda_cls = 2.0;
  double lambda_mask = 1.0;
  double lambda_obj = 1.0;
  double lambda_bin = 1.0;
  double lambda_rgb_aux = 0.6;
  double lambda_depth_aux = 0.4;

  void validate() const {
    for (double v : {lambda_cls, lambda_mask, lambda_obj, lambda_bin, lambda_rgb_aux,
                     lambda_depth_aux})
      if (v < 0.0) throw value_error("loss weights must be non-negative");
  }
};

struct LossBreakdown {
  double cls = 0.0;
  double mask = 0.0;
  double objectness = 0.0;
  double aux = 0.0;
  double total = 0.0;
};

// ---------------------------------------------------------------------------
// Pointwise losses
// ---------------------------------------------------------------------------

// Mean binary cross-entropy; probabilities clamped to [1e-7, 1-1e-7].
inline double bce_mean(const Tensor& pred, const Tensor& target, SigHash* sig = nullptr) {
  detail::require_same_shape(pred, target, "bce");
  double s = 0.0;
  for (long long i = 0; i < pred.size(); ++i) {
    const double p = clamp_prob(pred[i], sig);
    const double y = target[i];
    s += -(y * std::log(p) + (1.0 - y) * std::log(1.0 - p));
  }
  return s / static_cast<double>(pred.size());
}

inline Tensor bce_mean_backward(const Tensor& pred, const Tensor& target,
                                double upstream) {
  Tensor g(pred.shape());
  const double inv_n = upstream / static_cast<double>(pred.size());
  for (long long i = 0; i < pred.size(); ++i) {
    const double p = pred[i];
    if (p < kProbClampLo || p > kProbClampHi) continue;  // clamped, zero slope
    g[i] = inv_n * (-(target[i] / p) + (1.0 - target[i]) / (1.0 - p));
  }
  return g;
}

// 1 - (2 sum(p g) + eps) / (sum(p^2) + sum(g^2) + eps), eps = 1.
inline double dice_loss(const Tensor& pred, const Tensor& gt) {
  detail::require_same_shape(pred, gt, "dice");
  double inter = 0.0, pp = 0.0, gg = 0.0;
  for (long long i = 0; i < pred.size(); ++i) {
    inter += pred[i] * gt[i];
    pp += pred[i] * pred[i];
    gg += gt[i] * gt[i];
  }
  return 1.0 - (2.0 * inter + kDiceEps) / (pp + gg + kDiceEps);
}

inline Tensor dice_loss_backward(const Tensor& pred, const Tensor& gt, double upstream) {
  double inter = 0.0, pp = 0.0, gg = 0.0;
  for (long long i = 0; i < pred.size(); ++i) {
    inter += pred[i] * gt[i];
    pp += pred[i] * pred[i];
    gg += gt[i] * gt[i];
  }
  const double num = 2.0 * inter + kDiceEps;
  const double den = pp + gg + kDiceEps;
  Tensor g(pred.shape());
  for (long long i = 0; i < pred.size(); ++i) {
    g[i] = upstream * (-(2.0 * gt[i] * den - num * 2.0 * pred[i]) / (den * den));
  }
  return g;
}

// Mean of -alpha_t (1 - p_t)^gamma log(p_t) over score/target pairs.
inline double focal_loss(const Tensor& scores, const Tensor& targets, double alpha = 0.25,
                         double gamma = 2.0, SigHash* sig = nullptr) {
  detail::require_same_shape(scores, targets, "focal");
  double s = 0.0;
  for (long long i = 0; i < scores.size(); ++i) {
    const double p = clamp_prob(scores[i], sig);
    const bool pos = targets[i] > 0.5;
    const double pt = pos ? p : 1.0 - p;
    const double at = pos ? alpha : 1.0 - alpha;
    s += -at * std::pow(1.0 - pt, gamma) * std::log(pt);
  }
  return s / static_cast<double>(scores.size());
}

inline Tensor focal_loss_backward(const Tensor& scores, const Tensor& targets,
                                  double alpha, double gamma, double upstream) {
  Tensor g(scores.shape());
  const double inv_n = upstream / static_cast<double>(scores.size());
  for (long long i = 0; i < scores.size(); ++i) {
    const double p = scores[i];
    if (p < kProbClampLo || p > kProbClampHi) continue;
    const bool pos = targets[i] > 0.5;
    const double pt = pos ? p : 1.0 - p;
    const double at = pos ? alpha : 1.0 - alpha;
    // d/dpt of -at (1-pt)^gamma log(pt)
    double dpt = -at * (-gamma * std::pow(1.0 - pt, gamma - 1.0) * std::log(pt) +
                        std::pow(1.0 - pt, gamma) / pt);
    g[i] = inv_n * (pos ? dpt : -dpt);
  }
  return g;
}

// BCE of predicted objectness against per-slot IoU targets (0 when unmatched).
inline double objectness_loss(const Tensor& pred_obj, const Tensor& matched_ious,
                              SigHash* sig = nullptr) {
  detail::require_same_shape(pred_obj, matched_ious, "objectness");
  for (long long i = 0; i < matched_ious.size(); ++i) {
    if (matched_ious[i] < 0.0 || matched_ious[i] > 1.0)
      throw value_error("objectness: IoU target outside [0, 1]");
  }
  return bce_mean(pred_obj, matched_ious, sig);
}

inline Tensor objectness_loss_backward(const Tensor& pred_obj, const Tensor& matched_ious,
                                       double upstream) {
  return bce_mean_backward(pred_obj, matched_ious, upstream);
}

// ---------------------------------------------------------------------------
// Auxiliary region supervision
// ---------------------------------------------------------------------------

// Nearest-neighbor downsampling of a binary map; binarity is preserved since
// single source pixels are sampled.
inline Tensor downsample_mask_nearest(const Tensor& m, int out_h, int out_w) {
  const int H = m.dim(0), W = m.dim(1);
  Tensor out({out_h, out_w});
  for (int i = 0; i < out_h; ++i) {
    int si = static_cast<int>((i + 0.5) * H / out_h);
    si = std::min(si, H - 1);
    for (int j = 0; j < out_w; ++j) {
      int sj = static_cast<int>((j + 0.5) * W / out_w);
      sj = std::min(sj, W - 1);
      out(i, j) = m(si, sj) > 0.5 ? 1.0 : 0.0;
    }
  }
  return out;
}

struct RegionPreds {
  Tensor rgb_quarter, rgb_eighth, depth_quarter, depth_eighth;  // sigmoid maps
};

// Weighted BCE of the four region prediction maps against the region-level
// ground truth (union of instance masks), downsampled per map.
inline double aux_binary_loss(const RegionPreds& preds, const Tensor& region_gt,
                              double lambda_rgb = 0.6, double lambda_depth = 0.4,
                              SigHash* sig = nullptr) {
  auto term = [&](const Tensor& p) {
    return bce_mean(p, downsample_mask_nearest(region_gt, p.dim(0), p.dim(1)), sig);
  };
  return lambda_rgb * (term(preds.rgb_quarter) + term(preds.rgb_eighth)) +
         lambda_depth * (term(preds.depth_quarter) + term(preds.depth_eighth));
}

inline RegionPreds aux_binary_loss_backward(const RegionPreds& preds,
                                            const Tensor& region_gt, double lambda_rgb,
                                            double lambda_depth, double upstream) {
  auto back = [&](const Tensor& p, double w) {
    return bce_mean_backward(p, downsample_mask_nearest(region_gt, p.dim(0), p.dim(1)),
                             upstream * w);
  };
  return {back(preds.rgb_quarter, lambda_rgb), back(preds.rgb_eighth, lambda_rgb),
          back(preds.depth_quarter, lambda_depth), back(preds.depth_eighth, lambda_depth)};
}

// ---------------------------------------------------------------------------
// Total objective
// ---------------------------------------------------------------------------

// Union of instance masks at full resolution.
inline Tensor region_union(const std::vector<Tensor>& gt_masks, int h, int w) {
  Tensor out({h, w});
  for (const Tensor& m : gt_masks) {
    detail::require_same_shape(m, out, "region_union");
    for (long long i = 0; i < out.size(); ++i)
      if (m[i] > 0.5) out[i] = 1.0;
  }
  return out;
}

// IoU of the binarized soft mask against a binary ground truth.
inline double binarized_iou(const Tensor& soft_mask, const Tensor& gt, double threshold) {
  detail::require_same_shape(soft_mask, gt, "binarized_iou");
  long long inter = 0, uni = 0;
  for (long long i = 0; i < gt.size(); ++i) {
    const bool a = soft_mask[i] >= threshold;
    const bool b = gt[i] > 0.5;
    inter += (a && b) ? 1 : 0;
    uni += (a || b) ? 1 : 0;
  }
  if (uni == 0) return 1.0;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

// Per-slot binarized-IoU targets given the assignment; unmatched slots get 0.
inline Tensor matched_iou_targets(const std::vector<Tensor>& soft_masks,
                                  const std::vector<Tensor>& gt_masks,
                                  const Assignment& assign, double bin_threshold = 0.5) {
  Tensor t({static_cast<int>(soft_masks.size())});
  for (const auto& [p, g] : assign.pairs) {
    t(p) = binarized_iou(soft_masks[static_cast<size_t>(p)],
                         gt_masks[static_cast<size_t>(g)], bin_threshold);
  }
  return t;
}

struct TotalLossInputs {
  Tensor scores;                   // n, in (0, 1); focal and objectness both read these
  std::vector<Tensor> soft_masks;  // n, full resolution
  RegionPreds region_preds;
};

// Assignment and IoU targets are held fixed; matching is not differentiated.
inline LossBreakdown total_loss(const TotalLossInputs& in,
                                const std::vector<Tensor>& gt_masks,
                                const Assignment& assign, const Tensor& iou_targets,
                                const LossWeights& w, SigHash* sig = nullptr) {
  w.validate();
  const int n = in.scores.dim(0);

  Tensor cls_targets({n});
  for (const auto& [p, g] : assign.pairs) cls_targets(p) = 1.0;

  LossBreakdown out;
  out.cls = focal_loss(in.scores, cls_targets, 0.25, 2.0, sig);

  if (!assign.pairs.empty()) {
    double m = 0.0;
    for (const auto& [p, g] : assign.pairs) {
      m += dice_loss(in.soft_masks[static_cast<size_t>(p)], gt_masks[static_cast<size_t>(g)]);
      m += bce_mean(in.soft_masks[static_cast<size_t>(p)], gt_masks[static_cast<size_t>(g)], sig);
    }
    out.mask = m / static_cast<double>(assign.pairs.size());
  }

  out.objectness = objectness_loss(in.scores, iou_targets, sig);

  const int H = in.soft_masks.empty() ? in.region_preds.rgb_quarter.dim(0) * 4
                                      : in.soft_masks[0].dim(0);
  const int W = in.soft_masks.empty() ? in.region_preds.rgb_quarter.dim(1) * 4
                                      : in.soft_masks[0].dim(1);
  Tensor region_gt = region_union(gt_masks, H, W);
  out.aux = aux_binary_loss(in.region_preds, region_gt, w.lambda_rgb_aux,
                            w.lambda_depth_aux, sig);

  out.total = w.lambda_cls * out.cls + w.lambda_mask * out.mask +
              w.lambda_obj * out.objectness + w.lambda_bin * out.aux;
  return out;
}

struct TotalLossGrads {
  Tensor g_scores;
  std::vector<Tensor> g_masks;
  RegionPreds g_region_preds;
  LossBreakdown breakdown;
};

inline TotalLossGrads total_loss_backward(const TotalLossInputs& in,
                                          const std::vector<Tensor>& gt_masks,
                                          const Assignment& assign,
                                          const Tensor& iou_targets,
                                          const LossWeights& w) {
  TotalLossGrads out;
  out.breakdown = total_loss(in, gt_masks, assign, iou_targets, w);
  const int n = in.scores.dim(0);

  Tensor cls_targets({n});
  for (const auto& [p, g] : assign.pairs) cls_targets(p) = 1.0;

  out.g_scores = focal_loss_backward(in.scores, cls_targets, 0.25, 2.0, w.lambda_cls);
  add_inplace(out.g_scores,
              objectness_loss_backward(in.scores, iou_targets, w.lambda_obj));

  out.g_masks.resize(in.soft_masks.size());
  for (size_t i = 0; i < in.soft_masks.size(); ++i)
    out.g_masks[i] = Tensor(in.soft_masks[i].shape());
  if (!assign.pairs.empty()) {
    const double per_pair = w.lambda_mask / static_cast<double>(assign.pairs.size());
    for (const auto& [p, g] : assign.pairs) {
      const Tensor& pm = in.soft_masks[static_cast<size_t>(p)];
      const Tensor& gm = gt_masks[static_cast<size_t>(g)];
      add_inplace(out.g_masks[static_cast<size_t>(p)], dice_loss_backward(pm, gm, per_pair));
      add_inplace(out.g_masks[static_cast<size_t>(p)], bce_mean_backward(pm, gm, per_pair));
    }
  }

  const int H = in.soft_masks.empty() ? in.region_preds.rgb_quarter.dim(0) * 4
                                      : in.soft_masks[0].dim(0);
  const int W = in.soft_masks.empty() ? in.region_preds.rgb_quarter.dim(1) * 4
                                      : in.soft_masks[0].dim(1);
  Tensor region_gt = region_union(gt_masks, H, W);
  out.g_region_preds = aux_binary_loss_backward(in.region_preds, region_gt,
                                                w.lambda_rgb_aux, w.lambda_depth_aux,
                                                w.lambda_bin);
  return out;
}

}  // namespace sisnet
