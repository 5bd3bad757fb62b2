#pragma once

#include <vector>

#include "sisnet/hungarian.hpp"
#include "sisnet/losses.hpp"

namespace sisnet {

// Set-prediction matching cost: classification term is the negated score,
// the mask term sums dice and mean-pixel BCE on soft (pre-threshold) masks.
// Weighted by the classification / mask loss coefficients.
inline CostMatrix matching_cost(const std::vector<Tensor>& soft_masks,
                                const std::vector<double>& scores,
                                const std::vector<Tensor>& gt_masks,
                                const LossWeights& w = {}) {
  if (soft_masks.size() != scores.size())
    throw value_error("matching_cost: mask and score counts differ");
  CostMatrix cost(static_cast<int>(soft_masks.size()), static_cast<int>(gt_masks.size()));
  for (size_t p = 0; p < soft_masks.size(); ++p) {
    for (size_t g = 0; g < gt_masks.size(); ++g) {
      if (!soft_masks[p].same_shape(gt_masks[g])) {
        throw shape_error("matching_cost: mask resolutions differ: " +
                          shape_str(soft_masks[p].shape()) + " vs " +
                          shape_str(gt_masks[g].shape()));
      }
      cost.at(static_cast<int>(p), static_cast<int>(g)) =
          w.lambda_cls * (-scores[p]) +
          w.lambda_mask * (dice_loss(soft_masks[p], gt_masks[g]) +
                           bce_mean(soft_masks[p], gt_masks[g]));
    }
  }
  cost.check_finite();
  return cost;
}

inline Assignment match_predictions(const std::vector<Tensor>& soft_masks,
                                    const std::vector<double>& scores,
                                    const std::vector<Tensor>& gt_masks,
                                    const LossWeights& w = {}) {
  return hungarian(matching_cost(soft_masks, scores, gt_masks, w));
}

}  // namespace sisnet
