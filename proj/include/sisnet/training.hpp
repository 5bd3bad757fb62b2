#pragma once

#include <vector>

#include "sisnet/losses.hpp"
#include "sisnet/matching.hpp"
#include "sisnet/pipeline.hpp"

namespace sisnet {

struct TrainSample {
  Tensor rgb;    // H x W x 3
  Tensor depth;  // H x W x 1
  std::vector<Tensor> gt_masks;  // binary, H x W
};

// Matching and objectness targets computed at one operating point. They are
// held fixed while differentiating, in keeping with bipartite-matching
// training (the assignment is not a differentiable function of the params).
struct LossState {
  Assignment assignment;
  Tensor iou_targets;  // n
};

inline TotalLossInputs loss_inputs_from(const Pipeline::RawOut& raw) {
  TotalLossInputs in;
  in.scores = raw.kernel_set.scores;
  in.soft_masks = raw.soft_masks;
  in.region_preds = {raw.aux.rgb_quarter, raw.aux.rgb_eighth, raw.aux.depth_quarter,
                     raw.aux.depth_eighth};
  return in;
}

inline LossState prepare_loss_state(const Pipeline::RawOut& raw, const TrainSample& sample,
                                    const LossWeights& w, double mask_bin_threshold = 0.5) {
  LossState state;
  std::vector<double> scores(static_cast<size_t>(raw.kernel_set.scores.dim(0)));
  for (size_t i = 0; i < scores.size(); ++i)
    scores[i] = raw.kernel_set.scores(static_cast<int>(i));
  state.assignment = match_predictions(raw.soft_masks, scores, sample.gt_masks, w);
  state.iou_targets = matched_iou_targets(raw.soft_masks, sample.gt_masks,
                                          state.assignment, mask_bin_threshold);
  return state;
}

// Scalar objective with the smoothness signature of the forward pass, for
// finite-difference verification. Assignment and IoU targets stay fixed.
inline FdEval pipeline_loss_eval(const Pipeline& pipe, const TrainSample& sample,
                                 const LossState& state, const LossWeights& w) {
  Pipeline::Trace trace;
  Pipeline::RawOut raw = pipe.forward_raw(sample.rgb, sample.depth, &trace);
  SigHash sig;
  sig.u64(trace.signature());
  const LossBreakdown b =
      total_loss(loss_inputs_from(raw), sample.gt_masks, state.assignment,
                 state.iou_targets, w, &sig);
  return {b.total, sig.h};
}

inline Gradients pipeline_loss_backward(const Pipeline& pipe, const TrainSample& sample,
                                        const LossState& state, const LossWeights& w,
                                        LossBreakdown* breakdown_out = nullptr) {
  Pipeline::Trace trace;
  Pipeline::RawOut raw = pipe.forward_raw(sample.rgb, sample.depth, &trace);
  TotalLossGrads lg = total_loss_backward(loss_inputs_from(raw), sample.gt_masks,
                                          state.assignment, state.iou_targets, w);
  if (breakdown_out) *breakdown_out = lg.breakdown;

  Pipeline::OutputGrads og;
  og.g_scores = lg.g_scores;
  og.g_masks = lg.g_masks;
  og.g_aux_rq = lg.g_region_preds.rgb_quarter;
  og.g_aux_r8 = lg.g_region_preds.rgb_eighth;
  og.g_aux_dq = lg.g_region_preds.depth_quarter;
  og.g_aux_d8 = lg.g_region_preds.depth_eighth;
  return pipe.backward(trace, og);
}

inline void sgd_step(ParamRefs& params, const Gradients& grads, double lr) {
  for (auto& [name, tensor] : params) {
    if (!grads.has(name)) continue;
    const Tensor& g = grads.at(name);
    for (long long i = 0; i < tensor->size(); ++i) (*tensor)[i] -= lr * g[i];
  }
}

struct TrainStepResult {
  LossBreakdown breakdown;
  LossState state;
};

// One plain gradient-descent step: match, differentiate, update.
inline TrainStepResult train_step(Pipeline& pipe, const TrainSample& sample,
                                  const LossWeights& w, double lr) {
  Pipeline::RawOut raw = pipe.forward_raw(sample.rgb, sample.depth, nullptr);
  TrainStepResult res;
  res.state = prepare_loss_state(raw, sample, w, pipe.cfg.mask_bin_threshold);
  Gradients grads = pipeline_loss_backward(pipe, sample, res.state, w, &res.breakdown);
  ParamRefs refs = pipe.params();
  sgd_step(refs, grads, lr);
  return res;
}

}  // namespace sisnet
