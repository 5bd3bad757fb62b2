#pragma once

#include <string>
#include <utility>
#include <vector>

#include "sisnet/training.hpp"

namespace sisnet {

// Named finite-difference checks for every hand-written backward pass.
// Each builds a small random instance, computes a probe-weighted scalar of
// the op output, and compares the analytic gradients against central
// differences for both parameters and inputs.
namespace gradcheck {

using NamedReport = std::pair<std::string, GradCheckReport>;

inline GradCheckReport check_conv(int k, uint64_t seed, const GradCheckOptions& opt) {
  Rng rng(seed);
  const int h = 5, w = 6, cin = 3, cout = 4;
  Conv2d conv("conv", k, cin, cout, rng);
  Tensor x = rng.uniform_tensor({h, w, cin}, -1, 1);
  Tensor probe = rng.uniform_tensor({h, w, cout}, -1, 1);
  Gradients gs;
  gs.accumulate("x", conv.backward(x, probe, gs));
  ParamRefs refs;
  conv.collect(refs);
  refs.emplace_back("x", &x);
  auto eval = [&]() { return FdEval{dot(conv.forward(x), probe), 0}; };
  return grad_check(eval, refs, gs, opt);
}

inline GradCheckReport check_group_norm(uint64_t seed, const GradCheckOptions& opt) {
  Rng rng(seed);
  const int h = 4, w = 5, c = 6;
  GroupNorm gn("gn", c, 2);
  gn.gamma = rng.uniform_tensor({c}, 0.5, 1.5);
  gn.beta = rng.uniform_tensor({c}, -0.5, 0.5);
  Tensor x = rng.uniform_tensor({h, w, c}, -1, 1);
  Tensor probe = rng.uniform_tensor({h, w, c}, -1, 1);
  GroupNorm::Cache cache;
  (void)gn.forward(x, &cache);
  Gradients gs;
  gs.accumulate("x", gn.backward(cache, probe, gs));
  ParamRefs refs;
  gn.collect(refs);
  refs.emplace_back("x", &x);
  auto eval = [&]() { return FdEval{dot(gn.forward(x, nullptr), probe), 0}; };
  return grad_check(eval, refs, gs, opt);
}

inline GradCheckReport check_linear(uint64_t seed, const GradCheckOptions& opt) {
  Rng rng(seed);
  const int n = 5, cin = 4, cout = 3;
  Linear lin("lin", cin, cout, rng);
  Tensor x = rng.uniform_tensor({n, cin}, -1, 1);
  Tensor probe = rng.uniform_tensor({n, cout}, -1, 1);
  Gradients gs;
  gs.accumulate("x", lin.backward(x, probe, gs));
  ParamRefs refs;
  lin.collect(refs);
  refs.emplace_back("x", &x);
  auto eval = [&]() { return FdEval{dot(lin.forward(x), probe), 0}; };
  return grad_check(eval, refs, gs, opt);
}

inline GradCheckReport check_spatial_attention(uint64_t seed, const GradCheckOptions& opt) {
  Rng rng(seed);
  const int h = 5, w = 6, c = 4;
  SpatialAttention sa("sa", rng);
  Tensor x = rng.uniform_tensor({h, w, c}, -1, 1);
  Tensor probe = rng.uniform_tensor({h, w}, -1, 1);
  SpatialAttention::Cache cache;
  (void)sa.forward(x, &cache);
  Gradients gs;
  gs.accumulate("x", sa.backward(cache, probe, gs));
  ParamRefs refs;
  sa.collect(refs);
  refs.emplace_back("x", &x);
  auto eval = [&]() {
    SpatialAttention::Cache c2;
    Tensor y = sa.forward(x, &c2);
    SigHash sig;
    c2.fold(sig);
    return FdEval{dot(y, probe), sig.h};
  };
  return grad_check(eval, refs, gs, opt);
}

inline GradCheckReport check_softmax(uint64_t seed, const GradCheckOptions& opt) {
  Rng rng(seed);
  Tensor x = rng.uniform_tensor({4, 5}, -2, 2);
  Tensor probe = rng.uniform_tensor({4, 5}, -1, 1);
  Tensor y = softmax(x, 1);
  Gradients gs;
  gs.accumulate("x", softmax_backward(y, probe, 1));
  ParamRefs refs{{"x", &x}};
  auto eval = [&]() { return FdEval{dot(softmax(x, 1), probe), 0}; };
  return grad_check(eval, refs, gs, opt);
}

inline GradCheckReport check_upsample(uint64_t seed, const GradCheckOptions& opt) {
  Rng rng(seed);
  Tensor x = rng.uniform_tensor({3, 4, 2}, -1, 1);
  Tensor probe = rng.uniform_tensor({6, 8, 2}, -1, 1);
  Gradients gs;
  gs.accumulate("x", bilinear_upsample_x2_backward(probe, 3, 4));
  ParamRefs refs{{"x", &x}};
  auto eval = [&]() { return FdEval{dot(bilinear_upsample_x2(x), probe), 0}; };
  return grad_check(eval, refs, gs, opt);
}

inline GradCheckReport check_pools(uint64_t seed, const GradCheckOptions& opt) {
  Rng rng(seed);
  Tensor x = rng.uniform_tensor({4, 6, 5}, -1, 1);
  Tensor probe_avg = rng.uniform_tensor({4, 6, 1}, -1, 1);
  Tensor probe_max = rng.uniform_tensor({4, 6, 1}, -1, 1);
  Tensor probe_ds = rng.uniform_tensor({2, 3, 5}, -1, 1);
  std::vector<int> argmax;
  (void)channel_max_pool(x, &argmax);
  Gradients gs;
  Tensor gx(x.shape());
  channel_avg_pool_backward(probe_avg, gx);
  channel_max_pool_backward(probe_max, argmax, gx);
  add_inplace(gx, avg_pool2x2_backward(probe_ds));
  gs.accumulate("x", gx);
  ParamRefs refs{{"x", &x}};
  auto eval = [&]() {
    std::vector<int> am;
    const double v = dot(channel_avg_pool(x), probe_avg) +
                     dot(channel_max_pool(x, &am), probe_max) +
                     dot(avg_pool2x2(x), probe_ds);
    SigHash sig;
    for (int a : am) sig.u64(static_cast<uint64_t>(a));
    return FdEval{v, sig.h};
  };
  return grad_check(eval, refs, gs, opt);
}

inline GradCheckReport check_depth_similarity(uint64_t seed, const GradCheckOptions& opt) {
  Rng rng(seed);
  const int h = 4, w = 5, c = 3;
  DepthSimilarity sim("sim", c, rng);
  Tensor xr = rng.uniform_tensor({h, w, c}, -1, 1);
  Tensor xd = rng.uniform_tensor({h, w, c}, -1, 1);
  Tensor probe = rng.uniform_tensor({h, w, c}, -1, 1);
  DepthSimilarity::Cache cache;
  (void)sim.forward(xr, xd, &cache);
  Gradients gs;
  auto [gr, gd] = sim.backward(cache, probe, gs);
  gs.accumulate("xr", gr);
  gs.accumulate("xd", gd);
  ParamRefs refs;
  sim.collect(refs);
  refs.emplace_back("xr", &xr);
  refs.emplace_back("xd", &xd);
  auto eval = [&]() {
    return FdEval{dot(sim.forward(xr, xd, nullptr).calibrated, probe), 0};
  };
  return grad_check(eval, refs, gs, opt);
}

inline GradCheckReport check_kernel_branch(uint64_t seed, const GradCheckOptions& opt) {
  Rng rng(seed);
  const int h = 4, w = 5, c = 6, n = 3;
  KernelBranch kb("kb", n, c, rng);
  Tensor xr = rng.uniform_tensor({h, w, c}, -1, 1);
  Tensor xd = rng.uniform_tensor({h, w, c}, -1, 1);
  Tensor probe_k = rng.uniform_tensor({n, c}, -1, 1);
  Tensor probe_s = rng.uniform_tensor({n}, -1, 1);
  KernelBranch::Cache cache;
  (void)kb.forward(xr, xd, &cache);
  Gradients gs;
  auto [gr, gd] = kb.backward(cache, probe_k, probe_s, gs);
  gs.accumulate("xr", gr);
  gs.accumulate("xd", gd);
  ParamRefs refs;
  kb.collect(refs);
  refs.emplace_back("xr", &xr);
  refs.emplace_back("xd", &xd);
  auto eval = [&]() {
    KernelSet ks = kb.forward(xr, xd, nullptr);
    return FdEval{dot(ks.kernels, probe_k) + dot(ks.scores, probe_s), 0};
  };
  return grad_check(eval, refs, gs, opt);
}

inline GradCheckReport check_fusion(uint64_t seed, const GradCheckOptions& opt) {
  Rng rng(seed);
  const int h = 4, w = 5, c = 4;
  WeightSharedFusion fuse("fuse", c, 2, rng);
  Tensor xr = rng.uniform_tensor({h, w, c}, -1, 1);
  Tensor xd = rng.uniform_tensor({h, w, c}, -1, 1);
  Tensor probe = rng.uniform_tensor({h, w, c}, -1, 1);
  WeightSharedFusion::Cache cache;
  (void)fuse.forward(xr, xd, &cache);
  Gradients gs;
  auto [gr, gd] = fuse.backward(cache, probe, gs);
  gs.accumulate("xr", gr);
  gs.accumulate("xd", gd);
  ParamRefs refs;
  fuse.collect(refs);
  refs.emplace_back("xr", &xr);
  refs.emplace_back("xd", &xd);
  auto eval = [&]() {
    WeightSharedFusion::Cache c2;
    Tensor y = fuse.forward(xr, xd, &c2);
    SigHash sig;
    c2.fold(sig);
    return FdEval{dot(y, probe), sig.h};
  };
  return grad_check(eval, refs, gs, opt);
}

inline GradCheckReport check_mask_head(uint64_t seed, const GradCheckOptions& opt) {
  Rng rng(seed);
  const int h = 2, w = 3, c = 4, n = 3;
  Tensor kernels = rng.uniform_tensor({n, c}, -1, 1);
  Tensor feat = rng.uniform_tensor({h, w, c}, -1, 1);
  std::vector<Tensor> probes;
  for (int i = 0; i < n; ++i) probes.push_back(rng.uniform_tensor({4 * h, 4 * w}, -1, 1));
  MaskHeadCache cache;
  (void)dynamic_mask_head_raw(kernels, feat, 4 * h, 4 * w, &cache);
  auto [gk, gf] = dynamic_mask_head_backward(cache, probes);
  Gradients gs;
  gs.accumulate("kernels", gk);
  gs.accumulate("feat", gf);
  ParamRefs refs{{"kernels", &kernels}, {"feat", &feat}};
  auto eval = [&]() {
    auto masks = dynamic_mask_head_raw(kernels, feat, 4 * h, 4 * w, nullptr);
    double v = 0.0;
    for (int i = 0; i < n; ++i) v += dot(masks[static_cast<size_t>(i)], probes[static_cast<size_t>(i)]);
    return FdEval{v, 0};
  };
  return grad_check(eval, refs, gs, opt);
}

inline GradCheckReport check_focal(uint64_t seed, const GradCheckOptions& opt) {
  Rng rng(seed);
  const int n = 8;
  Tensor scores = rng.uniform_tensor({n}, 0.05, 0.95);
  Tensor targets({n});
  for (int i = 0; i < n; ++i) targets(i) = rng.uniform01() < 0.4 ? 1.0 : 0.0;
  Gradients gs;
  gs.accumulate("scores", focal_loss_backward(scores, targets, 0.25, 2.0, 1.0));
  ParamRefs refs{{"scores", &scores}};
  auto eval = [&]() { return FdEval{focal_loss(scores, targets), 0}; };
  return grad_check(eval, refs, gs, opt);
}

inline GradCheckReport check_dice(uint64_t seed, const GradCheckOptions& opt) {
  Rng rng(seed);
  Tensor pred = rng.uniform_tensor({8, 8}, 0.05, 0.95);
  Tensor gt({8, 8});
  for (long long i = 0; i < gt.size(); ++i) gt[i] = rng.uniform01() < 0.5 ? 1.0 : 0.0;
  Gradients gs;
  gs.accumulate("pred", dice_loss_backward(pred, gt, 1.0));
  ParamRefs refs{{"pred", &pred}};
  auto eval = [&]() { return FdEval{dice_loss(pred, gt), 0}; };
  return grad_check(eval, refs, gs, opt);
}

inline GradCheckReport check_bce(uint64_t seed, const GradCheckOptions& opt) {
  Rng rng(seed);
  Tensor pred = rng.uniform_tensor({6, 7}, 0.05, 0.95);
  Tensor gt({6, 7});
  for (long long i = 0; i < gt.size(); ++i) gt[i] = rng.uniform01() < 0.5 ? 1.0 : 0.0;
  Gradients gs;
  gs.accumulate("pred", bce_mean_backward(pred, gt, 1.0));
  ParamRefs refs{{"pred", &pred}};
  auto eval = [&]() { return FdEval{bce_mean(pred, gt), 0}; };
  return grad_check(eval, refs, gs, opt);
}

inline GradCheckReport check_objectness(uint64_t seed, const GradCheckOptions& opt) {
  Rng rng(seed);
  const int n = 6;
  Tensor pred = rng.uniform_tensor({n}, 0.05, 0.95);
  Tensor targets = rng.uniform_tensor({n}, 0.0, 1.0);
  Gradients gs;
  gs.accumulate("pred", objectness_loss_backward(pred, targets, 1.0));
  ParamRefs refs{{"pred", &pred}};
  auto eval = [&]() { return FdEval{objectness_loss(pred, targets), 0}; };
  return grad_check(eval, refs, gs, opt);
}

inline GradCheckReport check_aux_loss(uint64_t seed, const GradCheckOptions& opt) {
  Rng rng(seed);
  RegionPreds preds{rng.uniform_tensor({8, 12}, 0.05, 0.95),
                    rng.uniform_tensor({4, 6}, 0.05, 0.95),
                    rng.uniform_tensor({8, 12}, 0.05, 0.95),
                    rng.uniform_tensor({4, 6}, 0.05, 0.95)};
  Tensor region_gt({32, 48});
  for (long long i = 0; i < region_gt.size(); ++i)
    region_gt[i] = rng.uniform01() < 0.3 ? 1.0 : 0.0;
  RegionPreds grads = aux_binary_loss_backward(preds, region_gt, 0.6, 0.4, 1.0);
  Gradients gs;
  gs.accumulate("rq", grads.rgb_quarter);
  gs.accumulate("r8", grads.rgb_eighth);
  gs.accumulate("dq", grads.depth_quarter);
  gs.accumulate("d8", grads.depth_eighth);
  ParamRefs refs{{"rq", &preds.rgb_quarter},
                 {"r8", &preds.rgb_eighth},
                 {"dq", &preds.depth_quarter},
                 {"d8", &preds.depth_eighth}};
  auto eval = [&]() { return FdEval{aux_binary_loss(preds, region_gt, 0.6, 0.4), 0}; };
  return grad_check(eval, refs, gs, opt);
}

inline GradCheckReport check_total_loss(uint64_t seed, const GradCheckOptions& opt) {
  Rng rng(seed);
  const int n = 4, H = 16, W = 16;
  TotalLossInputs in;
  in.scores = rng.uniform_tensor({n}, 0.1, 0.9);
  for (int i = 0; i < n; ++i) in.soft_masks.push_back(rng.uniform_tensor({H, W}, 0.05, 0.95));
  in.region_preds = {rng.uniform_tensor({4, 4}, 0.1, 0.9), rng.uniform_tensor({2, 2}, 0.1, 0.9),
                     rng.uniform_tensor({4, 4}, 0.1, 0.9), rng.uniform_tensor({2, 2}, 0.1, 0.9)};
  std::vector<Tensor> gts;
  for (int g = 0; g < 2; ++g) {
    Tensor m({H, W});
    for (long long i = 0; i < m.size(); ++i) m[i] = rng.uniform01() < 0.4 ? 1.0 : 0.0;
    gts.push_back(std::move(m));
  }
  Assignment assign;
  assign.pairs = {{0, 0}, {2, 1}};
  Tensor iou_targets = matched_iou_targets(in.soft_masks, gts, assign);
  LossWeights w;
  TotalLossGrads lg = total_loss_backward(in, gts, assign, iou_targets, w);
  Gradients gs;
  gs.accumulate("scores", lg.g_scores);
  ParamRefs refs{{"scores", &in.scores}};
  for (int i = 0; i < n; ++i) {
    const std::string name = "mask" + std::to_string(i);
    gs.accumulate(name, lg.g_masks[static_cast<size_t>(i)]);
    refs.emplace_back(name, &in.soft_masks[static_cast<size_t>(i)]);
  }
  auto eval = [&]() {
    return FdEval{total_loss(in, gts, assign, iou_targets, w).total, 0};
  };
  return grad_check(eval, refs, gs, opt);
}

// Standard two-rectangle training sample on a 32 x 48 canvas; colors and
// depth separate the instances from the background.
inline TrainSample make_two_instance_sample(uint64_t seed, int H = 32, int W = 48) {
  Rng rng(seed);
  TrainSample s;
  s.rgb = Tensor({H, W, 3});
  s.depth = Tensor({H, W, 1});
  Tensor g1({H, W}), g2({H, W});
  for (int i = H / 8; i < H / 2; ++i)
    for (int j = W / 12; j < 5 * W / 12; ++j) g1(i, j) = 1.0;
  for (int i = 5 * H / 8; i < H; ++i)
    for (int j = 7 * W / 12; j < 11 * W / 12; ++j) g2(i, j) = 1.0;
  for (int i = 0; i < H; ++i)
    for (int j = 0; j < W; ++j) {
      const double n = 0.05 * rng.uniform01();
      s.rgb(i, j, 0) = 0.2 + n;
      s.rgb(i, j, 1) = 0.2 + n;
      s.rgb(i, j, 2) = 0.3 + n;
      s.depth(i, j, 0) = 0.2 + n;
      if (g1(i, j) > 0.5) {
        s.rgb(i, j, 0) = 0.9;
        s.rgb(i, j, 1) = 0.3;
        s.depth(i, j, 0) = 0.9;
      } else if (g2(i, j) > 0.5) {
        s.rgb(i, j, 1) = 0.9;
        s.rgb(i, j, 2) = 0.1;
        s.depth(i, j, 0) = 0.7;
      }
    }
  s.gt_masks = {std::move(g1), std::move(g2)};
  return s;
}

// Finite-difference pass over every parameter of the assembled pipeline,
// through the full objective at 32 x 48.
inline GradCheckReport check_pipeline(uint64_t seed, const GradCheckOptions& opt_in) {
  PipelineConfig cfg;
  cfg.channels = 8;
  cfg.n_kernels = 4;
  Pipeline pipe = Pipeline::make(cfg, 1000 + seed);
  TrainSample sample = make_two_instance_sample(500 + seed);
  LossWeights w;
  Pipeline::RawOut raw = pipe.forward_raw(sample.rgb, sample.depth, nullptr);
  LossState state = prepare_loss_state(raw, sample, w);
  Gradients grads = pipeline_loss_backward(pipe, sample, state, w);
  GradCheckOptions opt = opt_in;
  if (opt.max_coords_per_tensor < 0) opt.max_coords_per_tensor = 2;
  opt.coord_seed = 77 + seed;
  ParamRefs refs = pipe.params();
  auto eval = [&]() { return pipeline_loss_eval(pipe, sample, state, w); };
  return grad_check(eval, refs, grads, opt);
}

// All standalone operator checks at one seed.
inline std::vector<NamedReport> run_suite(uint64_t seed, const GradCheckOptions& opt) {
  std::vector<NamedReport> out;
  out.emplace_back("conv1x1", check_conv(1, seed, opt));
  out.emplace_back("conv3x3", check_conv(3, seed, opt));
  out.emplace_back("conv7x7", check_conv(7, seed, opt));
  out.emplace_back("group_norm", check_group_norm(seed, opt));
  out.emplace_back("linear", check_linear(seed, opt));
  out.emplace_back("softmax", check_softmax(seed, opt));
  out.emplace_back("pools", check_pools(seed, opt));
  out.emplace_back("bilinear_upsample", check_upsample(seed, opt));
  out.emplace_back("spatial_attention", check_spatial_attention(seed, opt));
  out.emplace_back("depth_similarity", check_depth_similarity(seed, opt));
  out.emplace_back("kernel_branch", check_kernel_branch(seed, opt));
  out.emplace_back("fusion", check_fusion(seed, opt));
  out.emplace_back("dynamic_mask_head", check_mask_head(seed, opt));
  out.emplace_back("focal_loss", check_focal(seed, opt));
  out.emplace_back("dice_loss", check_dice(seed, opt));
  out.emplace_back("bce", check_bce(seed, opt));
  out.emplace_back("objectness_loss", check_objectness(seed, opt));
  out.emplace_back("aux_binary_loss", check_aux_loss(seed, opt));
  out.emplace_back("total_loss", check_total_loss(seed, opt));
  return out;
}

}  // namespace gradcheck
}  // namespace sisnet
