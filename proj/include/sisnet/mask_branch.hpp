#pragma once

#include <array>
#include <string>

#include "sisnet/depth_similarity.hpp"
#include "sisnet/fusion.hpp"

namespace sisnet {

// Builds the shared mask feature. Depth features are calibrated by
// per-level similarity modules (non-shared), every input runs through its
// own conv+norm+relu pre-stage, the two levels are fused, and the 1/8-scale
// fusion is upsampled and merged into the 1/4-scale one.
struct MaskBranch {
  DepthSimilarity sim_low, sim_high;
  ConvGnRelu pre_rgb_low, pre_rgb_high, pre_depth_low, pre_depth_high;
  WeightSharedFusion fuse_low, fuse_high;
  Conv2d merge3x3, merge1x1;

  MaskBranch() = default;
  MaskBranch(const std::string& module_name, int channels, int groups, Rng& rng)
      : sim_low(module_name + ".sim_low", channels, rng),
        sim_high(module_name + ".sim_high", channels, rng),
        pre_rgb_low(module_name + ".pre_rgb_low", channels, channels, groups, rng),
        pre_rgb_high(module_name + ".pre_rgb_high", channels, channels, groups, rng),
        pre_depth_low(module_name + ".pre_depth_low", channels, channels, groups, rng),
        pre_depth_high(module_name + ".pre_depth_high", channels, channels, groups, rng),
        fuse_low(module_name + ".fuse_low", channels, groups, rng),
        fuse_high(module_name + ".fuse_high", channels, groups, rng),
        merge3x3(module_name + ".merge3x3", 3, channels, channels, rng),
        merge1x1(module_name + ".merge1x1", 1, channels, channels, rng) {}

  struct Cache {
    DepthSimilarity::Cache sim_low, sim_high;
    ConvGnRelu::Cache pre_rl, pre_rh, pre_dl, pre_dh;
    WeightSharedFusion::Cache fuse_low, fuse_high;
    Tensor fused_low, fused_high;  // 1/4, 1/8
    Tensor merged_in;              // upsample(high) + low
    Tensor merged_mid;             // after 3x3

    void fold(SigHash& sig) const {
      sim_low.fold(sig);
      sim_high.fold(sig);
      pre_rl.fold(sig);
      pre_rh.fold(sig);
      pre_dl.fold(sig);
      pre_dh.fold(sig);
      fuse_low.fold(sig);
      fuse_high.fold(sig);
    }
  };

  Tensor forward(const Tensor& rgb_quarter, const Tensor& rgb_eighth,
                 const Tensor& depth_quarter, const Tensor& depth_eighth,
                 Cache* cache) const {
    if (rgb_quarter.dim(0) != 2 * rgb_eighth.dim(0) ||
        rgb_quarter.dim(1) != 2 * rgb_eighth.dim(1)) {
      throw shape_error("mask branch: level scales inconsistent: " +
                        shape_str(rgb_quarter.shape()) + " vs " +
                        shape_str(rgb_eighth.shape()));
    }
    Cache local;
    Cache& c = cache ? *cache : local;

    const Tensor depth_low = sim_low.forward(rgb_quarter, depth_quarter, &c.sim_low).calibrated;
    const Tensor depth_high = sim_high.forward(rgb_eighth, depth_eighth, &c.sim_high).calibrated;

    const Tensor rl = pre_rgb_low.forward(rgb_quarter, &c.pre_rl);
    const Tensor rh = pre_rgb_high.forward(rgb_eighth, &c.pre_rh);
    const Tensor dl = pre_depth_low.forward(depth_low, &c.pre_dl);
    const Tensor dh = pre_depth_high.forward(depth_high, &c.pre_dh);

    c.fused_high = fuse_high.forward(rh, dh, &c.fuse_high);
    c.fused_low = fuse_low.forward(rl, dl, &c.fuse_low);

    c.merged_in = add(bilinear_upsample_x2(c.fused_high), c.fused_low);
    c.merged_mid = merge3x3.forward(c.merged_in);
    return merge1x1.forward(c.merged_mid);
  }

  struct InputGrads {
    Tensor rgb_quarter, rgb_eighth, depth_quarter, depth_eighth;
  };

  InputGrads backward(const Cache& c, const Tensor& g_out, Gradients& gs) const {
    Tensor g_mid = merge1x1.backward(c.merged_mid, g_out, gs);
    Tensor g_merged = merge3x3.backward(c.merged_in, g_mid, gs);

    Tensor g_fused_low = g_merged;
    Tensor g_fused_high = bilinear_upsample_x2_backward(
        g_merged, c.fused_high.dim(0), c.fused_high.dim(1));

    auto [g_rh, g_dh] = fuse_high.backward(c.fuse_high, g_fused_high, gs);
    auto [g_rl, g_dl] = fuse_low.backward(c.fuse_low, g_fused_low, gs);

    InputGrads grads;
    grads.rgb_quarter = pre_rgb_low.backward(c.pre_rl, g_rl, gs);
    grads.rgb_eighth = pre_rgb_high.backward(c.pre_rh, g_rh, gs);
    Tensor g_depth_low = pre_depth_low.backward(c.pre_dl, g_dl, gs);
    Tensor g_depth_high = pre_depth_high.backward(c.pre_dh, g_dh, gs);

    auto [g_rq, g_dq] = sim_low.backward(c.sim_low, g_depth_low, gs);
    add_inplace(grads.rgb_quarter, g_rq);
    grads.depth_quarter = std::move(g_dq);

    auto [g_r8, g_d8] = sim_high.backward(c.sim_high, g_depth_high, gs);
    add_inplace(grads.rgb_eighth, g_r8);
    grads.depth_eighth = std::move(g_d8);
    return grads;
  }

  void collect(ParamRefs& out) {
    sim_low.collect(out);
    sim_high.collect(out);
    pre_rgb_low.collect(out);
    pre_rgb_high.collect(out);
    pre_depth_low.collect(out);
    pre_depth_high.collect(out);
    fuse_low.collect(out);
    fuse_high.collect(out);
    merge3x3.collect(out);
    merge1x1.collect(out);
  }

  long long param_count() const {
    return sim_low.param_count() + sim_high.param_count() + pre_rgb_low.param_count() +
           pre_rgb_high.param_count() + pre_depth_low.param_count() +
           pre_depth_high.param_count() + fuse_low.param_count() +
           fuse_high.param_count() + merge3x3.param_count() + merge1x1.param_count();
  }
};

}  // namespace sisnet
