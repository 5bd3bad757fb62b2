#pragma once

#include <algorithm>
#include <array>
#include <string>
#include <vector>

#include "sisnet/kernel_branch.hpp"
#include "sisnet/mask_branch.hpp"

namespace sisnet {

struct PipelineConfig {
  int n_kernels = 50;
  int channels = 256;
  double score_threshold = 0.3;
  double mask_bin_threshold = 0.5;

  int gn_groups() const { return channels >= 256 ? 32 : 8; }

  void validate() const {
    if (n_kernels < 1) throw value_error("config: n_kernels must be >= 1");
    if (channels < 1 || channels % gn_groups() != 0) {
      throw value_error("config: channels " + std::to_string(channels) +
                        " must be divisible by " + std::to_string(gn_groups()) +
                        " norm groups");
    }
  }
};

struct EncoderFeatures {
  Tensor rgb_quarter, rgb_eighth;      // 1/4 and 1/8 scale RGB features
  Tensor depth_quarter, depth_eighth;  // depth counterparts, same shapes
};

struct InstancePrediction {
  Tensor soft_mask;  // input resolution, values in (0, 1)
  double score = 0.0;
};

// ---------------------------------------------------------------------------
// Stub encoder: three conv+norm+relu+avgpool stages per modality, non-shared
// weights, emitting 1/4- and 1/8-scale features.
// ---------------------------------------------------------------------------

struct EncoderTower {
  std::array<ConvGnRelu, 3> blocks;

  EncoderTower() = default;
  EncoderTower(const std::string& tower_name, int in_channels, int channels,
               int groups, Rng& rng) {
    blocks[0] = ConvGnRelu(tower_name + ".b1", in_channels, channels, groups, rng);
    blocks[1] = ConvGnRelu(tower_name + ".b2", channels, channels, groups, rng);
    blocks[2] = ConvGnRelu(tower_name + ".b3", channels, channels, groups, rng);
  }

  struct Cache {
    std::array<ConvGnRelu::Cache, 3> blocks;

    void fold(SigHash& sig) const {
      for (const auto& b : blocks) b.fold(sig);
    }
  };

  struct Out {
    Tensor quarter, eighth;
  };

  Out forward(const Tensor& x, Cache* cache) const {
    Cache local;
    Cache& c = cache ? *cache : local;
    Tensor half = avg_pool2x2(blocks[0].forward(x, &c.blocks[0]));
    Tensor quarter = avg_pool2x2(blocks[1].forward(half, &c.blocks[1]));
    Tensor eighth = avg_pool2x2(blocks[2].forward(quarter, &c.blocks[2]));
    return {std::move(quarter), std::move(eighth)};
  }

  Tensor backward(const Cache& c, const Tensor& g_quarter, const Tensor& g_eighth,
                  Gradients& gs) const {
    Tensor g_q = g_quarter;
    add_inplace(g_q, blocks[2].backward(c.blocks[2], avg_pool2x2_backward(g_eighth), gs));
    Tensor g_h = blocks[1].backward(c.blocks[1], avg_pool2x2_backward(g_q), gs);
    return blocks[0].backward(c.blocks[0], avg_pool2x2_backward(g_h), gs);
  }

  void collect(ParamRefs& out) {
    for (auto& b : blocks) b.collect(out);
  }

  long long param_count() const {
    long long n = 0;
    for (const auto& b : blocks) n += b.param_count();
    return n;
  }
};

struct StubEncoder {
  EncoderTower rgb, depth;

  StubEncoder() = default;
  StubEncoder(const std::string& name, int channels, int groups, Rng& rng)
      : rgb(name + ".rgb", 3, channels, groups, rng),
        depth(name + ".depth", 1, channels, groups, rng) {}

  struct Cache {
    EncoderTower::Cache rgb, depth;

    void fold(SigHash& sig) const {
      rgb.fold(sig);
      depth.fold(sig);
    }
  };

  EncoderFeatures forward(const Tensor& rgb_in, const Tensor& depth_in,
                          Cache* cache) const {
    if (rgb_in.rank() != 3 || rgb_in.dim(2) != 3)
      throw shape_error("encoder: rgb input must be HxWx3, got " + shape_str(rgb_in.shape()));
    if (depth_in.rank() != 3 || depth_in.dim(2) != 1)
      throw shape_error("encoder: depth input must be HxWx1, got " + shape_str(depth_in.shape()));
    if (rgb_in.dim(0) != depth_in.dim(0) || rgb_in.dim(1) != depth_in.dim(1))
      throw shape_error("encoder: rgb " + shape_str(rgb_in.shape()) +
                        " and depth " + shape_str(depth_in.shape()) + " sizes differ");
    if (rgb_in.dim(0) % 8 != 0 || rgb_in.dim(1) % 8 != 0)
      throw shape_error("encoder: input size " + shape_str(rgb_in.shape()) +
                        " must be divisible by 8");
    Cache local;
    Cache& c = cache ? *cache : local;
    auto r = rgb.forward(rgb_in, &c.rgb);
    auto d = depth.forward(depth_in, &c.depth);
    return {std::move(r.quarter), std::move(r.eighth), std::move(d.quarter),
            std::move(d.eighth)};
  }

  void collect(ParamRefs& out) {
    rgb.collect(out);
    depth.collect(out);
  }

  long long param_count() const { return rgb.param_count() + depth.param_count(); }
};

// ---------------------------------------------------------------------------
// Dynamic mask head: each kernel acts as a 1x1 dynamic convolution over the
// mask feature; the sigmoid map is x2-upsampled twice to input resolution.
// ---------------------------------------------------------------------------

struct MaskHeadCache {
  Tensor kernels;    // n x c
  Tensor feat_flat;  // hw x c
  std::vector<Tensor> logits_sig;  // per instance, h x w x 1 post-sigmoid
  std::vector<Tensor> up1;         // per instance, 2h x 2w x 1
  int h = 0, w = 0;
};

inline std::vector<Tensor> dynamic_mask_head_raw(const Tensor& kernels,
                                                 const Tensor& mask_feature,
                                                 int out_h, int out_w,
                                                 MaskHeadCache* cache) {
  if (kernels.rank() != 2 || mask_feature.rank() != 3 ||
      kernels.dim(1) != mask_feature.dim(2)) {
    throw shape_error("mask head: kernel width " + shape_str(kernels.shape()) +
                      " does not match feature channels " +
                      shape_str(mask_feature.shape()));
  }
  const int h = mask_feature.dim(0), w = mask_feature.dim(1), c = mask_feature.dim(2);
  if (out_h != 4 * h || out_w != 4 * w) {
    throw shape_error("mask head: output size must be 4x the feature size");
  }
  const int n = kernels.dim(0);
  Tensor feat_flat = reshape(mask_feature, {h * w, c});
  Tensor logits = matmul(kernels, transpose(feat_flat));  // n x hw

  MaskHeadCache local;
  MaskHeadCache& cc = cache ? *cache : local;
  cc.kernels = kernels;
  cc.feat_flat = feat_flat;
  cc.h = h;
  cc.w = w;
  cc.logits_sig.clear();
  cc.up1.clear();

  std::vector<Tensor> masks;
  masks.reserve(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    Tensor row({h, w, 1});
    for (int p = 0; p < h * w; ++p) row[p] = logits(i, p);
    Tensor sig = sigmoid(row);
    Tensor up1 = bilinear_upsample_x2(sig);
    Tensor up2 = bilinear_upsample_x2(up1);
    cc.logits_sig.push_back(sig);
    cc.up1.push_back(up1);
    masks.push_back(reshape(up2, {out_h, out_w}));
  }
  return masks;
}

// Gradients wrt (kernels, mask_feature).
inline std::pair<Tensor, Tensor> dynamic_mask_head_backward(
    const MaskHeadCache& c, const std::vector<Tensor>& g_masks) {
  const int h = c.h, w = c.w;
  const int n = c.kernels.dim(0);
  Tensor g_logits({n, h * w});
  for (int i = 0; i < n; ++i) {
    Tensor g_up2 = reshape(g_masks[static_cast<size_t>(i)], {4 * h, 4 * w, 1});
    Tensor g_up1 = bilinear_upsample_x2_backward(g_up2, 2 * h, 2 * w);
    Tensor g_sig = bilinear_upsample_x2_backward(g_up1, h, w);
    Tensor g_row = sigmoid_backward(c.logits_sig[static_cast<size_t>(i)], g_sig);
    for (int p = 0; p < h * w; ++p) g_logits(i, p) = g_row[p];
  }
  // logits = kernels . feat_flat^T
  Tensor g_kernels = matmul(g_logits, c.feat_flat);
  Tensor g_feat_flat = matmul(transpose(g_logits), c.kernels);
  const int ch = c.feat_flat.dim(1);
  return {std::move(g_kernels), reshape(g_feat_flat, {h, w, ch})};
}

inline std::vector<InstancePrediction> dynamic_mask_head(const KernelSet& ks,
                                                         const Tensor& mask_feature,
                                                         int out_h, int out_w) {
  auto masks = dynamic_mask_head_raw(ks.kernels, mask_feature, out_h, out_w, nullptr);
  std::vector<InstancePrediction> preds;
  preds.reserve(masks.size());
  for (size_t i = 0; i < masks.size(); ++i)
    preds.push_back({std::move(masks[i]), ks.scores(static_cast<int>(i))});
  return preds;
}

// ---------------------------------------------------------------------------
// Full pipeline
// ---------------------------------------------------------------------------

struct AuxPreds {
  Tensor rgb_quarter, rgb_eighth, depth_quarter, depth_eighth;  // sigmoid maps, h x w
};

struct Pipeline {
  PipelineConfig cfg;
  StubEncoder encoder;
  DepthSimilarity sim_kernel;
  KernelBranch kernel_branch;
  MaskBranch mask_branch;
  Conv2d aux_rgb_quarter, aux_rgb_eighth, aux_depth_quarter, aux_depth_eighth;

  static Pipeline make(const PipelineConfig& cfg, uint64_t seed) {
    cfg.validate();
    Pipeline p;
    p.cfg = cfg;
    Rng rng(seed);
    const int c = cfg.channels, g = cfg.gn_groups();
    p.encoder = StubEncoder("enc", c, g, rng);
    p.sim_kernel = DepthSimilarity("sim_kernel", c, rng);
    p.kernel_branch = KernelBranch("kernel", cfg.n_kernels, c, rng);
    p.mask_branch = MaskBranch("mask", c, g, rng);
    p.aux_rgb_quarter = Conv2d("aux.rgb_quarter", 1, c, 1, rng);
    p.aux_rgb_eighth = Conv2d("aux.rgb_eighth", 1, c, 1, rng);
    p.aux_depth_quarter = Conv2d("aux.depth_quarter", 1, c, 1, rng);
    p.aux_depth_eighth = Conv2d("aux.depth_eighth", 1, c, 1, rng);
    return p;
  }

  struct Trace {
    StubEncoder::Cache encoder;
    EncoderFeatures feats;
    DepthSimilarity::Cache sim_kernel;
    KernelBranch::Cache kernel;
    MaskBranch::Cache mask;
    MaskHeadCache head;
    Tensor aux_rq, aux_r8, aux_dq, aux_d8;  // post-sigmoid maps

    uint64_t signature() const {
      SigHash sig;
      encoder.fold(sig);
      sim_kernel.fold(sig);
      kernel.fold(sig);
      mask.fold(sig);
      return sig.h;
    }
  };

  struct RawOut {
    KernelSet kernel_set;
    Tensor mask_feature;             // 1/4 scale
    std::vector<Tensor> soft_masks;  // input resolution, slot order
    AuxPreds aux;
  };

  RawOut forward_raw(const Tensor& rgb, const Tensor& depth, Trace* trace) const {
    Trace local;
    Trace& t = trace ? *trace : local;
    t.feats = encoder.forward(rgb, depth, &t.encoder);

    const Tensor depth_high_cal =
        sim_kernel.forward(t.feats.rgb_eighth, t.feats.depth_eighth, &t.sim_kernel)
            .calibrated;

    RawOut out;
    out.kernel_set = kernel_branch.forward(t.feats.rgb_eighth, depth_high_cal, &t.kernel);
    out.mask_feature =
        mask_branch.forward(t.feats.rgb_quarter, t.feats.rgb_eighth,
                            t.feats.depth_quarter, t.feats.depth_eighth, &t.mask);
    out.soft_masks = dynamic_mask_head_raw(out.kernel_set.kernels, out.mask_feature,
                                           rgb.dim(0), rgb.dim(1), &t.head);

    t.aux_rq = sigmoid(aux_rgb_quarter.forward(t.feats.rgb_quarter));
    t.aux_r8 = sigmoid(aux_rgb_eighth.forward(t.feats.rgb_eighth));
    t.aux_dq = sigmoid(aux_depth_quarter.forward(t.feats.depth_quarter));
    t.aux_d8 = sigmoid(aux_depth_eighth.forward(t.feats.depth_eighth));
    auto squeeze = [](const Tensor& m) { return reshape(m, {m.dim(0), m.dim(1)}); };
    out.aux = {squeeze(t.aux_rq), squeeze(t.aux_r8), squeeze(t.aux_dq), squeeze(t.aux_d8)};
    return out;
  }

  // All predictions, sorted by score descending (ties keep slot order).
  std::vector<InstancePrediction> forward(const Tensor& rgb, const Tensor& depth) const {
    RawOut raw = forward_raw(rgb, depth, nullptr);
    std::vector<InstancePrediction> preds;
    preds.reserve(raw.soft_masks.size());
    for (size_t i = 0; i < raw.soft_masks.size(); ++i)
      preds.push_back({raw.soft_masks[i], raw.kernel_set.scores(static_cast<int>(i))});
    std::stable_sort(preds.begin(), preds.end(),
                     [](const InstancePrediction& a, const InstancePrediction& b) {
                       return a.score > b.score;
                     });
    return preds;
  }

  struct OutputGrads {
    Tensor g_scores;                 // n
    std::vector<Tensor> g_masks;     // per slot, input resolution
    Tensor g_aux_rq, g_aux_r8, g_aux_dq, g_aux_d8;  // vs the sigmoid maps
  };

  Gradients backward(const Trace& t, const OutputGrads& og) const {
    Gradients gs;

    auto [g_kernels, g_feat] = dynamic_mask_head_backward(t.head, og.g_masks);
    auto [g_r8_kernel, g_d8_cal] =
        kernel_branch.backward(t.kernel, g_kernels, og.g_scores, gs);

    auto mask_grads = mask_branch.backward(t.mask, g_feat, gs);

    auto [g_r8_dsa, g_d8_dsa] = sim_kernel.backward(t.sim_kernel, g_d8_cal, gs);

    Tensor g_rq = mask_grads.rgb_quarter;
    Tensor g_r8 = mask_grads.rgb_eighth;
    Tensor g_dq = mask_grads.depth_quarter;
    Tensor g_d8 = mask_grads.depth_eighth;
    add_inplace(g_r8, g_r8_kernel);
    add_inplace(g_r8, g_r8_dsa);
    add_inplace(g_d8, g_d8_dsa);

    auto aux_back = [&gs](const Conv2d& conv, const Tensor& feat, const Tensor& sig_map,
                          const Tensor& g_map, Tensor& g_feat_out) {
      Tensor g3 = reshape(g_map, sig_map.shape());
      Tensor g_pre = sigmoid_backward(sig_map, g3);
      add_inplace(g_feat_out, conv.backward(feat, g_pre, gs));
    };
    aux_back(aux_rgb_quarter, t.feats.rgb_quarter, t.aux_rq, og.g_aux_rq, g_rq);
    aux_back(aux_rgb_eighth, t.feats.rgb_eighth, t.aux_r8, og.g_aux_r8, g_r8);
    aux_back(aux_depth_quarter, t.feats.depth_quarter, t.aux_dq, og.g_aux_dq, g_dq);
    aux_back(aux_depth_eighth, t.feats.depth_eighth, t.aux_d8, og.g_aux_d8, g_d8);

    encoder.rgb.backward(t.encoder.rgb, g_rq, g_r8, gs);
    encoder.depth.backward(t.encoder.depth, g_dq, g_d8, gs);
    return gs;
  }

  void collect(ParamRefs& out) {
    encoder.collect(out);
    sim_kernel.collect(out);
    kernel_branch.collect(out);
    mask_branch.collect(out);
    aux_rgb_quarter.collect(out);
    aux_rgb_eighth.collect(out);
    aux_depth_quarter.collect(out);
    aux_depth_eighth.collect(out);
  }

  ParamRefs params() {
    ParamRefs refs;
    collect(refs);
    return refs;
  }

  long long param_count() const {
    return encoder.param_count() + sim_kernel.param_count() +
           kernel_branch.param_count() + mask_branch.param_count() +
           aux_rgb_quarter.param_count() + aux_rgb_eighth.param_count() +
           aux_depth_quarter.param_count() + aux_depth_eighth.param_count();
  }
};

inline std::vector<InstancePrediction> filter_predictions(
    const std::vector<InstancePrediction>& preds, double score_threshold) {
  std::vector<InstancePrediction> kept;
  for (const auto& p : preds)
    if (p.score >= score_threshold) kept.push_back(p);
  return kept;
}

}  // namespace sisnet
