#pragma once

#include <string>
#include <utility>

#include "sisnet/nn.hpp"

namespace sisnet {

// Learned per-element affine on a single-channel map; the parameter-bearing
// equivalent of a 1x1 convolution on a map with no channel axis.
struct ElementAffine {
  std::string name;
  Tensor w, b;  // each [1]

  ElementAffine() = default;
  ElementAffine(std::string layer_name, Rng& rng) : name(std::move(layer_name)) {
    w = rng.uniform_tensor({1}, -1.0, 1.0);
    b = rng.uniform_tensor({1}, -1.0, 1.0);
  }

  Tensor forward(const Tensor& m) const {
    Tensor y(m.shape());
    for (long long i = 0; i < m.size(); ++i) y[i] = w(0) * m[i] + b(0);
    count_macs(m.size());
    return y;
  }

  Tensor backward(const Tensor& m, const Tensor& gy, Gradients& gs) const {
    Tensor gw({1});
    Tensor gb({1});
    Tensor gm(m.shape());
    for (long long i = 0; i < m.size(); ++i) {
      gw(0) += gy[i] * m[i];
      gb(0) += gy[i];
      gm[i] = gy[i] * w(0);
    }
    gs.accumulate(name + ".w", gw);
    gs.accumulate(name + ".b", gb);
    return gm;
  }

  void collect(ParamRefs& out) {
    out.emplace_back(name + ".w", &w);
    out.emplace_back(name + ".b", &b);
  }

  long long param_count() const { return 2; }
};

// Fuses one RGB / depth feature pair through a compact shared affinity
// matrix. Per-modality spatial attention maps are multiplied into an
// h x h affinity; learned affines plus a row softmax turn it into
// modality-specific mixing weights, which re-weight the attention maps.
// The gated feature paths are summed into one fused map.
struct WeightSharedFusion {
  SpatialAttention sa_rgb, sa_depth;
  ElementAffine affine_rgb, affine_depth;
  ConvGnRelu feat_rgb, feat_depth;

  WeightSharedFusion() = default;
  WeightSharedFusion(const std::string& module_name, int channels, int groups, Rng& rng)
      : sa_rgb(module_name + ".sa_rgb", rng),
        sa_depth(module_name + ".sa_depth", rng),
        affine_rgb(module_name + ".affine_rgb", rng),
        affine_depth(module_name + ".affine_depth", rng),
        feat_rgb(module_name + ".feat_rgb", channels, channels, groups, rng),
        feat_depth(module_name + ".feat_depth", channels, channels, groups, rng) {}

  struct Cache {
    Tensor x_rgb, x_depth;
    SpatialAttention::Cache sa_rgb, sa_depth;
    Tensor att_rgb, att_depth;        // h x w
    Tensor shared;                    // h x h
    Tensor mix_rgb, mix_depth;        // h x h, row-stochastic
    Tensor gate_rgb, gate_depth;      // h x w, post-sigmoid
    ConvGnRelu::Cache g3_rgb, g3_depth;
    Tensor path_rgb, path_depth;      // h x w x c, block outputs

    void fold(SigHash& sig) const {
      sa_rgb.fold(sig);
      sa_depth.fold(sig);
      g3_rgb.fold(sig);
      g3_depth.fold(sig);
    }
  };

  Tensor forward(const Tensor& x_rgb, const Tensor& x_depth, Cache* cache) const {
    detail::require_same_shape(x_rgb, x_depth, "fusion");
    Cache local;
    Cache& c = cache ? *cache : local;
    c.x_rgb = x_rgb;
    c.x_depth = x_depth;

    c.att_rgb = sa_rgb.forward(x_rgb, &c.sa_rgb);
    c.att_depth = sa_depth.forward(x_depth, &c.sa_depth);

    c.shared = matmul(c.att_rgb, transpose(c.att_depth));  // h x h
    c.mix_rgb = softmax(affine_rgb.forward(c.shared), 1);
    c.mix_depth = softmax(affine_depth.forward(c.shared), 1);

    Tensor blend_rgb = add(c.att_rgb, matmul(transpose(c.mix_rgb), c.att_rgb));
    Tensor blend_depth = add(c.att_depth, matmul(c.mix_depth, c.att_depth));
    c.gate_rgb = sigmoid(blend_rgb);
    c.gate_depth = sigmoid(blend_depth);

    c.path_rgb = feat_rgb.forward(x_rgb, &c.g3_rgb);
    c.path_depth = feat_depth.forward(x_depth, &c.g3_depth);

    const int h = x_rgb.dim(0), w = x_rgb.dim(1), ch = x_rgb.dim(2);
    Tensor out({h, w, ch});
    for (int i = 0; i < h; ++i)
      for (int j = 0; j < w; ++j) {
        const double gr = c.gate_rgb(i, j);
        const double gd = c.gate_depth(i, j);
        for (int k = 0; k < ch; ++k)
          out(i, j, k) = c.path_rgb(i, j, k) * gr + c.path_depth(i, j, k) * gd;
      }
    out.check_finite();
    return out;
  }

  std::pair<Tensor, Tensor> backward(const Cache& c, const Tensor& gy,
                                     Gradients& gs) const {
    const int h = c.x_rgb.dim(0), w = c.x_rgb.dim(1), ch = c.x_rgb.dim(2);

    Tensor g_path_rgb({h, w, ch});
    Tensor g_path_depth({h, w, ch});
    Tensor g_gate_rgb({h, w});
    Tensor g_gate_depth({h, w});
    for (int i = 0; i < h; ++i)
      for (int j = 0; j < w; ++j) {
        double acc_r = 0.0, acc_d = 0.0;
        for (int k = 0; k < ch; ++k) {
          const double g = gy(i, j, k);
          g_path_rgb(i, j, k) = g * c.gate_rgb(i, j);
          g_path_depth(i, j, k) = g * c.gate_depth(i, j);
          acc_r += g * c.path_rgb(i, j, k);
          acc_d += g * c.path_depth(i, j, k);
        }
        g_gate_rgb(i, j) = acc_r;
        g_gate_depth(i, j) = acc_d;
      }

    Tensor g_x_rgb = feat_rgb.backward(c.g3_rgb, g_path_rgb, gs);
    Tensor g_x_depth = feat_depth.backward(c.g3_depth, g_path_depth, gs);

    Tensor g_blend_rgb = sigmoid_backward(c.gate_rgb, g_gate_rgb);
    Tensor g_blend_depth = sigmoid_backward(c.gate_depth, g_gate_depth);

    // blend_rgb = att_rgb + mix_rgb^T . att_rgb
    Tensor g_att_rgb = g_blend_rgb;
    Tensor g_mix_rgb = matmul(c.att_rgb, transpose(g_blend_rgb));
    add_inplace(g_att_rgb, matmul(c.mix_rgb, g_blend_rgb));

    // blend_depth = att_depth + mix_depth . att_depth
    Tensor g_att_depth = g_blend_depth;
    Tensor g_mix_depth = matmul(g_blend_depth, transpose(c.att_depth));
    add_inplace(g_att_depth, matmul(transpose(c.mix_depth), g_blend_depth));

    Tensor g_pre_rgb = softmax_backward(c.mix_rgb, g_mix_rgb, 1);
    Tensor g_pre_depth = softmax_backward(c.mix_depth, g_mix_depth, 1);
    Tensor g_shared = affine_rgb.backward(c.shared, g_pre_rgb, gs);
    add_inplace(g_shared, affine_depth.backward(c.shared, g_pre_depth, gs));

    // shared = att_rgb . att_depth^T
    add_inplace(g_att_rgb, matmul(g_shared, c.att_depth));
    add_inplace(g_att_depth, matmul(transpose(g_shared), c.att_rgb));

    add_inplace(g_x_rgb, sa_rgb.backward(c.sa_rgb, g_att_rgb, gs));
    add_inplace(g_x_depth, sa_depth.backward(c.sa_depth, g_att_depth, gs));
    return {std::move(g_x_rgb), std::move(g_x_depth)};
  }

  void collect(ParamRefs& out) {
    sa_rgb.collect(out);
    sa_depth.collect(out);
    affine_rgb.collect(out);
    affine_depth.collect(out);
    feat_rgb.collect(out);
    feat_depth.collect(out);
  }

  long long param_count() const {
    return sa_rgb.param_count() + sa_depth.param_count() + affine_rgb.param_count() +
           affine_depth.param_count() + feat_rgb.param_count() + feat_depth.param_count();
  }
};

}  // namespace sisnet
