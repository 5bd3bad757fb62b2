#pragma once

#include <cmath>
#include <string>
#include <utility>

#include "sisnet/nn.hpp"

namespace sisnet {

// Scores cross-modal agreement and rescales depth features by it. Each
// modality is projected to a single-channel attention map with a 1x1
// convolution; the flattened maps are compared with cosine similarity,
// remapped to [0, 1], and the score multiplies the depth features.
struct DepthSimilarity {
  Conv2d rgb_proj, depth_proj;  // 1x1, c -> 1

  DepthSimilarity() = default;
  DepthSimilarity(const std::string& module_name, int channels, Rng& rng)
      : rgb_proj(module_name + ".rgb_proj", 1, channels, 1, rng),
        depth_proj(module_name + ".depth_proj", 1, channels, 1, rng) {}

  // (1 + cos(a, b)) / 2 over flattened maps. Zero-norm input is treated as
  // uninformative and scores 0.5.
  static double similarity_from_maps(const Tensor& a, const Tensor& b) {
    detail::require_same_shape(a, b, "similarity_from_maps");
    double na = 0.0, nb = 0.0, d = 0.0;
    for (long long i = 0; i < a.size(); ++i) {
      na += a[i] * a[i];
      nb += b[i] * b[i];
      d += a[i] * b[i];
    }
    if (na == 0.0 || nb == 0.0) return 0.5;
    const double cosv = d / (std::sqrt(na) * std::sqrt(nb));
    return 0.5 * (1.0 + cosv);
  }

  struct Cache {
    Tensor rgb_in, depth_in;
    Tensor rgb_map, depth_map;  // h x w x 1
    double norm_rgb = 0.0, norm_depth = 0.0, cos = 0.0, score = 0.5;
    bool degenerate = false;

    void fold(SigHash& sig) const { sig.bit(degenerate); }
  };

  struct Out {
    Tensor calibrated;
    double score = 0.5;
  };

  Out forward(const Tensor& rgb_feat, const Tensor& depth_feat, Cache* cache) const {
    detail::require_same_shape(rgb_feat, depth_feat, "depth_similarity");
    Tensor mr = rgb_proj.forward(rgb_feat);
    Tensor md = depth_proj.forward(depth_feat);
    double na = 0.0, nb = 0.0, d = 0.0;
    for (long long i = 0; i < mr.size(); ++i) {
      na += mr[i] * mr[i];
      nb += md[i] * md[i];
      d += mr[i] * md[i];
    }
    Out out;
    bool degenerate = (na == 0.0 || nb == 0.0);
    double cosv = 0.0;
    if (degenerate) {
      out.score = 0.5;
    } else {
      cosv = d / (std::sqrt(na) * std::sqrt(nb));
      out.score = 0.5 * (1.0 + cosv);
    }
    out.calibrated = scale(depth_feat, out.score);
    if (cache) {
      cache->rgb_in = rgb_feat;
      cache->depth_in = depth_feat;
      cache->rgb_map = std::move(mr);
      cache->depth_map = std::move(md);
      cache->norm_rgb = std::sqrt(na);
      cache->norm_depth = std::sqrt(nb);
      cache->cos = cosv;
      cache->score = out.score;
      cache->degenerate = degenerate;
    }
    return out;
  }

  // Returns gradients wrt (rgb_feat, depth_feat).
  std::pair<Tensor, Tensor> backward(const Cache& cache, const Tensor& g_cal,
                                     Gradients& gs) const {
    Tensor g_depth = scale(g_cal, cache.score);
    Tensor g_rgb(cache.rgb_in.shape());
    const double g_score = dot(g_cal, cache.depth_in);
    if (!cache.degenerate) {
      const double g_cos = 0.5 * g_score;
      const double nr = cache.norm_rgb, nd = cache.norm_depth;
      Tensor g_mr(cache.rgb_map.shape());
      Tensor g_md(cache.depth_map.shape());
      for (long long i = 0; i < g_mr.size(); ++i) {
        g_mr[i] = g_cos * (cache.depth_map[i] / (nr * nd) -
                           cache.cos * cache.rgb_map[i] / (nr * nr));
        g_md[i] = g_cos * (cache.rgb_map[i] / (nr * nd) -
                           cache.cos * cache.depth_map[i] / (nd * nd));
      }
      add_inplace(g_rgb, rgb_proj.backward(cache.rgb_in, g_mr, gs));
      add_inplace(g_depth, depth_proj.backward(cache.depth_in, g_md, gs));
    }
    return {std::move(g_rgb), std::move(g_depth)};
  }

  void collect(ParamRefs& out) {
    rgb_proj.collect(out);
    depth_proj.collect(out);
  }

  long long param_count() const {
    return rgb_proj.param_count() + depth_proj.param_count();
  }
};

}  // namespace sisnet
