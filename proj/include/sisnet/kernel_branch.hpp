#pragma once

#include <string>
#include <utility>

#include "sisnet/nn.hpp"

namespace sisnet {

struct KernelSet {
  Tensor kernels;  // [n, c]
  Tensor scores;   // [n], each in (0, 1)
};

// Produces instance-aware kernels from the 1/8-scale RGB feature and the
// similarity-calibrated depth feature. Each modality runs through
// coordinates + two 3x3 convolutions + sigmoid; the concatenated attention
// stack is contracted against the RGB feature, and two linear layers mix
// first the kernel slots (2n -> n) and then the channels (c -> c). A final
// linear head emits one confidence score per kernel.
struct KernelBranch {
  int n_kernels = 0, channels = 0;
  Conv2d rgb_reduce, rgb_expand;      // (c+2) -> c, c -> n
  Conv2d depth_reduce, depth_expand;
  Linear slot_mix;     // 2n -> n, applied along the slot axis
  Linear channel_mix;  // c -> c
  Linear score_head;   // c -> 1

  KernelBranch() = default;
  KernelBranch(const std::string& module_name, int n, int c, Rng& rng)
      : n_kernels(n),
        channels(c),
        rgb_reduce(module_name + ".rgb_reduce", 3, c + 2, c, rng),
        rgb_expand(module_name + ".rgb_expand", 3, c, n, rng),
        depth_reduce(module_name + ".depth_reduce", 3, c + 2, c, rng),
        depth_expand(module_name + ".depth_expand", 3, c, n, rng),
        slot_mix(module_name + ".slot_mix", 2 * n, n, rng),
        channel_mix(module_name + ".channel_mix", c, c, rng),
        score_head(module_name + ".score_head", c, 1, rng) {
    if (n < 1) throw value_error("kernel branch: kernel count must be >= 1");
  }

  struct Cache {
    Tensor rgb_in, depth_in;
    Tensor rgb_coords, depth_coords;      // h x w x (c+2)
    Tensor rgb_mid, depth_mid;            // h x w x c
    Tensor rgb_att, depth_att;            // h x w x n, post-sigmoid
    Tensor attn_flat;                     // hw x 2n
    Tensor value_flat;                    // hw x c
    Tensor embed_t;                       // c x 2n
    Tensor mixed;                         // n x c
    Tensor kernels;                       // n x c
    Tensor scores;                        // n

    void fold(SigHash&) const {}  // smooth throughout
  };

  KernelSet forward(const Tensor& rgb_high, const Tensor& depth_high,
                    Cache* cache) const {
    detail::require_same_shape(rgb_high, depth_high, "kernel branch");
    Cache local;
    Cache& c = cache ? *cache : local;
    c.rgb_in = rgb_high;
    c.depth_in = depth_high;

    const int h = rgb_high.dim(0), w = rgb_high.dim(1);

    c.rgb_coords = coord_concat(rgb_high);
    c.rgb_mid = rgb_reduce.forward(c.rgb_coords);
    c.rgb_att = sigmoid(rgb_expand.forward(c.rgb_mid));

    c.depth_coords = coord_concat(depth_high);
    c.depth_mid = depth_reduce.forward(c.depth_coords);
    c.depth_att = sigmoid(depth_expand.forward(c.depth_mid));

    Tensor attn = concat(c.rgb_att, c.depth_att, 2);  // h x w x 2n
    c.attn_flat = reshape(attn, {h * w, 2 * n_kernels});
    c.value_flat = reshape(rgb_high, {h * w, channels});

    Tensor embed = matmul(transpose(c.attn_flat), c.value_flat);  // 2n x c
    c.embed_t = transpose(embed);                                 // c x 2n
    c.mixed = transpose(slot_mix.forward(c.embed_t));             // n x c
    c.kernels = channel_mix.forward(c.mixed);

    Tensor logits = score_head.forward(c.kernels);  // n x 1
    c.scores = sigmoid(reshape(logits, {n_kernels}));

    return {c.kernels, c.scores};
  }

  // Returns gradients wrt (rgb_high, depth_high).
  std::pair<Tensor, Tensor> backward(const Cache& c, const Tensor& g_kernels,
                                     const Tensor& g_scores, Gradients& gs) const {
    const int h = c.rgb_in.dim(0), w = c.rgb_in.dim(1);

    Tensor g_logits = reshape(sigmoid_backward(c.scores, g_scores), {n_kernels, 1});
    Tensor g_k = g_kernels;
    add_inplace(g_k, score_head.backward(c.kernels, g_logits, gs));

    Tensor g_mixed = channel_mix.backward(c.mixed, g_k, gs);
    Tensor g_embed_t = slot_mix.backward(c.embed_t, transpose(g_mixed), gs);
    Tensor g_embed = transpose(g_embed_t);  // 2n x c

    // embed = attn^T . value
    Tensor g_attn = matmul(c.value_flat, transpose(g_embed));  // hw x 2n
    Tensor g_value = matmul(c.attn_flat, g_embed);             // hw x c

    Tensor g_rgb = reshape(g_value, c.rgb_in.shape());  // value path

    Tensor g_attn_map = reshape(g_attn, {h, w, 2 * n_kernels});
    Tensor g_att_rgb = slice(g_attn_map, 2, 0, n_kernels);
    Tensor g_att_depth = slice(g_attn_map, 2, n_kernels, n_kernels);

    Tensor g_mid_rgb =
        rgb_expand.backward(c.rgb_mid, sigmoid_backward(c.rgb_att, g_att_rgb), gs);
    add_inplace(g_rgb, coord_concat_backward(
                           rgb_reduce.backward(c.rgb_coords, g_mid_rgb, gs)));

    Tensor g_mid_depth = depth_expand.backward(
        c.depth_mid, sigmoid_backward(c.depth_att, g_att_depth), gs);
    Tensor g_depth = coord_concat_backward(
        depth_reduce.backward(c.depth_coords, g_mid_depth, gs));

    return {std::move(g_rgb), std::move(g_depth)};
  }

  void collect(ParamRefs& out) {
    rgb_reduce.collect(out);
    rgb_expand.collect(out);
    depth_reduce.collect(out);
    depth_expand.collect(out);
    slot_mix.collect(out);
    channel_mix.collect(out);
    score_head.collect(out);
  }

  long long param_count() const {
    return rgb_reduce.param_count() + rgb_expand.param_count() +
           depth_reduce.param_count() + depth_expand.param_count() +
           slot_mix.param_count() + channel_mix.param_count() +
           score_head.param_count();
  }
};

}  // namespace sisnet
