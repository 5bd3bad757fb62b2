#pragma once

#include <array>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "sisnet/grad_check.hpp"
#include "sisnet/random.hpp"
#include "sisnet/tensor.hpp"

namespace sisnet {

using ParamRefs = std::vector<std::pair<std::string, Tensor*>>;

inline double init_bound(int fan_in) {
  return fan_in > 0 ? 1.0 / std::sqrt(static_cast<double>(fan_in)) : 1.0;
}

// ---------------------------------------------------------------------------
// Conv2d: same-padded stride-1 cross-correlation on h x w x c tensors.
// Kernel sizes are restricted to 1, 3 and 7.
// ---------------------------------------------------------------------------

struct Conv2d {
  std::string name;
  int k = 3, c_in = 0, c_out = 0;
  Tensor weight;  // [k, k, c_in, c_out]
  Tensor bias;    // [c_out]

  Conv2d() = default;
  Conv2d(std::string layer_name, int kernel, int in, int out, Rng& rng)
      : name(std::move(layer_name)), k(kernel), c_in(in), c_out(out) {
    if (k != 1 && k != 3 && k != 7)
      throw value_error("conv2d '" + name + "': kernel size must be 1, 3 or 7");
    const double s = init_bound(k * k * c_in);
    weight = rng.uniform_tensor({k, k, c_in, c_out}, -s, s);
    bias = rng.uniform_tensor({c_out}, -s, s);
  }

  int pad() const { return (k - 1) / 2; }

  Tensor forward(const Tensor& x) const {
    if (x.rank() != 3 || x.dim(2) != c_in) {
      throw shape_error("conv2d '" + name + "': input " + shape_str(x.shape()) +
                        " does not carry " + std::to_string(c_in) + " channels");
    }
    const int h = x.dim(0), w = x.dim(1), p = pad();
    Tensor y({h, w, c_out});
    for (int i = 0; i < h; ++i) {
      for (int j = 0; j < w; ++j) {
        double* orow = &y(i, j, 0);
        for (int o = 0; o < c_out; ++o) orow[o] = bias(o);
        for (int di = 0; di < k; ++di) {
          const int ii = i + di - p;
          if (ii < 0 || ii >= h) continue;
          for (int dj = 0; dj < k; ++dj) {
            const int jj = j + dj - p;
            if (jj < 0 || jj >= w) continue;
            const double* xrow = &x(ii, jj, 0);
            for (int ci = 0; ci < c_in; ++ci) {
              const double xv = xrow[ci];
              const double* wrow = &weight(di, dj, ci, 0);
              for (int o = 0; o < c_out; ++o) orow[o] += xv * wrow[o];
            }
          }
        }
      }
    }
    count_macs(static_cast<long long>(h) * w * k * k * c_in * c_out);
    y.check_finite();
    return y;
  }

  Tensor backward(const Tensor& x, const Tensor& gy, Gradients& gs) const {
    const int h = x.dim(0), w = x.dim(1), p = pad();
    Tensor gx(x.shape());
    Tensor gw(weight.shape());
    Tensor gb(bias.shape());
    for (int i = 0; i < h; ++i) {
      for (int j = 0; j < w; ++j) {
        const double* grow = &gy(i, j, 0);
        for (int o = 0; o < c_out; ++o) gb(o) += grow[o];
        for (int di = 0; di < k; ++di) {
          const int ii = i + di - p;
          if (ii < 0 || ii >= h) continue;
          for (int dj = 0; dj < k; ++dj) {
            const int jj = j + dj - p;
            if (jj < 0 || jj >= w) continue;
            const double* xrow = &x(ii, jj, 0);
            double* gxrow = &gx(ii, jj, 0);
            for (int ci = 0; ci < c_in; ++ci) {
              const double xv = xrow[ci];
              const double* wrow = &weight(di, dj, ci, 0);
              double* gwrow = &gw(di, dj, ci, 0);
              double acc = 0.0;
              for (int o = 0; o < c_out; ++o) {
                gwrow[o] += xv * grow[o];
                acc += wrow[o] * grow[o];
              }
              gxrow[ci] += acc;
            }
          }
        }
      }
    }
    gs.accumulate(name + ".w", gw);
    gs.accumulate(name + ".b", gb);
    return gx;
  }

  void collect(ParamRefs& out) {
    out.emplace_back(name + ".w", &weight);
    out.emplace_back(name + ".b", &bias);
  }

  long long param_count() const { return weight.size() + bias.size(); }
};

// ---------------------------------------------------------------------------
// GroupNorm over spatial x channels-in-group, with per-channel scale/shift.
// ---------------------------------------------------------------------------

struct GroupNorm {
  std::string name;
  int channels = 0, groups = 1;
  double eps = 1e-5;
  Tensor gamma, beta;  // [c]

  GroupNorm() = default;
  GroupNorm(std::string layer_name, int c, int g)
      : name(std::move(layer_name)), channels(c), groups(g) {
    if (g < 1 || c % g != 0) {
      throw value_error("group_norm '" + name + "': groups " + std::to_string(g) +
                        " must divide channels " + std::to_string(c));
    }
    gamma = Tensor::full({c}, 1.0);
    beta = Tensor({c});
  }

  struct Cache {
    Tensor xhat;
    std::vector<double> inv_std;  // per group
  };

  Tensor forward(const Tensor& x, Cache* cache = nullptr) const {
    if (x.rank() != 3 || x.dim(2) != channels) {
      throw shape_error("group_norm '" + name + "': input " + shape_str(x.shape()) +
                        " does not carry " + std::to_string(channels) + " channels");
    }
    const int h = x.dim(0), w = x.dim(1), cg = channels / groups;
    const long long m = static_cast<long long>(h) * w * cg;
    Tensor xhat(x.shape());
    std::vector<double> inv_std(static_cast<size_t>(groups));
    for (int g = 0; g < groups; ++g) {
      double mu = 0.0;
      for (int i = 0; i < h; ++i)
        for (int j = 0; j < w; ++j)
          for (int c = g * cg; c < (g + 1) * cg; ++c) mu += x(i, j, c);
      mu /= static_cast<double>(m);
      double var = 0.0;
      for (int i = 0; i < h; ++i)
        for (int j = 0; j < w; ++j)
          for (int c = g * cg; c < (g + 1) * cg; ++c) {
            const double d = x(i, j, c) - mu;
            var += d * d;
          }
      var /= static_cast<double>(m);
      const double r = 1.0 / std::sqrt(var + eps);
      inv_std[static_cast<size_t>(g)] = r;
      for (int i = 0; i < h; ++i)
        for (int j = 0; j < w; ++j)
          for (int c = g * cg; c < (g + 1) * cg; ++c)
            xhat(i, j, c) = (x(i, j, c) - mu) * r;
    }
    Tensor y(x.shape());
    for (int i = 0; i < h; ++i)
      for (int j = 0; j < w; ++j)
        for (int c = 0; c < channels; ++c)
          y(i, j, c) = gamma(c) * xhat(i, j, c) + beta(c);
    if (cache) {
      cache->xhat = xhat;
      cache->inv_std = std::move(inv_std);
    }
    y.check_finite();
    return y;
  }

  Tensor backward(const Cache& cache, const Tensor& gy, Gradients& gs) const {
    const Tensor& xhat = cache.xhat;
    const int h = xhat.dim(0), w = xhat.dim(1), cg = channels / groups;
    const double m = static_cast<double>(static_cast<long long>(h) * w * cg);
    Tensor gx(xhat.shape());
    Tensor ggamma(gamma.shape());
    Tensor gbeta(beta.shape());
    for (int i = 0; i < h; ++i)
      for (int j = 0; j < w; ++j)
        for (int c = 0; c < channels; ++c) {
          ggamma(c) += gy(i, j, c) * xhat(i, j, c);
          gbeta(c) += gy(i, j, c);
        }
    for (int g = 0; g < groups; ++g) {
      double sum_gxh = 0.0, sum_gxh_xhat = 0.0;
      for (int i = 0; i < h; ++i)
        for (int j = 0; j < w; ++j)
          for (int c = g * cg; c < (g + 1) * cg; ++c) {
            const double d = gy(i, j, c) * gamma(c);
            sum_gxh += d;
            sum_gxh_xhat += d * xhat(i, j, c);
          }
      const double r = cache.inv_std[static_cast<size_t>(g)];
      for (int i = 0; i < h; ++i)
        for (int j = 0; j < w; ++j)
          for (int c = g * cg; c < (g + 1) * cg; ++c) {
            const double d = gy(i, j, c) * gamma(c);
            gx(i, j, c) =
                r * (d - sum_gxh / m - xhat(i, j, c) * sum_gxh_xhat / m);
          }
    }
    gs.accumulate(name + ".gamma", ggamma);
    gs.accumulate(name + ".beta", gbeta);
    return gx;
  }

  void collect(ParamRefs& out) {
    out.emplace_back(name + ".gamma", &gamma);
    out.emplace_back(name + ".beta", &beta);
  }

  long long param_count() const { return 2LL * channels; }
};

// ---------------------------------------------------------------------------
// Linear: y = x . W + b on [n, c_in] inputs.
// ---------------------------------------------------------------------------

struct Linear {
  std::string name;
  int in = 0, out = 0;
  Tensor weight;  // [in, out]
  Tensor bias;    // [out]

  Linear() = default;
  Linear(std::string layer_name, int c_in, int c_out, Rng& rng)
      : name(std::move(layer_name)), in(c_in), out(c_out) {
    const double s = init_bound(in);
    weight = rng.uniform_tensor({in, out}, -s, s);
    bias = rng.uniform_tensor({out}, -s, s);
  }

  Tensor forward(const Tensor& x) const {
    if (x.rank() != 2 || x.dim(1) != in) {
      throw shape_error("linear '" + name + "': input " + shape_str(x.shape()) +
                        " incompatible with weight " + shape_str(weight.shape()));
    }
    Tensor y = matmul(x, weight);
    for (int i = 0; i < y.dim(0); ++i)
      for (int j = 0; j < out; ++j) y(i, j) += bias(j);
    y.check_finite();
    return y;
  }

  Tensor backward(const Tensor& x, const Tensor& gy, Gradients& gs) const {
    Tensor gw = matmul(transpose(x), gy);
    Tensor gb(bias.shape());
    for (int i = 0; i < gy.dim(0); ++i)
      for (int j = 0; j < out; ++j) gb(j) += gy(i, j);
    gs.accumulate(name + ".w", gw);
    gs.accumulate(name + ".b", gb);
    return matmul(gy, transpose(weight));
  }

  void collect(ParamRefs& out_refs) {
    out_refs.emplace_back(name + ".w", &weight);
    out_refs.emplace_back(name + ".b", &bias);
  }

  long long param_count() const { return weight.size() + bias.size(); }
};

// ---------------------------------------------------------------------------
// Pooling / resampling / coordinate helpers
// ---------------------------------------------------------------------------

// h x w x c -> h x w x 1, mean over the channel axis.
inline Tensor channel_avg_pool(const Tensor& x) {
  const int h = x.dim(0), w = x.dim(1), c = x.dim(2);
  Tensor y({h, w, 1});
  for (int i = 0; i < h; ++i)
    for (int j = 0; j < w; ++j) {
      double s = 0.0;
      for (int ci = 0; ci < c; ++ci) s += x(i, j, ci);
      y(i, j, 0) = s / c;
    }
  return y;
}

inline void channel_avg_pool_backward(const Tensor& gy, Tensor& gx) {
  const int h = gx.dim(0), w = gx.dim(1), c = gx.dim(2);
  for (int i = 0; i < h; ++i)
    for (int j = 0; j < w; ++j) {
      const double v = gy(i, j, 0) / c;
      for (int ci = 0; ci < c; ++ci) gx(i, j, ci) += v;
    }
}

// h x w x c -> h x w x 1, max over the channel axis; argmax kept for backward.
inline Tensor channel_max_pool(const Tensor& x, std::vector<int>* argmax) {
  const int h = x.dim(0), w = x.dim(1), c = x.dim(2);
  Tensor y({h, w, 1});
  if (argmax) argmax->assign(static_cast<size_t>(h) * w, 0);
  for (int i = 0; i < h; ++i)
    for (int j = 0; j < w; ++j) {
      int best = 0;
      double bv = x(i, j, 0);
      for (int ci = 1; ci < c; ++ci)
        if (x(i, j, ci) > bv) {
          bv = x(i, j, ci);
          best = ci;
        }
      y(i, j, 0) = bv;
      if (argmax) (*argmax)[static_cast<size_t>(i) * w + j] = best;
    }
  return y;
}

inline void channel_max_pool_backward(const Tensor& gy, const std::vector<int>& argmax,
                                      Tensor& gx) {
  const int h = gx.dim(0), w = gx.dim(1);
  for (int i = 0; i < h; ++i)
    for (int j = 0; j < w; ++j)
      gx(i, j, argmax[static_cast<size_t>(i) * w + j]) += gy(i, j, 0);
}

// 2x2 window, stride 2; spatial dims must be even.
inline Tensor avg_pool2x2(const Tensor& x) {
  const int h = x.dim(0), w = x.dim(1), c = x.dim(2);
  if (h % 2 != 0 || w % 2 != 0)
    throw shape_error("avg_pool2x2: spatial dims must be even, got " + shape_str(x.shape()));
  Tensor y({h / 2, w / 2, c});
  for (int i = 0; i < h / 2; ++i)
    for (int j = 0; j < w / 2; ++j)
      for (int ci = 0; ci < c; ++ci)
        y(i, j, ci) = 0.25 * (x(2 * i, 2 * j, ci) + x(2 * i, 2 * j + 1, ci) +
                              x(2 * i + 1, 2 * j, ci) + x(2 * i + 1, 2 * j + 1, ci));
  return y;
}

inline Tensor avg_pool2x2_backward(const Tensor& gy) {
  const int h = gy.dim(0), w = gy.dim(1), c = gy.dim(2);
  Tensor gx({2 * h, 2 * w, c});
  for (int i = 0; i < h; ++i)
    for (int j = 0; j < w; ++j)
      for (int ci = 0; ci < c; ++ci) {
        const double v = 0.25 * gy(i, j, ci);
        gx(2 * i, 2 * j, ci) = v;
        gx(2 * i, 2 * j + 1, ci) = v;
        gx(2 * i + 1, 2 * j, ci) = v;
        gx(2 * i + 1, 2 * j + 1, ci) = v;
      }
  return gx;
}

namespace detail {
// Half-pixel-centered source coordinate for 2x upsampling, edge-clamped.
struct LerpTap {
  int lo, hi;
  double frac;
};

inline LerpTap upsample_tap(int out_index, int in_size) {
  const double u = (out_index + 0.5) / 2.0 - 0.5;
  int lo = static_cast<int>(std::floor(u));
  const double frac = u - lo;
  int hi = lo + 1;
  lo = std::max(0, std::min(lo, in_size - 1));
  hi = std::max(0, std::min(hi, in_size - 1));
  return {lo, hi, frac};
}
}  // namespace detail

// Bilinear x2 upsampling with half-pixel centers and edge clamping.
inline Tensor bilinear_upsample_x2(const Tensor& x) {
  const int h = x.dim(0), w = x.dim(1), c = x.dim(2);
  Tensor y({2 * h, 2 * w, c});
  for (int I = 0; I < 2 * h; ++I) {
    const auto ti = detail::upsample_tap(I, h);
    for (int J = 0; J < 2 * w; ++J) {
      const auto tj = detail::upsample_tap(J, w);
      for (int ci = 0; ci < c; ++ci) {
        const double top = (1.0 - tj.frac) * x(ti.lo, tj.lo, ci) + tj.frac * x(ti.lo, tj.hi, ci);
        const double bot = (1.0 - tj.frac) * x(ti.hi, tj.lo, ci) + tj.frac * x(ti.hi, tj.hi, ci);
        y(I, J, ci) = (1.0 - ti.frac) * top + ti.frac * bot;
      }
    }
  }
  return y;
}

inline Tensor bilinear_upsample_x2_backward(const Tensor& gy, int in_h, int in_w) {
  const int c = gy.dim(2);
  Tensor gx({in_h, in_w, c});
  for (int I = 0; I < gy.dim(0); ++I) {
    const auto ti = detail::upsample_tap(I, in_h);
    for (int J = 0; J < gy.dim(1); ++J) {
      const auto tj = detail::upsample_tap(J, in_w);
      for (int ci = 0; ci < c; ++ci) {
        const double g = gy(I, J, ci);
        gx(ti.lo, tj.lo, ci) += (1.0 - ti.frac) * (1.0 - tj.frac) * g;
        gx(ti.lo, tj.hi, ci) += (1.0 - ti.frac) * tj.frac * g;
        gx(ti.hi, tj.lo, ci) += ti.frac * (1.0 - tj.frac) * g;
        gx(ti.hi, tj.hi, ci) += ti.frac * tj.frac * g;
      }
    }
  }
  return gx;
}

// Appends two coordinate channels, each linear in [-1, 1] across its axis.
// A one-sample axis maps to -1.
inline Tensor coord_concat(const Tensor& x) {
  const int h = x.dim(0), w = x.dim(1), c = x.dim(2);
  Tensor y({h, w, c + 2});
  for (int i = 0; i < h; ++i) {
    const double yc = h == 1 ? -1.0 : -1.0 + 2.0 * i / (h - 1);
    for (int j = 0; j < w; ++j) {
      const double xc = w == 1 ? -1.0 : -1.0 + 2.0 * j / (w - 1);
      for (int ci = 0; ci < c; ++ci) y(i, j, ci) = x(i, j, ci);
      y(i, j, c) = xc;
      y(i, j, c + 1) = yc;
    }
  }
  return y;
}

inline Tensor coord_concat_backward(const Tensor& gy) {
  const int c = gy.dim(2) - 2;
  return slice(gy, 2, 0, c);
}

// ---------------------------------------------------------------------------
// Spatial attention: sigmoid(conv7x7(cat[channel-avg; channel-max])).
// Produces one weight per pixel, strictly in (0, 1).
// ---------------------------------------------------------------------------

struct SpatialAttention {
  Conv2d conv;  // k=7, 2 -> 1

  SpatialAttention() = default;
  SpatialAttention(const std::string& layer_name, Rng& rng)
      : conv(layer_name + ".conv", 7, 2, 1, rng) {}

  struct Cache {
    Tensor x;
    Tensor pooled;   // h x w x 2
    Tensor att;      // h x w, post-sigmoid
    std::vector<int> argmax;

    void fold(SigHash& sig) const {
      for (int v : argmax) sig.u64(static_cast<uint64_t>(v));
    }
  };

  Tensor forward(const Tensor& x, Cache* cache) const {
    std::vector<int> argmax;
    Tensor avg = channel_avg_pool(x);
    Tensor mx = channel_max_pool(x, &argmax);
    Tensor pooled = concat(avg, mx, 2);
    Tensor z = conv.forward(pooled);
    Tensor att = sigmoid(reshape(z, {x.dim(0), x.dim(1)}));
    if (cache) {
      cache->x = x;
      cache->pooled = pooled;
      cache->att = att;
      cache->argmax = std::move(argmax);
    }
    return att;
  }

  Tensor backward(const Cache& cache, const Tensor& g_att, Gradients& gs) const {
    const int h = cache.x.dim(0), w = cache.x.dim(1);
    Tensor gz = reshape(sigmoid_backward(cache.att, g_att), {h, w, 1});
    Tensor gpooled = conv.backward(cache.pooled, gz, gs);
    Tensor gx(cache.x.shape());
    channel_avg_pool_backward(slice(gpooled, 2, 0, 1), gx);
    channel_max_pool_backward(slice(gpooled, 2, 1, 1), cache.argmax, gx);
    return gx;
  }

  void collect(ParamRefs& out) { conv.collect(out); }
  long long param_count() const { return conv.param_count(); }
};

// ---------------------------------------------------------------------------
// Conv3x3 + GroupNorm + ReLU block.
// ---------------------------------------------------------------------------

struct ConvGnRelu {
  Conv2d conv;
  GroupNorm norm;

  ConvGnRelu() = default;
  ConvGnRelu(const std::string& layer_name, int c_in, int c_out, int groups, Rng& rng)
      : conv(layer_name + ".conv", 3, c_in, c_out, rng),
        norm(layer_name + ".norm", c_out, groups) {}

  struct Cache {
    Tensor x;
    GroupNorm::Cache gn;
    Tensor pre_relu;

    void fold(SigHash& sig) const {
      for (long long i = 0; i < pre_relu.size(); ++i) sig.bit(pre_relu[i] > 0.0);
    }
  };

  Tensor forward(const Tensor& x, Cache* cache) const {
    Tensor z = conv.forward(x);
    GroupNorm::Cache gn;
    Tensor n = norm.forward(z, &gn);
    Tensor y = relu(n);
    if (cache) {
      cache->x = x;
      cache->gn = std::move(gn);
      cache->pre_relu = std::move(n);
    }
    return y;
  }

  Tensor backward(const Cache& cache, const Tensor& gy, Gradients& gs) const {
    Tensor gn_grad = relu_backward(cache.pre_relu, gy);
    Tensor gconv = norm.backward(cache.gn, gn_grad, gs);
    return conv.backward(cache.x, gconv, gs);
  }

  void collect(ParamRefs& out) {
    conv.collect(out);
    norm.collect(out);
  }
  long long param_count() const { return conv.param_count() + norm.param_count(); }
};

// Computes sigmoid(conv7x7(cat[avg-pool; max-pool])) without a module, for
// callers that only need the map.
inline Tensor spatial_attention(const Tensor& x, const Conv2d& conv7) {
  SpatialAttention sa;
  sa.conv = conv7;
  return sa.forward(x, nullptr);
}

}  // namespace sisnet
