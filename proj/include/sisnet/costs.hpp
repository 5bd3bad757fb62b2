#pragma once

#include <string>
#include <vector>

#include "sisnet/pipeline.hpp"
#include "sisnet/tensor.hpp"

namespace sisnet {

struct CostReport {
  long long params = 0;
  long long macs = 0;

  CostReport& operator+=(const CostReport& other) {
    params += other.params;
    macs += other.macs;
    return *this;
  }
};

// One layer of a model description. MACs follow the multiply-accumulate
// accounting used by the tensor ops: matmul m*k*n, conv h*w*k^2*cin*cout,
// linear n*cin*cout, element affine one per element; norms, activations and
// pooling contribute none.
struct LayerDesc {
  enum class Kind { Conv2d, Linear, GroupNorm, ElementAffine, MatMul };
  Kind kind = Kind::Conv2d;
  // Conv2d: k, c_in, c_out over an h x w grid.
  // Linear: n rows, c_in -> c_out.
  // GroupNorm: c_in channels.
  // ElementAffine: h x w map.
  // MatMul: (h x k) . (k x w).
  int h = 0, w = 0, k = 0, c_in = 0, c_out = 0, n = 0;
};

inline LayerDesc::Kind layer_kind_from_string(const std::string& s) {
  if (s == "conv2d") return LayerDesc::Kind::Conv2d;
  if (s == "linear") return LayerDesc::Kind::Linear;
  if (s == "group_norm") return LayerDesc::Kind::GroupNorm;
  if (s == "element_affine") return LayerDesc::Kind::ElementAffine;
  if (s == "matmul") return LayerDesc::Kind::MatMul;
  throw value_error("unknown layer type '" + s + "'");
}

inline CostReport count_costs(const std::vector<LayerDesc>& layers) {
  CostReport r;
  for (const LayerDesc& l : layers) {
    switch (l.kind) {
      case LayerDesc::Kind::Conv2d:
        r.params += static_cast<long long>(l.k) * l.k * l.c_in * l.c_out + l.c_out;
        r.macs += static_cast<long long>(l.h) * l.w * l.k * l.k * l.c_in * l.c_out;
        break;
      case LayerDesc::Kind::Linear:
        r.params += static_cast<long long>(l.c_in) * l.c_out + l.c_out;
        r.macs += static_cast<long long>(l.n) * l.c_in * l.c_out;
        break;
      case LayerDesc::Kind::GroupNorm:
        r.params += 2LL * l.c_in;
        break;
      case LayerDesc::Kind::ElementAffine:
        r.params += 2;
        r.macs += static_cast<long long>(l.h) * l.w;
        break;
      case LayerDesc::Kind::MatMul:
        r.macs += static_cast<long long>(l.h) * l.k * l.w;
        break;
    }
  }
  return r;
}

// The compact h x h affinity path: one (h x w).(w x h) product, two learned
// affines on the h x h map, and the two h x h by h x w mixing products.
inline CostReport shared_affinity_costs(int h, int w) {
  std::vector<LayerDesc> layers;
  LayerDesc build;
  build.kind = LayerDesc::Kind::MatMul;
  build.h = h;
  build.k = w;
  build.w = h;
  layers.push_back(build);
  LayerDesc affine;
  affine.kind = LayerDesc::Kind::ElementAffine;
  affine.h = h;
  affine.w = h;
  layers.push_back(affine);
  layers.push_back(affine);
  LayerDesc mix;
  mix.kind = LayerDesc::Kind::MatMul;
  mix.h = h;
  mix.k = h;
  mix.w = w;
  layers.push_back(mix);
  layers.push_back(mix);
  return count_costs(layers);
}

// The hw x hw variant: flattened attention vectors build a full pairwise
// affinity, the affines act on hw x hw, and each mixing product contracts
// the hw x hw matrix with a flattened map.
inline CostReport nonlocal_affinity_costs(int h, int w) {
  const int n = h * w;
  std::vector<LayerDesc> layers;
  LayerDesc build;
  build.kind = LayerDesc::Kind::MatMul;
  build.h = n;
  build.k = 1;
  build.w = n;
  layers.push_back(build);
  LayerDesc affine;
  affine.kind = LayerDesc::Kind::ElementAffine;
  affine.h = n;
  affine.w = n;
  layers.push_back(affine);
  layers.push_back(affine);
  LayerDesc mix;
  mix.kind = LayerDesc::Kind::MatMul;
  mix.h = n;
  mix.k = n;
  mix.w = 1;
  layers.push_back(mix);
  layers.push_back(mix);
  return count_costs(layers);
}

// Exact parameter count plus counter-measured MACs of one forward pass.
inline CostReport pipeline_costs(const Pipeline& pipe, int in_h, int in_w) {
  CostReport r;
  r.params = pipe.param_count();
  MacCounter counter;
  {
    MacScope scope(counter);
    Tensor rgb({in_h, in_w, 3});
    Tensor depth({in_h, in_w, 1});
    (void)pipe.forward_raw(rgb, depth, nullptr);
  }
  r.macs = counter.macs;
  return r;
}

}  // namespace sisnet
