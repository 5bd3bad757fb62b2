#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "sisnet/random.hpp"
#include "sisnet/tensor.hpp"

namespace sisnet {

// Order-sensitive FNV-style hash over the piecewise structure of a forward
// pass (relu signs, argmax picks, clamp hits). Two evaluations with the same
// signature lie on the same smooth piece, so a central difference between
// them is valid.
struct SigHash {
  uint64_t h = 0xcbf29ce484222325ull;

  void bit(bool b) {
    h ^= b ? 0x9e3779b97f4a7c15ull : 0x2545f4914f6cdd1dull;
    h *= 0x100000001b3ull;
  }

  void u64(uint64_t v) {
    h ^= v;
    h *= 0x100000001b3ull;
  }
};

struct FdEval {
  double value = 0.0;
  uint64_t signature = 0;
};

struct GradCheckOptions {
  double eps = 1e-5;
  double tol = 1e-4;
  // Relative error denominator is max(|analytic|, |fd|, denom_floor).
  double denom_floor = 1e-2;
  // -1 checks every coordinate; otherwise a deterministic sample per tensor.
  int max_coords_per_tensor = -1;
  uint64_t coord_seed = 12345;
  // When a perturbed evaluation leaves the smooth piece (signature changes),
  // the step is shrunk by this factor, up to max_shrinks times.
  double shrink_factor = 8.0;
  int max_shrinks = 6;
};

struct ParamCheck {
  std::string name;
  double max_rel_err = 0.0;
  long long coords_checked = 0;
  long long unstable_coords = 0;  // no smooth window found at min eps
};

struct GradCheckReport {
  std::vector<ParamCheck> per_param;
  double max_rel_err = 0.0;
  double tol = 0.0;
  bool pass = false;

  const ParamCheck* worst() const {
    const ParamCheck* w = nullptr;
    for (const auto& p : per_param)
      if (!w || p.max_rel_err > w->max_rel_err) w = &p;
    return w;
  }
};

// Central-difference verification of hand-written backward passes.
// `eval` recomputes the scalar objective from the tensors referenced by
// `params`; `analytic` holds the gradients under test, keyed by param name.
inline GradCheckReport grad_check(
    const std::function<FdEval()>& eval,
    const std::vector<std::pair<std::string, Tensor*>>& params,
    const Gradients& analytic, const GradCheckOptions& opt = {}) {
  if (opt.eps < 1e-7 || opt.eps > 1e-3) {
    throw value_error("grad_check: eps " + std::to_string(opt.eps) +
                      " outside [1e-7, 1e-3]");
  }
  const FdEval base = eval();
  if (!std::isfinite(base.value)) {
    throw value_error("grad_check: objective is non-finite at the base point");
  }

  GradCheckReport report;
  report.tol = opt.tol;

  for (const auto& [name, tensor] : params) {
    const Tensor& grad = analytic.at(name);
    if (!grad.same_shape(*tensor)) {
      throw shape_error("grad_check: gradient shape " + shape_str(grad.shape()) +
                        " does not match parameter '" + name + "' " +
                        shape_str(tensor->shape()));
    }

    std::vector<long long> coords;
    const long long n = tensor->size();
    if (opt.max_coords_per_tensor < 0 || n <= opt.max_coords_per_tensor) {
      coords.resize(static_cast<size_t>(n));
      for (long long i = 0; i < n; ++i) coords[static_cast<size_t>(i)] = i;
    } else {
      uint64_t h = opt.coord_seed;
      for (char c : name) h = (h ^ static_cast<uint64_t>(c)) * 0x100000001b3ull;
      Rng rng(h);
      while (static_cast<int>(coords.size()) < opt.max_coords_per_tensor) {
        long long i = rng.uniform_int(0, static_cast<int>(n - 1));
        if (std::find(coords.begin(), coords.end(), i) == coords.end())
          coords.push_back(i);
      }
    }

    ParamCheck pc;
    pc.name = name;
    for (long long i : coords) {
      const double orig = (*tensor)[i];
      double eps = opt.eps;
      double fd = 0.0;
      bool stable = false;
      for (int attempt = 0; attempt <= opt.max_shrinks; ++attempt) {
        (*tensor)[i] = orig + eps;
        const FdEval plus = eval();
        (*tensor)[i] = orig - eps;
        const FdEval minus = eval();
        (*tensor)[i] = orig;
        if (!std::isfinite(plus.value) || !std::isfinite(minus.value)) {
          throw value_error("grad_check: objective non-finite while perturbing '" +
                            name + "'");
        }
        fd = (plus.value - minus.value) / (2.0 * eps);
        if (plus.signature == base.signature && minus.signature == base.signature) {
          stable = true;
          break;
        }
        eps /= opt.shrink_factor;
      }
      if (!stable) pc.unstable_coords++;
      const double a = grad[i];
      const double denom = std::max({opt.denom_floor, std::fabs(a), std::fabs(fd)});
      pc.max_rel_err = std::max(pc.max_rel_err, std::fabs(a - fd) / denom);
      pc.coords_checked++;
    }
    report.max_rel_err = std::max(report.max_rel_err, pc.max_rel_err);
    report.per_param.push_back(std::move(pc));
  }

  report.pass = report.max_rel_err <= opt.tol;
  return report;
}

// Convenience wrapper for smooth objectives with unnamed inputs.
inline GradCheckReport grad_check_simple(const std::function<double()>& f,
                                         std::vector<Tensor*> inputs,
                                         const std::vector<Tensor>& analytic,
                                         const GradCheckOptions& opt = {}) {
  Gradients g;
  std::vector<std::pair<std::string, Tensor*>> params;
  for (size_t i = 0; i < inputs.size(); ++i) {
    const std::string name = "input" + std::to_string(i);
    params.emplace_back(name, inputs[i]);
    g.accumulate(name, analytic[i]);
  }
  auto eval = [&f]() { return FdEval{f(), 0}; };
  return grad_check(eval, params, g, opt);
}

}  // namespace sisnet
