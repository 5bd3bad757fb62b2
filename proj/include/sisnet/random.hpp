#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "sisnet/tensor.hpp"

namespace sisnet {

// Seeded generator with hand-rolled value mappings so that fixture bytes do
// not depend on the standard library's distribution implementations.
class Rng {
 public:
  explicit Rng(uint64_t seed) : eng_(seed) {}

  uint64_t next() { return eng_(); }

  // Uniform in [0, 1).
  double uniform01() {
    return static_cast<double>(eng_() >> 11) * (1.0 / 9007199254740992.0);
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // Inclusive bounds.
  int uniform_int(int lo, int hi) {
    const uint64_t span = static_cast<uint64_t>(hi - lo) + 1;
    return lo + static_cast<int>(
                    (static_cast<unsigned __int128>(eng_()) * span) >> 64);
  }

  double normal(double mu = 0.0, double sigma = 1.0) {
    if (has_spare_) {
      has_spare_ = false;
      return mu + sigma * spare_;
    }
    double u1 = uniform01();
    double u2 = uniform01();
    while (u1 <= 1e-300) u1 = uniform01();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return mu + sigma * r * std::cos(a);
  }

  Rng split() { return Rng(eng_()); }

  Tensor uniform_tensor(std::vector<int> shape, double lo, double hi) {
    Tensor t(std::move(shape));
    for (long long i = 0; i < t.size(); ++i) t[i] = uniform(lo, hi);
    return t;
  }

  Tensor normal_tensor(std::vector<int> shape, double mu = 0.0, double sigma = 1.0) {
    Tensor t(std::move(shape));
    for (long long i = 0; i < t.size(); ++i) t[i] = normal(mu, sigma);
    return t;
  }

 private:
  std::mt19937_64 eng_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace sisnet
