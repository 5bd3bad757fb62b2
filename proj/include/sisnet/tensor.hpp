#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <istream>
#include <map>
#include <numeric>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace sisnet {

// Data/contract violations (bad shapes, non-finite values, malformed files).
class shape_error : public std::runtime_error {
 public:
  explicit shape_error(const std::string& msg) : std::runtime_error(msg) {}
};

class value_error : public std::runtime_error {
 public:
  explicit value_error(const std::string& msg) : std::runtime_error(msg) {}
};

inline std::string shape_str(const std::vector<int>& shape) {
  std::string s = "[";
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ' ';
    s += std::to_string(shape[i]);
  }
  s += ']';
  return s;
}

// ---------------------------------------------------------------------------
// Multiply-accumulate counter. Only matmul/conv/linear-style contractions
// record; additions, activations and interpolation do not. One counter is
// active per thread at a time, installed with MacScope.
// ---------------------------------------------------------------------------

struct MacCounter {
  long long macs = 0;
};

namespace detail {
inline thread_local MacCounter* mac_sink = nullptr;
}

inline void count_macs(long long n) {
  if (detail::mac_sink) detail::mac_sink->macs += n;
}

class MacScope {
 public:
  explicit MacScope(MacCounter& counter) : prev_(detail::mac_sink) {
    detail::mac_sink = &counter;
  }
  ~MacScope() { detail::mac_sink = prev_; }
  MacScope(const MacScope&) = delete;
  MacScope& operator=(const MacScope&) = delete;

 private:
  MacCounter* prev_;
};

// ---------------------------------------------------------------------------
// Tensor: dense n-d array of doubles, row-major, immutable by convention
// (ops return new tensors). Slices copy; there are no strided views.
// ---------------------------------------------------------------------------

class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(std::vector<int> shape)
      : shape_(std::move(shape)), data_(checked_size(shape_), 0.0) {}

  Tensor(std::vector<int> shape, std::vector<double> data)
      : shape_(std::move(shape)), data_(std::move(data)) {
    if (static_cast<long long>(data_.size()) != checked_size(shape_)) {
      throw shape_error("tensor: data length " + std::to_string(data_.size()) +
                        " does not match shape " + shape_str(shape_));
    }
    check_finite();
  }

  static Tensor full(std::vector<int> shape, double v) {
    Tensor t(std::move(shape));
    std::fill(t.data_.begin(), t.data_.end(), v);
    t.check_finite();
    return t;
  }

  static Tensor zeros_like(const Tensor& other) { return Tensor(other.shape_); }

  const std::vector<int>& shape() const { return shape_; }
  int rank() const { return static_cast<int>(shape_.size()); }
  int dim(int axis) const { return shape_[static_cast<size_t>(axis)]; }
  long long size() const { return static_cast<long long>(data_.size()); }
  bool empty() const { return data_.empty(); }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }

  double& operator[](long long i) { return data_[static_cast<size_t>(i)]; }
  const double& operator[](long long i) const { return data_[static_cast<size_t>(i)]; }

  double& operator()(int i) { return data_[static_cast<size_t>(i)]; }
  const double& operator()(int i) const { return data_[static_cast<size_t>(i)]; }

  double& operator()(int i, int j) {
    return data_[static_cast<size_t>(i) * shape_[1] + j];
  }
  const double& operator()(int i, int j) const {
    return data_[static_cast<size_t>(i) * shape_[1] + j];
  }

  double& operator()(int i, int j, int k) {
    return data_[(static_cast<size_t>(i) * shape_[1] + j) * shape_[2] + k];
  }
  const double& operator()(int i, int j, int k) const {
    return data_[(static_cast<size_t>(i) * shape_[1] + j) * shape_[2] + k];
  }

  double& operator()(int i, int j, int k, int l) {
    return data_[((static_cast<size_t>(i) * shape_[1] + j) * shape_[2] + k) *
                     shape_[3] +
                 l];
  }
  const double& operator()(int i, int j, int k, int l) const {
    return data_[((static_cast<size_t>(i) * shape_[1] + j) * shape_[2] + k) *
                     shape_[3] +
                 l];
  }

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

  // Throws value_error on NaN/Inf. Ops call this on their outputs.
  void check_finite() const {
#ifndef SISNET_NO_FINITE_CHECK
    for (double v : data_) {
      if (!std::isfinite(v)) {
        throw value_error("tensor holds a non-finite value (shape " +
                          shape_str(shape_) + ")");
      }
    }
#endif
  }

 private:
  static long long checked_size(const std::vector<int>& shape) {
    if (shape.empty()) throw shape_error("tensor: rank must be >= 1");
    long long n = 1;
    for (int d : shape) {
      if (d < 1) throw shape_error("tensor: dimension sizes must be >= 1, got " + shape_str(shape));
      n *= d;
    }
    return n;
  }

  std::vector<int> shape_;
  std::vector<double> data_;
};

// Map from parameter name to its gradient, accumulated over backward calls.
struct Gradients {
  std::map<std::string, Tensor> grads;

  void accumulate(const std::string& name, const Tensor& g) {
    auto it = grads.find(name);
    if (it == grads.end()) {
      grads.emplace(name, g);
      return;
    }
    if (!it->second.same_shape(g)) {
      throw shape_error("gradient shape mismatch for '" + name + "': " +
                        shape_str(it->second.shape()) + " vs " + shape_str(g.shape()));
    }
    double* dst = it->second.data();
    const double* src = g.data();
    for (long long i = 0; i < g.size(); ++i) dst[i] += src[i];
  }

  bool has(const std::string& name) const { return grads.count(name) > 0; }

  const Tensor& at(const std::string& name) const {
    auto it = grads.find(name);
    if (it == grads.end()) throw value_error("no gradient recorded for '" + name + "'");
    return it->second;
  }
};

// ---------------------------------------------------------------------------
// Elementwise / shape ops
// ---------------------------------------------------------------------------

namespace detail {
inline void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (!a.same_shape(b)) {
    throw shape_error(std::string(op) + ": shape mismatch " + shape_str(a.shape()) +
                      " vs " + shape_str(b.shape()));
  }
}
}  // namespace detail

inline Tensor add(const Tensor& a, const Tensor& b) {
  detail::require_same_shape(a, b, "add");
  Tensor out(a.shape());
  const double* pa = a.data();
  const double* pb = b.data();
  double* po = out.data();
  for (long long i = 0; i < a.size(); ++i) po[i] = pa[i] + pb[i];
  out.check_finite();
  return out;
}

inline Tensor sub(const Tensor& a, const Tensor& b) {
  detail::require_same_shape(a, b, "sub");
  Tensor out(a.shape());
  for (long long i = 0; i < a.size(); ++i) out[i] = a[i] - b[i];
  out.check_finite();
  return out;
}

inline Tensor mul(const Tensor& a, const Tensor& b) {
  detail::require_same_shape(a, b, "mul");
  Tensor out(a.shape());
  for (long long i = 0; i < a.size(); ++i) out[i] = a[i] * b[i];
  out.check_finite();
  return out;
}

inline Tensor scale(const Tensor& a, double s) {
  Tensor out(a.shape());
  for (long long i = 0; i < a.size(); ++i) out[i] = a[i] * s;
  out.check_finite();
  return out;
}

inline void add_inplace(Tensor& dst, const Tensor& src) {
  detail::require_same_shape(dst, src, "add_inplace");
  double* d = dst.data();
  const double* s = src.data();
  for (long long i = 0; i < dst.size(); ++i) d[i] += s[i];
}

inline double sum(const Tensor& a) {
  double s = 0.0;
  for (long long i = 0; i < a.size(); ++i) s += a[i];
  return s;
}

inline double mean(const Tensor& a) { return sum(a) / static_cast<double>(a.size()); }

inline double dot(const Tensor& a, const Tensor& b) {
  detail::require_same_shape(a, b, "dot");
  double s = 0.0;
  for (long long i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline Tensor sigmoid(const Tensor& a) {
  Tensor out(a.shape());
  for (long long i = 0; i < a.size(); ++i) out[i] = 1.0 / (1.0 + std::exp(-a[i]));
  out.check_finite();
  return out;
}

// y = sigmoid(x); gradient wrt x given upstream gy.
inline Tensor sigmoid_backward(const Tensor& y, const Tensor& gy) {
  detail::require_same_shape(y, gy, "sigmoid_backward");
  Tensor out(y.shape());
  for (long long i = 0; i < y.size(); ++i) out[i] = gy[i] * y[i] * (1.0 - y[i]);
  return out;
}

inline Tensor relu(const Tensor& a) {
  Tensor out(a.shape());
  for (long long i = 0; i < a.size(); ++i) out[i] = a[i] > 0.0 ? a[i] : 0.0;
  return out;
}

inline Tensor relu_backward(const Tensor& x, const Tensor& gy) {
  detail::require_same_shape(x, gy, "relu_backward");
  Tensor out(x.shape());
  for (long long i = 0; i < x.size(); ++i) out[i] = x[i] > 0.0 ? gy[i] : 0.0;
  return out;
}

inline Tensor reshape(const Tensor& a, std::vector<int> new_shape) {
  long long n = 1;
  for (int d : new_shape) n *= d;
  if (n != a.size()) {
    throw shape_error("reshape: cannot view " + shape_str(a.shape()) + " as " +
                      shape_str(new_shape));
  }
  Tensor out(std::move(new_shape));
  std::copy(a.data(), a.data() + a.size(), out.data());
  return out;
}

inline Tensor transpose(const Tensor& a) {
  if (a.rank() != 2) throw shape_error("transpose: expects a rank-2 tensor, got " + shape_str(a.shape()));
  const int r = a.dim(0), c = a.dim(1);
  Tensor out({c, r});
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) out(j, i) = a(i, j);
  return out;
}

inline Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2) {
    throw shape_error("matmul: expects rank-2 tensors, got " + shape_str(a.shape()) +
                      " and " + shape_str(b.shape()));
  }
  if (a.dim(1) != b.dim(0)) {
    throw shape_error("matmul: inner dimensions disagree: " + shape_str(a.shape()) +
                      " vs " + shape_str(b.shape()));
  }
  const int m = a.dim(0), k = a.dim(1), n = b.dim(1);
  Tensor out({m, n});
  const double* pa = a.data();
  const double* pb = b.data();
  double* po = out.data();
  for (int i = 0; i < m; ++i) {
    double* orow = po + static_cast<size_t>(i) * n;
    for (int t = 0; t < k; ++t) {
      const double av = pa[static_cast<size_t>(i) * k + t];
      const double* brow = pb + static_cast<size_t>(t) * n;
      for (int j = 0; j < n; ++j) orow[j] += av * brow[j];
    }
  }
  count_macs(static_cast<long long>(m) * k * n);
  out.check_finite();
  return out;
}

// c = a . b ; accumulates da, db (either may be null).
inline void matmul_backward(const Tensor& a, const Tensor& b, const Tensor& gc,
                            Tensor* ga, Tensor* gb) {
  if (ga) add_inplace(*ga, matmul(gc, transpose(b)));
  if (gb) add_inplace(*gb, matmul(transpose(a), gc));
}

inline Tensor concat(const Tensor& a, const Tensor& b, int axis) {
  if (a.rank() != b.rank()) {
    throw shape_error("concat: rank mismatch " + shape_str(a.shape()) + " vs " +
                      shape_str(b.shape()));
  }
  if (axis < 0 || axis >= a.rank()) {
    throw shape_error("concat: axis " + std::to_string(axis) + " out of range for " +
                      shape_str(a.shape()));
  }
  for (int d = 0; d < a.rank(); ++d) {
    if (d != axis && a.dim(d) != b.dim(d)) {
      throw shape_error("concat: shapes differ off-axis: " + shape_str(a.shape()) +
                        " vs " + shape_str(b.shape()));
    }
  }
  std::vector<int> out_shape = a.shape();
  out_shape[static_cast<size_t>(axis)] += b.dim(axis);
  Tensor out(out_shape);

  long long outer = 1;
  for (int d = 0; d < axis; ++d) outer *= a.dim(d);
  long long inner = 1;
  for (int d = axis + 1; d < a.rank(); ++d) inner *= a.dim(d);
  const long long a_span = a.dim(axis) * inner;
  const long long b_span = b.dim(axis) * inner;
  for (long long o = 0; o < outer; ++o) {
    std::copy(a.data() + o * a_span, a.data() + (o + 1) * a_span,
              out.data() + o * (a_span + b_span));
    std::copy(b.data() + o * b_span, b.data() + (o + 1) * b_span,
              out.data() + o * (a_span + b_span) + a_span);
  }
  return out;
}

inline Tensor slice(const Tensor& a, int axis, int start, int len) {
  if (axis < 0 || axis >= a.rank()) {
    throw shape_error("slice: axis " + std::to_string(axis) + " out of range for " +
                      shape_str(a.shape()));
  }
  if (start < 0 || len < 1 || start + len > a.dim(axis)) {
    throw shape_error("slice: range [" + std::to_string(start) + ", " +
                      std::to_string(start + len) + ") invalid for axis " +
                      std::to_string(axis) + " of " + shape_str(a.shape()));
  }
  std::vector<int> out_shape = a.shape();
  out_shape[static_cast<size_t>(axis)] = len;
  Tensor out(out_shape);
  long long outer = 1;
  for (int d = 0; d < axis; ++d) outer *= a.dim(d);
  long long inner = 1;
  for (int d = axis + 1; d < a.rank(); ++d) inner *= a.dim(d);
  const long long in_span = a.dim(axis) * inner;
  const long long out_span = static_cast<long long>(len) * inner;
  for (long long o = 0; o < outer; ++o) {
    std::copy(a.data() + o * in_span + start * inner,
              a.data() + o * in_span + (start + len) * inner,
              out.data() + o * out_span);
  }
  return out;
}

inline Tensor softmax(const Tensor& a, int axis) {
  if (axis < 0 || axis >= a.rank()) {
    throw shape_error("softmax: axis " + std::to_string(axis) + " out of range for " +
                      shape_str(a.shape()));
  }
  Tensor out(a.shape());
  long long outer = 1;
  for (int d = 0; d < axis; ++d) outer *= a.dim(d);
  long long inner = 1;
  for (int d = axis + 1; d < a.rank(); ++d) inner *= a.dim(d);
  const int n = a.dim(axis);
  for (long long o = 0; o < outer; ++o) {
    for (long long in = 0; in < inner; ++in) {
      const double* base = a.data() + o * n * inner + in;
      double* obase = out.data() + o * n * inner + in;
      double mx = base[0];
      for (int t = 1; t < n; ++t) mx = std::max(mx, base[t * inner]);
      double z = 0.0;
      for (int t = 0; t < n; ++t) z += std::exp(base[t * inner] - mx);
      for (int t = 0; t < n; ++t) obase[t * inner] = std::exp(base[t * inner] - mx) / z;
    }
  }
  out.check_finite();
  return out;
}

// y = softmax(x, axis); gradient wrt x.
inline Tensor softmax_backward(const Tensor& y, const Tensor& gy, int axis) {
  detail::require_same_shape(y, gy, "softmax_backward");
  Tensor out(y.shape());
  long long outer = 1;
  for (int d = 0; d < axis; ++d) outer *= y.dim(d);
  long long inner = 1;
  for (int d = axis + 1; d < y.rank(); ++d) inner *= y.dim(d);
  const int n = y.dim(axis);
  for (long long o = 0; o < outer; ++o) {
    for (long long in = 0; in < inner; ++in) {
      const double* yb = y.data() + o * n * inner + in;
      const double* gb = gy.data() + o * n * inner + in;
      double* ob = out.data() + o * n * inner + in;
      double acc = 0.0;
      for (int t = 0; t < n; ++t) acc += gb[t * inner] * yb[t * inner];
      for (int t = 0; t < n; ++t) ob[t * inner] = yb[t * inner] * (gb[t * inner] - acc);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Text serialization: first line is the space-separated shape, following
// lines hold the row-major values (one innermost row per line).
// ---------------------------------------------------------------------------

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline void write_tensor_text(std::ostream& os, const Tensor& t) {
  for (int d = 0; d < t.rank(); ++d) {
    if (d) os << ' ';
    os << t.dim(d);
  }
  os << '\n';
  const int row = t.dim(t.rank() - 1);
  for (long long i = 0; i < t.size(); i += row) {
    for (int j = 0; j < row; ++j) {
      if (j) os << ' ';
      os << format_double(t[i + j]);
    }
    os << '\n';
  }
}

inline void write_tensor_text(const std::string& path, const Tensor& t) {
  std::ofstream os(path);
  if (!os) throw value_error("cannot open '" + path + "' for writing");
  write_tensor_text(os, t);
}

inline Tensor read_tensor_text(std::istream& is) {
  std::string header;
  if (!std::getline(is, header)) throw value_error("tensor text: missing shape line");
  std::istringstream hs(header);
  std::vector<int> shape;
  int d;
  while (hs >> d) shape.push_back(d);
  if (shape.empty()) throw value_error("tensor text: empty shape line");
  long long n = 1;
  for (int v : shape) {
    if (v < 1) throw value_error("tensor text: invalid dimension in shape line");
    n *= v;
  }
  std::vector<double> data(static_cast<size_t>(n));
  for (long long i = 0; i < n; ++i) {
    if (!(is >> data[static_cast<size_t>(i)])) {
      throw value_error("tensor text: expected " + std::to_string(n) +
                        " values, got " + std::to_string(i));
    }
  }
  return Tensor(std::move(shape), std::move(data));
}

inline Tensor read_tensor_text(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw value_error("cannot open '" + path + "'");
  return read_tensor_text(is);
}

}  // namespace sisnet
