#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "sisnet/image_io.hpp"

namespace sisnet {

// ---------------------------------------------------------------------------
// Dataset manifest: per-sample raster paths, relative to the manifest file.
// ---------------------------------------------------------------------------

struct SampleFiles {
  std::string id;
  std::string rgb;          // P6 color image
  std::string depth;        // P5 8-bit depth
  std::string object_mask;  // P5 binary (>=128 foreground)
  std::string instances;    // P5 instance-index raster
};

struct DatasetManifest {
  std::filesystem::path root;
  bool depth_near_is_bright = true;
  std::vector<SampleFiles> samples;

  std::filesystem::path resolve(const std::string& rel) const { return root / rel; }

  static DatasetManifest load(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw value_error("cannot open manifest '" + path.string() + "'");
    nlohmann::json j;
    try {
      is >> j;
    } catch (const nlohmann::json::exception& e) {
      throw value_error("manifest '" + path.string() + "': " + e.what());
    }
    DatasetManifest m;
    m.root = path.parent_path();
    m.depth_near_is_bright = j.value("depth_near_is_bright", true);
    if (!j.contains("samples") || !j["samples"].is_array())
      throw value_error("manifest: missing 'samples' array");
    for (const auto& s : j["samples"]) {
      SampleFiles f;
      f.id = s.value("id", "");
      f.rgb = s.value("rgb", "");
      f.depth = s.value("depth", "");
      f.object_mask = s.value("object_mask", "");
      f.instances = s.value("instances", "");
      m.samples.push_back(std::move(f));
    }
    return m;
  }
};

// ---------------------------------------------------------------------------
// OTSU threshold
// ---------------------------------------------------------------------------

// Between-class variance maximizer over the 256-bin histogram. Class sums are
// accumulated in integers, so the objective is reproducible bit-for-bit;
// ties break to the lowest threshold. Pixels > t are foreground. A constant
// image returns its own value (empty foreground).
inline int otsu_threshold(const GrayImage& img) {
  if (img.px.empty()) throw value_error("otsu: empty image");
  std::array<long long, 256> hist{};
  for (uint8_t v : img.px) hist[v]++;

  int lo = 0, hi = 255;
  while (hist[static_cast<size_t>(lo)] == 0) ++lo;
  while (hist[static_cast<size_t>(hi)] == 0) --hi;
  if (lo == hi) return lo;  // constant image

  const long long total = static_cast<long long>(img.px.size());
  long long n0 = 0, s0 = 0, s_all = 0;
  for (int v = 0; v < 256; ++v) s_all += hist[static_cast<size_t>(v)] * v;

  int best_t = 0;
  double best_score = -1.0;
  for (int t = 0; t < 256; ++t) {
    n0 += hist[static_cast<size_t>(t)];
    s0 += hist[static_cast<size_t>(t)] * t;
    const long long n1 = total - n0;
    if (n0 == 0 || n1 == 0) continue;
    const long long s1 = s_all - s0;
    const long long d = s0 * n1 - s1 * n0;
    const double score = static_cast<double>(d) * static_cast<double>(d) /
                         (static_cast<double>(n0) * static_cast<double>(n1));
    if (score > best_score) {
      best_score = score;
      best_t = t;
    }
  }
  return best_t;
}

inline std::vector<uint8_t> binarize_above(const GrayImage& img, int threshold) {
  std::vector<uint8_t> fg(img.px.size());
  for (size_t i = 0; i < img.px.size(); ++i) fg[i] = img.px[i] > threshold ? 1 : 0;
  return fg;
}

// ---------------------------------------------------------------------------
// Consistency curves
// ---------------------------------------------------------------------------

struct ConsistencyCurve {
  std::array<double, 101> exceed_fraction{};  // fraction of samples with IoU >= tau
  double mean_iou = 0.0;
  int evaluated = 0;
  int skipped = 0;
};

namespace detail {

inline double iou_bytes(const std::vector<uint8_t>& a, const std::vector<uint8_t>& b) {
  long long inter = 0, uni = 0;
  for (size_t i = 0; i < a.size(); ++i) {
    inter += (a[i] && b[i]) ? 1 : 0;
    uni += (a[i] || b[i]) ? 1 : 0;
  }
  if (uni == 0) return 1.0;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

inline ConsistencyCurve curve_from_ious(const std::vector<double>& ious, int skipped) {
  ConsistencyCurve c;
  c.skipped = skipped;
  c.evaluated = static_cast<int>(ious.size());
  if (ious.empty()) return c;
  double s = 0.0;
  for (double v : ious) s += v;
  c.mean_iou = s / static_cast<double>(ious.size());
  for (int k = 0; k <= 100; ++k) {
    const double tau = k / 100.0;
    long long above = 0;
    for (double v : ious)
      if (v >= tau) ++above;
    c.exceed_fraction[static_cast<size_t>(k)] =
        static_cast<double>(above) / static_cast<double>(ious.size());
  }
  return c;
}

inline std::vector<uint8_t> object_fg(const GrayImage& img) {
  std::vector<uint8_t> fg(img.px.size());
  for (size_t i = 0; i < img.px.size(); ++i) fg[i] = img.px[i] >= 128 ? 1 : 0;
  return fg;
}

}  // namespace detail

// Depth maps are OTSU-binarized and oriented so that foreground means near;
// the per-sample IoU against the object mask is aggregated into a curve.
// Samples with unreadable rasters are skipped and counted.
inline ConsistencyCurve depth_saliency_consistency(const DatasetManifest& m) {
  std::vector<double> ious;
  int skipped = 0;
  for (const auto& s : m.samples) {
    try {
      GrayImage depth = read_pgm(m.resolve(s.depth).string());
      GrayImage object = read_pgm(m.resolve(s.object_mask).string());
      if (depth.h != object.h || depth.w != object.w)
        throw value_error("raster sizes differ for sample " + s.id);
      const int t = otsu_threshold(depth);
      std::vector<uint8_t> near = binarize_above(depth, t);
      if (!m.depth_near_is_bright) {
        for (auto& v : near) v = v ? 0 : 1;  // reversal: darker means nearer
      }
      ious.push_back(detail::iou_bytes(near, detail::object_fg(object)));
    } catch (const value_error&) {
      ++skipped;
    }
  }
  return detail::curve_from_ious(ious, skipped);
}

// IoU between the union of instance pixels and the object mask, per sample.
inline ConsistencyCurve object_instance_consistency(const DatasetManifest& m) {
  std::vector<double> ious;
  int skipped = 0;
  for (const auto& s : m.samples) {
    try {
      GrayImage inst = read_pgm(m.resolve(s.instances).string());
      GrayImage object = read_pgm(m.resolve(s.object_mask).string());
      if (inst.h != object.h || inst.w != object.w)
        throw value_error("raster sizes differ for sample " + s.id);
      std::vector<uint8_t> uni(inst.px.size());
      for (size_t i = 0; i < inst.px.size(); ++i) uni[i] = inst.px[i] > 0 ? 1 : 0;
      ious.push_back(detail::iou_bytes(uni, detail::object_fg(object)));
    } catch (const value_error&) {
      ++skipped;
    }
  }
  return detail::curve_from_ious(ious, skipped);
}

// ---------------------------------------------------------------------------
// Center bias and instance sizes
// ---------------------------------------------------------------------------

struct Histogram2D {
  int grid = 0;
  std::vector<double> mass;  // grid x grid, row-major, sums to 1

  double at(int r, int c) const { return mass[static_cast<size_t>(r) * grid + c]; }
};

// Bins instance centroids (pixel-center convention) into a grid x grid
// histogram normalized to unit mass.
inline Histogram2D center_bias(const DatasetManifest& m, int grid) {
  if (grid < 2) throw value_error("center_bias: grid must be >= 2");
  Histogram2D h;
  h.grid = grid;
  h.mass.assign(static_cast<size_t>(grid) * grid, 0.0);
  long long total = 0;
  for (const auto& s : m.samples) {
    GrayImage inst = read_pgm(m.resolve(s.instances).string());
    int max_id = 0;
    for (uint8_t v : inst.px) max_id = std::max(max_id, static_cast<int>(v));
    for (int k = 1; k <= max_id; ++k) {
      long long n = 0, sum_r = 0, sum_c = 0;
      for (int i = 0; i < inst.h; ++i)
        for (int j = 0; j < inst.w; ++j)
          if (inst.at(i, j) == k) {
            ++n;
            sum_r += i;
            sum_c += j;
          }
      if (n == 0) continue;
      const double v = (static_cast<double>(sum_r) / n + 0.5) / inst.h;
      const double u = (static_cast<double>(sum_c) / n + 0.5) / inst.w;
      int br = std::min(grid - 1, static_cast<int>(v * grid));
      int bc = std::min(grid - 1, static_cast<int>(u * grid));
      h.mass[static_cast<size_t>(br) * grid + bc] += 1.0;
      ++total;
    }
  }
  if (total > 0)
    for (double& v : h.mass) v /= static_cast<double>(total);
  return h;
}

// Per-instance pixel share of the image, in (0, 1].
inline std::vector<double> instance_size_ratios(const DatasetManifest& m) {
  std::vector<double> ratios;
  for (const auto& s : m.samples) {
    GrayImage inst = read_pgm(m.resolve(s.instances).string());
    const double total = static_cast<double>(inst.px.size());
    int max_id = 0;
    for (uint8_t v : inst.px) max_id = std::max(max_id, static_cast<int>(v));
    std::vector<long long> counts(static_cast<size_t>(max_id) + 1, 0);
    for (uint8_t v : inst.px) counts[v]++;
    for (int k = 1; k <= max_id; ++k)
      if (counts[static_cast<size_t>(k)] > 0)
        ratios.push_back(static_cast<double>(counts[static_cast<size_t>(k)]) / total);
  }
  return ratios;
}

// Uniform bins over (0, 1]; histogram mass equals the instance count.
inline std::vector<long long> instance_size_histogram(const DatasetManifest& m, int bins) {
  if (bins < 1) throw value_error("instance_size_histogram: bins must be >= 1");
  std::vector<long long> hist(static_cast<size_t>(bins), 0);
  for (double r : instance_size_ratios(m)) {
    int b = std::min(bins - 1, static_cast<int>(r * bins));
    hist[static_cast<size_t>(b)]++;
  }
  return hist;
}

// Center-bias heatmap as an 8-bit raster, peak-normalized.
inline GrayImage histogram_to_heatmap(const Histogram2D& h) {
  GrayImage img;
  img.h = h.grid;
  img.w = h.grid;
  img.px.assign(static_cast<size_t>(h.grid) * h.grid, 0);
  double mx = 0.0;
  for (double v : h.mass) mx = std::max(mx, v);
  if (mx <= 0.0) return img;
  for (size_t i = 0; i < h.mass.size(); ++i)
    img.px[i] = static_cast<uint8_t>(std::lround(255.0 * h.mass[i] / mx));
  return img;
}

}  // namespace sisnet
