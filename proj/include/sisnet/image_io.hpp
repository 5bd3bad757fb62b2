#pragma once

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "sisnet/tensor.hpp"

namespace sisnet {

struct GrayImage {
  int h = 0, w = 0;
  std::vector<uint8_t> px;  // row-major

  uint8_t at(int i, int j) const { return px[static_cast<size_t>(i) * w + j]; }
  uint8_t& at(int i, int j) { return px[static_cast<size_t>(i) * w + j]; }
};

struct RgbImage {
  int h = 0, w = 0;
  std::vector<uint8_t> px;  // row-major, 3 bytes per pixel

  uint8_t at(int i, int j, int c) const {
    return px[(static_cast<size_t>(i) * w + j) * 3 + c];
  }
  uint8_t& at(int i, int j, int c) {
    return px[(static_cast<size_t>(i) * w + j) * 3 + c];
  }
};

namespace detail {

inline int read_pnm_token(std::istream& is) {
  // Skips whitespace and '#' comment lines.
  int c = is.get();
  while (c != EOF) {
    if (c == '#') {
      while (c != EOF && c != '\n') c = is.get();
    } else if (!std::isspace(c)) {
      break;
    }
    c = is.get();
  }
  if (c == EOF) throw value_error("pnm: truncated header");
  int value = 0;
  bool any = false;
  while (c != EOF && std::isdigit(c)) {
    value = value * 10 + (c - '0');
    any = true;
    c = is.get();
  }
  if (!any) throw value_error("pnm: malformed header token");
  return value;
}

inline void read_pnm_header(std::istream& is, const char* magic, int& w, int& h) {
  char m0 = static_cast<char>(is.get());
  char m1 = static_cast<char>(is.get());
  if (m0 != magic[0] || m1 != magic[1])
    throw value_error(std::string("pnm: expected ") + magic + " magic");
  w = read_pnm_token(is);
  h = read_pnm_token(is);
  const int maxval = read_pnm_token(is);
  if (maxval != 255) throw value_error("pnm: only maxval 255 is supported");
  if (w < 1 || h < 1) throw value_error("pnm: invalid dimensions");
}

}  // namespace detail

inline GrayImage read_pgm(std::istream& is) {
  GrayImage img;
  detail::read_pnm_header(is, "P5", img.w, img.h);
  img.px.resize(static_cast<size_t>(img.w) * img.h);
  is.read(reinterpret_cast<char*>(img.px.data()), static_cast<std::streamsize>(img.px.size()));
  if (is.gcount() != static_cast<std::streamsize>(img.px.size()))
    throw value_error("pgm: truncated pixel data");
  return img;
}

inline GrayImage read_pgm(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw value_error("cannot open '" + path + "'");
  return read_pgm(is);
}

inline void write_pgm(std::ostream& os, const GrayImage& img) {
  os << "P5\n" << img.w << ' ' << img.h << "\n255\n";
  os.write(reinterpret_cast<const char*>(img.px.data()),
           static_cast<std::streamsize>(img.px.size()));
}

inline void write_pgm(const std::string& path, const GrayImage& img) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw value_error("cannot open '" + path + "' for writing");
  write_pgm(os, img);
}

inline RgbImage read_ppm(std::istream& is) {
  RgbImage img;
  detail::read_pnm_header(is, "P6", img.w, img.h);
  img.px.resize(static_cast<size_t>(img.w) * img.h * 3);
  is.read(reinterpret_cast<char*>(img.px.data()), static_cast<std::streamsize>(img.px.size()));
  if (is.gcount() != static_cast<std::streamsize>(img.px.size()))
    throw value_error("ppm: truncated pixel data");
  return img;
}

inline RgbImage read_ppm(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw value_error("cannot open '" + path + "'");
  return read_ppm(is);
}

inline void write_ppm(std::ostream& os, const RgbImage& img) {
  os << "P6\n" << img.w << ' ' << img.h << "\n255\n";
  os.write(reinterpret_cast<const char*>(img.px.data()),
           static_cast<std::streamsize>(img.px.size()));
}

inline void write_ppm(const std::string& path, const RgbImage& img) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw value_error("cannot open '" + path + "' for writing");
  write_ppm(os, img);
}

// --- conversions -----------------------------------------------------------

inline Tensor rgb_to_tensor(const RgbImage& img) {
  Tensor t({img.h, img.w, 3});
  for (int i = 0; i < img.h; ++i)
    for (int j = 0; j < img.w; ++j)
      for (int c = 0; c < 3; ++c) t(i, j, c) = img.at(i, j, c) / 255.0;
  return t;
}

inline Tensor gray_to_tensor(const GrayImage& img) {
  Tensor t({img.h, img.w, 1});
  for (int i = 0; i < img.h; ++i)
    for (int j = 0; j < img.w; ++j) t(i, j, 0) = img.at(i, j) / 255.0;
  return t;
}

// Soft mask in [0, 1] to 8-bit grayscale, rounded.
inline GrayImage mask_to_gray(const Tensor& mask) {
  GrayImage img;
  img.h = mask.dim(0);
  img.w = mask.dim(1);
  img.px.resize(static_cast<size_t>(img.h) * img.w);
  for (int i = 0; i < img.h; ++i)
    for (int j = 0; j < img.w; ++j) {
      double v = mask(i, j);
      v = std::min(1.0, std::max(0.0, v));
      img.at(i, j) = static_cast<uint8_t>(std::lround(v * 255.0));
    }
  return img;
}

// 8-bit mask raster to binary tensor; >= 128 is foreground (the 0.5 cut).
inline Tensor gray_to_binary_mask(const GrayImage& img) {
  Tensor t({img.h, img.w});
  for (int i = 0; i < img.h; ++i)
    for (int j = 0; j < img.w; ++j) t(i, j) = img.at(i, j) >= 128 ? 1.0 : 0.0;
  return t;
}

// Instance-index raster (pixel value k = instance k, 0 = background) to a
// list of binary masks. Ids must be contiguous from 1 and nonempty.
inline std::vector<Tensor> instances_from_gray(const GrayImage& img) {
  int max_id = 0;
  for (uint8_t v : img.px) max_id = std::max(max_id, static_cast<int>(v));
  std::vector<Tensor> masks;
  std::vector<long long> counts(static_cast<size_t>(max_id) + 1, 0);
  for (uint8_t v : img.px) counts[v]++;
  for (int k = 1; k <= max_id; ++k) {
    if (counts[static_cast<size_t>(k)] == 0)
      throw value_error("instance raster: ids not contiguous (instance " +
                        std::to_string(k) + " is empty)");
    Tensor m({img.h, img.w});
    for (int i = 0; i < img.h; ++i)
      for (int j = 0; j < img.w; ++j)
        if (img.at(i, j) == k) m(i, j) = 1.0;
    masks.push_back(std::move(m));
  }
  return masks;
}

}  // namespace sisnet
