#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "scalepoison/error.hpp"

namespace scalepoison {

/// Row-major, channel-interleaved 8-bit raster with 1 or 3 channels.
struct Image {
  int height = 0;
  int width = 0;
  int channels = 0;
  std::vector<std::uint8_t> data;

  Image() = default;
  Image(int h, int w, int c, std::uint8_t fill = 0) : height(h), width(w), channels(c) {
    if (h < 0 || w < 0 || (c != 1 && c != 3)) {
      throw Error(Errc::invalid_argument, "image needs non-negative dims and 1 or 3 channels");
    }
    data.assign(static_cast<std::size_t>(h) * w * c, fill);
  }
  Image(int h, int w, int c, std::vector<std::uint8_t> samples) : Image(h, w, c) {
    if (samples.size() != data.size()) {
      throw Error(Errc::dimension_mismatch, "sample count does not match dimensions");
    }
    data = std::move(samples);
  }

  std::size_t pixel_count() const noexcept { return static_cast<std::size_t>(height) * width; }
  bool empty() const noexcept { return data.empty(); }

  std::uint8_t& at(int r, int c, int ch = 0) {
    return data[(static_cast<std::size_t>(r) * width + c) * channels + ch];
  }
  std::uint8_t at(int r, int c, int ch = 0) const {
    return data[(static_cast<std::size_t>(r) * width + c) * channels + ch];
  }

  bool same_shape(const Image& o) const noexcept {
    return height == o.height && width == o.width && channels == o.channels;
  }

  friend bool operator==(const Image&, const Image&) = default;
};

struct GrayImage {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> data;

  GrayImage() = default;
  GrayImage(int h, int w, std::uint8_t fill = 0)
      : height(h), width(w), data(static_cast<std::size_t>(h) * w, fill) {}

  std::uint8_t at(int r, int c) const { return data[static_cast<std::size_t>(r) * width + c]; }
  std::uint8_t& at(int r, int c) { return data[static_cast<std::size_t>(r) * width + c]; }

  friend bool operator==(const GrayImage&, const GrayImage&) = default;
};

/// Pixel counts per 8-bit intensity.
struct HistogramVector {
  std::array<std::uint64_t, 256> counts{};

  std::uint64_t total() const noexcept {
    std::uint64_t s = 0;
    for (auto c : counts) s += c;
    return s;
  }
};

/// Round-half-up onto [0, 255]; the single quantization rule used everywhere.
inline std::uint8_t quantize(double v) noexcept {
  if (!(v > 0.0)) return 0;  // also maps NaN to 0
  if (v >= 255.0) return 255;
  return static_cast<std::uint8_t>(std::floor(v + 0.5));
}

/// BT.601 luma with round-half-up, computed in integers so it is exact.
inline GrayImage to_grayscale(const Image& img) {
  GrayImage out(img.height, img.width);
  if (img.channels == 1) {
    out.data = img.data;
    return out;
  }
  const std::size_t n = img.pixel_count();
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint32_t r = img.data[3 * i];
    const std::uint32_t g = img.data[3 * i + 1];
    const std::uint32_t b = img.data[3 * i + 2];
    out.data[i] = static_cast<std::uint8_t>((299 * r + 587 * g + 114 * b + 500) / 1000);
  }
  return out;
}

inline Image to_image(const GrayImage& gray) {
  return Image(gray.height, gray.width, 1, gray.data);
}

inline HistogramVector intensity_histogram(const GrayImage& img) {
  HistogramVector h;
  for (auto v : img.data) ++h.counts[v];
  return h;
}

/// Single channel of an image as a real-valued plane.
struct Plane {
  int height = 0;
  int width = 0;
  std::vector<double> values;

  Plane() = default;
  Plane(int h, int w, double fill = 0.0)
      : height(h), width(w), values(static_cast<std::size_t>(h) * w, fill) {}

  double& at(int r, int c) { return values[static_cast<std::size_t>(r) * width + c]; }
  double at(int r, int c) const { return values[static_cast<std::size_t>(r) * width + c]; }
};

inline Plane extract_plane(const Image& img, int ch) {
  Plane p(img.height, img.width);
  const std::size_t n = img.pixel_count();
  for (std::size_t i = 0; i < n; ++i) p.values[i] = img.data[i * img.channels + ch];
  return p;
}

inline void store_plane(const Plane& p, Image& img, int ch) {
  const std::size_t n = img.pixel_count();
  for (std::size_t i = 0; i < n; ++i) img.data[i * img.channels + ch] = quantize(p.values[i]);
}

/// Peak signal-to-noise ratio in dB; +inf for identical images.
inline double psnr(const Image& a, const Image& b) {
  if (!a.same_shape(b)) throw Error(Errc::dimension_mismatch, "psnr needs equal shapes");
  if (a.data.empty()) return INFINITY;
  double se = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    const double d = double(a.data[i]) - double(b.data[i]);
    se += d * d;
  }
  if (se == 0.0) return INFINITY;
  const double mse = se / double(a.data.size());
  return 10.0 * std::log10(255.0 * 255.0 / mse);
}

inline int max_abs_difference(const Image& a, const Image& b) {
  if (!a.same_shape(b)) throw Error(Errc::dimension_mismatch, "difference needs equal shapes");
  int m = 0;
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    const int d = std::abs(int(a.data[i]) - int(b.data[i]));
    if (d > m) m = d;
  }
  return m;
}

inline Image rotate180(const Image& img) {
  Image out(img.height, img.width, img.channels);
  for (int r = 0; r < img.height; ++r)
    for (int c = 0; c < img.width; ++c)
      for (int ch = 0; ch < img.channels; ++ch)
        out.at(img.height - 1 - r, img.width - 1 - c, ch) = img.at(r, c, ch);
  return out;
}

}  // namespace scalepoison
