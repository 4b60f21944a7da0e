#pragma once

// Interpolation kernels and two views of the same resampling operator: a
// direct separable scaler and the dense coefficient matrices L (vertical)
// and R (horizontal) with scale(X) = L * X * R^T per channel.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "scalepoison/error.hpp"
#include "scalepoison/imaging.hpp"

namespace scalepoison {

enum class KernelType { nearest, bilinear, bicubic, lanczos };

struct Kernel {
  KernelType type = KernelType::bilinear;

  static constexpr int lanczos_window = 4;

  double support_radius() const noexcept {
    switch (type) {
      case KernelType::nearest: return 0.5;
      case KernelType::bilinear: return 1.0;
      case KernelType::bicubic: return 2.0;
      case KernelType::lanczos: return lanczos_window;
    }
    return 1.0;
  }

  friend bool operator==(const Kernel&, const Kernel&) = default;
};

inline constexpr Kernel nearest_kernel{KernelType::nearest};
inline constexpr Kernel bilinear_kernel{KernelType::bilinear};
inline constexpr Kernel bicubic_kernel{KernelType::bicubic};
inline constexpr Kernel lanczos_kernel{KernelType::lanczos};

inline std::string to_string(const Kernel& k) {
  switch (k.type) {
    case KernelType::nearest: return "nearest";
    case KernelType::bilinear: return "bilinear";
    case KernelType::bicubic: return "bicubic";
    case KernelType::lanczos: return "lanczos";
  }
  return "unknown";
}

inline std::optional<Kernel> parse_kernel(std::string_view name) {
  if (name == "nearest") return nearest_kernel;
  if (name == "bilinear") return bilinear_kernel;
  if (name == "bicubic") return bicubic_kernel;
  if (name == "lanczos") return lanczos_kernel;
  return std::nullopt;
}

struct Tap {
  int index;
  double weight;
};

/// Sparse form of one axis of the operator: for each destination index the
/// contributing source indices (ascending, unique) and their weights.
using TapTable = std::vector<std::vector<Tap>>;

namespace detail {

inline long floor_div(long a, long b) {
  long q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
  return q;
}

inline double cubic_weight(double d) {
  // Catmull-Rom, a = -0.5
  constexpr double a = -0.5;
  d = std::abs(d);
  if (d <= 1.0) return ((a + 2.0) * d - (a + 3.0)) * d * d + 1.0;
  if (d < 2.0) return ((a * d - 5.0 * a) * d + 8.0 * a) * d - 4.0 * a;
  return 0.0;
}

inline double sinc(double x) {
  if (x == 0.0) return 1.0;
  const double px = std::numbers::pi * x;
  return std::sin(px) / px;
}

inline double lanczos_weight(double d) {
  constexpr double a = Kernel::lanczos_window;
  if (std::abs(d) >= a) return 0.0;
  return sinc(d) * sinc(d / a);
}

}  // namespace detail

/// Destination index j samples source coordinate (j + 0.5) * src / dst - 0.5.
/// Out-of-range taps are clamped to the border and merged; rows sum to 1.
inline TapTable make_taps(const Kernel& kernel, int src, int dst) {
  if (src < 1 || dst < 1) throw Error(Errc::invalid_argument, "scaling dimensions must be >= 1");
  TapTable table(static_cast<std::size_t>(dst));
  const long den = 2L * dst;
  for (int j = 0; j < dst; ++j) {
    std::vector<Tap> raw;
    if (kernel.type == KernelType::nearest) {
      const long idx = std::min<long>((2L * j + 1) * src / den, src - 1);
      raw.push_back({static_cast<int>(idx), 1.0});
    } else {
      // x = num / den exactly; split into integer and fractional parts.
      const long num = (2L * j + 1) * src - dst;
      const long x0 = detail::floor_div(num, den);
      const double frac = double(num - x0 * den) / double(den);
      int lo = 0, hi = 0;
      switch (kernel.type) {
        case KernelType::bilinear: lo = 0; hi = 1; break;
        case KernelType::bicubic: lo = -1; hi = 2; break;
        case KernelType::lanczos: lo = 1 - Kernel::lanczos_window; hi = Kernel::lanczos_window; break;
        default: break;
      }
      for (int k = lo; k <= hi; ++k) {
        const double d = frac - k;
        double w = 0.0;
        switch (kernel.type) {
          case KernelType::bilinear: w = 1.0 - std::abs(d); break;
          case KernelType::bicubic: w = detail::cubic_weight(d); break;
          case KernelType::lanczos: w = detail::lanczos_weight(d); break;
          default: break;
        }
        if (w == 0.0) continue;
        const long idx = std::clamp<long>(x0 + k, 0, src - 1);
        raw.push_back({static_cast<int>(idx), w});
      }
    }
    std::sort(raw.begin(), raw.end(), [](const Tap& a, const Tap& b) { return a.index < b.index; });
    auto& row = table[static_cast<std::size_t>(j)];
    for (const Tap& t : raw) {
      if (!row.empty() && row.back().index == t.index) {
        row.back().weight += t.weight;
      } else {
        row.push_back(t);
      }
    }
    double sum = 0.0;
    for (const Tap& t : row) sum += t.weight;
    if (sum != 1.0) {
      for (Tap& t : row) t.weight /= sum;
    }
    std::erase_if(row, [](const Tap& t) { return t.weight == 0.0; });
  }
  return table;
}

/// Dense row-major real matrix.
struct Matrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> values;

  Matrix() = default;
  Matrix(int r, int c, double fill = 0.0)
      : rows(r), cols(c), values(static_cast<std::size_t>(r) * c, fill) {}

  double& operator()(int r, int c) { return values[static_cast<std::size_t>(r) * cols + c]; }
  double operator()(int r, int c) const { return values[static_cast<std::size_t>(r) * cols + c]; }
};

inline Matrix to_matrix(const TapTable& taps, int src) {
  Matrix m(static_cast<int>(taps.size()), src);
  for (std::size_t j = 0; j < taps.size(); ++j)
    for (const Tap& t : taps[j]) m(static_cast<int>(j), t.index) = t.weight;
  return m;
}

inline TapTable to_taps(const Matrix& m) {
  TapTable taps(static_cast<std::size_t>(m.rows));
  for (int r = 0; r < m.rows; ++r)
    for (int c = 0; c < m.cols; ++c)
      if (m(r, c) != 0.0) taps[static_cast<std::size_t>(r)].push_back({c, m(r, c)});
  return taps;
}

/// L is dst_h x src_h, R is dst_w x src_w.
struct ScalingSpec {
  Kernel kernel;
  int src_h = 0, src_w = 0, dst_h = 0, dst_w = 0;
  Matrix L;
  Matrix R;
};

inline ScalingSpec make_spec(const Kernel& kernel, int src_h, int src_w, int dst_h, int dst_w) {
  if (src_h < 1 || src_w < 1 || dst_h < 1 || dst_w < 1) {
    throw Error(Errc::invalid_argument, "scaling dimensions must be >= 1");
  }
  ScalingSpec spec{kernel, src_h, src_w, dst_h, dst_w, {}, {}};
  spec.L = to_matrix(make_taps(kernel, src_h, dst_h), src_h);
  spec.R = to_matrix(make_taps(kernel, src_w, dst_w), src_w);
  return spec;
}

/// Real-valued separable resample of one plane: vertical pass, then horizontal.
inline Plane resample_plane(const Plane& in, const TapTable& vertical, const TapTable& horizontal) {
  const int dst_h = static_cast<int>(vertical.size());
  const int dst_w = static_cast<int>(horizontal.size());
  Plane mid(dst_h, in.width);
  for (int i = 0; i < dst_h; ++i) {
    for (const Tap& t : vertical[static_cast<std::size_t>(i)]) {
      const double* src = &in.values[static_cast<std::size_t>(t.index) * in.width];
      double* dst = &mid.values[static_cast<std::size_t>(i) * in.width];
      for (int x = 0; x < in.width; ++x) dst[x] += t.weight * src[x];
    }
  }
  Plane out(dst_h, dst_w);
  for (int i = 0; i < dst_h; ++i) {
    const double* row = &mid.values[static_cast<std::size_t>(i) * in.width];
    for (int j = 0; j < dst_w; ++j) {
      double acc = 0.0;
      for (const Tap& t : horizontal[static_cast<std::size_t>(j)]) acc += t.weight * row[t.index];
      out.at(i, j) = acc;
    }
  }
  return out;
}

/// Direct separable scaler; one clamp+round at the very end.
inline Image scale_image(const Image& img, int dst_h, int dst_w, const Kernel& kernel) {
  if (dst_h < 1 || dst_w < 1) throw Error(Errc::invalid_argument, "target dimensions must be >= 1");
  if (img.height < 1 || img.width < 1) throw Error(Errc::invalid_argument, "cannot scale an empty image");
  const TapTable vertical = make_taps(kernel, img.height, dst_h);
  const TapTable horizontal = make_taps(kernel, img.width, dst_w);
  Image out(dst_h, dst_w, img.channels);
  for (int ch = 0; ch < img.channels; ++ch) {
    store_plane(resample_plane(extract_plane(img, ch), vertical, horizontal), out, ch);
  }
  return out;
}

/// L * X per channel through the dense matrix, then * R^T.
inline Plane apply_matrices(const ScalingSpec& spec, const Plane& x) {
  Plane mid(spec.dst_h, spec.src_w);
  for (int i = 0; i < spec.dst_h; ++i)
    for (int a = 0; a < spec.src_h; ++a) {
      const double w = spec.L(i, a);
      for (int c = 0; c < spec.src_w; ++c) mid.at(i, c) += w * x.at(a, c);
    }
  Plane out(spec.dst_h, spec.dst_w);
  for (int i = 0; i < spec.dst_h; ++i)
    for (int j = 0; j < spec.dst_w; ++j) {
      double acc = 0.0;
      for (int b = 0; b < spec.src_w; ++b) acc += spec.R(j, b) * mid.at(i, b);
      out.at(i, j) = acc;
    }
  return out;
}

inline Image apply_spec(const ScalingSpec& spec, const Image& img) {
  if (img.height != spec.src_h || img.width != spec.src_w) {
    throw Error(Errc::dimension_mismatch, "image does not match the scaling spec source dims");
  }
  Image out(spec.dst_h, spec.dst_w, img.channels);
  for (int ch = 0; ch < img.channels; ++ch) store_plane(apply_matrices(spec, extract_plane(img, ch)), out, ch);
  return out;
}

/// Largest row l1 norm of a tap table (1 for non-negative kernels).
inline double max_row_l1(const TapTable& taps) {
  double m = 0.0;
  for (const auto& row : taps) {
    double s = 0.0;
    for (const Tap& t : row) s += std::abs(t.weight);
    m = std::max(m, s);
  }
  return m;
}

}  // namespace scalepoison
