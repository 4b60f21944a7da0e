#pragma once

// Down/up-scaling detectors and ROC evaluation. Lower similarity means the
// image is more likely an attack image.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <ostream>
#include <span>
#include <vector>

#include "scalepoison/error.hpp"
#include "scalepoison/imaging.hpp"
#include "scalepoison/scaling.hpp"

namespace scalepoison {

/// A' = upscale(downscale(A)); the same kernel is used in both directions.
inline Image down_up(const Image& a, int net_h, int net_w, const Kernel& kernel) {
  if (net_h < 1 || net_w < 1 || a.height < net_h || a.width < net_w) {
    throw Error(Errc::invalid_argument, "image is smaller than the network input");
  }
  const Image down = scale_image(a, net_h, net_w, kernel);
  return scale_image(down, a.height, a.width, kernel);
}

namespace detail {

template <typename T>
double cosine(const std::array<T, 256>& a, const std::array<T, 256>& b) {
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < 256; ++i) {
    const double x = static_cast<double>(a[i]);
    const double y = static_cast<double>(b[i]);
    dot += x * y;
    na += x * x;
    nb += y * y;
  }
  if (na == 0.0 && nb == 0.0) return 1.0;
  if (na == 0.0 || nb == 0.0) return 0.0;
  return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), 0.0, 1.0);
}

}  // namespace detail

inline double histogram_score(const Image& a, const Image& a_prime) {
  if (a.height != a_prime.height || a.width != a_prime.width) {
    throw Error(Errc::dimension_mismatch, "histogram score needs equal dims");
  }
  return detail::cosine(intensity_histogram(to_grayscale(a)).counts,
                        intensity_histogram(to_grayscale(a_prime)).counts);
}

/// Mean distance to the image center per intensity; 0 where an intensity is absent.
struct ScatterVector {
  std::array<double, 256> values{};
};

inline ScatterVector scatter_vector(const GrayImage& img) {
  std::array<double, 256> sum{};
  std::array<std::uint64_t, 256> count{};
  const double cy = img.height / 2.0;
  const double cx = img.width / 2.0;
  for (int r = 0; r < img.height; ++r) {
    const double dy = r + 0.5 - cy;
    for (int c = 0; c < img.width; ++c) {
      const double dx = c + 0.5 - cx;
      const auto v = img.at(r, c);
      sum[v] += std::sqrt(dy * dy + dx * dx);
      ++count[v];
    }
  }
  ScatterVector out;
  for (std::size_t v = 0; v < 256; ++v) out.values[v] = count[v] ? sum[v] / double(count[v]) : 0.0;
  return out;
}

inline double scatter_score(const Image& a, const Image& a_prime) {
  if (a.height != a_prime.height || a.width != a_prime.width) {
    throw Error(Errc::dimension_mismatch, "scatter score needs equal dims");
  }
  return detail::cosine(scatter_vector(to_grayscale(a)).values, scatter_vector(to_grayscale(a_prime)).values);
}

struct DetectionThresholds {
  double histogram = 0.9;
  double scatter = 0.9;
};

struct DetectionReport {
  double hist_score = 1.0;
  double scatter_score = 1.0;
  bool hist_flag = false;  // true: flagged as attack
  bool scatter_flag = false;
};

inline DetectionReport detect(const Image& a, int net_h, int net_w, const Kernel& kernel,
                              const DetectionThresholds& thr = {}) {
  const Image ap = down_up(a, net_h, net_w, kernel);
  DetectionReport rep;
  rep.hist_score = histogram_score(a, ap);
  rep.scatter_score = scatter_score(a, ap);
  rep.hist_flag = rep.hist_score < thr.histogram;
  rep.scatter_flag = rep.scatter_score < thr.scatter;
  return rep;
}

struct RocPoint {
  double threshold;  // score <= threshold is flagged
  double fpr;
  double tpr;
};

struct RocCurve {
  std::vector<RocPoint> points;  // from (0,0) to (1,1), fpr and tpr non-decreasing
  double auc = 0.0;

  /// Best TPR whose FPR does not exceed the budget.
  double tpr_at(double max_fpr) const {
    double best = 0.0;
    for (const auto& p : points)
      if (p.fpr <= max_fpr + 1e-12) best = std::max(best, p.tpr);
    return best;
  }
};

inline RocCurve roc(std::span<const double> attack_scores, std::span<const double> benign_scores) {
  if (attack_scores.empty() || benign_scores.empty()) {
    throw Error(Errc::insufficient_items, "ROC needs attack and benign scores");
  }
  std::vector<double> att(attack_scores.begin(), attack_scores.end());
  std::vector<double> ben(benign_scores.begin(), benign_scores.end());
  std::sort(att.begin(), att.end());
  std::sort(ben.begin(), ben.end());
  std::vector<double> thresholds = att;
  thresholds.insert(thresholds.end(), ben.begin(), ben.end());
  std::sort(thresholds.begin(), thresholds.end());
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());

  RocCurve curve;
  curve.points.push_back({-std::numeric_limits<double>::infinity(), 0.0, 0.0});
  const double na = double(att.size());
  const double nb = double(ben.size());
  for (double thr : thresholds) {
    const auto ta = std::upper_bound(att.begin(), att.end(), thr) - att.begin();
    const auto tb = std::upper_bound(ben.begin(), ben.end(), thr) - ben.begin();
    curve.points.push_back({thr, double(tb) / nb, double(ta) / na});
  }
  for (std::size_t i = 1; i < curve.points.size(); ++i) {
    const auto& p = curve.points[i - 1];
    const auto& q = curve.points[i];
    curve.auc += (q.fpr - p.fpr) * (q.tpr + p.tpr) * 0.5;
  }
  return curve;
}

inline void write_roc_csv(const RocCurve& curve, std::ostream& out) {
  out << "threshold,fpr,tpr\n";
  out.precision(17);
  for (const auto& p : curve.points) out << p.threshold << ',' << p.fpr << ',' << p.tpr << '\n';
}

}  // namespace scalepoison
