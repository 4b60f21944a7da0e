#pragma once

// Image-scaling attack: find A close to S such that scale(A) lands on T.
// Solved per channel in two separable stages (columns against L, then rows
// against R), followed by an integer repair pass after rounding.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <vector>

#include "scalepoison/defense.hpp"
#include "scalepoison/error.hpp"
#include "scalepoison/imaging.hpp"
#include "scalepoison/qp.hpp"
#include "scalepoison/scaling.hpp"

namespace scalepoison {

struct AttackParams {
  double epsilon = 1.0;
  Kernel kernel = bilinear_kernel;
  int max_iter = 20000;  // dual sweeps per 1-D subproblem
  double tol = 1e-9;
  int repair_passes = 64;
};

struct AttackResult {
  Image attack_image;
  double perturbation_norm = 0.0;  // ||A - S||_2 over all samples
  double residual_inf = 0.0;       // ||scale(A) - T||_inf against the (adapted) target
  double o2_psnr = 0.0;            // PSNR(A, S)
  bool feasible = true;
  int infeasible_subproblems = 0;
  double stage_objective = 0.0;  // sum of the row-stage optima, before rounding
  Image adapted_target;          // T for the plain attack, T' for the adaptive one
  double target_psnr = 0.0;      // PSNR(scale(A), original T)
};

namespace detail {

inline void check_attack_inputs(const Image& s, const Image& t, const AttackParams& p) {
  if (!(p.epsilon >= 0.0)) throw Error(Errc::invalid_argument, "epsilon must be non-negative");
  if (!(p.tol > 0.0)) throw Error(Errc::invalid_argument, "tol must be positive");
  if (p.max_iter < 1) throw Error(Errc::invalid_argument, "max_iter must be positive");
  if (t.height < 1 || t.width < 1) throw Error(Errc::invalid_argument, "empty target image");
  if (s.channels != t.channels) throw Error(Errc::dimension_mismatch, "source and target channel counts differ");
  if (s.height < t.height || s.width < t.width) {
    throw Error(Errc::dimension_mismatch, "source must be at least as large as the target on both axes");
  }
}

// Greedy integer fix-up: nudge the strongest contributing source sample by one
// step for every output that rounds outside the band.
inline void repair_channel(Plane& a, const Plane& target, const TapTable& vt, const TapTable& ht, double eps,
                           int passes) {
  const double band = std::floor(eps);
  for (int pass = 0; pass < passes; ++pass) {
    const Plane y = resample_plane(a, vt, ht);
    bool changed = false;
    bool violated = false;
    for (int i = 0; i < y.height; ++i) {
      for (int j = 0; j < y.width; ++j) {
        const double q = quantize(y.at(i, j));
        const double diff = target.at(i, j) - q;
        if (std::abs(diff) <= band) continue;
        violated = true;
        const double dir = diff > 0 ? 1.0 : -1.0;
        int best_r = -1, best_c = -1;
        double best_w = 0.0, best_step = 0.0;
        for (const Tap& tr : vt[static_cast<std::size_t>(i)])
          for (const Tap& tc : ht[static_cast<std::size_t>(j)]) {
            const double wgt = tr.weight * tc.weight;
            const double step = wgt > 0 ? dir : -dir;
            const double nv = a.at(tr.index, tc.index) + step;
            if (nv < 0.0 || nv > 255.0 || std::abs(wgt) <= best_w) continue;
            best_w = std::abs(wgt);
            best_step = step;
            best_r = tr.index;
            best_c = tc.index;
          }
        if (best_r < 0) continue;
        a.at(best_r, best_c) += best_step;
        changed = true;
      }
    }
    if (!violated || !changed) return;
  }
}

}  // namespace detail

inline AttackResult scaling_attack(const Image& source, const Image& target, const AttackParams& params = {}) {
  detail::check_attack_inputs(source, target, params);
  const int H = source.height, W = source.width, h = target.height, w = target.width;
  const TapTable vt = make_taps(params.kernel, H, h);
  const TapTable ht = make_taps(params.kernel, W, w);
  const double l1_v = max_row_l1(vt);
  const double l1_h = max_row_l1(ht);

  // Budget in real arithmetic so that the rounded A still quantizes into the band.
  const double band = std::floor(params.epsilon) + 0.5;
  const double rounding = 0.5 * l1_v * l1_h;
  const double budget = std::max(0.0, std::min(params.epsilon, band - rounding - 1e-6));
  const double eps_v = 0.75 * budget;
  const double eps_h = 0.25 * budget / l1_v;
  const QpOptions qopt{params.max_iter, params.tol};

  AttackResult res;
  res.attack_image = Image(H, W, source.channels);
  for (int ch = 0; ch < source.channels; ++ch) {
    const Plane s = extract_plane(source, ch);
    const Plane t = extract_plane(target, ch);

    // Stage 1: columns of S R^T against L.
    TapTable identity(static_cast<std::size_t>(H));
    for (int r = 0; r < H; ++r) identity[static_cast<std::size_t>(r)] = {{r, 1.0}};
    const Plane i0 = resample_plane(s, identity, ht);
    Plane mid(H, w);
    std::vector<double> col(static_cast<std::size_t>(H));
    // Saturated target values only bound one side: anything past 0 or 255 clamps onto them.
    std::vector<double> tlo(static_cast<std::size_t>(h)), thi(static_cast<std::size_t>(h));
    constexpr double inf = std::numeric_limits<double>::infinity();
    for (int c = 0; c < w; ++c) {
      for (int r = 0; r < H; ++r) col[static_cast<std::size_t>(r)] = i0.at(r, c);
      for (int r = 0; r < h; ++r) {
        const double v = t.at(r, c);
        tlo[static_cast<std::size_t>(r)] = v == 0.0 ? -inf : v;
        thi[static_cast<std::size_t>(r)] = v == 255.0 ? inf : v;
      }
      // Entries of A R^T range over the reach of row c of R, not over [0, 255].
      QpOptions col_opt = qopt;
      col_opt.box_lo = col_opt.box_hi = 0.0;
      for (const Tap& tp : ht[static_cast<std::size_t>(c)]) (tp.weight < 0 ? col_opt.box_lo : col_opt.box_hi) += 255.0 * tp.weight;
      const QpSolution sol = solve_interval_qp(vt, col, tlo, thi, eps_v, col_opt);
      if (!sol.feasible) ++res.infeasible_subproblems;
      for (int r = 0; r < H; ++r) mid.at(r, c) = sol.x[static_cast<std::size_t>(r)];
    }

    // Stage 2: rows of S against R, aiming at the rows of the intermediate.
    Plane a(H, W);
    std::vector<double> row(static_cast<std::size_t>(W));
    std::vector<double> trow(static_cast<std::size_t>(w));
    for (int r = 0; r < H; ++r) {
      for (int c = 0; c < W; ++c) row[static_cast<std::size_t>(c)] = s.at(r, c);
      for (int c = 0; c < w; ++c) trow[static_cast<std::size_t>(c)] = mid.at(r, c);
      const QpSolution sol = solve_band_qp(ht, row, trow, eps_h, qopt);
      if (!sol.feasible) ++res.infeasible_subproblems;
      res.stage_objective += sol.objective;
      for (int c = 0; c < W; ++c) a.at(r, c) = std::floor(sol.x[static_cast<std::size_t>(c)] + 0.5);
    }

    detail::repair_channel(a, t, vt, ht, params.epsilon, params.repair_passes);
    store_plane(a, res.attack_image, ch);
  }

  double se = 0.0;
  for (std::size_t k = 0; k < source.data.size(); ++k) {
    const double d = double(res.attack_image.data[k]) - double(source.data[k]);
    se += d * d;
  }
  res.perturbation_norm = std::sqrt(se);
  const Image down = scale_image(res.attack_image, h, w, params.kernel);
  res.residual_inf = max_abs_difference(down, target);
  res.o2_psnr = psnr(res.attack_image, source);
  res.feasible = res.infeasible_subproblems == 0 && res.residual_inf <= params.epsilon;
  res.adapted_target = target;
  res.target_psnr = psnr(down, target);
  return res;
}

/// Per-channel CDF matching: v maps to the smallest reference value whose
/// CDF reaches the CDF of v. Exact integer comparisons.
inline Image histogram_match(const Image& img, const Image& reference) {
  if (img.channels != reference.channels) {
    throw Error(Errc::dimension_mismatch, "histogram matching needs equal channel counts");
  }
  Image out = img;
  const std::size_t n_in = img.pixel_count();
  const std::size_t n_ref = reference.pixel_count();
  if (n_in == 0 || n_ref == 0) return out;
  for (int ch = 0; ch < img.channels; ++ch) {
    std::array<std::uint64_t, 256> c_in{}, c_ref{};
    for (std::size_t i = 0; i < n_in; ++i) ++c_in[img.data[i * img.channels + ch]];
    for (std::size_t i = 0; i < n_ref; ++i) ++c_ref[reference.data[i * reference.channels + ch]];
    for (std::size_t v = 1; v < 256; ++v) {
      c_in[v] += c_in[v - 1];
      c_ref[v] += c_ref[v - 1];
    }
    std::array<std::uint8_t, 256> map{};
    std::size_t r = 0;
    for (std::size_t v = 0; v < 256; ++v) {
      while (r < 255 && c_ref[r] * n_in < c_in[v] * n_ref) ++r;
      map[v] = static_cast<std::uint8_t>(r);
    }
    for (std::size_t i = 0; i < n_in; ++i) {
      auto& px = out.data[i * img.channels + ch];
      px = map[px];
    }
  }
  return out;
}

/// 3x3 median per channel with clamped borders.
inline Image denoise(const Image& img) {
  Image out(img.height, img.width, img.channels);
  std::array<std::uint8_t, 9> win{};
  for (int r = 0; r < img.height; ++r)
    for (int c = 0; c < img.width; ++c)
      for (int ch = 0; ch < img.channels; ++ch) {
        std::size_t k = 0;
        for (int dr = -1; dr <= 1; ++dr)
          for (int dc = -1; dc <= 1; ++dc) {
            const int rr = std::clamp(r + dr, 0, img.height - 1);
            const int cc = std::clamp(c + dc, 0, img.width - 1);
            win[k++] = img.at(rr, cc, ch);
          }
        std::nth_element(win.begin(), win.begin() + 4, win.end());
        out.at(r, c, ch) = win[4];
      }
  return out;
}

/// Target T' whose histogram at source resolution resembles the source.
inline Image adapt_target(const Image& source, const Image& target, const Kernel& kernel) {
  const Image up = scale_image(target, source.height, source.width, bilinear_kernel);
  const Image smoothed = denoise(histogram_match(up, source));
  return scale_image(smoothed, target.height, target.width, kernel);
}

inline AttackResult adaptive_attack(const Image& source, const Image& target, const AttackParams& params = {}) {
  detail::check_attack_inputs(source, target, params);
  const Image adapted = adapt_target(source, target, params.kernel);
  AttackResult res = scaling_attack(source, adapted, params);
  res.adapted_target = adapted;
  res.target_psnr = psnr(scale_image(res.attack_image, target.height, target.width, params.kernel), target);
  return res;
}

struct Candidate {
  std::size_t source_index = 0;
  double hist_score = 0.0;
  AttackResult result;
};

using TargetBuilder = std::function<Image(const Image& source, std::size_t index)>;

/// Adaptive attack on every source; keeps the k with the highest histogram
/// score (least suspicious), ties by source index.
inline std::vector<Candidate> select_candidates(const std::vector<Image>& sources, const TargetBuilder& build_target,
                                                const AttackParams& params, std::size_t k) {
  if (sources.empty()) throw Error(Errc::insufficient_items, "no candidate sources");
  if (k > sources.size()) throw Error(Errc::insufficient_items, "k exceeds the number of sources");
  std::vector<Candidate> all;
  all.reserve(sources.size());
  for (std::size_t i = 0; i < sources.size(); ++i) {
    const Image t = build_target(sources[i], i);
    Candidate cand{i, 0.0, adaptive_attack(sources[i], t, params)};
    const Image& a = cand.result.attack_image;
    cand.hist_score = histogram_score(a, down_up(a, t.height, t.width, params.kernel));
    all.push_back(std::move(cand));
  }
  std::stable_sort(all.begin(), all.end(),
                   [](const Candidate& x, const Candidate& y) { return x.hist_score > y.hist_score; });
  all.resize(k);
  return all;
}

}  // namespace scalepoison
