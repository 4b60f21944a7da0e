#pragma once

// Minimum-norm perturbation under an l-infinity band on a linear map:
//
//   minimize ||x - s||^2   s.t.  |W x - t|_inf <= eps,  box_lo <= x <= box_hi
//
// Solved in the dual. For multipliers lambda the primal minimizer is
// x(lambda) = clip(s - W^T lambda); each dual coordinate is maximized
// exactly by walking the breakpoints of the piecewise-linear map
// mu -> W_i x(mu). Once the active set settles it is handed to a small dense
// solve that lands on the KKT point to machine precision.

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <vector>

#include "scalepoison/error.hpp"
#include "scalepoison/scaling.hpp"

namespace scalepoison {

struct QpOptions {
  int max_sweeps = 20000;
  double tol = 1e-9;
  double box_lo = 0.0;
  double box_hi = 255.0;
};

struct QpSolution {
  std::vector<double> x;
  double objective = 0.0;     // ||x - s||^2
  double residual_inf = 0.0;  // |W x - t|_inf
  bool feasible = true;
  bool fallback = false;  // infeasible at eps; x minimizes the residual instead
  int sweeps = 0;
};

namespace detail {


inline double row_dot(const std::vector<Tap>& row, const std::vector<double>& x) {
  double acc = 0.0;
  for (const Tap& t : row) acc += t.weight * x[static_cast<std::size_t>(t.index)];
  return acc;
}

/// Solves G y = b in place by Gaussian elimination with partial pivoting.
/// Returns false for numerically singular G.
inline bool solve_dense(std::vector<double>& g, std::vector<double>& b, int n) {
  double scale = 0.0;
  for (int i = 0; i < n; ++i) scale = std::max(scale, std::abs(g[static_cast<std::size_t>(i) * n + i]));
  if (scale == 0.0) return n == 0;
  for (int col = 0; col < n; ++col) {
    int piv = col;
    for (int r = col + 1; r < n; ++r)
      if (std::abs(g[static_cast<std::size_t>(r) * n + col]) > std::abs(g[static_cast<std::size_t>(piv) * n + col])) piv = r;
    const double p = g[static_cast<std::size_t>(piv) * n + col];
    if (std::abs(p) <= 1e-12 * scale) return false;
    if (piv != col) {
      for (int c = 0; c < n; ++c) std::swap(g[static_cast<std::size_t>(piv) * n + c], g[static_cast<std::size_t>(col) * n + c]);
      std::swap(b[static_cast<std::size_t>(piv)], b[static_cast<std::size_t>(col)]);
    }
    for (int r = col + 1; r < n; ++r) {
      const double f = g[static_cast<std::size_t>(r) * n + col] / p;
      if (f == 0.0) continue;
      for (int c = col; c < n; ++c) g[static_cast<std::size_t>(r) * n + c] -= f * g[static_cast<std::size_t>(col) * n + c];
      b[static_cast<std::size_t>(r)] -= f * b[static_cast<std::size_t>(col)];
    }
  }
  for (int r = n - 1; r >= 0; --r) {
    double acc = b[static_cast<std::size_t>(r)];
    for (int c = r + 1; c < n; ++c) acc -= g[static_cast<std::size_t>(r) * n + c] * b[static_cast<std::size_t>(c)];
    b[static_cast<std::size_t>(r)] = acc / g[static_cast<std::size_t>(r) * n + r];
  }
  return true;
}

class BandQp {
 public:
  BandQp(const TapTable& rows, std::span<const double> s, std::span<const double> lo, std::span<const double> hi,
         double eps, QpOptions opts)
      : rows_(rows), s_(s.begin(), s.end()), lo_(lo.begin(), lo.end()), hi_(hi.begin(), hi.end()), eps_(eps),
        opts_(opts) {}

  /// Runs the dual ascent. Returns true when a KKT point was reached.
  bool solve() {
    const std::size_t m = rows_.size();
    lambda_.assign(m, 0.0);
    z_ = s_;
    if (!rows_individually_feasible()) return false;
    for (sweeps_ = 1; sweeps_ <= opts_.max_sweeps; ++sweeps_) {
      for (std::size_t i = 0; i < m; ++i) {
        if (!update_row(i)) return false;
      }
      if (kkt_residual() <= opts_.tol) return true;
      if (certified_infeasible()) return false;
      const bool try_polish = sweeps_ <= 16 || sweeps_ % 4 == 0;
      if (try_polish && polish() && kkt_residual() <= opts_.tol) return true;
      for (double l : lambda_)
        if (!std::isfinite(l) || std::abs(l) > 1e15) return false;
    }
    sweeps_ = opts_.max_sweeps;
    return false;
  }

  std::vector<double> primal() const {
    std::vector<double> x(z_.size());
    for (std::size_t j = 0; j < z_.size(); ++j) x[j] = clip(z_[j]);
    return x;
  }

  int sweeps() const { return sweeps_; }

 private:
  double lower(std::size_t i) const { return lo_[i] - eps_; }
  double upper(std::size_t i) const { return hi_[i] + eps_; }

  bool rows_individually_feasible() const {
    for (std::size_t i = 0; i < rows_.size(); ++i) {
      double lo = 0.0, hi = 0.0;
      for (const Tap& tp : rows_[i]) {
        lo += std::min(tp.weight * opts_.box_lo, tp.weight * opts_.box_hi);
        hi += std::max(tp.weight * opts_.box_lo, tp.weight * opts_.box_hi);
      }
      if (lo > upper(i) + opts_.tol || hi < lower(i) - opts_.tol) return false;
    }
    return true;
  }

  // phi(mu) = sum_j w_j clip(b_j - w_j mu)
  double clip(double v) const { return std::clamp(v, opts_.box_lo, opts_.box_hi); }

  double phi(const std::vector<Tap>& row, const std::vector<double>& b, double mu) const {
    double acc = 0.0;
    for (std::size_t k = 0; k < row.size(); ++k) acc += row[k].weight * clip(b[k] - row[k].weight * mu);
    return acc;
  }

  // Finds mu = dir * tau, tau >= 0, with phi(mu) = target. phi is monotone along
  // dir and linear between breakpoints, so linear interpolation is exact.
  bool root_along(const std::vector<Tap>& row, const std::vector<double>& b, int dir, double target,
                         double& mu_out) const {
    std::vector<double> taus;
    taus.reserve(2 * row.size());
    for (std::size_t k = 0; k < row.size(); ++k) {
      const double w = row[k].weight;
      for (double edge : {opts_.box_lo, opts_.box_hi}) {
        const double tau = dir * (b[k] - edge) / w;
        if (tau > 0.0) taus.push_back(tau);
      }
    }
    std::sort(taus.begin(), taus.end());
    double prev_tau = 0.0;
    double prev_phi = phi(row, b, 0.0);
    for (double tau : taus) {
      const double cur_phi = phi(row, b, dir * tau);
      const bool crossed = dir > 0 ? cur_phi <= target : cur_phi >= target;
      if (crossed) {
        const double frac = (target - prev_phi) / (cur_phi - prev_phi);
        mu_out = dir * (prev_tau + frac * (tau - prev_tau));
        return true;
      }
      prev_tau = tau;
      prev_phi = cur_phi;
    }
    return false;
  }

  bool update_row(std::size_t i) {
    const auto& row = rows_[i];
    if (row.empty()) return true;
    std::vector<double> b(row.size());
    for (std::size_t k = 0; k < row.size(); ++k) {
      b[k] = z_[static_cast<std::size_t>(row[k].index)] + row[k].weight * lambda_[i];
    }
    const double phi0 = phi(row, b, 0.0);
    double mu = 0.0;
    if (phi0 > upper(i)) {
      if (!root_along(row, b, +1, upper(i), mu)) return false;  // dual unbounded
    } else if (phi0 < lower(i)) {
      if (!root_along(row, b, -1, lower(i), mu)) return false;
    }
    lambda_[i] = mu;
    for (std::size_t k = 0; k < row.size(); ++k) {
      z_[static_cast<std::size_t>(row[k].index)] = b[k] - row[k].weight * mu;
    }
    return true;
  }

  // Farkas test with y = -lambda: every feasible x has y^T W x >= sum_i y_i * (lower or upper edge),
  // so a box maximum of y^T W x below that bound proves infeasibility.
  bool certified_infeasible() const {
    std::vector<double> g(s_.size(), 0.0);
    double bound = 0.0, mass = 0.0;
    for (std::size_t i = 0; i < rows_.size(); ++i) {
      const double y = -lambda_[i];
      if (y == 0.0) continue;
      const double edge = y > 0.0 ? lower(i) : upper(i);
      if (!std::isfinite(edge)) return false;
      bound += y * edge;
      mass += std::abs(y);
      for (const Tap& tp : rows_[i]) g[static_cast<std::size_t>(tp.index)] += y * tp.weight;
    }
    if (mass == 0.0) return false;
    double best = 0.0;
    const double span = std::max(std::abs(opts_.box_lo), std::abs(opts_.box_hi));
    for (double v : g) best += std::max(v * opts_.box_lo, v * opts_.box_hi);
    return best < bound - 1e-9 * span * mass;
  }

  double kkt_residual() const {
    const auto x = primal();
    double worst = 0.0;
    for (std::size_t i = 0; i < rows_.size(); ++i) {
      const double v = row_dot(rows_[i], x);
      double r = 0.0;
      if (lambda_[i] > 0.0) {
        r = std::abs(v - upper(i));
      } else if (lambda_[i] < 0.0) {
        r = std::abs(v - lower(i));
      } else {
        r = std::max({0.0, v - upper(i), lower(i) - v});
      }
      worst = std::max(worst, r);
    }
    return worst;
  }

  // Primal-dual active-set refinement: guess the active rows (with side) and
  // the clipped variables, solve the equality-constrained projection, then
  // re-derive the guess from the result until it is self-consistent.
  bool polish() {
    const std::size_t n = s_.size();
    const std::size_t m = rows_.size();
    std::vector<int> side(m, 0);  // +1 upper bound active, -1 lower, 0 inactive
    for (std::size_t i = 0; i < m; ++i) side[i] = lambda_[i] > 0.0 ? 1 : (lambda_[i] < 0.0 ? -1 : 0);
    const double blo = opts_.box_lo, bhi = opts_.box_hi;
    std::vector<int> state(n, 0);  // 0 free, -1 at box_lo, +1 at box_hi
    for (std::size_t j = 0; j < n; ++j) state[j] = z_[j] <= blo ? -1 : (z_[j] >= bhi ? 1 : 0);

    const double slack = 1e3 * opts_.tol;
    std::vector<double> mu(m, 0.0);
    std::vector<double> z(n);
    std::vector<double> x(n);
    for (int round = 0; round < 16; ++round) {
      std::vector<std::size_t> active;
      for (std::size_t i = 0; i < m; ++i)
        if (side[i] != 0) active.push_back(i);
      const int a = static_cast<int>(active.size());
      if (a == 0) return false;

      std::vector<double> slot(n, -1.0);
      std::vector<double> gram(static_cast<std::size_t>(a) * a, 0.0);
      std::vector<double> rhs(static_cast<std::size_t>(a), 0.0);
      std::vector<std::vector<double>> dense(static_cast<std::size_t>(a), std::vector<double>(n, 0.0));
      for (int p = 0; p < a; ++p)
        for (const Tap& tp : rows_[active[static_cast<std::size_t>(p)]])
          dense[static_cast<std::size_t>(p)][static_cast<std::size_t>(tp.index)] = tp.weight;
      for (int p = 0; p < a; ++p) {
        const std::size_t i = active[static_cast<std::size_t>(p)];
        double r = -(side[i] > 0 ? upper(i) : lower(i));
        for (const Tap& tp : rows_[i]) {
          const auto j = static_cast<std::size_t>(tp.index);
          r += tp.weight * (state[j] == 0 ? s_[j] : (state[j] < 0 ? blo : bhi));
        }
        rhs[static_cast<std::size_t>(p)] = r;
        for (int q = p; q < a; ++q) {
          double g = 0.0;
          for (const Tap& tp : rows_[i]) {
            const auto j = static_cast<std::size_t>(tp.index);
            if (state[j] == 0) g += tp.weight * dense[static_cast<std::size_t>(q)][j];
          }
          gram[static_cast<std::size_t>(p) * a + q] = g;
          gram[static_cast<std::size_t>(q) * a + p] = g;
        }
      }
      if (!solve_dense(gram, rhs, a)) {
        // a clipped guess can make the active rows dependent; release them
        bool released = false;
        for (std::size_t i : active)
          for (const Tap& tp : rows_[i])
            if (state[static_cast<std::size_t>(tp.index)] != 0) {
              state[static_cast<std::size_t>(tp.index)] = 0;
              released = true;
            }
        if (!released) {
          // more active rows than the free variables support; drop the weakest
          std::size_t weakest = active.front();
          for (std::size_t i : active)
            if (std::abs(lambda_[i]) < std::abs(lambda_[weakest])) weakest = i;
          side[weakest] = 0;
        }
        continue;
      }

      std::fill(mu.begin(), mu.end(), 0.0);
      z = s_;
      for (int p = 0; p < a; ++p) {
        const std::size_t i = active[static_cast<std::size_t>(p)];
        mu[i] = rhs[static_cast<std::size_t>(p)];
        for (const Tap& tp : rows_[i]) z[static_cast<std::size_t>(tp.index)] -= mu[i] * tp.weight;
      }

      bool consistent = true;
      std::vector<int> next_state(n);
      for (std::size_t j = 0; j < n; ++j) {
        x[j] = clip(z[j]);
        if (state[j] == 0) {
          consistent = consistent && z[j] >= blo - slack && z[j] <= bhi + slack;
        } else if (state[j] < 0) {
          consistent = consistent && z[j] <= blo + slack;
        } else {
          consistent = consistent && z[j] >= bhi - slack;
        }
        next_state[j] = z[j] <= blo ? -1 : (z[j] >= bhi ? 1 : 0);
      }
      std::vector<int> next_side = side;
      for (std::size_t i = 0; i < m; ++i) {
        if (side[i] != 0) {
          if (eps_ > 0.0 && mu[i] * side[i] < -slack) {
            next_side[i] = 0;
            consistent = false;
          }
        } else {
          const double v = row_dot(rows_[i], x);
          if (v > upper(i) + opts_.tol) {
            next_side[i] = 1;
            consistent = false;
          } else if (v < lower(i) - opts_.tol) {
            next_side[i] = -1;
            consistent = false;
          }
        }
      }
      if (consistent) {
        const std::vector<double> saved_lambda = lambda_;
        const std::vector<double> saved_z = z_;
        for (std::size_t i = 0; i < m; ++i) {
          // keep the side marker even when mu rounds to zero
          lambda_[i] = side[i] == 0 ? 0.0 : (mu[i] != 0.0 ? mu[i] : side[i] * 1e-300);
        }
        z_ = z;
        if (kkt_residual() <= opts_.tol) return true;
        lambda_ = saved_lambda;
        z_ = saved_z;
        return false;
      }
      state = std::move(next_state);
      side = std::move(next_side);
    }
    return false;
  }

  const TapTable& rows_;
  std::vector<double> s_;
  std::vector<double> lo_;
  std::vector<double> hi_;
  double eps_;
  QpOptions opts_;
  std::vector<double> lambda_;
  std::vector<double> z_;
  int sweeps_ = 0;
};

// Distance of W x from the interval [lo, hi], worst row.
inline double band_residual(const TapTable& rows, const std::vector<double>& x, std::span<const double> lo,
                            std::span<const double> hi) {
  double worst = 0.0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const double v = row_dot(rows[i], x);
    worst = std::max({worst, v - hi[i], lo[i] - v});
  }
  return worst;
}

inline QpSolution finish(const TapTable& rows, std::span<const double> s, std::span<const double> lo,
                         std::span<const double> hi,
                         std::vector<double> x, bool feasible, bool fallback, int sweeps) {
  QpSolution sol;
  sol.objective = 0.0;
  for (std::size_t j = 0; j < x.size(); ++j) sol.objective += (x[j] - s[j]) * (x[j] - s[j]);
  sol.residual_inf = band_residual(rows, x, lo, hi);
  sol.x = std::move(x);
  sol.feasible = feasible;
  sol.fallback = fallback;
  sol.sweeps = sweeps;
  return sol;
}

}  // namespace detail

/// Sparse-row entry point: lo_i - eps <= W_i x <= hi_i + eps inside the box of opts.
/// Infinite edges make a row one-sided. residual_inf is the distance of W x
/// from [lo, hi]. Rows must be validated by the caller.
inline QpSolution solve_interval_qp(const TapTable& rows, std::span<const double> s, std::span<const double> lo,
                                    std::span<const double> hi, double eps, const QpOptions& opts = {}) {
  detail::BandQp qp(rows, s, lo, hi, eps, opts);
  if (qp.solve()) return detail::finish(rows, s, lo, hi, qp.primal(), true, false, qp.sweeps());

  // Infeasible at eps: bisect on the band width. Trials get a short sweep
  // budget; a trial that does not converge counts as infeasible, so hi always
  // holds a verified width.
  std::vector<double> start(s.size());
  for (std::size_t j = 0; j < s.size(); ++j) start[j] = std::clamp(s[j], opts.box_lo, opts.box_hi);
  double lo_w = eps;
  double hi_w = detail::band_residual(rows, start, lo, hi);
  std::vector<double> best = start;
  int total_sweeps = qp.sweeps();
  QpOptions trial_opts = opts;
  trial_opts.max_sweeps = std::min(opts.max_sweeps, 500);
  for (int iter = 0; iter < 60 && hi_w - lo_w > 1e-6 * (1.0 + hi_w); ++iter) {
    const double mid = 0.5 * (lo_w + hi_w);
    detail::BandQp trial(rows, s, lo, hi, mid, trial_opts);
    const bool ok = trial.solve();
    total_sweeps += trial.sweeps();
    if (ok) {
      hi_w = mid;
      best = trial.primal();
    } else {
      lo_w = mid;
    }
  }
  return detail::finish(rows, s, lo, hi, std::move(best), false, true, total_sweeps);
}

/// Symmetric band |W x - t|_inf <= eps.
inline QpSolution solve_band_qp(const TapTable& rows, std::span<const double> s, std::span<const double> t,
                                double eps, const QpOptions& opts = {}) {
  return solve_interval_qp(rows, s, t, t, eps, opts);
}

/// Dense entry point: validates shapes and row normalization.
inline QpSolution solve_1d_qp(const Matrix& W, std::span<const double> s, std::span<const double> t, double eps,
                              const QpOptions& opts = {}) {
  if (static_cast<int>(s.size()) != W.cols || static_cast<int>(t.size()) != W.rows) {
    throw Error(Errc::dimension_mismatch, "W, s and t sizes disagree");
  }
  if (W.rows > W.cols) throw Error(Errc::dimension_mismatch, "W must not have more rows than columns");
  if (!(eps >= 0.0)) throw Error(Errc::invalid_argument, "eps must be non-negative");
  if (!(opts.tol > 0.0)) throw Error(Errc::invalid_argument, "tol must be positive");
  if (!(opts.box_lo <= opts.box_hi)) throw Error(Errc::invalid_argument, "empty box");
  for (int r = 0; r < W.rows; ++r) {
    double sum = 0.0;
    for (int c = 0; c < W.cols; ++c) sum += W(r, c);
    if (std::abs(sum - 1.0) > 1e-9) throw Error(Errc::not_normalized, "row " + std::to_string(r));
  }
  return solve_band_qp(to_taps(W), s, t, eps, opts);
}

}  // namespace scalepoison
