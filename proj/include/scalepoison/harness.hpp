#pragma once

// Desk-scale experiment orchestration: a synthetic class-conditioned corpus,
// poisoning success curves, detection ROC corpora, and their artifacts.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <limits>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <type_traits>
#include <vector>

#include "scalepoison/attack.hpp"
#include "scalepoison/codec.hpp"
#include "scalepoison/defense.hpp"
#include "scalepoison/imaging.hpp"
#include "scalepoison/learner.hpp"
#include "scalepoison/parallel.hpp"
#include "scalepoison/poisoning.hpp"
#include "scalepoison/random.hpp"
#include "scalepoison/scaling.hpp"

namespace scalepoison {

inline constexpr int max_synthetic_classes = 8;

/// One class-conditioned sample: textured two-colour gradient background with
/// a few random clutter blobs, a class-specific shape (disk, stripes, cross,
/// ring, triangle, ...) at a jittered position, size and colour, plus noise.
inline Image synth_image(int cls, int size, Rng& rng) {
  if (cls < 0 || cls >= max_synthetic_classes) throw Error(Errc::invalid_argument, "synthetic class out of range");
  if (size < 8) throw Error(Errc::invalid_argument, "synthetic images need at least 8 pixels per side");
  auto range = [&](double lo, double hi) { return lo + (hi - lo) * uniform_real(rng); };
  auto luma = [](const std::array<double, 3>& c) { return 0.299 * c[0] + 0.587 * c[1] + 0.114 * c[2]; };

  std::array<double, 3> c1, c2, fg;
  for (int k = 0; k < 3; ++k) {
    c1[k] = range(0, 255);
    c2[k] = range(0, 255);
  }
  const double bg_luma = 0.5 * (luma(c1) + luma(c2));
  do {
    for (double& v : fg) v = range(0, 255);
  } while (std::abs(luma(fg) - bg_luma) < 60.0);

  const double angle = range(0, 2 * 3.14159265358979323846);
  const double tex_freq = range(1.0, 3.0), tex_phase = range(0, 6.283), tex_amp = range(10, 30);
  struct Blob {
    double y, x, ry, rx;
    std::array<double, 3> color;
  };
  std::vector<Blob> blobs(3 + uniform_index(rng, 4));
  for (auto& b : blobs) {
    b.y = range(0, size);
    b.x = range(0, size);
    b.ry = range(0.05, 0.14) * size;
    b.rx = range(0.05, 0.14) * size;
    for (double& v : b.color) v = range(0, 255);
  }
  const double n = size;
  const double cy = n * range(0.38, 0.62), cx = n * range(0.38, 0.62);
  const double r = n * range(0.22, 0.32);
  const double thick = std::max(1.5, r * 0.28);

  auto inside = [&](double y, double x) {
    const double dy = y - cy, dx = x - cx;
    const double d = std::hypot(dy, dx);
    switch (cls) {
      case 0: return d <= r;
      case 1: return std::abs(dy) <= r && std::abs(dx) <= r && std::fmod(dy + r + 1e-9, r * 2 / 2.5) < r * 0.4;
      case 2: return d <= r * 1.1 && (std::abs(dy - dx) <= thick || std::abs(dy + dx) <= thick);
      case 3: return d <= r && d >= r * 0.55;
      case 4: return dy <= r * 0.8 && dy >= -r && std::abs(dx) <= (dy + r) * 0.6;
      case 5: return std::abs(dy) <= r && std::abs(dx) <= r && std::fmod(dx + r + 1e-9, r * 2 / 2.5) < r * 0.4;
      case 6: return (std::abs(dy) <= thick * 0.8 && std::abs(dx) <= r) || (std::abs(dx) <= thick * 0.8 && std::abs(dy) <= r);
      default: return std::max(std::abs(dy), std::abs(dx)) <= r && std::max(std::abs(dy), std::abs(dx)) >= r - thick;
    }
  };

  Image img(size, size, 3);
  const double ca = std::cos(angle), sa = std::sin(angle);
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x) {
      const double u = ((y + 0.5) / n - 0.5) * sa + ((x + 0.5) / n - 0.5) * ca + 0.5;
      const double t = std::clamp(u, 0.0, 1.0);
      const double tex = tex_amp * std::sin(2 * 3.14159265358979323846 * tex_freq * u * 1.7 + tex_phase);
      const bool on = inside(y + 0.5, x + 0.5);
      const Blob* blob = nullptr;
      for (const auto& b : blobs) {
        const double qy = (y + 0.5 - b.y) / b.ry, qx = (x + 0.5 - b.x) / b.rx;
        if (qy * qy + qx * qx <= 1.0) blob = &b;
      }
      for (int k = 0; k < 3; ++k) {
        double base = c1[k] + (c2[k] - c1[k]) * t + tex;
        if (blob) base = blob->color[k];
        if (on) base = fg[k];
        img.at(y, x, k) = quantize(base + 8.0 * normal(rng));
      }
    }
  return img;
}

/// Balanced labelled corpus (label i mod classes), each item from its own stream.
inline Dataset synth_dataset(int classes, std::size_t n, int size, std::uint64_t seed) {
  if (classes < 2 || classes > max_synthetic_classes) throw Error(Errc::invalid_argument, "classes must lie in [2, 8]");
  Dataset d;
  d.images.resize(n);
  d.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    Rng rng(derive_seed(seed, i));
    d.labels[i] = static_cast<int>(i % static_cast<std::size_t>(classes));
    d.images[i] = synth_image(d.labels[i], size, rng);
  }
  return d;
}

/// Source resolution copy of a low-res item (Lanczos upscaling).
inline Image upscale_source(const Image& low, int source_size) {
  return scale_image(low, source_size, source_size, lanczos_kernel);
}

// ---------------------------------------------------------------------------
// Plans

enum class ExperimentKind { backdoor_curve, cleanlabel_curve, roc_backdoor, roc_cleanlabel, roc_adaptive };

inline std::string to_string(ExperimentKind k) {
  switch (k) {
    case ExperimentKind::backdoor_curve: return "backdoor-curve";
    case ExperimentKind::cleanlabel_curve: return "cleanlabel-curve";
    case ExperimentKind::roc_backdoor: return "roc-backdoor";
    case ExperimentKind::roc_cleanlabel: return "roc-cleanlabel";
    case ExperimentKind::roc_adaptive: return "roc-adaptive";
  }
  return "unknown";
}

inline std::optional<ExperimentKind> parse_experiment_kind(std::string_view s) {
  for (auto k : {ExperimentKind::backdoor_curve, ExperimentKind::cleanlabel_curve, ExperimentKind::roc_backdoor,
                 ExperimentKind::roc_cleanlabel, ExperimentKind::roc_adaptive})
    if (s == to_string(k)) return k;
  return std::nullopt;
}

inline bool is_roc(ExperimentKind k) {
  return k == ExperimentKind::roc_backdoor || k == ExperimentKind::roc_cleanlabel || k == ExperimentKind::roc_adaptive;
}

struct ExperimentPlan {
  ExperimentKind kind = ExperimentKind::backdoor_curve;
  // Poison fractions (backdoor-curve), poison counts (cleanlabel-curve) or
  // attacked-corpus sizes (roc-*; the benign corpus has the same size).
  std::vector<double> sweep{0.0, 0.01, 0.025, 0.05};
  int repetitions = 1;
  std::uint64_t seed = 1;  // repetition r runs under seed + r
  std::filesystem::path output_dir = "experiment_out";

  int classes = 4;
  std::size_t train_size = 1500;
  std::size_t test_size = 400;
  int net_size = 32;
  int source_size = 256;

  std::vector<int> targets;       // backdoor target classes; empty means all
  std::vector<std::string> arms;  // empty means every arm of the kind
  std::size_t pairs = 10;         // clean-label (target, source) pairs
  double alpha = 0.3;
  int trigger_side = 4;
  int candidates = 4;  // adaptive ROC: sources tried per attack image

  AttackParams attack;
  int epochs = 10;
  int batch_size = 32;
  double learning_rate = 0.05;
  double lr_decay = 0.9;
  double momentum = 0.9;
  double weight_decay = 5e-4;

  int jobs = 1;
  int grid_samples = 4;

  static std::vector<std::string> all_arms(ExperimentKind k) {
    if (k == ExperimentKind::backdoor_curve) return {"visible", "hidden"};
    if (k == ExperimentKind::cleanlabel_curve) return {"plain", "scaling", "adaptive"};
    return {};
  }

  std::vector<std::string> resolved_arms() const { return arms.empty() ? all_arms(kind) : arms; }

  std::vector<int> resolved_targets() const {
    if (!targets.empty()) return targets;
    std::vector<int> all(static_cast<std::size_t>(classes));
    for (int c = 0; c < classes; ++c) all[static_cast<std::size_t>(c)] = c;
    return all;
  }

  TrainConfig train_config(std::uint64_t train_seed) const {
    return TrainConfig{epochs, batch_size, learning_rate, lr_decay, momentum, weight_decay, train_seed};
  }

  void validate() const {
    auto fail = [](const std::string& m) { throw Error(Errc::invalid_argument, "plan: " + m); };
    if (sweep.empty()) fail("sweep must not be empty");
    if (repetitions < 1) fail("repetitions must be at least 1");
    if (classes < 2 || classes > max_synthetic_classes) fail("classes must lie in [2, 8]");
    if (net_size < 8) fail("net_size must be at least 8");
    if (source_size <= net_size) fail("source_size must exceed net_size");
    if (train_size < 1 || test_size < 1) fail("train_size and test_size must be positive");
    if (!(alpha >= 0.0 && alpha <= 1.0)) fail("alpha must lie in [0, 1]");
    if (trigger_side < 0 || trigger_side > net_size) fail("trigger_side must fit the network input");
    if (candidates < 1) fail("candidates must be at least 1");
    if (!(attack.epsilon >= 0.0)) fail("epsilon must be non-negative");
    if (epochs < 1 || batch_size < 1 || !(learning_rate > 0.0) || !(lr_decay > 0.0)) {
      fail("training schedule values must be positive");
    }
    if (jobs < 1) fail("jobs must be at least 1");
    if (grid_samples < 0) fail("grid_samples must be non-negative");
    for (int t : targets)
      if (t < 0 || t >= classes) fail("target class out of range");
    const auto valid = all_arms(kind);
    for (const auto& a : arms)
      if (std::find(valid.begin(), valid.end(), a) == valid.end()) fail("arm '" + a + "' not valid for " + to_string(kind));
    for (double x : sweep) {
      if (!std::isfinite(x) || x < 0.0) fail("sweep values must be finite and non-negative");
      if (kind == ExperimentKind::backdoor_curve && x > 1.0) fail("backdoor sweep values are fractions in [0, 1]");
      if (kind != ExperimentKind::backdoor_curve && x != std::floor(x)) fail("sweep values must be integers");
      if (is_roc(kind) && x < 1.0) fail("ROC corpus sizes must be at least 1");
    }
    if (kind == ExperimentKind::cleanlabel_curve && pairs < 1) fail("pairs must be at least 1");
  }
};

namespace detail {

inline std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream is(v);
  while (std::getline(is, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

inline double parse_double(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  double d = 0.0;
  try {
    d = std::stod(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != v.size()) throw Error(Errc::invalid_argument, "plan: " + key + " expects a number, got '" + v + "'");
  return d;
}

inline long long parse_int(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  long long n = 0;
  try {
    n = std::stoll(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != v.size()) throw Error(Errc::invalid_argument, "plan: " + key + " expects an integer, got '" + v + "'");
  return n;
}

inline std::string format_number(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

template <typename T>
std::string join(const std::vector<T>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ",";
    if constexpr (std::is_same_v<T, std::string>) {
      out += v[i];
    } else if constexpr (std::is_floating_point_v<T>) {
      out += format_number(v[i]);
    } else {
      out += std::to_string(v[i]);
    }
  }
  return out;
}

}  // namespace detail

inline const std::vector<std::string>& plan_keys() {
  static const std::vector<std::string> keys{
      "kind",       "sweep",         "repetitions", "seed",        "output_dir",   "classes",     "train_size",
      "test_size",  "net_size",      "source_size", "targets",     "arms",         "pairs",       "alpha",
      "trigger_side", "candidates",  "epsilon",     "kernel",      "epochs",       "batch_size",  "learning_rate",
      "lr_decay",   "momentum",      "weight_decay", "jobs",       "grid_samples"};
  return keys;
}

/// Sets one plan field from its text form; unknown keys are rejected.
inline void set_plan_value(ExperimentPlan& p, const std::string& key, const std::string& value) {
  using detail::parse_double;
  using detail::parse_int;
  auto positive_size = [&](long long n) {
    if (n < 0) throw Error(Errc::invalid_argument, "plan: " + key + " must be non-negative");
    return static_cast<std::size_t>(n);
  };
  if (key == "kind") {
    const auto k = parse_experiment_kind(value);
    if (!k) throw Error(Errc::invalid_argument, "plan: unknown kind '" + value + "'");
    p.kind = *k;
  } else if (key == "sweep") {
    p.sweep.clear();
    for (const auto& item : detail::split_list(value)) p.sweep.push_back(parse_double(key, item));
  } else if (key == "repetitions") {
    p.repetitions = static_cast<int>(parse_int(key, value));
  } else if (key == "seed") {
    const auto n = parse_int(key, value);
    if (n < 0) throw Error(Errc::invalid_argument, "plan: seed must be non-negative");
    p.seed = static_cast<std::uint64_t>(n);
  } else if (key == "output_dir") {
    p.output_dir = value;
  } else if (key == "classes") {
    p.classes = static_cast<int>(parse_int(key, value));
  } else if (key == "train_size") {
    p.train_size = positive_size(parse_int(key, value));
  } else if (key == "test_size") {
    p.test_size = positive_size(parse_int(key, value));
  } else if (key == "net_size") {
    p.net_size = static_cast<int>(parse_int(key, value));
  } else if (key == "source_size") {
    p.source_size = static_cast<int>(parse_int(key, value));
  } else if (key == "targets") {
    p.targets.clear();
    for (const auto& item : detail::split_list(value)) p.targets.push_back(static_cast<int>(parse_int(key, item)));
  } else if (key == "arms") {
    p.arms = detail::split_list(value);
  } else if (key == "pairs") {
    p.pairs = positive_size(parse_int(key, value));
  } else if (key == "alpha") {
    p.alpha = parse_double(key, value);
  } else if (key == "trigger_side") {
    p.trigger_side = static_cast<int>(parse_int(key, value));
  } else if (key == "candidates") {
    p.candidates = static_cast<int>(parse_int(key, value));
  } else if (key == "epsilon") {
    p.attack.epsilon = parse_double(key, value);
  } else if (key == "kernel") {
    const auto k = parse_kernel(value);
    if (!k) throw Error(Errc::invalid_argument, "plan: unknown kernel '" + value + "'");
    p.attack.kernel = *k;
  } else if (key == "epochs") {
    p.epochs = static_cast<int>(parse_int(key, value));
  } else if (key == "batch_size") {
    p.batch_size = static_cast<int>(parse_int(key, value));
  } else if (key == "learning_rate") {
    p.learning_rate = parse_double(key, value);
  } else if (key == "lr_decay") {
    p.lr_decay = parse_double(key, value);
  } else if (key == "momentum") {
    p.momentum = parse_double(key, value);
  } else if (key == "weight_decay") {
    p.weight_decay = parse_double(key, value);
  } else if (key == "jobs") {
    p.jobs = static_cast<int>(parse_int(key, value));
  } else if (key == "grid_samples") {
    p.grid_samples = static_cast<int>(parse_int(key, value));
  } else {
    throw Error(Errc::invalid_argument, "plan: unknown key '" + key + "'");
  }
}

/// `key = value` lines; '#' starts a comment; a key may appear once.
inline ExperimentPlan parse_plan(std::istream& in, const std::string& origin = "plan") {
  ExperimentPlan p;
  std::string line;
  std::set<std::string> seen;
  for (int lineno = 1; std::getline(in, line); ++lineno) {
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    const std::string where = origin + ":" + std::to_string(lineno) + ": ";
    if (eq == std::string::npos) throw Error(Errc::invalid_argument, where + "expected key = value");
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string value = detail::trim(line.substr(eq + 1));
    if (!seen.insert(key).second) throw Error(Errc::invalid_argument, where + "duplicate key '" + key + "'");
    try {
      set_plan_value(p, key, value);
    } catch (const Error& e) {
      std::string msg = e.what();
      const std::string prefix = std::string(to_string(e.code())) + ": ";
      if (msg.rfind(prefix, 0) == 0) msg.erase(0, prefix.size());
      throw Error(e.code(), where + msg);
    }
  }
  p.validate();
  return p;
}

inline ExperimentPlan load_plan(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::unreadable_file, "cannot open plan " + path.string());
  return parse_plan(in, path.string());
}

/// Every field, one `key = value` line each, in plan_keys() order. Without
/// runtime fields, output_dir and jobs are left out so that artifacts do not
/// depend on where or how parallel the run was.
inline std::string plan_to_text(const ExperimentPlan& p, bool runtime_fields = true) {
  std::ostringstream os;
  os << "kind = " << to_string(p.kind) << '\n'
     << "sweep = " << detail::join(p.sweep) << '\n'
     << "repetitions = " << p.repetitions << '\n'
     << "seed = " << p.seed << '\n';
  if (runtime_fields) os << "output_dir = " << p.output_dir.string() << '\n';
  os << "classes = " << p.classes << '\n'
     << "train_size = " << p.train_size << '\n'
     << "test_size = " << p.test_size << '\n'
     << "net_size = " << p.net_size << '\n'
     << "source_size = " << p.source_size << '\n'
     << "targets = " << detail::join(p.resolved_targets()) << '\n'
     << "arms = " << detail::join(p.resolved_arms()) << '\n'
     << "pairs = " << p.pairs << '\n'
     << "alpha = " << detail::format_number(p.alpha) << '\n'
     << "trigger_side = " << p.trigger_side << '\n'
     << "candidates = " << p.candidates << '\n'
     << "epsilon = " << detail::format_number(p.attack.epsilon) << '\n'
     << "kernel = " << to_string(p.attack.kernel) << '\n'
     << "epochs = " << p.epochs << '\n'
     << "batch_size = " << p.batch_size << '\n'
     << "learning_rate = " << detail::format_number(p.learning_rate) << '\n'
     << "lr_decay = " << detail::format_number(p.lr_decay) << '\n'
     << "momentum = " << detail::format_number(p.momentum) << '\n'
     << "weight_decay = " << detail::format_number(p.weight_decay) << '\n';
  if (runtime_fields) os << "jobs = " << p.jobs << '\n';
  os << "grid_samples = " << p.grid_samples << '\n';
  return os.str();
}

using ProgressFn = std::function<void(const std::string&)>;

// ---------------------------------------------------------------------------
// Success-rate curves

struct CurveCell {
  std::string arm;
  double x = 0.0;
  int repetition = 0;
  std::uint64_t seed = 0;
  int target_class = 0;
  int source_class = -1;  // clean-label only
  double success_rate = 0.0;
  double clean_accuracy = 0.0;
  std::size_t manipulated = 0;
  double max_residual = 0.0;  // over hidden items
  std::string error;          // non-empty: the cell failed
};

struct CurveRow {
  std::string arm;
  double x = 0.0;
  double success_rate = std::numeric_limits<double>::quiet_NaN();  // mean over successful cells
  double clean_accuracy = std::numeric_limits<double>::quiet_NaN();
  std::size_t cells = 0;
  std::size_t errors = 0;
};

struct CurveTable {
  ExperimentKind kind = ExperimentKind::backdoor_curve;
  std::vector<CurveRow> rows;  // one per (arm, sweep value), plan order
  std::vector<CurveCell> cells;

  const CurveRow* find(const std::string& arm, double x) const {
    for (const auto& r : rows)
      if (r.arm == arm && r.x == x) return &r;
    return nullptr;
  }
};

namespace detail {

inline std::uint64_t rep_seed(const ExperimentPlan& p, int r) { return p.seed + static_cast<std::uint64_t>(r); }

inline Dataset with_sources(const Dataset& low, const std::vector<std::size_t>& chosen, int source_size) {
  Dataset d = low;
  for (std::size_t i : chosen) d.images[i] = upscale_source(low.images[i], source_size);
  return d;
}

inline void aggregate(CurveTable& t, const ExperimentPlan& p) {
  for (const auto& arm : p.resolved_arms())
    for (double x : p.sweep) {
      CurveRow row{arm, x};
      double s = 0.0, a = 0.0;
      std::size_t ok = 0;
      for (const auto& c : t.cells) {
        if (c.arm != arm || c.x != x) continue;
        ++row.cells;
        if (!c.error.empty()) {
          ++row.errors;
          continue;
        }
        s += c.success_rate;
        a += c.clean_accuracy;
        ++ok;
      }
      if (ok) {
        row.success_rate = s / double(ok);
        row.clean_accuracy = a / double(ok);
      }
      t.rows.push_back(row);
    }
}

struct RepCorpus {
  Dataset train, test;
};

inline RepCorpus rep_corpus(const ExperimentPlan& p, int r) {
  const auto seed = rep_seed(p, r);
  return {synth_dataset(p.classes, p.train_size, p.net_size, derive_seed(seed, 1)),
          synth_dataset(p.classes, p.test_size, p.net_size, derive_seed(seed, 2))};
}

inline TriggerSpec plan_trigger(const ExperimentPlan& p) {
  TriggerSpec t;
  t.side = p.trigger_side;
  return t;
}

inline Architecture plan_architecture(const ExperimentPlan& p) {
  return default_architecture(3, p.net_size, p.net_size, p.classes);
}

template <typename Fn>
void run_cells(std::vector<CurveCell>& cells, int jobs, const ProgressFn& log, Fn&& body) {
  parallel_for(cells.size(), jobs, [&](std::size_t i) {
    try {
      body(cells[i]);
    } catch (const std::exception& e) {
      cells[i].error = e.what();
    }
  });
  if (log) {
    std::size_t failed = 0;
    for (const auto& c : cells) failed += !c.error.empty();
    log(std::to_string(cells.size()) + " cells done, " + std::to_string(failed) + " failed");
  }
}

}  // namespace detail

/// Backdoor success rate and clean accuracy per (arm, poison fraction),
/// averaged over repetitions and target classes. The visible arm stores
/// triggered low-res items; the hidden arm stores scaling-attack images at
/// source resolution. Fraction 0 is the unpoisoned model.
inline CurveTable run_backdoor_curve(const ExperimentPlan& plan, const ProgressFn& log = {}) {
  plan.validate();
  if (plan.kind != ExperimentKind::backdoor_curve) throw Error(Errc::invalid_argument, "plan is not a backdoor curve");
  const auto arms = plan.resolved_arms();
  const auto targets = plan.resolved_targets();
  const auto arch = detail::plan_architecture(plan);
  const auto trig = detail::plan_trigger(plan);
  const bool need_baseline = std::find(plan.sweep.begin(), plan.sweep.end(), 0.0) != plan.sweep.end();

  CurveTable table;
  table.kind = plan.kind;
  for (int r = 0; r < plan.repetitions; ++r) {
    const auto seed = detail::rep_seed(plan, r);
    if (log) log("repetition " + std::to_string(r) + " (seed " + std::to_string(seed) + ")");
    const auto corpus = detail::rep_corpus(plan, r);
    const auto tcfg = plan.train_config(derive_seed(seed, 3));

    std::optional<Model> baseline;
    std::string baseline_error;
    if (need_baseline) {
      try {
        baseline = train(corpus.train, arch, tcfg);
      } catch (const std::exception& e) {
        baseline_error = e.what();
      }
    }
    std::vector<CurveCell> cells;
    for (const auto& arm : arms)
      for (double x : plan.sweep)
        for (int t : targets) {
          CurveCell c;
          c.arm = arm;
          c.x = x;
          c.repetition = r;
          c.seed = seed;
          c.target_class = t;
          cells.push_back(c);
        }

    detail::run_cells(cells, plan.jobs, log, [&](CurveCell& c) {
      const Dataset test_poisoned =
          poison_testset(corpus.test, trig, false, plan.attack, c.target_class, plan.net_size, plan.net_size);
      if (c.x == 0.0) {
        if (!baseline) throw Error(Errc::invalid_argument, "baseline training failed: " + baseline_error);
        c.success_rate = attack_success_rate(*baseline, test_poisoned, c.target_class);
        c.clean_accuracy = clean_accuracy(*baseline, corpus.test);
        return;
      }
      PoisonConfig pc;
      pc.mode = PoisonMode::backdoor;
      pc.target_class = c.target_class;
      pc.fraction = c.x;
      pc.hide_at = c.arm == "hidden" ? HideAt::train : HideAt::none;
      pc.attack = plan.attack;
      pc.net_h = pc.net_w = plan.net_size;
      // Same selection seed for every arm and fraction: smaller fractions
      // poison a prefix of the larger selections.
      const auto poison_seed = derive_seed(seed, 100 + static_cast<std::uint64_t>(c.target_class));
      const auto chosen = poison_selection(corpus.train.labels, pc, poison_seed);
      const Dataset input =
          pc.hide_at == HideAt::none ? corpus.train : detail::with_sources(corpus.train, chosen, plan.source_size);
      const auto pd = poison_backdoor(input, pc, trig, poison_seed);
      c.manipulated = pd.manipulated_count();
      for (const auto& rec : pd.manifest) c.max_residual = std::max(c.max_residual, rec.residual_inf);
      const Model m = train(network_inputs(pd.data, plan.net_size, plan.net_size, plan.attack.kernel), arch, tcfg);
      c.success_rate = attack_success_rate(m, test_poisoned, c.target_class);
      c.clean_accuracy = clean_accuracy(m, corpus.test);
    });
    table.cells.insert(table.cells.end(), cells.begin(), cells.end());
  }
  detail::aggregate(table, plan);
  return table;
}

/// Clean-label success per (arm, poison count): the fraction of (target,
/// source) pairs for which the held-out source image Z is classified as the
/// target after training. Arms: plain blends, scaling-hidden blends, and
/// adaptive scaling-hidden blends. Count 0 is the unpoisoned model.
inline CurveTable run_cleanlabel_curve(const ExperimentPlan& plan, const ProgressFn& log = {}) {
  plan.validate();
  if (plan.kind != ExperimentKind::cleanlabel_curve) throw Error(Errc::invalid_argument, "plan is not a clean-label curve");
  const auto arms = plan.resolved_arms();
  const auto arch = detail::plan_architecture(plan);
  const bool need_baseline = std::find(plan.sweep.begin(), plan.sweep.end(), 0.0) != plan.sweep.end();

  CurveTable table;
  table.kind = plan.kind;
  for (int r = 0; r < plan.repetitions; ++r) {
    const auto seed = detail::rep_seed(plan, r);
    if (log) log("repetition " + std::to_string(r) + " (seed " + std::to_string(seed) + ")");
    const auto corpus = detail::rep_corpus(plan, r);
    const auto tcfg = plan.train_config(derive_seed(seed, 3));
    const auto class_pairs = sample_class_pairs(plan.classes, plan.pairs, derive_seed(seed, 4));

    // Z for pair k: a held-out test image of the source class.
    std::vector<std::size_t> z_index(class_pairs.size());
    for (std::size_t k = 0; k < class_pairs.size(); ++k) {
      std::vector<std::size_t> pool;
      for (std::size_t i = 0; i < corpus.test.size(); ++i)
        if (corpus.test.labels[i] == class_pairs[k].second) pool.push_back(i);
      if (pool.empty()) throw Error(Errc::insufficient_items, "test set has no image of a source class");
      Rng rng(derive_seed(seed, 200 + k));
      z_index[k] = pool[static_cast<std::size_t>(uniform_index(rng, pool.size()))];
    }

    std::optional<Model> baseline;
    std::string baseline_error;
    if (need_baseline) {
      try {
        baseline = train(corpus.train, arch, tcfg);
      } catch (const std::exception& e) {
        baseline_error = e.what();
      }
    }
    std::vector<CurveCell> cells;
    std::vector<std::size_t> pair_of;
    for (const auto& arm : arms)
      for (double x : plan.sweep)
        for (std::size_t k = 0; k < class_pairs.size(); ++k) {
          CurveCell c;
          c.arm = arm;
          c.x = x;
          c.repetition = r;
          c.seed = seed;
          c.target_class = class_pairs[k].first;
          c.source_class = class_pairs[k].second;
          cells.push_back(c);
          pair_of.push_back(k);
        }

    detail::run_cells(cells, plan.jobs, log, [&](CurveCell& c) {
      const std::size_t k = pair_of[static_cast<std::size_t>(&c - cells.data())];
      const Image& z = corpus.test.images[z_index[k]];
      const Model* model = nullptr;
      std::optional<Model> trained;
      if (c.x == 0.0) {
        if (!baseline) throw Error(Errc::invalid_argument, "baseline training failed: " + baseline_error);
        model = &*baseline;
      } else {
        PoisonConfig pc;
        pc.mode = PoisonMode::clean_label;
        pc.target_class = c.target_class;
        pc.source_class = c.source_class;
        pc.count = static_cast<std::size_t>(c.x);
        pc.alpha = plan.alpha;
        pc.hide_at = c.arm == "plain" ? HideAt::none : HideAt::train;
        pc.adaptive = c.arm == "adaptive";
        pc.attack = plan.attack;
        pc.net_h = pc.net_w = plan.net_size;
        const auto poison_seed = derive_seed(seed, 300 + k);
        const auto chosen = poison_selection(corpus.train.labels, pc, poison_seed);
        const Dataset input =
            pc.hide_at == HideAt::none ? corpus.train : detail::with_sources(corpus.train, chosen, plan.source_size);
        const auto pd = poison_cleanlabel(input, pc, z, poison_seed);
        c.manipulated = pd.manipulated_count();
        for (const auto& rec : pd.manifest) c.max_residual = std::max(c.max_residual, rec.residual_inf);
        trained = train(network_inputs(pd.data, plan.net_size, plan.net_size, plan.attack.kernel), arch, tcfg);
        model = &*trained;
      }
      c.success_rate = predict(*model, z).label == c.target_class ? 1.0 : 0.0;
      c.clean_accuracy = clean_accuracy(*model, corpus.test);
    });
    table.cells.insert(table.cells.end(), cells.begin(), cells.end());
  }
  detail::aggregate(table, plan);
  return table;
}

// ---------------------------------------------------------------------------
// Detection ROC corpora

struct RocScore {
  int repetition = 0;
  std::size_t corpus_size = 0;
  std::size_t index = 0;
  bool attacked = false;
  double hist_score = 0.0;
  double scatter_score = 0.0;
  std::string error;
};

struct RocSummary {
  std::string defense;  // "histogram" or "scatter"
  std::size_t corpus_size = 0;
  std::size_t attacked = 0;
  std::size_t benign = 0;
  double auc = std::numeric_limits<double>::quiet_NaN();
  double tpr_at_1 = std::numeric_limits<double>::quiet_NaN();
  double tpr_at_5 = std::numeric_limits<double>::quiet_NaN();
  RocCurve curve;
};

struct RocReport {
  ExperimentKind kind = ExperimentKind::roc_backdoor;
  std::vector<RocSummary> summaries;  // per sweep value: histogram, scatter
  std::vector<RocScore> scores;

  const RocSummary* find(const std::string& defense, std::size_t corpus_size) const {
    for (const auto& s : summaries)
      if (s.defense == defense && s.corpus_size == corpus_size) return &s;
    return nullptr;
  }
};

namespace detail {

/// Images of one corpus item: a benign source, the attack source(s) and Z.
struct RocItem {
  Image benign;
  std::vector<Image> sources;  // [0] is the plain attack's source
  Image z;
};

inline RocItem roc_item(const ExperimentPlan& p, std::uint64_t seed, std::size_t i) {
  const int cls = static_cast<int>(i % static_cast<std::size_t>(p.classes));
  auto make = [&](int c, std::uint64_t tag) {
    Rng rng(derive_seed(seed, tag));
    return upscale_source(synth_image(c, p.net_size, rng), p.source_size);
  };
  RocItem item;
  item.benign = make(cls, 0x10000000ULL + i);
  const std::size_t pool = p.kind == ExperimentKind::roc_adaptive ? static_cast<std::size_t>(p.candidates) : 1;
  for (std::size_t j = 0; j < pool; ++j) item.sources.push_back(make(cls, 0x20000000ULL + i * 1024 + j));
  const int z_cls = (cls + 1 + static_cast<int>(i / static_cast<std::size_t>(p.classes)) % (p.classes - 1)) % p.classes;
  Rng zr(derive_seed(seed, 0x30000000ULL + i));
  item.z = synth_image(z_cls, p.net_size, zr);
  return item;
}

/// The attack image for one corpus item under the plan's kind.
inline Image roc_attack_image(const ExperimentPlan& p, const RocItem& item) {
  const int n = p.net_size;
  const Kernel& k = p.attack.kernel;
  switch (p.kind) {
    case ExperimentKind::roc_backdoor: {
      const Image& s = item.sources[0];
      return scaling_attack(s, embed_trigger(scale_image(s, n, n, k), plan_trigger(p)), p.attack).attack_image;
    }
    case ExperimentKind::roc_cleanlabel: {
      const Image& s = item.sources[0];
      return scaling_attack(s, blend(item.z, scale_image(s, n, n, k), p.alpha), p.attack).attack_image;
    }
    case ExperimentKind::roc_adaptive: {
      const TargetBuilder build = [&](const Image& s, std::size_t) { return blend(item.z, scale_image(s, n, n, k), p.alpha); };
      return select_candidates(item.sources, build, p.attack, 1).front().result.attack_image;
    }
    default: throw Error(Errc::invalid_argument, "not a ROC experiment");
  }
}

}  // namespace detail

/// Equal-size attacked and benign corpora per sweep value and repetition,
/// scored by both defenses. Curves pool all repetitions of a sweep value.
inline RocReport run_roc(const ExperimentPlan& plan, const ProgressFn& log = {}) {
  plan.validate();
  if (!is_roc(plan.kind)) throw Error(Errc::invalid_argument, "plan is not a ROC experiment");
  RocReport report;
  report.kind = plan.kind;
  for (double xv : plan.sweep) {
    const auto n = static_cast<std::size_t>(xv);
    std::vector<RocScore> scores;
    for (int r = 0; r < plan.repetitions; ++r) {
      const auto seed = detail::rep_seed(plan, r);
      std::vector<RocScore> rep(2 * n);
      parallel_for(n, plan.jobs, [&](std::size_t i) {
        RocScore& b = rep[2 * i];
        RocScore& a = rep[2 * i + 1];
        b.repetition = a.repetition = r;
        b.corpus_size = a.corpus_size = n;
        b.index = a.index = i;
        a.attacked = true;
        try {
          const auto item = detail::roc_item(plan, seed, i);
          const auto rb = detect(item.benign, plan.net_size, plan.net_size, plan.attack.kernel);
          b.hist_score = rb.hist_score;
          b.scatter_score = rb.scatter_score;
          try {
            const auto ra = detect(detail::roc_attack_image(plan, item), plan.net_size, plan.net_size, plan.attack.kernel);
            a.hist_score = ra.hist_score;
            a.scatter_score = ra.scatter_score;
          } catch (const std::exception& e) {
            a.error = e.what();
          }
        } catch (const std::exception& e) {
          b.error = a.error = e.what();
        }
      });
      scores.insert(scores.end(), rep.begin(), rep.end());
      if (log) log("corpus size " + std::to_string(n) + ", repetition " + std::to_string(r) + " scored");
    }
    for (const std::string defense : {"histogram", "scatter"}) {
      std::vector<double> att, ben;
      for (const auto& s : scores) {
        if (!s.error.empty()) continue;
        (s.attacked ? att : ben).push_back(defense == "histogram" ? s.hist_score : s.scatter_score);
      }
      RocSummary sum;
      sum.defense = defense;
      sum.corpus_size = n;
      sum.attacked = att.size();
      sum.benign = ben.size();
      if (!att.empty() && !ben.empty()) {
        sum.curve = roc(att, ben);
        sum.auc = sum.curve.auc;
        sum.tpr_at_1 = sum.curve.tpr_at(0.01);
        sum.tpr_at_5 = sum.curve.tpr_at(0.05);
      }
      report.summaries.push_back(std::move(sum));
    }
    report.scores.insert(report.scores.end(), scores.begin(), scores.end());
  }
  return report;
}

// ---------------------------------------------------------------------------
// Artifacts

/// Rows of images tiled on a white canvas; each image is resized (nearest) to
/// cell x cell and lifted to RGB.
inline Image make_grid(const std::vector<std::vector<Image>>& rows, int cell, int gap = 4) {
  std::size_t cols = 0;
  for (const auto& r : rows) cols = std::max(cols, r.size());
  if (rows.empty() || cols == 0 || cell < 1) throw Error(Errc::invalid_argument, "empty grid");
  const int w = static_cast<int>(cols) * (cell + gap) + gap;
  const int h = static_cast<int>(rows.size()) * (cell + gap) + gap;
  Image canvas(h, w, 3, 255);
  for (std::size_t ri = 0; ri < rows.size(); ++ri)
    for (std::size_t ci = 0; ci < rows[ri].size(); ++ci) {
      const Image& img = rows[ri][ci];
      const Image tile = (img.height == cell && img.width == cell) ? img : scale_image(img, cell, cell, nearest_kernel);
      const int oy = gap + static_cast<int>(ri) * (cell + gap);
      const int ox = gap + static_cast<int>(ci) * (cell + gap);
      for (int y = 0; y < cell; ++y)
        for (int x = 0; x < cell; ++x)
          for (int k = 0; k < 3; ++k) canvas.at(oy + y, ox + x, k) = tile.at(y, x, tile.channels == 3 ? k : 0);
    }
  return canvas;
}

/// 64-bit FNV-1a of a file's bytes.
inline std::uint64_t file_checksum(const std::filesystem::path& path) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::uint8_t b : detail::read_file_bytes(path)) {
    h ^= b;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline void write_curve_csv(const CurveTable& t, std::ostream& rows, std::ostream& cells) {
  using detail::format_number;
  rows << "arm,x,success_rate,clean_accuracy,cells,errors\n";
  for (const auto& r : t.rows) {
    rows << r.arm << ',' << format_number(r.x) << ',' << format_number(r.success_rate) << ','
         << format_number(r.clean_accuracy) << ',' << r.cells << ',' << r.errors << '\n';
  }
  cells << "arm,x,repetition,seed,target_class,source_class,success_rate,clean_accuracy,manipulated,max_residual,error\n";
  for (const auto& c : t.cells) {
    std::string err = c.error;
    std::replace(err.begin(), err.end(), ',', ';');
    std::replace(err.begin(), err.end(), '\n', ' ');
    cells << c.arm << ',' << format_number(c.x) << ',' << c.repetition << ',' << c.seed << ',' << c.target_class << ','
          << c.source_class << ',' << format_number(c.success_rate) << ',' << format_number(c.clean_accuracy) << ','
          << c.manipulated << ',' << format_number(c.max_residual) << ',' << err << '\n';
  }
}

inline void write_roc_summary_csv(const RocReport& r, std::ostream& out) {
  using detail::format_number;
  out << "kind,corpus_size,defense,attacked,benign,auc,tpr_at_1pct_fpr,tpr_at_5pct_fpr\n";
  for (const auto& s : r.summaries) {
    out << to_string(r.kind) << ',' << s.corpus_size << ',' << s.defense << ',' << s.attacked << ',' << s.benign << ','
        << format_number(s.auc) << ',' << format_number(s.tpr_at_1) << ',' << format_number(s.tpr_at_5) << '\n';
  }
}

inline void write_roc_scores_csv(const RocReport& r, std::ostream& out) {
  using detail::format_number;
  out << "corpus_size,repetition,index,role,hist_score,scatter_score,error\n";
  for (const auto& s : r.scores) {
    std::string err = s.error;
    std::replace(err.begin(), err.end(), ',', ';');
    out << s.corpus_size << ',' << s.repetition << ',' << s.index << ',' << (s.attacked ? "attack" : "benign") << ','
        << format_number(s.hist_score) << ',' << format_number(s.scatter_score) << ',' << err << '\n';
  }
}

namespace detail {

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw Error(Errc::io_failure, "cannot write " + path.string());
}

/// Before/after rows for the first poisoned items of the plan's first
/// repetition at its largest sweep value.
inline std::vector<std::vector<Image>> sample_rows(const ExperimentPlan& p) {
  std::vector<std::vector<Image>> rows;
  const int n = p.net_size;
  const Kernel& k = p.attack.kernel;
  const auto seed = rep_seed(p, 0);
  if (is_roc(p.kind)) {
    for (int i = 0; i < p.grid_samples; ++i) {
      const auto item = roc_item(p, seed, static_cast<std::size_t>(i));
      const Image a = roc_attack_image(p, item);
      rows.push_back({item.sources[0], a, scale_image(a, n, n, k), down_up(a, n, n, k)});
    }
    return rows;
  }
  const auto corpus = rep_corpus(p, 0);
  for (int i = 0; i < p.grid_samples && static_cast<std::size_t>(i) < corpus.train.size(); ++i) {
    const Image src = upscale_source(corpus.train.images[static_cast<std::size_t>(i)], p.source_size);
    Image target;
    if (p.kind == ExperimentKind::backdoor_curve) {
      target = embed_trigger(scale_image(src, n, n, k), plan_trigger(p));
    } else {
      Rng rng(derive_seed(seed, 0x40000000ULL + static_cast<std::uint64_t>(i)));
      const int zc = (corpus.train.labels[static_cast<std::size_t>(i)] + 1) % p.classes;
      target = blend(synth_image(zc, n, rng), scale_image(src, n, n, k), p.alpha);
    }
    const Image a = scaling_attack(src, target, p.attack).attack_image;
    rows.push_back({src, target, a, scale_image(a, n, n, k)});
  }
  return rows;
}

}  // namespace detail

struct ExperimentOutcome {
  std::optional<CurveTable> curve;
  std::optional<RocReport> roc;
  std::vector<std::filesystem::path> files;  // written, relative to output_dir, sorted
};

/// Runs the plan and writes plan.txt, result CSVs, samples.png (if
/// grid_samples > 0) and checksums.txt into plan.output_dir.
inline ExperimentOutcome run_experiment(const ExperimentPlan& plan, const ProgressFn& log = {}) {
  plan.validate();
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(plan.output_dir, ec);
  if (ec) throw Error(Errc::io_failure, "cannot create " + plan.output_dir.string() + ": " + ec.message());
  const fs::path dir = plan.output_dir;

  ExperimentOutcome out;
  std::vector<fs::path> files{"plan.txt"};
  detail::write_text(dir / "plan.txt", plan_to_text(plan, false));

  if (is_roc(plan.kind)) {
    out.roc = run_roc(plan, log);
    std::ostringstream summary, scores;
    write_roc_summary_csv(*out.roc, summary);
    write_roc_scores_csv(*out.roc, scores);
    detail::write_text(dir / "roc_summary.csv", summary.str());
    detail::write_text(dir / "roc_scores.csv", scores.str());
    files.insert(files.end(), {"roc_summary.csv", "roc_scores.csv"});
    for (const auto& s : out.roc->summaries) {
      if (s.curve.points.empty()) continue;
      const std::string name = "roc_" + s.defense + "_n" + std::to_string(s.corpus_size) + ".csv";
      std::ostringstream csv;
      write_roc_csv(s.curve, csv);
      detail::write_text(dir / name, csv.str());
      files.emplace_back(name);
    }
  } else {
    out.curve = plan.kind == ExperimentKind::backdoor_curve ? run_backdoor_curve(plan, log) : run_cleanlabel_curve(plan, log);
    const std::string stem = plan.kind == ExperimentKind::backdoor_curve ? "backdoor_curve" : "cleanlabel_curve";
    std::ostringstream rows, cells;
    write_curve_csv(*out.curve, rows, cells);
    detail::write_text(dir / (stem + ".csv"), rows.str());
    detail::write_text(dir / (stem + "_cells.csv"), cells.str());
    files.insert(files.end(), {stem + ".csv", stem + "_cells.csv"});
  }
  if (plan.grid_samples > 0) {
    save_image(make_grid(detail::sample_rows(plan), plan.source_size), dir / "samples.png");
    files.emplace_back("samples.png");
  }
  std::sort(files.begin(), files.end());
  std::ostringstream sums;
  for (const auto& f : files) {
    char hex[17];
    std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(file_checksum(dir / f)));
    sums << hex << "  " << f.string() << '\n';
  }
  detail::write_text(dir / "checksums.txt", sums.str());
  files.emplace_back("checksums.txt");
  out.files = files;
  return out;
}

}  // namespace scalepoison
