// Acceptance suite: one PASS/FAIL line per criterion on stdout, progress on
// stderr. Exit status 0 iff every selected criterion passes.
//
//   acceptance [--only 1,4,7] [--jobs N] [--quiet]

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "qp_oracle.hpp"
#include "scalepoison/scalepoison.hpp"
#include "test_support.hpp"

namespace sp = scalepoison;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

struct Options {
  std::set<int> only;
  int jobs = 1;
  bool quiet = false;
};

Options g_opts;

void progress(const std::string& msg) {
  if (!g_opts.quiet) std::cerr << "  .. " << msg << '\n';
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// 1 ---------------------------------------------------------------------------

Verdict qp_oracle_equivalence() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(0xacce0001);
  int worse = 0, violated = 0, infeasible = 0;
  double worst_gap = -INFINITY;
  for (int trial = 0; trial < 200; ++trial) {
    const auto q = sp::testing::random_feasible_qp(rng, 8, 4);
    const auto sol = sp::solve_1d_qp(q.W, q.s, q.t, q.eps);
    const auto oracle = sp::testing::brute_force_band_qp(q.W, q.s, q.t, q.eps);
    if (!sol.feasible || !oracle.feasible) {
      ++infeasible;
      continue;
    }
    worst_gap = std::max(worst_gap, sol.objective - oracle.objective);
    if (sol.objective > oracle.objective + 1e-6) ++worse;
    bool ok = true;
    for (double v : sol.x) ok = ok && v >= 0.0 && v <= 255.0;
    for (int i = 0; i < q.W.rows; ++i) {
      double v = 0.0;
      for (int j = 0; j < q.W.cols; ++j) v += q.W(i, j) * sol.x[static_cast<std::size_t>(j)];
      ok = ok && std::abs(v - q.t[static_cast<std::size_t>(i)]) <= q.eps + 1e-9;
    }
    violated += !ok;
  }
  const double secs = seconds_since(t0);
  Verdict v;
  v.pass = worse == 0 && violated == 0 && infeasible == 0 && secs < 60.0;
  v.detail = "200 instances, worse-than-oracle=" + std::to_string(worse) + " constraint-violations=" +
             std::to_string(violated) + " infeasible=" + std::to_string(infeasible) +
             " max(obj-oracle)=" + fmt("%.3g", worst_gap) + " time=" + fmt("%.1fs", secs);
  return v;
}

// 2 ---------------------------------------------------------------------------

// Written from the half-pixel bilinear definition, one output pixel at a
// time; shares no code with the library's tap tables.
sp::Image direct_bilinear(const sp::Image& img, int dh, int dw) {
  sp::Image out(dh, dw, img.channels);
  auto coord = [](int j, int src, int dst, int& i0, int& i1, double& f) {
    const double x = (j + 0.5) * src / dst - 0.5;
    const int fl = static_cast<int>(std::floor(x));
    f = x - fl;
    i0 = std::clamp(fl, 0, src - 1);
    i1 = std::clamp(fl + 1, 0, src - 1);
  };
  for (int r = 0; r < dh; ++r) {
    int r0, r1;
    double fr;
    coord(r, img.height, dh, r0, r1, fr);
    for (int c = 0; c < dw; ++c) {
      int c0, c1;
      double fc;
      coord(c, img.width, dw, c0, c1, fc);
      for (int ch = 0; ch < img.channels; ++ch) {
        const double v = (1 - fr) * ((1 - fc) * img.at(r0, c0, ch) + fc * img.at(r0, c1, ch)) +
                         fr * ((1 - fc) * img.at(r1, c0, ch) + fc * img.at(r1, c1, ch));
        out.at(r, c, ch) = static_cast<std::uint8_t>(std::clamp(std::floor(v + 0.5), 0.0, 255.0));
      }
    }
  }
  return out;
}

Verdict attack_bit_level() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(0xacce0002);
  sp::AttackParams params;
  params.epsilon = 1.0;
  params.kernel = sp::bilinear_kernel;
  int feasible = 0, breaches = 0, lib_breaches = 0;
  int worst = 0;
  for (int i = 0; i < 50; ++i) {
    const auto source = sp::testing::random_image(rng, 256, 256, 3);
    const auto target = sp::testing::random_image(rng, 32, 32, 3);
    const auto res = sp::scaling_attack(source, target, params);
    if (!res.feasible) continue;
    ++feasible;
    const int d = sp::max_abs_difference(direct_bilinear(res.attack_image, 32, 32), target);
    worst = std::max(worst, d);
    breaches += d > 1;
    lib_breaches += sp::max_abs_difference(sp::scale_image(res.attack_image, 32, 32, sp::bilinear_kernel), target) > 1;
    if (i % 10 == 9) progress("attack " + std::to_string(i + 1) + "/50");
  }
  const double secs = seconds_since(t0);
  Verdict v;
  v.pass = feasible > 0 && breaches == 0 && lib_breaches == 0 && secs < 300.0;
  v.detail = "feasible=" + std::to_string(feasible) + "/50 max|scale(A)-T|=" + std::to_string(worst) +
             " breaches(direct)=" + std::to_string(breaches) + " breaches(library)=" + std::to_string(lib_breaches) +
             " time=" + fmt("%.1fs", secs);
  return v;
}

// 3 ---------------------------------------------------------------------------

Verdict scaling_equivalence() {
  std::mt19937_64 rng(0xacce0003);
  std::uniform_int_distribution<int> side(1, 96);
  int mismatches = 0, checks = 0;
  for (int i = 0; i < 1000; ++i) {
    const int h = side(rng), w = side(rng), dh = side(rng), dw = side(rng);
    const int c = (i % 2) ? 3 : 1;
    const auto img = sp::testing::random_image(rng, h, w, c);
    for (const auto& k : {sp::nearest_kernel, sp::bilinear_kernel}) {
      ++checks;
      mismatches += !(sp::apply_spec(sp::make_spec(k, h, w, dh, dw), img) == sp::scale_image(img, dh, dw, k));
    }
  }
  return {mismatches == 0, std::to_string(checks) + " image/kernel pairs, mismatches=" + std::to_string(mismatches)};
}

// 4-6 -------------------------------------------------------------------------

sp::ExperimentPlan roc_plan(sp::ExperimentKind kind, std::size_t n) {
  sp::ExperimentPlan p;
  p.kind = kind;
  p.sweep = {static_cast<double>(n)};
  p.seed = 11;
  p.classes = 4;
  p.net_size = 32;
  p.source_size = 256;
  p.trigger_side = 4;
  p.alpha = 0.3;
  p.candidates = 4;
  p.attack.epsilon = 1.0;
  p.attack.kernel = sp::bilinear_kernel;
  p.jobs = g_opts.jobs;
  return p;
}

struct RocNumbers {
  double hist_auc = NAN, scatter_auc = NAN, hist_tpr5 = NAN, scatter_tpr5 = NAN, hist_tpr1 = NAN;
  std::size_t attacked = 0, benign = 0, errors = 0;
};

RocNumbers roc_numbers(const sp::RocReport& rep, std::size_t n) {
  RocNumbers r;
  const auto* h = rep.find("histogram", n);
  const auto* s = rep.find("scatter", n);
  if (h) {
    r.hist_auc = h->auc;
    r.hist_tpr5 = h->tpr_at_5;
    r.hist_tpr1 = h->tpr_at_1;
    r.attacked = h->attacked;
    r.benign = h->benign;
  }
  if (s) {
    r.scatter_auc = s->auc;
    r.scatter_tpr5 = s->tpr_at_5;
  }
  for (const auto& sc : rep.scores) r.errors += !sc.error.empty();
  return r;
}

std::string describe(const RocNumbers& r) {
  return "attacked=" + std::to_string(r.attacked) + " benign=" + std::to_string(r.benign) +
         " errors=" + std::to_string(r.errors) + " AUC(hist)=" + fmt("%.3f", r.hist_auc) +
         " AUC(scatter)=" + fmt("%.3f", r.scatter_auc) + " TPR@5%(hist)=" + fmt("%.3f", r.hist_tpr5) +
         " TPR@1%(hist)=" + fmt("%.3f", r.hist_tpr1) + " TPR@5%(scatter)=" + fmt("%.3f", r.scatter_tpr5);
}

Verdict backdoor_blindness() {
  const auto rep = sp::run_roc(roc_plan(sp::ExperimentKind::roc_backdoor, 100), progress);
  const auto r = roc_numbers(rep, 100);
  return {r.attacked >= 100 && r.benign >= 100 && r.hist_auc <= 0.75 && r.scatter_auc <= 0.75,
          describe(r) + " (need both AUC <= 0.75)"};
}

RocNumbers g_cleanlabel;  // shared by criteria 5 and 6

Verdict cleanlabel_detectability() {
  const auto rep = sp::run_roc(roc_plan(sp::ExperimentKind::roc_cleanlabel, 200), progress);
  g_cleanlabel = roc_numbers(rep, 200);
  const auto& r = g_cleanlabel;
  return {r.attacked >= 200 && r.benign >= 200 && r.hist_tpr5 >= 0.80 && r.hist_auc > r.scatter_auc,
          describe(r) + " (need TPR@5%(hist) >= 0.80 and AUC(hist) > AUC(scatter))"};
}

Verdict adaptive_evasion() {
  if (std::isnan(g_cleanlabel.hist_auc)) {
    g_cleanlabel = roc_numbers(sp::run_roc(roc_plan(sp::ExperimentKind::roc_cleanlabel, 200), progress), 200);
  }
  const auto rep = sp::run_roc(roc_plan(sp::ExperimentKind::roc_adaptive, 200), progress);
  const auto r = roc_numbers(rep, 200);
  const double auc_drop = g_cleanlabel.hist_auc - r.hist_auc;
  const double tpr_drop = g_cleanlabel.hist_tpr5 > 0 ? 1.0 - r.hist_tpr5 / g_cleanlabel.hist_tpr5 : NAN;
  return {r.attacked >= 200 && auc_drop >= 0.15 && tpr_drop >= 0.5,
          describe(r) + " AUC drop=" + fmt("%.3f", auc_drop) + " TPR@5% relative drop=" + fmt("%.3f", tpr_drop) +
              " (need >= 0.15 and >= 0.50)"};
}

// 7-8 -------------------------------------------------------------------------

sp::ExperimentPlan curve_plan() {
  sp::ExperimentPlan p;
  p.kind = sp::ExperimentKind::backdoor_curve;
  p.sweep = {0.0, 0.01, 0.025, 0.05};
  p.arms = {"visible"};
  p.repetitions = 5;
  p.seed = 21;
  p.classes = 4;
  p.train_size = 1500;
  p.test_size = 400;
  p.net_size = 32;
  p.source_size = 256;
  p.trigger_side = 4;
  p.jobs = g_opts.jobs;
  return p;
}

std::optional<sp::CurveTable> g_curve;

Verdict backdoor_end_to_end() {
  const auto t0 = std::chrono::steady_clock::now();
  g_curve = sp::run_backdoor_curve(curve_plan(), progress);
  const double secs = seconds_since(t0);
  const auto* base = g_curve->find("visible", 0.0);
  const auto* p1 = g_curve->find("visible", 0.01);
  const auto* p25 = g_curve->find("visible", 0.025);
  const auto* p5 = g_curve->find("visible", 0.05);
  std::size_t errors = 0;
  for (const auto& r : g_curve->rows) errors += r.errors;
  const double drop = base->clean_accuracy - p5->clean_accuracy;
  const bool monotone = p1->success_rate <= p25->success_rate && p25->success_rate <= p5->success_rate;
  Verdict v;
  v.pass = errors == 0 && p5->success_rate >= 0.80 && drop <= 0.05 && monotone && secs < 1800.0;
  v.detail = "5 seeds x 4 targets, classes=4 train=1500: success@{0,1,2.5,5}%=" + fmt("%.3f", base->success_rate) +
             "," + fmt("%.3f", p1->success_rate) + "," + fmt("%.3f", p25->success_rate) + "," +
             fmt("%.3f", p5->success_rate) + " clean acc base=" + fmt("%.3f", base->clean_accuracy) +
             " @5%=" + fmt("%.3f", p5->clean_accuracy) + " drop=" + fmt("%.3f", drop) +
             " monotone=" + (monotone ? "yes" : "no") + " errors=" + std::to_string(errors) +
             " time=" + fmt("%.0fs", secs);
  return v;
}

Verdict hidden_neutrality() {
  auto plan = curve_plan();
  if (!g_curve) {
    plan.sweep = {0.05};
    g_curve = sp::run_backdoor_curve(plan, progress);
  }
  plan.sweep = {0.05};
  plan.arms = {"hidden"};
  const auto hidden = sp::run_backdoor_curve(plan, progress);
  const auto* vis = g_curve->find("visible", 0.05);
  const auto* hid = hidden.find("hidden", 0.05);
  double worst_residual = 0.0;
  for (const auto& c : hidden.cells) worst_residual = std::max(worst_residual, c.max_residual);
  const double gap = std::abs(vis->success_rate - hid->success_rate);
  return {hid->errors == 0 && vis->errors == 0 && gap <= 0.10,
          "success@5% visible=" + fmt("%.3f", vis->success_rate) + " hidden=" + fmt("%.3f", hid->success_rate) +
              " gap=" + fmt("%.3f", gap) + " hidden clean acc=" + fmt("%.3f", hid->clean_accuracy) +
              " max residual=" + fmt("%.0f", worst_residual) + " (need gap <= 0.10)"};
}

// 9 ---------------------------------------------------------------------------

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

Verdict determinism() {
  using K = sp::ExperimentKind;
  int files = 0, differing = 0;
  std::string bad;
  for (K kind : {K::backdoor_curve, K::cleanlabel_curve, K::roc_backdoor, K::roc_cleanlabel, K::roc_adaptive}) {
    sp::ExperimentPlan p;
    p.kind = kind;
    p.seed = 5;
    p.classes = 3;
    p.train_size = 300;
    p.test_size = 90;
    p.net_size = 32;
    p.source_size = 128;
    p.epochs = 3;
    p.pairs = 2;
    p.candidates = 3;
    if (kind == K::backdoor_curve) p.sweep = {0.0, 0.05};
    if (kind == K::cleanlabel_curve) p.sweep = {0.0, 10.0};
    if (sp::is_roc(kind)) p.sweep = {20.0};
    sp::testing::TempDir a("accept_a"), b("accept_b");
    p.output_dir = a.path();
    p.jobs = 1;
    const auto out = sp::run_experiment(p, progress);
    p.output_dir = b.path();
    p.jobs = std::max(2, g_opts.jobs);
    sp::run_experiment(p, progress);
    for (const auto& f : out.files) {
      ++files;
      if (slurp(a / f.string()) != slurp(b / f.string())) {
        ++differing;
        bad += " " + sp::to_string(kind) + "/" + f.string();
      }
    }
  }
  return {files > 0 && differing == 0,
          "5 plan kinds run twice (1 vs 2+ workers, different output dirs): files=" + std::to_string(files) +
              " differing=" + std::to_string(differing) + bad};
}

struct Criterion {
  int id;
  const char* name;
  std::function<Verdict()> run;
};

}  // namespace

int main(int argc, char** argv) {
  g_opts.jobs = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--only" && i + 1 < argc) {
      std::stringstream ss(argv[++i]);
      for (std::string tok; std::getline(ss, tok, ',');) g_opts.only.insert(std::stoi(tok));
    } else if (a == "--jobs" && i + 1 < argc) {
      g_opts.jobs = std::max(1, std::stoi(argv[++i]));
    } else if (a == "--quiet") {
      g_opts.quiet = true;
    } else {
      std::cerr << "usage: acceptance [--only 1,2,...] [--jobs N] [--quiet]\n";
      return 2;
    }
  }

  const std::vector<Criterion> criteria{
      {1, "qp-oracle-equivalence", qp_oracle_equivalence},
      {2, "attack-output-bit-level", attack_bit_level},
      {3, "scaling-matrix-vs-direct", scaling_equivalence},
      {4, "backdoor-detector-blindness", backdoor_blindness},
      {5, "cleanlabel-detectability", cleanlabel_detectability},
      {6, "adaptive-evasion", adaptive_evasion},
      {7, "backdoor-end-to-end", backdoor_end_to_end},
      {8, "hidden-poison-neutrality", hidden_neutrality},
      {9, "artifact-determinism", determinism},
  };

  int failed = 0, ran = 0;
  for (const auto& c : criteria) {
    if (!g_opts.only.empty() && !g_opts.only.count(c.id)) continue;
    ++ran;
    if (!g_opts.quiet) std::cerr << "criterion " << c.id << " " << c.name << '\n';
    Verdict v;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      v = c.run();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    failed += !v.pass;
    std::cout << (v.pass ? "PASS" : "FAIL") << "  " << c.id << " " << c.name << "  " << v.detail << "  ["
              << fmt("%.1fs", seconds_since(t0)) << "]" << std::endl;
  }
  std::cout << (failed ? "FAIL" : "PASS") << "  acceptance: " << ran - failed << "/" << ran << " criteria passed"
            << std::endl;
  return failed ? 1 : 0;
}
