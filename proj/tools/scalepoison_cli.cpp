#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "scalepoison/scalepoison.hpp"

namespace sp = scalepoison;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Globals {
  std::uint64_t seed = 1;
  std::string kernel = "bilinear";
  double epsilon = 1.0;
  int net_size = 32;
  std::string output_dir = ".";
  std::string format = "csv";
  int jobs = 1;
  CLI::Option* seed_opt = nullptr;
  CLI::Option* kernel_opt = nullptr;
  CLI::Option* epsilon_opt = nullptr;
  CLI::Option* net_opt = nullptr;
  CLI::Option* out_opt = nullptr;
  CLI::Option* jobs_opt = nullptr;

  sp::Kernel kernel_value() const { return *sp::parse_kernel(kernel); }
  sp::AttackParams attack_params() const {
    sp::AttackParams p;
    p.epsilon = epsilon;
    p.kernel = kernel_value();
    return p;
  }
  json to_json() const {
    return {{"seed", seed}, {"kernel", kernel}, {"epsilon", epsilon}, {"net_size", net_size},
            {"output_dir", output_dir}, {"format", format}, {"jobs", jobs}};
  }
};

/// Where a command's items come from: a dataset directory or a synthetic corpus.
struct DataSource {
  std::string dir;
  std::size_t synthetic = 0;
  int classes = 4;
  int upscale = 0;

  void add(CLI::App* cmd) {
    auto* d = cmd->add_option("--data", dir, "Dataset directory (PNG files + manifest.jsonl)")->check(CLI::ExistingDirectory);
    auto* s = cmd->add_option("--synthetic", synthetic, "Generate this many synthetic items instead")->check(CLI::PositiveNumber);
    d->excludes(s);
    cmd->add_option("--classes", classes, "Classes of the synthetic corpus")->check(CLI::Range(2, 8))->capture_default_str();
    cmd->add_option("--upscale", upscale, "Lanczos-upscale synthetic items to this side (0: keep network size)")
        ->check(CLI::NonNegativeNumber)
        ->capture_default_str();
  }

  json to_json() const {
    if (!dir.empty()) return {{"data", dir}};
    return {{"synthetic", synthetic}, {"classes", classes}, {"upscale", upscale}};
  }

  sp::PoisonedDataset load(const Globals& g) const {
    if (!dir.empty()) return sp::load_dataset(dir);
    if (synthetic == 0) throw sp::Error(sp::Errc::invalid_argument, "one of --data or --synthetic is required");
    sp::Dataset d = sp::synth_dataset(classes, synthetic, g.net_size, g.seed);
    if (upscale > 0) {
      if (upscale <= g.net_size) throw sp::Error(sp::Errc::invalid_argument, "--upscale must exceed --net-size");
      for (auto& img : d.images) img = sp::upscale_source(img, upscale);
    }
    return sp::as_clean(d, g.seed);
  }
};

std::string cell(const json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
  if (v.is_number_float()) return sp::detail::format_number(v.get<double>());
  if (v.is_null()) return "nan";
  return v.dump();
}

/// Rows share the column order of `columns`; csv gets a header line, json an
/// object {"command": ..., "rows": [...]}.
void emit(const Globals& g, const std::string& command, const std::vector<std::string>& columns,
          const std::vector<json>& rows) {
  if (g.format == "json") {
    nlohmann::ordered_json out{{"command", command}, {"rows", nlohmann::ordered_json::array()}};
    for (const auto& r : rows) {
      nlohmann::ordered_json o = nlohmann::ordered_json::object();
      for (const auto& c : columns) o[c] = r.contains(c) ? r.at(c) : json();
      out["rows"].push_back(o);
    }
    std::cout << out.dump(2) << '\n';
    return;
  }
  for (std::size_t i = 0; i < columns.size(); ++i) std::cout << (i ? "," : "") << columns[i];
  std::cout << '\n';
  for (const auto& r : rows) {
    for (std::size_t i = 0; i < columns.size(); ++i) {
      std::string v = r.contains(columns[i]) ? cell(r.at(columns[i])) : "";
      std::replace(v.begin(), v.end(), ',', ';');
      std::cout << (i ? "," : "") << v;
    }
    std::cout << '\n';
  }
}

json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(); }

void log_config(const std::string& command, const Globals& g, json extra) {
  json cfg{{"command", command}, {"global", g.to_json()}, {"options", std::move(extra)}};
  std::cerr << "scalepoison: config " << cfg.dump() << '\n';
}

fs::path in_output_dir(const Globals& g, const std::string& explicit_path, const std::string& fallback) {
  return explicit_path.empty() ? fs::path(g.output_dir) / fallback : fs::path(explicit_path);
}

void ensure_parent(const fs::path& p) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
}

sp::Dataset at_network(const sp::Dataset& d, int h, int w, const sp::Kernel& k) { return sp::network_inputs(d, h, w, k); }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Image-scaling attacks, poisoning pipelines and their detection defenses."};
  app.name("scalepoison");
  app.require_subcommand(1);
  app.fallthrough();

  Globals g;
  g.seed_opt = app.add_option("--seed", g.seed, "Random seed")->envname("SCALEPOISON_SEED")->capture_default_str();
  g.kernel_opt = app.add_option("--kernel", g.kernel, "Scaling kernel")
                     ->check(CLI::IsMember({"nearest", "bilinear", "bicubic", "lanczos"}))
                     ->envname("SCALEPOISON_KERNEL")
                     ->capture_default_str();
  g.epsilon_opt = app.add_option("--epsilon", g.epsilon, "Attack tolerance on the downscaled output")
                      ->check(CLI::NonNegativeNumber)
                      ->envname("SCALEPOISON_EPSILON")
                      ->capture_default_str();
  g.net_opt = app.add_option("--net-size", g.net_size, "Network input side")
                  ->check(CLI::Range(1, 1 << 15))
                  ->envname("SCALEPOISON_NET_SIZE")
                  ->capture_default_str();
  g.out_opt = app.add_option("--output-dir", g.output_dir, "Directory for outputs")
                  ->envname("SCALEPOISON_OUTPUT_DIR")
                  ->capture_default_str();
  app.add_option("--format", g.format, "Result format on stdout")
      ->check(CLI::IsMember({"csv", "json"}))
      ->envname("SCALEPOISON_FORMAT")
      ->capture_default_str();
  g.jobs_opt = app.add_option("--jobs", g.jobs, "Worker threads")
                   ->check(CLI::Range(1, 1024))
                   ->envname("SCALEPOISON_JOBS")
                   ->capture_default_str();

  // attack / adaptive-attack
  struct {
    std::string source, target, out, adapted_out;
    int max_iter = 20000;
  } atk;
  auto add_attack_opts = [&](CLI::App* cmd) {
    cmd->add_option("--source", atk.source, "Source image S")->required()->check(CLI::ExistingFile);
    cmd->add_option("--target", atk.target, "Target image T at network size")->required()->check(CLI::ExistingFile);
    cmd->add_option("--out", atk.out, "Attack image path (default <output-dir>/attack.png)");
    cmd->add_option("--max-iter", atk.max_iter, "Solver sweeps per subproblem")->check(CLI::PositiveNumber)->capture_default_str();
  };
  auto* attack_cmd = app.add_subcommand("attack", "Hide a target image in a source image");
  add_attack_opts(attack_cmd);
  auto* adaptive_cmd = app.add_subcommand("adaptive-attack", "Attack with a histogram-matched, denoised target");
  add_attack_opts(adaptive_cmd);
  adaptive_cmd->add_option("--adapted-out", atk.adapted_out, "Adapted target path (default <output-dir>/adapted_target.png)");

  // detect
  struct {
    std::vector<std::string> images;
    double hist_threshold = 0.9, scatter_threshold = 0.9;
    bool baseline = false;
  } det;
  auto* detect_cmd = app.add_subcommand("detect", "Score images with the histogram and scatter defenses");
  detect_cmd->add_option("images", det.images, "Images to score")->required()->check(CLI::ExistingFile);
  detect_cmd->add_option("--hist-threshold", det.hist_threshold, "Flag below this histogram score")->capture_default_str();
  detect_cmd->add_option("--scatter-threshold", det.scatter_threshold, "Flag below this scatter score")->capture_default_str();
  detect_cmd->add_flag("--baseline", det.baseline, "Compare each image with itself instead of its down-up copy");

  // poison-backdoor / poison-cleanlabel
  struct {
    DataSource data;
    int target_class = 0, source_class = 1, trigger_side = 4;
    double fraction = 0.05, alpha = 0.3;
    std::optional<std::size_t> count;
    std::string hide_at = "none", corner = "lower-left", z, out;
    bool adaptive = false;
  } poi;
  auto add_poison_opts = [&](CLI::App* cmd) {
    poi.data.add(cmd);
    cmd->add_option("--target-class", poi.target_class, "Target class")->check(CLI::NonNegativeNumber)->capture_default_str();
    auto* f = cmd->add_option("--fraction", poi.fraction, "Fraction of the dataset to manipulate")->capture_default_str();
    auto* c = cmd->add_option("--count", poi.count, "Exact number of items to manipulate");
    c->excludes(f);
    cmd->add_option("--hide-at", poi.hide_at, "Scaling-attack concealment")
        ->check(CLI::IsMember({"none", "train", "test", "both"}))
        ->capture_default_str();
    cmd->add_option("--out", poi.out, "Output dataset directory (default <output-dir>/poisoned)");
  };
  auto* backdoor_cmd = app.add_subcommand("poison-backdoor", "Embed a trigger and relabel a fraction of the data");
  add_poison_opts(backdoor_cmd);
  backdoor_cmd->add_option("--trigger-side", poi.trigger_side, "Trigger square side in network pixels")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  backdoor_cmd->add_option("--corner", poi.corner, "Trigger corner")
      ->check(CLI::IsMember({"lower-left", "lower-right", "upper-left", "upper-right"}))
      ->capture_default_str();
  auto* cleanlabel_cmd = app.add_subcommand("poison-cleanlabel", "Blend an image into target-class items, labels kept");
  add_poison_opts(cleanlabel_cmd);
  cleanlabel_cmd->add_option("--z", poi.z, "Image Z to blend in (network size)")->required()->check(CLI::ExistingFile);
  cleanlabel_cmd->add_option("--source-class", poi.source_class, "Class of Z (recorded)")->capture_default_str();
  cleanlabel_cmd->add_option("--alpha", poi.alpha, "Blend weight of Z")->check(CLI::Range(0.0, 1.0))->capture_default_str();
  cleanlabel_cmd->add_flag("--adaptive", poi.adaptive, "Use the adaptive attack for hidden items");

  // train
  struct {
    DataSource data;
    int epochs = 10, batch_size = 32, classes = 0;
    double learning_rate = 0.05, lr_decay = 0.9, momentum = 0.9, weight_decay = 5e-4;
    std::string model;
  } trn;
  auto* train_cmd = app.add_subcommand("train", "Train the toy classifier");
  trn.data.add(train_cmd);
  train_cmd->add_option("--epochs", trn.epochs)->check(CLI::PositiveNumber)->capture_default_str();
  train_cmd->add_option("--batch-size", trn.batch_size)->check(CLI::PositiveNumber)->capture_default_str();
  train_cmd->add_option("--learning-rate", trn.learning_rate)->check(CLI::PositiveNumber)->capture_default_str();
  train_cmd->add_option("--lr-decay", trn.lr_decay, "Per-epoch learning-rate factor")->check(CLI::PositiveNumber)->capture_default_str();
  train_cmd->add_option("--momentum", trn.momentum)->check(CLI::Range(0.0, 1.0))->capture_default_str();
  train_cmd->add_option("--weight-decay", trn.weight_decay)->check(CLI::NonNegativeNumber)->capture_default_str();
  train_cmd->add_option("--num-classes", trn.classes, "Output classes (default: largest label + 1)")->check(CLI::NonNegativeNumber);
  train_cmd->add_option("--model", trn.model, "Checkpoint path (default <output-dir>/model.bin)");

  // evaluate
  struct {
    DataSource data;
    std::string model;
    std::optional<int> target_class;
    int trigger_side = 4;
    bool hide = false;
  } ev;
  auto* eval_cmd = app.add_subcommand("evaluate", "Clean accuracy and optional backdoor success rate");
  eval_cmd->add_option("--model", ev.model, "Checkpoint")->required()->check(CLI::ExistingFile);
  ev.data.add(eval_cmd);
  eval_cmd->add_option("--target-class", ev.target_class, "Also measure success of the trigger for this target");
  eval_cmd->add_option("--trigger-side", ev.trigger_side)->check(CLI::NonNegativeNumber)->capture_default_str();
  eval_cmd->add_flag("--hide", ev.hide, "Hide the test-time trigger with the scaling attack");

  // experiment
  std::string plan_path;
  auto* exp_cmd = app.add_subcommand("experiment", "Run an experiment plan");
  exp_cmd->add_option("--plan", plan_path, "Plan file (key = value lines)")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    const sp::Kernel kernel = g.kernel_value();

    if (app.got_subcommand(attack_cmd) || app.got_subcommand(adaptive_cmd)) {
      const bool adaptive = app.got_subcommand(adaptive_cmd);
      const std::string name = adaptive ? "adaptive-attack" : "attack";
      sp::AttackParams params = g.attack_params();
      params.max_iter = atk.max_iter;
      const fs::path out = in_output_dir(g, atk.out, "attack.png");
      const fs::path adapted_out = in_output_dir(g, atk.adapted_out, "adapted_target.png");
      json opts{{"source", atk.source}, {"target", atk.target}, {"out", out.string()}, {"max_iter", atk.max_iter}};
      if (adaptive) opts["adapted_out"] = adapted_out.string();
      log_config(name, g, opts);

      const sp::Image s = sp::load_image(atk.source);
      const sp::Image t = sp::load_image(atk.target);
      const sp::AttackResult r = adaptive ? sp::adaptive_attack(s, t, params) : sp::scaling_attack(s, t, params);
      ensure_parent(out);
      sp::save_image(r.attack_image, out);
      json row{{"source", atk.source},
               {"target", atk.target},
               {"out", out.string()},
               {"perturbation_norm", r.perturbation_norm},
               {"residual_inf", r.residual_inf},
               {"o2_psnr", number_or_null(r.o2_psnr)},
               {"feasible", r.feasible},
               {"infeasible_subproblems", r.infeasible_subproblems}};
      std::vector<std::string> cols{"source", "target", "out", "perturbation_norm", "residual_inf",
                                    "o2_psnr", "feasible", "infeasible_subproblems"};
      if (adaptive) {
        ensure_parent(adapted_out);
        sp::save_image(r.adapted_target, adapted_out);
        row["adapted_target"] = adapted_out.string();
        row["target_psnr"] = number_or_null(r.target_psnr);
        cols.insert(cols.end(), {"adapted_target", "target_psnr"});
      }
      emit(g, name, cols, {row});
      return 0;
    }

    if (app.got_subcommand(detect_cmd)) {
      log_config("detect", g,
                 {{"images", det.images}, {"hist_threshold", det.hist_threshold},
                  {"scatter_threshold", det.scatter_threshold}, {"baseline", det.baseline}});
      const sp::DetectionThresholds thr{det.hist_threshold, det.scatter_threshold};
      std::vector<json> rows(det.images.size());
      sp::parallel_for(det.images.size(), g.jobs, [&](std::size_t i) {
        const sp::Image a = sp::load_image(det.images[i]);
        sp::DetectionReport rep;
        if (det.baseline) {
          rep.hist_score = sp::histogram_score(a, a);
          rep.scatter_score = sp::scatter_score(a, a);
          rep.hist_flag = rep.hist_score < thr.histogram;
          rep.scatter_flag = rep.scatter_score < thr.scatter;
        } else {
          rep = sp::detect(a, g.net_size, g.net_size, kernel, thr);
        }
        rows[i] = json{{"image", det.images[i]},
                       {"hist_score", rep.hist_score},
                       {"scatter_score", rep.scatter_score},
                       {"hist_flag", rep.hist_flag},
                       {"scatter_flag", rep.scatter_flag}};
      });
      emit(g, "detect", {"image", "hist_score", "scatter_score", "hist_flag", "scatter_flag"}, rows);
      return 0;
    }

    if (app.got_subcommand(backdoor_cmd) || app.got_subcommand(cleanlabel_cmd)) {
      const bool backdoor = app.got_subcommand(backdoor_cmd);
      const std::string name = backdoor ? "poison-backdoor" : "poison-cleanlabel";
      const fs::path out = in_output_dir(g, poi.out, "poisoned");
      sp::PoisonConfig cfg;
      cfg.mode = backdoor ? sp::PoisonMode::backdoor : sp::PoisonMode::clean_label;
      cfg.target_class = poi.target_class;
      cfg.source_class = poi.source_class;
      cfg.fraction = poi.fraction;
      cfg.count = poi.count;
      cfg.alpha = poi.alpha;
      cfg.hide_at = *sp::parse_hide_at(poi.hide_at);
      cfg.adaptive = poi.adaptive;
      cfg.attack = g.attack_params();
      cfg.net_h = cfg.net_w = g.net_size;
      cfg.jobs = g.jobs;
      json opts = sp::detail::config_json(cfg);
      opts["data"] = poi.data.to_json();
      opts["out"] = out.string();
      if (backdoor) {
        opts["trigger_side"] = poi.trigger_side;
        opts["corner"] = poi.corner;
      } else {
        opts["z"] = poi.z;
      }
      log_config(name, g, opts);

      const sp::PoisonedDataset input = poi.data.load(g);
      sp::PoisonedDataset result;
      if (backdoor) {
        sp::TriggerSpec trig;
        trig.side = poi.trigger_side;
        if (poi.corner == "lower-right") trig.corner = sp::Corner::lower_right;
        if (poi.corner == "upper-left") trig.corner = sp::Corner::upper_left;
        if (poi.corner == "upper-right") trig.corner = sp::Corner::upper_right;
        result = sp::poison_backdoor(input.data, cfg, trig, g.seed);
      } else {
        result = sp::poison_cleanlabel(input.data, cfg, sp::load_image(poi.z), g.seed);
      }
      sp::save_dataset(result, out);
      double max_residual = 0.0;
      for (const auto& r : result.manifest) max_residual = std::max(max_residual, r.residual_inf);
      emit(g, name, {"items", "manipulated", "target_class", "hide_at", "max_residual", "out"},
           {json{{"items", result.data.size()},
                 {"manipulated", result.manipulated_count()},
                 {"target_class", cfg.target_class},
                 {"hide_at", poi.hide_at},
                 {"max_residual", max_residual},
                 {"out", out.string()}}});
      return 0;
    }

    if (app.got_subcommand(train_cmd)) {
      const fs::path model_path = in_output_dir(g, trn.model, "model.bin");
      log_config("train", g,
                 {{"data", trn.data.to_json()}, {"epochs", trn.epochs}, {"batch_size", trn.batch_size},
                  {"learning_rate", trn.learning_rate}, {"lr_decay", trn.lr_decay}, {"momentum", trn.momentum},
                  {"weight_decay", trn.weight_decay}, {"num_classes", trn.classes}, {"model", model_path.string()}});
      const sp::Dataset d = at_network(trn.data.load(g).data, g.net_size, g.net_size, kernel);
      if (d.size() == 0) throw sp::Error(sp::Errc::insufficient_items, "training set is empty");
      int classes = trn.classes;
      if (classes == 0) classes = *std::max_element(d.labels.begin(), d.labels.end()) + 1;
      classes = std::max(classes, 2);
      const auto arch = sp::default_architecture(d.images.front().channels, g.net_size, g.net_size, classes);
      const sp::TrainConfig cfg{trn.epochs, trn.batch_size, trn.learning_rate, trn.lr_decay, trn.momentum, trn.weight_decay, g.seed};
      const sp::Model m = sp::train(d, arch, cfg);
      ensure_parent(model_path);
      sp::save_model(m, model_path);
      emit(g, "train", {"items", "classes", "parameters", "train_accuracy", "model"},
           {json{{"items", d.size()},
                 {"classes", classes},
                 {"parameters", m.params.size()},
                 {"train_accuracy", sp::clean_accuracy(m, d)},
                 {"model", model_path.string()}}});
      return 0;
    }

    if (app.got_subcommand(eval_cmd)) {
      json opts{{"model", ev.model}, {"data", ev.data.to_json()}, {"trigger_side", ev.trigger_side}, {"hide", ev.hide}};
      if (ev.target_class) opts["target_class"] = *ev.target_class;
      log_config("evaluate", g, opts);
      const sp::Model m = sp::load_model(ev.model);
      const int h = m.arch.input.h, w = m.arch.input.w;
      const sp::Dataset raw = ev.data.load(g).data;
      json row{{"items", raw.size()}, {"clean_accuracy", sp::clean_accuracy(m, at_network(raw, h, w, kernel))}};
      std::vector<std::string> cols{"items", "clean_accuracy"};
      if (ev.target_class) {
        sp::TriggerSpec trig;
        trig.side = ev.trigger_side;
        const sp::Dataset poisoned = sp::poison_testset(raw, trig, ev.hide, g.attack_params(), *ev.target_class, h, w, g.jobs);
        row["target_class"] = *ev.target_class;
        row["triggered_items"] = poisoned.size();
        row["attack_success_rate"] = sp::attack_success_rate(m, at_network(poisoned, h, w, kernel), *ev.target_class);
        cols.insert(cols.end(), {"target_class", "triggered_items", "attack_success_rate"});
      }
      emit(g, "evaluate", cols, {row});
      return 0;
    }

    if (app.got_subcommand(exp_cmd)) {
      sp::ExperimentPlan plan = sp::load_plan(plan_path);
      // Explicit global flags (or their environment variables) override the plan.
      if (g.seed_opt->count()) plan.seed = g.seed;
      if (g.kernel_opt->count()) plan.attack.kernel = kernel;
      if (g.epsilon_opt->count()) plan.attack.epsilon = g.epsilon;
      if (g.net_opt->count()) plan.net_size = g.net_size;
      if (g.out_opt->count()) plan.output_dir = g.output_dir;
      if (g.jobs_opt->count()) plan.jobs = g.jobs;
      plan.validate();
      json opts{{"plan", plan_path}, {"resolved", json::object()}};
      std::istringstream lines(sp::plan_to_text(plan));
      for (std::string line; std::getline(lines, line);) {
        const auto eq = line.find(" = ");
        opts["resolved"][line.substr(0, eq)] = line.substr(eq + 3);
      }
      log_config("experiment", g, opts);

      const auto outcome = sp::run_experiment(plan, [](const std::string& msg) { std::cerr << "scalepoison: " << msg << '\n'; });
      std::size_t failures = 0;
      if (outcome.curve) {
        std::vector<json> rows;
        for (const auto& r : outcome.curve->rows) {
          failures += r.errors;
          rows.push_back({{"arm", r.arm},
                          {"x", r.x},
                          {"success_rate", number_or_null(r.success_rate)},
                          {"clean_accuracy", number_or_null(r.clean_accuracy)},
                          {"cells", r.cells},
                          {"errors", r.errors}});
        }
        emit(g, "experiment", {"arm", "x", "success_rate", "clean_accuracy", "cells", "errors"}, rows);
      } else {
        for (const auto& s : outcome.roc->scores) failures += !s.error.empty();
        std::vector<json> rows;
        for (const auto& s : outcome.roc->summaries) {
          rows.push_back({{"kind", sp::to_string(plan.kind)},
                          {"corpus_size", s.corpus_size},
                          {"defense", s.defense},
                          {"auc", number_or_null(s.auc)},
                          {"tpr_at_1pct_fpr", number_or_null(s.tpr_at_1)},
                          {"tpr_at_5pct_fpr", number_or_null(s.tpr_at_5)}});
        }
        emit(g, "experiment", {"kind", "corpus_size", "defense", "auc", "tpr_at_1pct_fpr", "tpr_at_5pct_fpr"}, rows);
      }
      std::cerr << "scalepoison: artifacts in " << plan.output_dir.string() << '\n';
      if (failures) {
        std::cerr << "scalepoison: " << failures << " experiment cells failed (see the CSV error columns)\n";
        return 2;
      }
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "scalepoison: error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
