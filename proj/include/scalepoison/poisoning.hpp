#pragma once

// Backdoor and clean-label dataset manipulation, optionally hidden behind a
// scaling attack, plus on-disk dataset formats.

#include <nlohmann/json.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "scalepoison/attack.hpp"
#include "scalepoison/codec.hpp"
#include "scalepoison/error.hpp"
#include "scalepoison/imaging.hpp"
#include "scalepoison/parallel.hpp"
#include "scalepoison/random.hpp"
#include "scalepoison/scaling.hpp"

namespace scalepoison {

struct Dataset {
  std::vector<Image> images;
  std::vector<int> labels;

  std::size_t size() const noexcept { return images.size(); }
  void push_back(Image img, int label) {
    images.push_back(std::move(img));
    labels.push_back(label);
  }
};

enum class Corner { lower_left, lower_right, upper_left, upper_right };

struct TriggerSpec {
  int side = 4;
  Corner corner = Corner::lower_left;
  std::array<std::uint8_t, 3> color{0, 0, 0};  // gray images use color[0]
};

/// Overwrites the trigger square; everything else is untouched.
inline Image embed_trigger(const Image& img, const TriggerSpec& trig) {
  if (trig.side < 0 || trig.side > img.height || trig.side > img.width) {
    throw Error(Errc::invalid_argument, "trigger does not fit inside the image");
  }
  Image out = img;
  const bool bottom = trig.corner == Corner::lower_left || trig.corner == Corner::lower_right;
  const bool left = trig.corner == Corner::lower_left || trig.corner == Corner::upper_left;
  const int r0 = bottom ? img.height - trig.side : 0;
  const int c0 = left ? 0 : img.width - trig.side;
  const std::uint8_t color[3] = {trig.color[0], trig.color[1], trig.color[2]};
  for (int r = r0; r < r0 + trig.side; ++r)
    for (int c = c0; c < c0 + trig.side; ++c)
      for (int ch = 0; ch < img.channels; ++ch) out.at(r, c, ch) = color[ch];
  return out;
}

/// alpha * z + (1 - alpha) * x per sample, rounded once.
inline Image blend(const Image& z, const Image& x, double alpha) {
  if (!z.same_shape(x)) throw Error(Errc::dimension_mismatch, "blend needs equal shapes");
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw Error(Errc::invalid_argument, "alpha must lie in [0, 1]");
  Image out(x.height, x.width, x.channels);
  for (std::size_t i = 0; i < x.data.size(); ++i) {
    out.data[i] = quantize(alpha * z.data[i] + (1.0 - alpha) * x.data[i]);
  }
  return out;
}

enum class PoisonMode { backdoor, clean_label };
enum class HideAt { none, train, test, both };

inline bool hides_train(HideAt h) { return h == HideAt::train || h == HideAt::both; }
inline bool hides_test(HideAt h) { return h == HideAt::test || h == HideAt::both; }

inline const char* to_string(HideAt h) {
  switch (h) {
    case HideAt::none: return "none";
    case HideAt::train: return "train";
    case HideAt::test: return "test";
    case HideAt::both: return "both";
  }
  return "none";
}

inline std::optional<HideAt> parse_hide_at(const std::string& s) {
  if (s == "none") return HideAt::none;
  if (s == "train") return HideAt::train;
  if (s == "test") return HideAt::test;
  if (s == "both") return HideAt::both;
  return std::nullopt;
}

struct PoisonConfig {
  PoisonMode mode = PoisonMode::backdoor;
  int target_class = 0;
  int source_class = 1;               // clean-label only
  double fraction = 0.05;             // of the whole training set
  std::optional<std::size_t> count;   // overrides fraction when set
  double alpha = 0.3;                 // clean-label only
  HideAt hide_at = HideAt::none;
  bool adaptive = false;              // clean-label: use the adaptive attack
  AttackParams attack;
  int net_h = 32;
  int net_w = 32;
  int jobs = 1;
};

/// Provenance of one dataset item.
struct ItemRecord {
  bool trigger = false;
  bool attacked = false;
  bool blended = false;
  bool relabeled = false;
  int original_label = 0;
  double residual_inf = 0.0;  // of the scaling attack, when attacked

  bool manipulated() const noexcept { return trigger || attacked || blended || relabeled; }
  friend bool operator==(const ItemRecord&, const ItemRecord&) = default;
};

struct PoisonedDataset {
  Dataset data;
  std::vector<ItemRecord> manifest;
  std::uint64_t seed = 0;
  nlohmann::json params = nlohmann::json::object();

  std::size_t manipulated_count() const {
    return static_cast<std::size_t>(std::count_if(manifest.begin(), manifest.end(),
                                                  [](const ItemRecord& r) { return r.manipulated(); }));
  }
};

inline PoisonedDataset as_clean(const Dataset& d, std::uint64_t seed = 0) {
  PoisonedDataset out;
  out.data = d;
  out.seed = seed;
  out.manifest.resize(d.size());
  for (std::size_t i = 0; i < d.size(); ++i) out.manifest[i].original_label = d.labels[i];
  return out;
}

/// Number of items to manipulate: the explicit count, or ceil(fraction * n).
inline std::size_t poison_count(const PoisonConfig& cfg, std::size_t n) {
  if (cfg.count) return *cfg.count;
  if (!(cfg.fraction > 0.0 && cfg.fraction <= 1.0)) throw Error(Errc::invalid_argument, "fraction must lie in (0, 1]");
  const double raw = cfg.fraction * double(n);
  return static_cast<std::size_t>(std::ceil(raw - 1e-9 * std::max(1.0, raw)));
}

namespace detail {

inline nlohmann::json config_json(const PoisonConfig& cfg) {
  nlohmann::json j;
  j["mode"] = cfg.mode == PoisonMode::backdoor ? "backdoor" : "clean-label";
  j["target_class"] = cfg.target_class;
  if (cfg.mode == PoisonMode::clean_label) {
    j["source_class"] = cfg.source_class;
    j["alpha"] = cfg.alpha;
    j["adaptive"] = cfg.adaptive;
  }
  if (cfg.count) {
    j["count"] = *cfg.count;
  } else {
    j["fraction"] = cfg.fraction;
  }
  j["hide_at"] = to_string(cfg.hide_at);
  j["epsilon"] = cfg.attack.epsilon;
  j["kernel"] = to_string(cfg.attack.kernel);
  j["net"] = {cfg.net_h, cfg.net_w};
  return j;
}

inline void require_larger(const Image& img, int net_h, int net_w) {
  if (img.height <= net_h || img.width <= net_w) {
    throw Error(Errc::invalid_argument, "hiding needs images larger than the network input");
  }
}

inline Image to_network(const Image& img, int net_h, int net_w, const Kernel& kernel) {
  if (img.height == net_h && img.width == net_w) return img;
  return scale_image(img, net_h, net_w, kernel);
}

}  // namespace detail

/// Sorted indices of the items a poisoning run with this config and seed
/// manipulates: non-target items (backdoor) or target-class items (clean-label).
inline std::vector<std::size_t> poison_selection(const std::vector<int>& labels, const PoisonConfig& cfg,
                                                 std::uint64_t seed) {
  const bool backdoor = cfg.mode == PoisonMode::backdoor;
  std::vector<std::size_t> eligible;
  for (std::size_t i = 0; i < labels.size(); ++i)
    if ((labels[i] == cfg.target_class) != backdoor) eligible.push_back(i);
  const std::size_t count = poison_count(cfg, labels.size());
  if (count > eligible.size()) {
    throw Error(Errc::insufficient_items,
                backdoor ? "not enough non-target items to poison" : "not enough target-class items");
  }
  Rng rng(seed);
  auto chosen = sample_without_replacement(eligible, count, rng);
  std::sort(chosen.begin(), chosen.end());
  return chosen;
}

/// Relabels a seeded selection of non-target items to the target class with the
/// trigger embedded at network resolution. When training-time hiding is on,
/// each selected item becomes a scaling-attack image whose downscale carries
/// the trigger; otherwise it is stored as the visible triggered low-res image.
inline PoisonedDataset poison_backdoor(const Dataset& train, const PoisonConfig& cfg, const TriggerSpec& trig,
                                       std::uint64_t seed) {
  if (cfg.mode != PoisonMode::backdoor) throw Error(Errc::invalid_argument, "config is not in backdoor mode");
  const auto chosen = poison_selection(train.labels, cfg, seed);

  PoisonedDataset out = as_clean(train, seed);
  out.params = detail::config_json(cfg);
  out.params["trigger_side"] = trig.side;
  const bool hide = hides_train(cfg.hide_at);
  parallel_for(chosen.size(), cfg.jobs, [&](std::size_t k) {
    const std::size_t i = chosen[k];
    const Image& src = train.images[i];
    const Image target = embed_trigger(detail::to_network(src, cfg.net_h, cfg.net_w, cfg.attack.kernel), trig);
    ItemRecord& rec = out.manifest[i];
    rec.trigger = true;
    rec.relabeled = true;
    if (hide) {
      detail::require_larger(src, cfg.net_h, cfg.net_w);
      AttackResult res = scaling_attack(src, target, cfg.attack);
      rec.attacked = true;
      rec.residual_inf = res.residual_inf;
      out.data.images[i] = std::move(res.attack_image);
    } else {
      out.data.images[i] = target;
    }
    out.data.labels[i] = cfg.target_class;
  });
  return out;
}

/// Triggered copies of every non-target test item, labels kept. With hide set
/// the items are scaling-attack images at source resolution.
inline Dataset poison_testset(const Dataset& test, const TriggerSpec& trig, bool hide, const AttackParams& params,
                              int target_class, int net_h, int net_w, int jobs = 1) {
  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < test.size(); ++i)
    if (test.labels[i] != target_class) keep.push_back(i);
  Dataset out;
  out.images.resize(keep.size());
  out.labels.resize(keep.size());
  parallel_for(keep.size(), jobs, [&](std::size_t k) {
    const Image& src = test.images[keep[k]];
    Image target = embed_trigger(detail::to_network(src, net_h, net_w, params.kernel), trig);
    if (hide) {
      detail::require_larger(src, net_h, net_w);
      out.images[k] = scaling_attack(src, target, params).attack_image;
    } else {
      out.images[k] = std::move(target);
    }
    out.labels[k] = test.labels[keep[k]];
  });
  return out;
}

/// Blends z into a seeded selection of target-class items at network
/// resolution. Hidden: each item becomes an attack image whose downscale is the
/// blend. Visible: the item is replaced by the low-res blend. Labels never change.
inline PoisonedDataset poison_cleanlabel(const Dataset& train, const PoisonConfig& cfg, const Image& z,
                                         std::uint64_t seed) {
  if (cfg.mode != PoisonMode::clean_label) throw Error(Errc::invalid_argument, "config is not in clean-label mode");
  if (z.height != cfg.net_h || z.width != cfg.net_w) {
    throw Error(Errc::dimension_mismatch, "Z must be at network input dims");
  }
  const auto chosen = poison_selection(train.labels, cfg, seed);

  PoisonedDataset out = as_clean(train, seed);
  out.params = detail::config_json(cfg);
  const bool hide = hides_train(cfg.hide_at);
  parallel_for(chosen.size(), cfg.jobs, [&](std::size_t k) {
    const std::size_t i = chosen[k];
    const Image& src = train.images[i];
    const Image target = blend(z, detail::to_network(src, cfg.net_h, cfg.net_w, cfg.attack.kernel), cfg.alpha);
    ItemRecord& rec = out.manifest[i];
    rec.blended = true;
    if (hide) {
      detail::require_larger(src, cfg.net_h, cfg.net_w);
      AttackResult res = cfg.adaptive ? adaptive_attack(src, target, cfg.attack) : scaling_attack(src, target, cfg.attack);
      rec.attacked = true;
      rec.residual_inf = res.residual_inf;
      out.data.images[i] = std::move(res.attack_image);
    } else {
      out.data.images[i] = target;
    }
  });
  return out;
}

/// `count` ordered (target, source) class pairs with target != source, drawn
/// uniformly with replacement.
inline std::vector<std::pair<int, int>> sample_class_pairs(int num_classes, std::size_t count, std::uint64_t seed) {
  if (num_classes < 2) throw Error(Errc::invalid_argument, "class pairs need at least two classes");
  Rng rng(seed);
  std::vector<std::pair<int, int>> pairs;
  pairs.reserve(count);
  const auto k = static_cast<std::uint64_t>(num_classes);
  for (std::size_t i = 0; i < count; ++i) {
    const int t = static_cast<int>(uniform_index(rng, k));
    int s = static_cast<int>(uniform_index(rng, k - 1));
    if (s >= t) ++s;
    pairs.emplace_back(t, s);
  }
  return pairs;
}

// ---------------------------------------------------------------------------
// On-disk formats

namespace detail {

inline nlohmann::json record_json(const std::string& file, int label, const ItemRecord& r) {
  nlohmann::json j;
  j["file"] = file;
  j["label"] = label;
  j["original_label"] = r.original_label;
  nlohmann::json prov = nlohmann::json::array();
  if (r.trigger) prov.push_back("trigger-embedded");
  if (r.attacked) prov.push_back("scaling-attacked");
  if (r.blended) prov.push_back("blended");
  if (r.relabeled) prov.push_back("relabeled");
  if (prov.empty()) prov.push_back("clean");
  j["provenance"] = prov;
  if (r.attacked) j["residual_inf"] = r.residual_inf;
  return j;
}

}  // namespace detail

/// Directory of PNGs plus manifest.jsonl (one record per item, in order).
inline void save_dataset(const PoisonedDataset& ds, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(Errc::io_failure, dir.string() + ": " + ec.message());
  std::ofstream manifest(dir / "manifest.jsonl");
  if (!manifest) throw Error(Errc::io_failure, (dir / "manifest.jsonl").string());
  for (std::size_t i = 0; i < ds.data.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "item_%06zu.png", i);
    save_image(ds.data.images[i], dir / name);
    nlohmann::json rec = detail::record_json(name, ds.data.labels[i], ds.manifest[i]);
    rec["seed"] = ds.seed;
    if (ds.manifest[i].manipulated()) rec["params"] = ds.params;
    manifest << rec.dump() << '\n';
  }
  if (!manifest) throw Error(Errc::io_failure, (dir / "manifest.jsonl").string());
}

inline PoisonedDataset load_dataset(const std::filesystem::path& dir) {
  std::ifstream manifest(dir / "manifest.jsonl");
  if (!manifest) throw Error(Errc::unreadable_file, (dir / "manifest.jsonl").string());
  PoisonedDataset ds;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(manifest, line)) {
    ++lineno;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
      ItemRecord r;
      r.original_label = j.at("original_label").get<int>();
      for (const auto& p : j.at("provenance")) {
        const auto tag = p.get<std::string>();
        if (tag == "trigger-embedded") r.trigger = true;
        else if (tag == "scaling-attacked") r.attacked = true;
        else if (tag == "blended") r.blended = true;
        else if (tag == "relabeled") r.relabeled = true;
      }
      if (j.contains("residual_inf")) r.residual_inf = j["residual_inf"].get<double>();
      if (j.contains("seed")) ds.seed = j["seed"].get<std::uint64_t>();
      if (j.contains("params")) ds.params = j["params"];
      ds.data.push_back(load_image(dir / j.at("file").get<std::string>()), j.at("label").get<int>());
      ds.manifest.push_back(r);
    } catch (const nlohmann::json::exception& e) {
      throw Error(Errc::corrupt_stream, "manifest line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return ds;
}

/// Packed layout: uint32 LE count, H, W, C; then per item H*W*C samples and one label byte.
inline void write_packed(const Dataset& ds, const std::filesystem::path& path) {
  if (ds.size() == 0) throw Error(Errc::insufficient_items, "cannot pack an empty dataset");
  const Image& first = ds.images.front();
  for (std::size_t i = 0; i < ds.size(); ++i) {
    if (!ds.images[i].same_shape(first)) throw Error(Errc::dimension_mismatch, "packed items must share one shape");
    if (ds.labels[i] < 0 || ds.labels[i] > 255) throw Error(Errc::invalid_argument, "label does not fit in a byte");
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::io_failure, path.string());
  auto put32 = [&](std::uint32_t v) {
    const char b[4] = {char(v & 0xff), char((v >> 8) & 0xff), char((v >> 16) & 0xff), char((v >> 24) & 0xff)};
    out.write(b, 4);
  };
  put32(static_cast<std::uint32_t>(ds.size()));
  put32(static_cast<std::uint32_t>(first.height));
  put32(static_cast<std::uint32_t>(first.width));
  put32(static_cast<std::uint32_t>(first.channels));
  for (std::size_t i = 0; i < ds.size(); ++i) {
    out.write(reinterpret_cast<const char*>(ds.images[i].data.data()), static_cast<std::streamsize>(first.data.size()));
    const char label = static_cast<char>(ds.labels[i]);
    out.write(&label, 1);
  }
  if (!out) throw Error(Errc::io_failure, path.string());
}

inline Dataset read_packed(const std::filesystem::path& path) {
  const auto bytes = detail::read_file_bytes(path);
  if (bytes.size() < 16) throw Error(Errc::corrupt_stream, path.string() + ": short header");
  auto get32 = [&](std::size_t off) {
    return std::uint32_t(bytes[off]) | (std::uint32_t(bytes[off + 1]) << 8) | (std::uint32_t(bytes[off + 2]) << 16) |
           (std::uint32_t(bytes[off + 3]) << 24);
  };
  const std::uint32_t count = get32(0), h = get32(4), w = get32(8), c = get32(12);
  if (c != 1 && c != 3) throw Error(Errc::corrupt_stream, path.string() + ": bad channel count");
  const std::uint64_t item = std::uint64_t(h) * w * c;
  if (std::uint64_t(bytes.size()) != 16 + std::uint64_t(count) * (item + 1)) {
    throw Error(Errc::corrupt_stream, path.string() + ": size does not match header");
  }
  Dataset ds;
  std::size_t pos = 16;
  for (std::uint32_t i = 0; i < count; ++i) {
    std::vector<std::uint8_t> samples(bytes.begin() + static_cast<std::ptrdiff_t>(pos),
                                      bytes.begin() + static_cast<std::ptrdiff_t>(pos + item));
    pos += item;
    ds.push_back(Image(static_cast<int>(h), static_cast<int>(w), static_cast<int>(c), std::move(samples)), bytes[pos]);
    ++pos;
  }
  return ds;
}

}  // namespace scalepoison
