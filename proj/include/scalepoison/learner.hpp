#pragma once

// Small sequential classifier (3x3 conv, ReLU, 2x2 max-pool, dense, softmax)
// trained with seeded minibatch SGD. Double precision, single-threaded, so
// training is bitwise reproducible.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "scalepoison/codec.hpp"
#include "scalepoison/error.hpp"
#include "scalepoison/imaging.hpp"
#include "scalepoison/poisoning.hpp"
#include "scalepoison/random.hpp"
#include "scalepoison/scaling.hpp"

namespace scalepoison {

enum class LayerKind { conv3x3, relu, maxpool2, dense };

struct LayerSpec {
  LayerKind kind;
  int units = 0;  // output channels (conv) or outputs (dense)
  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

struct Shape {
  int c = 0, h = 0, w = 0;
  std::size_t size() const noexcept { return static_cast<std::size_t>(c) * h * w; }
  friend bool operator==(const Shape&, const Shape&) = default;
};

struct Architecture {
  Shape input;
  std::vector<LayerSpec> layers;  // the last layer is dense with one unit per class

  int num_classes() const { return layers.empty() ? 0 : layers.back().units; }

  /// Input shape followed by the output shape of every layer.
  std::vector<Shape> shapes() const {
    std::vector<Shape> out{input};
    for (const auto& l : layers) {
      Shape s = out.back();
      switch (l.kind) {
        case LayerKind::conv3x3: s.c = l.units; break;
        case LayerKind::relu: break;
        case LayerKind::maxpool2: s.h /= 2; s.w /= 2; break;
        case LayerKind::dense: s = {l.units, 1, 1}; break;
      }
      out.push_back(s);
    }
    return out;
  }

  std::size_t param_count() const {
    const auto sh = shapes();
    std::size_t n = 0;
    for (std::size_t i = 0; i < layers.size(); ++i) {
      if (layers[i].kind == LayerKind::conv3x3) n += std::size_t(sh[i + 1].c) * (sh[i].c * 9 + 1);
      if (layers[i].kind == LayerKind::dense) n += std::size_t(sh[i + 1].c) * (sh[i].size() + 1);
    }
    return n;
  }

  /// Text form, e.g. "3x32x32|conv:4|relu|pool|conv:8|relu|dense:16|relu|dense:3".
  std::string describe() const {
    std::ostringstream os;
    os << input.c << 'x' << input.h << 'x' << input.w;
    for (const auto& l : layers) {
      switch (l.kind) {
        case LayerKind::conv3x3: os << "|conv:" << l.units; break;
        case LayerKind::relu: os << "|relu"; break;
        case LayerKind::maxpool2: os << "|pool"; break;
        case LayerKind::dense: os << "|dense:" << l.units; break;
      }
    }
    return os.str();
  }

  static Architecture parse(const std::string& text) {
    Architecture a;
    std::istringstream is(text);
    std::string tok;
    if (!std::getline(is, tok, '|') || std::sscanf(tok.c_str(), "%dx%dx%d", &a.input.c, &a.input.h, &a.input.w) != 3) {
      throw Error(Errc::corrupt_stream, "bad architecture input shape: " + text);
    }
    while (std::getline(is, tok, '|')) {
      int units = 0;
      if (tok == "relu") {
        a.layers.push_back({LayerKind::relu});
      } else if (tok == "pool") {
        a.layers.push_back({LayerKind::maxpool2});
      } else if (std::sscanf(tok.c_str(), "conv:%d", &units) == 1) {
        a.layers.push_back({LayerKind::conv3x3, units});
      } else if (std::sscanf(tok.c_str(), "dense:%d", &units) == 1) {
        a.layers.push_back({LayerKind::dense, units});
      } else {
        throw Error(Errc::corrupt_stream, "bad architecture layer: " + tok);
      }
    }
    a.validate();
    return a;
  }

  void validate() const {
    if (input.c < 1 || input.h < 1 || input.w < 1) throw Error(Errc::invalid_argument, "empty input shape");
    if (layers.empty() || layers.back().kind != LayerKind::dense || layers.back().units < 1) {
      throw Error(Errc::invalid_argument, "architecture must end in a dense layer");
    }
    for (const auto& s : shapes())
      if (s.size() == 0) throw Error(Errc::invalid_argument, "architecture collapses to an empty tensor");
    for (const auto& l : layers)
      if ((l.kind == LayerKind::conv3x3 || l.kind == LayerKind::dense) && l.units < 1) {
        throw Error(Errc::invalid_argument, "layer needs at least one unit");
      }
  }

  friend bool operator==(const Architecture&, const Architecture&) = default;
};

/// Two convolutions with a pool in between, one hidden dense layer.
inline Architecture default_architecture(int channels, int h, int w, int classes) {
  Architecture a;
  a.input = {channels, h, w};
  a.layers = {{LayerKind::conv3x3, 4}, {LayerKind::relu},     {LayerKind::maxpool2},
              {LayerKind::conv3x3, 8}, {LayerKind::relu},     {LayerKind::dense, 32},
              {LayerKind::relu},       {LayerKind::dense, classes}};
  a.validate();
  return a;
}

inline Architecture linear_softmax_architecture(int channels, int h, int w, int classes) {
  Architecture a;
  a.input = {channels, h, w};
  a.layers = {{LayerKind::dense, classes}};
  a.validate();
  return a;
}

struct Model {
  Architecture arch;
  std::vector<double> params;
  std::uint64_t seed = 0;
  friend bool operator==(const Model&, const Model&) = default;
};

/// He-normal weights, zero biases.
inline Model init_model(const Architecture& arch, std::uint64_t seed) {
  arch.validate();
  Model m{arch, std::vector<double>(arch.param_count(), 0.0), seed};
  Rng rng(derive_seed(seed, 0x1417));
  const auto sh = arch.shapes();
  std::size_t off = 0;
  for (std::size_t i = 0; i < arch.layers.size(); ++i) {
    const auto kind = arch.layers[i].kind;
    if (kind != LayerKind::conv3x3 && kind != LayerKind::dense) continue;
    const std::size_t fan_in = kind == LayerKind::conv3x3 ? std::size_t(sh[i].c) * 9 : sh[i].size();
    const std::size_t nw = std::size_t(sh[i + 1].c) * fan_in;
    const double sd = std::sqrt(2.0 / double(fan_in));
    for (std::size_t k = 0; k < nw; ++k) m.params[off + k] = sd * normal(rng);
    off += nw + std::size_t(sh[i + 1].c);
  }
  return m;
}

/// Network input tensor (CHW) from an image: x / 255 - 0.5.
inline std::vector<double> to_tensor(const Image& img) {
  std::vector<double> t(img.data.size());
  const std::size_t plane = img.pixel_count();
  for (std::size_t p = 0; p < plane; ++p)
    for (int ch = 0; ch < img.channels; ++ch) {
      t[static_cast<std::size_t>(ch) * plane + p] = img.data[p * img.channels + ch] / 255.0 - 0.5;
    }
  return t;
}

namespace detail {

/// Forward pass keeping every activation; optional backward pass that adds
/// the cross-entropy gradient for `label` into `grad`.
class Pass {
 public:
  explicit Pass(const Model& m) : m_(m), shapes_(m.arch.shapes()) {
    acts_.resize(shapes_.size());
    for (std::size_t i = 0; i < shapes_.size(); ++i) acts_[i].assign(shapes_[i].size(), 0.0);
    offsets_.resize(m.arch.layers.size(), 0);
    std::size_t off = 0;
    for (std::size_t i = 0; i < m.arch.layers.size(); ++i) {
      offsets_[i] = off;
      const auto kind = m.arch.layers[i].kind;
      if (kind == LayerKind::conv3x3) off += std::size_t(shapes_[i + 1].c) * (shapes_[i].c * 9 + 1);
      if (kind == LayerKind::dense) off += std::size_t(shapes_[i + 1].c) * (shapes_[i].size() + 1);
    }
  }

  /// Returns softmax probabilities.
  const std::vector<double>& forward(const std::vector<double>& input) {
    if (input.size() != shapes_[0].size()) throw Error(Errc::dimension_mismatch, "input tensor size");
    acts_[0] = input;
    for (std::size_t i = 0; i < m_.arch.layers.size(); ++i) forward_layer(i);
    const auto& logits = acts_.back();
    probs_.resize(logits.size());
    const double mx = *std::max_element(logits.begin(), logits.end());
    double z = 0.0;
    for (std::size_t k = 0; k < logits.size(); ++k) z += (probs_[k] = std::exp(logits[k] - mx));
    for (double& p : probs_) p /= z;
    return probs_;
  }

  double loss(int label) const { return -std::log(std::max(probs_[static_cast<std::size_t>(label)], 1e-300)); }

  /// ReLU on/off bits and pool winners of the last forward pass; the loss is
  /// smooth between two parameter points that share a pattern.
  std::vector<std::uint32_t> pattern() const {
    std::vector<std::uint32_t> out;
    for (std::size_t i = 0; i < m_.arch.layers.size(); ++i) {
      const auto& in = acts_[i];
      if (m_.arch.layers[i].kind == LayerKind::relu) {
        for (double v : in) out.push_back(v > 0.0);
      } else if (m_.arch.layers[i].kind == LayerKind::maxpool2) {
        const Shape& si = shapes_[i];
        const Shape& so = shapes_[i + 1];
        for (int c = 0; c < so.c; ++c)
          for (int y = 0; y < so.h; ++y)
            for (int x = 0; x < so.w; ++x) out.push_back(static_cast<std::uint32_t>(pool_winner(in, si, c, y, x)));
      }
    }
    return out;
  }

  /// Call after forward().
  void backward(int label, std::vector<double>& grad) {
    std::vector<double> g = probs_;
    g[static_cast<std::size_t>(label)] -= 1.0;
    for (std::size_t i = m_.arch.layers.size(); i-- > 0;) g = backward_layer(i, g, grad);
  }

 private:
  void forward_layer(std::size_t i) {
    const Shape& si = shapes_[i];
    const Shape& so = shapes_[i + 1];
    const auto& in = acts_[i];
    auto& out = acts_[i + 1];
    const double* p = m_.params.data() + offsets_[i];
    switch (m_.arch.layers[i].kind) {
      case LayerKind::conv3x3: {
        const double* bias = p + std::size_t(so.c) * si.c * 9;
        for (int o = 0; o < so.c; ++o) {
          double* dst = &out[std::size_t(o) * so.h * so.w];
          std::fill(dst, dst + so.h * so.w, bias[o]);
          for (int c = 0; c < si.c; ++c) {
            const double* src = &in[std::size_t(c) * si.h * si.w];
            const double* k = p + (std::size_t(o) * si.c + c) * 9;
            for (int ky = 0; ky < 3; ++ky)
              for (int kx = 0; kx < 3; ++kx) {
                const double wgt = k[ky * 3 + kx];
                const int y0 = std::max(0, 1 - ky), y1 = std::min(si.h, si.h + 1 - ky);
                const int x0 = std::max(0, 1 - kx), x1 = std::min(si.w, si.w + 1 - kx);
                for (int y = y0; y < y1; ++y) {
                  const double* srow = src + std::size_t(y + ky - 1) * si.w + (kx - 1);
                  double* drow = dst + std::size_t(y) * so.w;
                  for (int x = x0; x < x1; ++x) drow[x] += wgt * srow[x];
                }
              }
          }
        }
        break;
      }
      case LayerKind::relu:
        for (std::size_t k = 0; k < in.size(); ++k) out[k] = in[k] > 0.0 ? in[k] : 0.0;
        break;
      case LayerKind::maxpool2:
        for (int c = 0; c < so.c; ++c)
          for (int y = 0; y < so.h; ++y)
            for (int x = 0; x < so.w; ++x) {
              const std::size_t base = (std::size_t(c) * si.h + 2 * y) * si.w + 2 * x;
              out[(std::size_t(c) * so.h + y) * so.w + x] =
                  std::max({in[base], in[base + 1], in[base + si.w], in[base + si.w + 1]});
            }
        break;
      case LayerKind::dense: {
        const std::size_t n_in = in.size();
        const double* bias = p + std::size_t(so.c) * n_in;
        for (int o = 0; o < so.c; ++o) {
          const double* row = p + std::size_t(o) * n_in;
          double acc = bias[o];
          for (std::size_t k = 0; k < n_in; ++k) acc += row[k] * in[k];
          out[static_cast<std::size_t>(o)] = acc;
        }
        break;
      }
    }
  }

  std::vector<double> backward_layer(std::size_t i, const std::vector<double>& g_out, std::vector<double>& grad) {
    const Shape& si = shapes_[i];
    const Shape& so = shapes_[i + 1];
    const auto& in = acts_[i];
    std::vector<double> g_in(in.size(), 0.0);
    const double* p = m_.params.data() + offsets_[i];
    double* gp = grad.data() + offsets_[i];
    switch (m_.arch.layers[i].kind) {
      case LayerKind::conv3x3: {
        double* gbias = gp + std::size_t(so.c) * si.c * 9;
        for (int o = 0; o < so.c; ++o) {
          const double* go = &g_out[std::size_t(o) * so.h * so.w];
          double bsum = 0.0;
          for (int k = 0; k < so.h * so.w; ++k) bsum += go[k];
          gbias[o] += bsum;
          for (int c = 0; c < si.c; ++c) {
            const double* src = &in[std::size_t(c) * si.h * si.w];
            double* gsrc = &g_in[std::size_t(c) * si.h * si.w];
            const double* k = p + (std::size_t(o) * si.c + c) * 9;
            double* gk = gp + (std::size_t(o) * si.c + c) * 9;
            for (int ky = 0; ky < 3; ++ky)
              for (int kx = 0; kx < 3; ++kx) {
                const double wgt = k[ky * 3 + kx];
                double gw = 0.0;
                const int y0 = std::max(0, 1 - ky), y1 = std::min(si.h, si.h + 1 - ky);
                const int x0 = std::max(0, 1 - kx), x1 = std::min(si.w, si.w + 1 - kx);
                for (int y = y0; y < y1; ++y) {
                  const std::size_t soff = std::size_t(y + ky - 1) * si.w + (kx - 1);
                  const double* grow = go + std::size_t(y) * so.w;
                  for (int x = x0; x < x1; ++x) {
                    gw += grow[x] * src[soff + x];
                    gsrc[soff + x] += grow[x] * wgt;
                  }
                }
                gk[ky * 3 + kx] += gw;
              }
          }
        }
        break;
      }
      case LayerKind::relu:
        for (std::size_t k = 0; k < in.size(); ++k) g_in[k] = in[k] > 0.0 ? g_out[k] : 0.0;
        break;
      case LayerKind::maxpool2:
        for (int c = 0; c < so.c; ++c)
          for (int y = 0; y < so.h; ++y)
            for (int x = 0; x < so.w; ++x) {
              g_in[pool_winner(in, si, c, y, x)] += g_out[(std::size_t(c) * so.h + y) * so.w + x];
            }
        break;
      case LayerKind::dense: {
        const std::size_t n_in = in.size();
        double* gbias = gp + std::size_t(so.c) * n_in;
        for (int o = 0; o < so.c; ++o) {
          const double go = g_out[static_cast<std::size_t>(o)];
          if (go == 0.0) continue;
          const double* row = p + std::size_t(o) * n_in;
          double* grow = gp + std::size_t(o) * n_in;
          for (std::size_t k = 0; k < n_in; ++k) {
            grow[k] += go * in[k];
            g_in[k] += go * row[k];
          }
          gbias[o] += go;
        }
        break;
      }
    }
    return g_in;
  }

  static std::size_t pool_winner(const std::vector<double>& in, const Shape& si, int c, int y, int x) {
    const std::size_t base = (std::size_t(c) * si.h + 2 * y) * si.w + 2 * x;
    const std::size_t cand[4] = {base, base + 1, base + si.w, base + si.w + 1};
    std::size_t best = cand[0];
    for (std::size_t q : cand)
      if (in[q] > in[best]) best = q;
    return best;
  }

  const Model& m_;
  std::vector<Shape> shapes_;
  std::vector<std::size_t> offsets_;
  std::vector<std::vector<double>> acts_;
  std::vector<double> probs_;
};

inline void check_item(const Model& m, const Image& img) {
  const Shape& s = m.arch.input;
  if (img.channels != s.c || img.height != s.h || img.width != s.w) {
    throw Error(Errc::dimension_mismatch, "image does not match the network input");
  }
}

}  // namespace detail

struct TrainConfig {
  int epochs = 12;
  int batch_size = 32;
  double learning_rate = 0.05;
  double lr_decay = 0.9;  // per epoch
  double momentum = 0.9;
  double weight_decay = 5e-4;
  std::uint64_t seed = 1;
};

/// Scales every item to the network input with the victim's kernel; this is
/// where scaling-attack images reveal their hidden content.
inline Dataset network_inputs(const Dataset& d, int net_h, int net_w, const Kernel& kernel) {
  Dataset out;
  out.labels = d.labels;
  out.images.reserve(d.size());
  for (const auto& img : d.images) out.images.push_back(detail::to_network(img, net_h, net_w, kernel));
  return out;
}

inline Model train(const Dataset& data, const Architecture& arch, const TrainConfig& cfg) {
  if (data.size() == 0) throw Error(Errc::insufficient_items, "training set is empty");
  if (cfg.epochs < 1 || cfg.batch_size < 1 || !(cfg.learning_rate > 0.0)) {
    throw Error(Errc::invalid_argument, "epochs, batch size and learning rate must be positive");
  }
  Model model = init_model(arch, cfg.seed);
  for (std::size_t i = 0; i < data.size(); ++i) {
    detail::check_item(model, data.images[i]);
    if (data.labels[i] < 0 || data.labels[i] >= arch.num_classes()) {
      throw Error(Errc::invalid_argument, "label out of range at item " + std::to_string(i));
    }
  }
  std::vector<std::vector<double>> inputs;
  inputs.reserve(data.size());
  for (const auto& img : data.images) inputs.push_back(to_tensor(img));

  detail::Pass pass(model);
  std::vector<double> grad(model.params.size()), velocity(model.params.size(), 0.0);
  std::vector<std::size_t> order(data.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  double lr = cfg.learning_rate;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    Rng rng(derive_seed(cfg.seed, 0x5eed0000ULL + static_cast<std::uint64_t>(epoch)));
    shuffle(order, rng);
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      std::fill(grad.begin(), grad.end(), 0.0);
      for (std::size_t k = start; k < end; ++k) {
        pass.forward(inputs[order[k]]);
        pass.backward(data.labels[order[k]], grad);
      }
      const double scale = 1.0 / double(end - start);
      for (std::size_t j = 0; j < grad.size(); ++j) {
        const double g = grad[j] * scale + cfg.weight_decay * model.params[j];
        velocity[j] = cfg.momentum * velocity[j] - lr * g;
        model.params[j] += velocity[j];
      }
    }
    lr *= cfg.lr_decay;
  }
  return model;
}

inline Model train(const PoisonedDataset& data, const Architecture& arch, const TrainConfig& cfg) {
  return train(data.data, arch, cfg);
}

struct Prediction {
  int label = 0;
  std::vector<double> probs;
};

inline Prediction predict(const Model& model, const Image& img) {
  detail::check_item(model, img);
  detail::Pass pass(model);
  Prediction p;
  p.probs = pass.forward(to_tensor(img));
  p.label = static_cast<int>(std::max_element(p.probs.begin(), p.probs.end()) - p.probs.begin());
  return p;
}

inline std::vector<int> predict_labels(const Model& model, const Dataset& d) {
  detail::Pass pass(model);
  std::vector<int> out;
  out.reserve(d.size());
  for (const auto& img : d.images) {
    detail::check_item(model, img);
    const auto& p = pass.forward(to_tensor(img));
    out.push_back(static_cast<int>(std::max_element(p.begin(), p.end()) - p.begin()));
  }
  return out;
}

inline double clean_accuracy(const Model& model, const Dataset& test) {
  if (test.size() == 0) throw Error(Errc::insufficient_items, "test set is empty");
  const auto pred = predict_labels(model, test);
  std::size_t hit = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) hit += pred[i] == test.labels[i];
  return double(hit) / double(pred.size());
}

/// Fraction of a (target-free) poisoned test set classified as the target.
inline double attack_success_rate(const Model& model, const Dataset& poisoned_test, int target_class) {
  if (poisoned_test.size() == 0) throw Error(Errc::insufficient_items, "poisoned test set is empty");
  for (int l : poisoned_test.labels)
    if (l == target_class) throw Error(Errc::invalid_argument, "poisoned test set contains target-class items");
  const auto pred = predict_labels(model, poisoned_test);
  const auto hit = std::count(pred.begin(), pred.end(), target_class);
  return double(hit) / double(pred.size());
}

/// Cross-entropy gradient for one sample.
inline std::vector<double> loss_gradient(const Model& model, const std::vector<double>& input, int label) {
  detail::Pass pass(model);
  pass.forward(input);
  std::vector<double> grad(model.params.size(), 0.0);
  pass.backward(label, grad);
  return grad;
}

inline double loss_value(const Model& model, const std::vector<double>& input, int label) {
  detail::Pass pass(model);
  pass.forward(input);
  return pass.loss(label);
}

struct GradientCheckResult {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  std::size_t skipped_kinks = 0;  // stencil straddles a ReLU or pool switch
};

/// Analytic vs central-difference gradient for one sample. Relative error is
/// |a - n| / max(|a| + |n|, floor). Parameters whose +-step stencil changes the
/// activation pattern are not differentiable there and are counted, not scored.
inline GradientCheckResult gradient_check(const Model& model, const std::vector<double>& input, int label,
                                          double step = 1e-3, double floor = 1e-8) {
  if (label < 0 || label >= model.arch.num_classes()) throw Error(Errc::invalid_argument, "label out of range");
  if (!(step > 0.0)) throw Error(Errc::invalid_argument, "step must be positive");
  Model probe = model;
  detail::Pass pass(probe);
  pass.forward(input);
  const auto base_pattern = pass.pattern();
  std::vector<double> analytic(model.params.size(), 0.0);
  pass.backward(label, analytic);

  GradientCheckResult r;
  for (std::size_t j = 0; j < probe.params.size(); ++j) {
    const double keep = probe.params[j];
    probe.params[j] = keep + step;
    pass.forward(input);
    const double up = pass.loss(label);
    bool kink = pass.pattern() != base_pattern;
    probe.params[j] = keep - step;
    pass.forward(input);
    const double down = pass.loss(label);
    kink = kink || pass.pattern() != base_pattern;
    probe.params[j] = keep;
    if (kink) {
      ++r.skipped_kinks;
      continue;
    }
    const double numeric = (up - down) / (2.0 * step);
    const double denom = std::max(std::abs(analytic[j]) + std::abs(numeric), floor);
    r.max_rel_error = std::max(r.max_rel_error, std::abs(analytic[j] - numeric) / denom);
    ++r.checked;
  }
  return r;
}

// ---------------------------------------------------------------------------
// Checkpoints: magic, uint32 version, uint32 descriptor length, descriptor
// text, uint64 seed, uint64 parameter count, float64 parameters; all LE.

inline constexpr char model_magic[8] = {'S', 'P', 'M', 'O', 'D', 'E', 'L', '\0'};
inline constexpr std::uint32_t model_version = 1;

inline void save_model(const Model& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::io_failure, path.string());
  auto put = [&](std::uint64_t v, int bytes) {
    for (int b = 0; b < bytes; ++b) out.put(static_cast<char>((v >> (8 * b)) & 0xff));
  };
  const std::string desc = model.arch.describe();
  out.write(model_magic, 8);
  put(model_version, 4);
  put(desc.size(), 4);
  out.write(desc.data(), static_cast<std::streamsize>(desc.size()));
  put(model.seed, 8);
  put(model.params.size(), 8);
  for (double p : model.params) {
    std::uint64_t bits;
    std::memcpy(&bits, &p, 8);
    put(bits, 8);
  }
  if (!out) throw Error(Errc::io_failure, path.string());
}

inline Model load_model(const std::filesystem::path& path) {
  const auto bytes = detail::read_file_bytes(path);
  std::size_t pos = 0;
  auto need = [&](std::size_t n) {
    if (bytes.size() - pos < n) throw Error(Errc::corrupt_stream, path.string() + ": truncated checkpoint");
  };
  auto get = [&](int n) {
    need(static_cast<std::size_t>(n));
    std::uint64_t v = 0;
    for (int b = 0; b < n; ++b) v |= std::uint64_t(bytes[pos++]) << (8 * b);
    return v;
  };
  need(8);
  if (!std::equal(model_magic, model_magic + 8, bytes.begin())) {
    throw Error(Errc::unsupported_format, path.string() + ": not a model checkpoint");
  }
  pos = 8;
  if (get(4) != model_version) throw Error(Errc::unsupported_format, path.string() + ": unknown checkpoint version");
  const auto len = static_cast<std::size_t>(get(4));
  need(len);
  const std::string desc(bytes.begin() + static_cast<std::ptrdiff_t>(pos),
                         bytes.begin() + static_cast<std::ptrdiff_t>(pos + len));
  pos += len;
  Model m;
  m.arch = Architecture::parse(desc);
  m.seed = get(8);
  const auto count = get(8);
  if (count != m.arch.param_count()) throw Error(Errc::corrupt_stream, path.string() + ": parameter count mismatch");
  need(count * 8);
  m.params.resize(count);
  for (auto& p : m.params) {
    const std::uint64_t bits = get(8);
    std::memcpy(&p, &bits, 8);
  }
  if (pos != bytes.size()) throw Error(Errc::corrupt_stream, path.string() + ": trailing bytes");
  return m;
}

}  // namespace scalepoison
