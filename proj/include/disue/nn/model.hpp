#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "disue/error.hpp"
#include "disue/nn/autograd.hpp"
#include "disue/nn/tensor.hpp"
#include "disue/rng.hpp"

namespace disue::nn {

// Flat view of a model's parameters. Segment shapes record how the flat
// buffer splits into weight matrices and bias vectors.
class ParamVector {
 public:
  ParamVector() = default;
  ParamVector(std::vector<double> values, std::vector<Shape> segments)
      : values_(std::move(values)), segments_(std::move(segments)) {
    std::size_t total = 0;
    for (const auto& s : segments_) total += shape_size(s);
    if (!segments_.empty() && total != values_.size()) {
      throw InvalidInput("parameter segments cover " + std::to_string(total) + " of " +
                         std::to_string(values_.size()) + " values");
    }
  }
  explicit ParamVector(std::vector<double> values) : values_(std::move(values)) {}

  std::size_t size() const { return values_.size(); }
  std::span<double> data() { return values_; }
  std::span<const double> data() const { return values_; }
  std::vector<double>& values() { return values_; }
  const std::vector<double>& values() const { return values_; }
  const std::vector<Shape>& segments() const { return segments_; }
  double operator[](std::size_t i) const { return values_[i]; }
  double& operator[](std::size_t i) { return values_[i]; }

  // Order-sensitive hash of the raw bit patterns; used to assert that a
  // frozen model was not touched.
  std::uint64_t checksum() const {
    std::uint64_t h = 1469598103934665603ull;
    for (double v : values_) {
      std::uint64_t bits;
      std::memcpy(&bits, &v, sizeof bits);
      h = (h ^ bits) * 1099511628211ull;
    }
    return h;
  }

  friend bool operator==(const ParamVector& a, const ParamVector& b) { return a.values_ == b.values_; }

 private:
  std::vector<double> values_;
  std::vector<Shape> segments_;
};

inline double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw InvalidInput("dot: length mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

// Leaf variables for each parameter segment, bound for one forward pass.
class ParamBinding {
 public:
  ParamBinding(const ParamVector& params, bool requires_grad) {
    std::size_t off = 0;
    for (const auto& seg : params.segments()) {
      const std::size_t n = shape_size(seg);
      std::vector<double> chunk(params.values().begin() + static_cast<std::ptrdiff_t>(off),
                                params.values().begin() + static_cast<std::ptrdiff_t>(off + n));
      Tensor t(seg, std::move(chunk));
      leaves_.push_back(requires_grad ? Var::parameter(std::move(t)) : Var::constant(std::move(t)));
      off += n;
    }
    size_ = off;
  }

  const Var& operator[](std::size_t i) const { return leaves_[i]; }
  std::size_t count() const { return leaves_.size(); }

  // Concatenated gradients in ParamVector order.
  std::vector<double> flat_grad() const {
    std::vector<double> g;
    g.reserve(size_);
    for (const auto& v : leaves_) {
      Tensor t = v.grad();
      g.insert(g.end(), t.values().begin(), t.values().end());
    }
    return g;
  }

 private:
  std::vector<Var> leaves_;
  std::size_t size_ = 0;
};

enum class LayerKind { kDense, kRelu, kTanh };

struct Layer {
  LayerKind kind;
  std::size_t in = 0;
  std::size_t out = 0;

  static Layer dense(std::size_t in, std::size_t out) { return {LayerKind::kDense, in, out}; }
  static Layer relu() { return {LayerKind::kRelu}; }
  static Layer tanh() { return {LayerKind::kTanh}; }
};

// Feed-forward stack of dense layers and pointwise activations.
class Mlp {
 public:
  Mlp() = default;
  explicit Mlp(std::vector<Layer> layers) : layers_(std::move(layers)) {
    std::size_t prev = 0;
    for (const auto& l : layers_) {
      if (l.kind != LayerKind::kDense) continue;
      if (prev != 0 && l.in != prev) throw InvalidInput("mlp: dense layer input width does not chain");
      prev = l.out;
      segments_.push_back({l.in, l.out});
      segments_.push_back({l.out});
    }
    if (segments_.empty()) throw InvalidInput("mlp: needs at least one dense layer");
  }

  const std::vector<Layer>& layers() const { return layers_; }
  const std::vector<Shape>& segments() const { return segments_; }
  std::size_t input_dim() const { return segments_.front()[0]; }
  std::size_t output_dim() const { return segments_[segments_.size() - 1][0]; }

  std::size_t param_count() const {
    std::size_t n = 0;
    for (const auto& s : segments_) n += shape_size(s);
    return n;
  }

  // He-uniform weights, zero biases.
  void init_into(std::vector<double>& out, Rng& rng) const {
    for (const auto& l : layers_) {
      if (l.kind != LayerKind::kDense) continue;
      const double bound = std::sqrt(6.0 / static_cast<double>(l.in));
      std::uniform_real_distribution<double> u(-bound, bound);
      for (std::size_t i = 0; i < l.in * l.out; ++i) out.push_back(u(rng));
      out.insert(out.end(), l.out, 0.0);
    }
  }

  // Runs the stack using leaves [first, first + 2 * dense_count) of `bound`.
  Var forward(const ParamBinding& bound, std::size_t first, Var x) const {
    std::size_t slot = first;
    for (const auto& l : layers_) {
      switch (l.kind) {
        case LayerKind::kDense:
          x = add_bias(matmul(x, bound[slot]), bound[slot + 1]);
          slot += 2;
          break;
        case LayerKind::kRelu:
          x = relu(x);
          break;
        case LayerKind::kTanh:
          x = nn::tanh(x);
          break;
      }
    }
    return x;
  }

 private:
  std::vector<Layer> layers_;
  std::vector<Shape> segments_;
};

struct ClassifierModel {
  Mlp net;
  ParamVector params;
  std::size_t num_classes = 0;

  std::size_t input_dim() const { return net.input_dim(); }
};

// input -> [Dense(hidden) -> ReLU] x depth -> Dense(num_classes), raw logits.
inline Mlp classifier_architecture(std::size_t input_dim, std::size_t num_classes, std::size_t hidden = 64,
                                   std::size_t depth = 2) {
  std::vector<Layer> layers;
  std::size_t prev = input_dim;
  for (std::size_t i = 0; i < depth; ++i) {
    layers.push_back(Layer::dense(prev, hidden));
    layers.push_back(Layer::relu());
    prev = hidden;
  }
  layers.push_back(Layer::dense(prev, num_classes));
  return Mlp(std::move(layers));
}

inline ClassifierModel make_classifier(Mlp net, Rng& rng) {
  std::vector<double> values;
  values.reserve(net.param_count());
  net.init_into(values, rng);
  ClassifierModel m;
  m.num_classes = net.output_dim();
  m.params = ParamVector(std::move(values), net.segments());
  m.net = std::move(net);
  return m;
}

// Replaces a classifier's parameters, keeping its layout.
inline ClassifierModel with_params(const ClassifierModel& model, std::vector<double> values) {
  if (values.size() != model.params.size()) throw InvalidInput("with_params: parameter count changed");
  ClassifierModel out = model;
  out.params = ParamVector(std::move(values), model.net.segments());
  return out;
}

inline Var forward_classifier(const ClassifierModel& model, const ParamBinding& bound, const Var& batch) {
  const Tensor& x = batch.value();
  if (x.rank() != 2 || x.cols() != model.input_dim()) {
    throw InvalidInput("classifier expects [batch, " + std::to_string(model.input_dim()) + "], got " +
                       shape_str(x.shape()));
  }
  return model.net.forward(bound, 0, batch);
}

// Evaluation-only forward pass; no graph is recorded.
inline Tensor forward_classifier(const ClassifierModel& model, const Tensor& batch) {
  ParamBinding bound(model.params, false);
  return forward_classifier(model, bound, Var::constant(batch)).value();
}

// Conditional generator: [embed(y) ++ z] -> MLP -> tanh pseudo-samples.
struct GeneratorModel {
  std::size_t noise_dim = 0;
  std::size_t label_embed_dim = 0;
  std::size_t num_classes = 0;
  Mlp net;
  ParamVector params;  // embedding table [num_classes, label_embed_dim] first, then net

  std::size_t output_dim() const { return net.output_dim(); }
};

inline GeneratorModel make_generator(std::size_t noise_dim, std::size_t label_embed_dim, std::size_t num_classes,
                                     std::size_t output_dim, std::size_t hidden, Rng& rng) {
  GeneratorModel g;
  g.noise_dim = noise_dim;
  g.label_embed_dim = label_embed_dim;
  g.num_classes = num_classes;
  g.net = Mlp({Layer::dense(noise_dim + label_embed_dim, hidden), Layer::relu(), Layer::dense(hidden, hidden),
               Layer::relu(), Layer::dense(hidden, output_dim), Layer::tanh()});
  std::vector<double> values;
  values.reserve(num_classes * label_embed_dim + g.net.param_count());
  std::normal_distribution<double> n01(0.0, 1.0);
  for (std::size_t i = 0; i < num_classes * label_embed_dim; ++i) values.push_back(n01(rng));
  g.net.init_into(values, rng);
  std::vector<Shape> segs{{num_classes, label_embed_dim}};
  segs.insert(segs.end(), g.net.segments().begin(), g.net.segments().end());
  g.params = ParamVector(std::move(values), std::move(segs));
  return g;
}

inline Var forward_generator(const GeneratorModel& gen, const ParamBinding& bound, const Tensor& z,
                             std::span<const int> labels) {
  if (z.rank() != 2 || z.cols() != gen.noise_dim || z.rows() != labels.size()) {
    throw InvalidInput("generator expects noise [" + std::to_string(labels.size()) + ", " +
                       std::to_string(gen.noise_dim) + "], got " + shape_str(z.shape()));
  }
  Var embed = gather_rows(bound[0], labels);
  Var h = concat_cols(embed, Var::constant(z));
  return gen.net.forward(bound, 1, h);
}

// p <- p - lr * (g + weight_decay * p). Rejects the whole step if any
// gradient is non-finite; `params` is untouched in that case.
inline void sgd_step(ParamVector& params, std::span<const double> grads, double lr, double weight_decay) {
  if (grads.size() != params.size()) throw InvalidInput("sgd_step: gradient length differs from parameters");
  if (!(lr >= 0.0)) throw InvalidInput("sgd_step: learning rate must be non-negative");
  for (double g : grads) {
    if (!std::isfinite(g)) throw DivergenceError("sgd_step: non-finite gradient");
  }
  auto p = params.data();
  for (std::size_t i = 0; i < p.size(); ++i) p[i] -= lr * (grads[i] + weight_decay * p[i]);
}

inline std::vector<int> argmax_rows(const Tensor& logits) {
  std::vector<int> out(logits.rows());
  const std::size_t n = logits.cols();
  for (std::size_t i = 0; i < logits.rows(); ++i) {
    std::size_t best = 0;
    for (std::size_t j = 1; j < n; ++j)
      if (logits[i * n + j] > logits[i * n + best]) best = j;
    out[i] = static_cast<int>(best);
  }
  return out;
}

}  // namespace disue::nn
