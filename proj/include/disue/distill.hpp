#pragma once

// Server-side inter-group aggregation: a conditional generator and the global
// student play an alternating game against the frozen cluster teachers.
//
//   generator phase: minimize  -L_cd + beta_cf * L_cf + beta_div * L_div
//   student phase:   minimize   L_cd on the regenerated pseudo-batch
//
// L_cd is the per-sample GWF-weighted KL(teacher || student), L_cf the
// GWF-weighted cross-entropy of each teacher against the conditioning label
// and L_div the noise-scaled diversity penalty. Teacher distributions are
// constants in the student phase; the student distribution is a constant in
// the generator phase.

#include <cmath>
#include <cstddef>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "disue/aggregation.hpp"
#include "disue/error.hpp"
#include "disue/nn/autograd.hpp"
#include "disue/nn/model.hpp"
#include "disue/rng.hpp"

namespace disue {

struct DistillConfig {
  double beta_cf = 1.0;
  double beta_div = 1.0;
  std::size_t noise_dim = 100;
  std::size_t label_embed_dim = 8;
  std::size_t generator_hidden = 64;
  std::size_t pseudo_batch = 64;
  std::size_t inner_iters = 10;
  std::size_t gen_steps = 1;
  std::size_t student_steps = 5;
  double gen_lr = 0.01;
  double student_lr = 0.1;
  // Maximize L_cd + beta_cf * L_cf + beta_div * L_div in the generator phase
  // instead of the default sign resolution.
  bool literal_signs = false;

  friend bool operator==(const DistillConfig&, const DistillConfig&) = default;
};

struct PseudoBatch {
  nn::Tensor z;
  std::vector<int> y;
  nn::Tensor x_hat;

  std::size_t size() const { return y.size(); }
};

inline nn::Tensor sample_noise(std::size_t rows, std::size_t dim, Rng& rng) {
  std::normal_distribution<double> n01(0.0, 1.0);
  nn::Tensor z({rows, dim});
  for (auto& v : z.values()) v = n01(rng);
  return z;
}

// Draws labels from `gls` and noise from N(0, 1), then runs the generator.
inline PseudoBatch make_pseudo_batch(const nn::GeneratorModel& gen, const GlsDistribution& gls, std::size_t q,
                                     Rng& rng) {
  PseudoBatch b;
  b.y = sample_labels(gls, q, rng);
  b.z = sample_noise(q, gen.noise_dim, rng);
  nn::ParamBinding bound(gen.params, false);
  b.x_hat = nn::forward_generator(gen, bound, b.z, b.y).value();
  return b;
}

namespace detail {

inline void check_teachers(std::span<const nn::ClassifierModel> teachers, const GwfWeights& gwf) {
  if (teachers.empty()) throw InvalidInput("distillation needs at least one teacher");
  if (gwf.clusters() != teachers.size()) {
    throw InvalidInput("GWF has " + std::to_string(gwf.clusters()) + " cluster rows for " +
                       std::to_string(teachers.size()) + " teachers");
  }
}

inline std::vector<double> alpha_column(const GwfWeights& gwf, std::size_t k, std::span<const int> y) {
  std::vector<double> w(y.size());
  for (std::size_t b = 0; b < y.size(); ++b) w[b] = gwf.at(k, y[b]);
  return w;
}

// sum_k mean_b alpha^k_{y_b} * KL(p_k,b || q_b)
inline nn::Var cd_graph(std::span<const nn::Var> teacher_probs, const nn::Var& student_probs, std::span<const int> y,
                        const GwfWeights& gwf) {
  nn::Var total;
  for (std::size_t k = 0; k < teacher_probs.size(); ++k) {
    auto term = nn::weighted_mean(nn::kl_rows(teacher_probs[k], student_probs), alpha_column(gwf, k, y));
    total = k == 0 ? term : nn::add(total, term);
  }
  return total;
}

// sum_k mean_b alpha^k_{y_b} * CE(teacher_k(x_b), y_b)
inline nn::Var cf_graph(std::span<const nn::Var> teacher_logits, std::span<const int> y, const GwfWeights& gwf) {
  nn::Var total;
  for (std::size_t k = 0; k < teacher_logits.size(); ++k) {
    auto term = nn::weighted_mean(nn::cross_entropy_rows(teacher_logits[k], y), alpha_column(gwf, k, y));
    total = k == 0 ? term : nn::add(total, term);
  }
  return total;
}

inline nn::Var classify(const nn::ClassifierModel& m, const nn::Var& x) {
  nn::ParamBinding bound(m.params, false);
  return nn::forward_classifier(m, bound, x);
}

}  // namespace detail

// Cluster-distillation loss on a fixed pseudo-batch.
inline double loss_cd(std::span<const nn::ClassifierModel> teachers, const nn::ClassifierModel& student,
                      const PseudoBatch& batch, const GwfWeights& gwf) {
  detail::check_teachers(teachers, gwf);
  auto x = nn::Var::constant(batch.x_hat);
  std::vector<nn::Var> probs;
  for (const auto& t : teachers) probs.push_back(nn::softmax(detail::classify(t, x)));
  auto q = nn::softmax(detail::classify(student, x));
  return detail::cd_graph(probs, q, batch.y, gwf).item();
}

// Cluster-fidelity loss on a fixed pseudo-batch.
inline double loss_cf(std::span<const nn::ClassifierModel> teachers, const PseudoBatch& batch,
                      const GwfWeights& gwf) {
  detail::check_teachers(teachers, gwf);
  auto x = nn::Var::constant(batch.x_hat);
  std::vector<nn::Var> logits;
  for (const auto& t : teachers) logits.push_back(detail::classify(t, x));
  return detail::cf_graph(logits, batch.y, gwf).item();
}

inline double loss_div(const PseudoBatch& batch) {
  if (batch.size() < 1) throw InvalidInput("loss_div: empty pseudo-batch");
  return nn::diversity_loss(nn::Var::constant(batch.x_hat), batch.z).item();
}

struct GeneratorStepLosses {
  double cd = 0.0;
  double cf = 0.0;
  double div = 0.0;
  double objective = 0.0;
};

inline double generator_objective(double cd, double cf, double div, const DistillConfig& cfg) {
  if (cfg.literal_signs) return -(cd + cfg.beta_cf * cf + cfg.beta_div * div);
  return -cd + cfg.beta_cf * cf + cfg.beta_div * div;
}

// One SGD step on the generator for fixed (z, y). Teachers and student are
// read-only. Returns the losses evaluated before the step.
inline GeneratorStepLosses generator_step(nn::GeneratorModel& gen, std::span<const nn::ClassifierModel> teachers,
                                          const nn::ClassifierModel& student, const nn::Tensor& z,
                                          std::span<const int> y, const GwfWeights& gwf, const DistillConfig& cfg) {
  detail::check_teachers(teachers, gwf);
  nn::ParamBinding bound(gen.params, true);
  nn::Var x = nn::forward_generator(gen, bound, z, y);

  std::vector<nn::Var> logits, probs;
  for (const auto& t : teachers) {
    logits.push_back(detail::classify(t, x));
    probs.push_back(nn::softmax(logits.back()));
  }
  nn::Var q = nn::detach(nn::softmax(detail::classify(student, x)));

  nn::Var cd = detail::cd_graph(probs, q, y, gwf);
  nn::Var cf = detail::cf_graph(logits, y, gwf);
  nn::Var div = nn::diversity_loss(x, z);
  const double sign = cfg.literal_signs ? -1.0 : 1.0;
  const std::vector<nn::Var> terms{cd, cf, div};
  const std::vector<double> coeffs{-1.0, sign * cfg.beta_cf, sign * cfg.beta_div};
  nn::Var objective = nn::combine(terms, coeffs);

  GeneratorStepLosses out{cd.item(), cf.item(), div.item(), objective.item()};
  if (!std::isfinite(out.objective)) throw DivergenceError("generator objective is not finite");
  nn::backward(objective);
  nn::sgd_step(gen.params, bound.flat_grad(), cfg.gen_lr, 0.0);
  return out;
}

// Teacher probabilities on a fixed batch, computed once per student phase.
inline std::vector<nn::Var> teacher_targets(std::span<const nn::ClassifierModel> teachers, const nn::Tensor& x_hat) {
  auto x = nn::Var::constant(x_hat);
  std::vector<nn::Var> probs;
  for (const auto& t : teachers) probs.push_back(nn::softmax(detail::classify(t, x)));
  return probs;
}

// One SGD step on the student toward the fixed teacher targets. Returns L_cd
// before the step.
inline double student_step(nn::ClassifierModel& student, std::span<const nn::Var> targets, const nn::Tensor& x_hat,
                           std::span<const int> y, const GwfWeights& gwf, const DistillConfig& cfg) {
  nn::ParamBinding bound(student.params, true);
  nn::Var q = nn::softmax(nn::forward_classifier(student, bound, nn::Var::constant(x_hat)));
  nn::Var cd = detail::cd_graph(targets, q, y, gwf);
  const double value = cd.item();
  if (!std::isfinite(value)) throw DivergenceError("distillation loss is not finite");
  nn::backward(cd);
  nn::sgd_step(student.params, bound.flat_grad(), cfg.student_lr, 0.0);
  return value;
}

struct IgaIteration {
  GeneratorStepLosses generator;   // first generator step of the iteration
  std::vector<double> student_cd;  // L_cd before each student step, then after the last
};

struct IgaResult {
  nn::ClassifierModel student;
  nn::GeneratorModel generator;
  std::vector<IgaIteration> trace;
  bool diverged = false;
  std::string message;
};

// Alternating generator/student optimization over `cfg.inner_iters`
// iterations. On a non-finite loss the round is abandoned and the inputs are
// returned unchanged with `diverged` set.
inline IgaResult iga_round(std::span<const nn::ClassifierModel> teachers, const nn::ClassifierModel& student,
                           const nn::GeneratorModel& generator, const GlsDistribution& gls, const GwfWeights& gwf,
                           const DistillConfig& cfg, Rng& rng) {
  detail::check_teachers(teachers, gwf);
  IgaResult res{student, generator, {}, false, {}};
  try {
    for (std::size_t it = 0; it < cfg.inner_iters; ++it) {
      IgaIteration rec;
      const auto y = sample_labels(gls, cfg.pseudo_batch, rng);
      const auto z = sample_noise(cfg.pseudo_batch, generator.noise_dim, rng);

      for (std::size_t s = 0; s < cfg.gen_steps; ++s) {
        auto losses = generator_step(res.generator, teachers, res.student, z, y, gwf, cfg);
        if (s == 0) rec.generator = losses;
      }

      nn::ParamBinding frozen(res.generator.params, false);
      const nn::Tensor x_hat = nn::forward_generator(res.generator, frozen, z, y).value();
      const auto targets = teacher_targets(teachers, x_hat);
      for (std::size_t s = 0; s < cfg.student_steps; ++s) {
        rec.student_cd.push_back(student_step(res.student, targets, x_hat, y, gwf, cfg));
      }
      auto q = nn::softmax(detail::classify(res.student, nn::Var::constant(x_hat)));
      rec.student_cd.push_back(detail::cd_graph(targets, q, y, gwf).item());
      res.trace.push_back(std::move(rec));
    }
  } catch (const DivergenceError& e) {
    return IgaResult{student, generator, std::move(res.trace), true, e.what()};
  }
  return res;
}

}  // namespace disue
