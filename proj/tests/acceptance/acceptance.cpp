// Acceptance suite: one PASS/FAIL line per criterion A1-A5, with the
// individual checks listed underneath. Exit status is non-zero if any
// criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <map>
#include <random>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "disue/distill.hpp"
#include "disue/io.hpp"
#include "disue/orchestrator.hpp"
#include "support.hpp"

using namespace disue;
using namespace disue::testing;

namespace {

class Criterion {
 public:
  explicit Criterion(std::string id) : id_(std::move(id)), start_(std::chrono::steady_clock::now()) {}

  void check(bool ok, const std::string& what) {
    ok_ = ok_ && ok;
    std::printf("    [%s] %s\n", ok ? " ok " : "FAIL", what.c_str());
    std::fflush(stdout);
  }

  bool finish(const std::string& title) const {
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    std::printf("%s %s  %s (%.1fs)\n\n", id_.c_str(), ok_ ? "PASS" : "FAIL", title.c_str(), s);
    std::fflush(stdout);
    return ok_;
  }

 private:
  std::string id_;
  bool ok_ = true;
  std::chrono::steady_clock::time_point start_;
};

std::string fmt(const char* pattern, double a, double b = 0.0, double c = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, pattern, a, b, c);
  return buf;
}

// --- A1 -------------------------------------------------------------------

double softmax_value(const std::vector<double>& logits, std::size_t i) {
  return nn::softmax(nn::Var::constant(nn::Tensor::row(logits))).value()[i];
}

double kl_value(const std::vector<double>& p, const std::vector<double>& q) {
  return nn::kl_divergence(nn::Var::constant(nn::Tensor::row(p)), nn::Var::constant(nn::Tensor::row(q))).item();
}

double ce_value(const std::vector<double>& logits, int label) {
  const std::vector<int> y{label};
  return nn::cross_entropy(nn::Var::constant(nn::Tensor::row(logits)), y).item();
}

// Gradient of CE(classifier(generator(z, y))) + KL(teacher || classifier) +
// diversity with respect to generator and classifier parameters, against
// central differences. Sizes vary per trial.
double model_gradient_error(std::uint64_t trial) {
  std::mt19937_64 rng(1000 + trial);
  const std::size_t classes = 2 + rng() % 4, hidden = 3 + rng() % 6, depth = 1 + rng() % 2;
  const std::size_t noise = 2 + rng() % 4, embed = 1 + rng() % 3, batch = 3 + rng() % 4, dim = 2 + rng() % 2;
  Rng init(trial);
  auto model = nn::make_classifier(nn::classifier_architecture(dim, classes, hidden, depth), init);
  auto teacher = nn::make_classifier(nn::classifier_architecture(dim, classes, hidden, depth), init);
  auto gen = nn::make_generator(noise, embed, classes, dim, hidden, init);
  // Zero initial biases can put a pre-activation exactly on a ReLU kink.
  std::normal_distribution<double> jitter(0.0, 0.1);
  for (auto& v : model.params.values()) v += jitter(rng);
  for (auto& v : gen.params.values()) v += jitter(rng);
  const auto z = random_tensor({batch, noise}, rng);
  std::vector<int> y(batch);
  for (auto& v : y) v = static_cast<int>(rng() % classes);

  auto loss_of = [&](const std::vector<double>& gp, const std::vector<double>& cp, bool grad) {
    nn::GeneratorModel g = gen;
    g.params = nn::ParamVector(gp, gen.params.segments());
    const auto c = nn::with_params(model, cp);
    nn::ParamBinding gb(g.params, grad), cb(c.params, grad), tb(teacher.params, false);
    auto x = nn::forward_generator(g, gb, z, y);
    auto logits = nn::forward_classifier(c, cb, x);
    auto target = nn::detach(nn::softmax(nn::forward_classifier(teacher, tb, x)));
    auto loss = nn::add(nn::add(nn::cross_entropy(logits, y), nn::kl_divergence(target, nn::softmax(logits))),
                        nn::diversity_loss(x, z));
    std::vector<double> flat;
    if (grad) {
      nn::backward(loss);
      flat = gb.flat_grad();
      const auto b = cb.flat_grad();
      flat.insert(flat.end(), b.begin(), b.end());
    }
    return std::make_pair(loss.item(), flat);
  };
  // The KL target depends on x, so it is held fixed for the numeric side
  // exactly as detach() holds it for the analytic side.
  const std::size_t gsize = gen.params.size();
  auto analytic = loss_of(gen.params.values(), model.params.values(), true).second;
  std::vector<double> flat = gen.params.values();
  flat.insert(flat.end(), model.params.values().begin(), model.params.values().end());

  nn::GeneratorModel g0 = gen;
  nn::ParamBinding g0b(g0.params, false);
  const auto x0 = nn::forward_generator(g0, g0b, z, y).value();
  const auto fixed_target = nn::softmax(nn::Var::constant(nn::forward_classifier(teacher, x0))).value();
  auto f = [&](const std::vector<double>& v) {
    nn::GeneratorModel g = gen;
    g.params = nn::ParamVector(std::vector<double>(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(gsize)),
                               gen.params.segments());
    const auto c = nn::with_params(model, std::vector<double>(v.begin() + static_cast<std::ptrdiff_t>(gsize), v.end()));
    nn::ParamBinding gb(g.params, false), cb(c.params, false);
    auto x = nn::forward_generator(g, gb, z, y);
    auto logits = nn::forward_classifier(c, cb, x);
    return nn::add(nn::add(nn::cross_entropy(logits, y),
                           nn::kl_divergence(nn::Var::constant(fixed_target), nn::softmax(logits))),
                   nn::diversity_loss(x, z))
        .item();
  };
  return max_rel_error(analytic, numeric_gradient(f, flat));
}

bool a1() {
  Criterion c("A1");

  std::mt19937_64 rng(6);
  double worst_col = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t k = 1 + rng() % 6, classes = 2 + rng() % 8;
    std::vector<std::vector<std::int64_t>> counts(k, std::vector<std::int64_t>(classes));
    for (auto& row : counts)
      for (auto& v : row) v = rng() % 3 == 0 ? 0 : static_cast<std::int64_t>(rng() % 1000);
    counts[0][0] += 1;
    const auto w = compute_gwf(LabelHistogram::from_counts(counts));
    for (std::size_t y = 0; y < classes; ++y) {
      std::int64_t col = 0;
      double s = 0.0;
      for (std::size_t kk = 0; kk < k; ++kk) col += counts[kk][y], s += w.alpha[kk][y];
      if (col > 0) worst_col = std::max(worst_col, std::abs(s - 1.0));
    }
  }
  c.check(worst_col <= 1e-12, fmt("GWF columns sum to 1 on 1000 random histograms (worst deviation %.2e)", worst_col));

  const std::vector<std::int64_t> totals{120, 30, 250, 600};
  const auto gls = compute_gls(totals);
  double prop_err = 0.0;
  for (std::size_t y = 0; y < totals.size(); ++y) prop_err = std::max(prop_err, std::abs(gls.probs[y] - totals[y] / 1000.0));
  c.check(prop_err <= 1e-15, fmt("GLS proportional to class totals (max error %.1e)", prop_err));
  Rng draw(77);
  const std::size_t n = 100000;
  const auto ys = sample_labels(gls, n, draw);
  double worst_sigma = 0.0;
  for (std::size_t y = 0; y < totals.size(); ++y) {
    const double p = gls.probs[y];
    const double f = static_cast<double>(std::count(ys.begin(), ys.end(), static_cast<int>(y))) / n;
    worst_sigma = std::max(worst_sigma, std::abs(f - p) / std::sqrt(p * (1 - p) / n));
  }
  c.check(worst_sigma <= 3.0, fmt("GLS sampling frequencies at 1e5 draws within 3 sigma (worst %.2f sigma)", worst_sigma));

  double closed = 0.0;
  auto track = [&](double got, double want) { closed = std::max(closed, std::abs(got - want)); };
  track(softmax_value({0, 0}, 0), 0.5);
  track(softmax_value({1000, 1000}, 1), 0.5);
  track(softmax_value({std::log(1.0), std::log(3.0)}, 0), 0.25);
  track(softmax_value({std::log(1.0), std::log(3.0)}, 1), 0.75);
  track(kl_value({0.3, 0.7}, {0.3, 0.7}), 0.0);
  track(kl_value({1, 0}, {0.5, 0.5}), std::log(2.0));
  track(kl_value({0.5, 0.5}, {0.25, 0.75}), 0.5 * std::log(2.0) + 0.5 * std::log(2.0 / 3.0));
  track(ce_value({0, 0}, 0), std::log(2.0));
  track(ce_value({std::log(1.0), std::log(3.0)}, 1), -std::log(0.75));
  c.check(closed <= 1e-9, fmt("softmax, KL and cross-entropy closed forms (max error %.1e)", closed));

  const PseudoBatch two{nn::Tensor({2, 1}, {0.0, 1.0}), {0, 1}, nn::Tensor({2, 2}, {0.0, 0.0, 2.0, 0.0})};
  const double div_err = std::abs(loss_div(two) - std::exp(-1.0));
  c.check(div_err <= 1e-9, fmt("diversity loss Q=2 case equals exp(-1) (error %.1e)", div_err));

  double worst_fd = 0.0;
  for (std::uint64_t t = 0; t < 50; ++t) worst_fd = std::max(worst_fd, model_gradient_error(t));
  c.check(worst_fd < 1e-4, fmt("autodiff vs central differences on 50 random models (worst rel. error %.2e)", worst_fd));

  return c.finish("math kernels");
}

// --- A2 -------------------------------------------------------------------

double plain_cosine(const std::vector<double>& a, const std::vector<double>& b) {
  double ab = 0.0, aa = 0.0, bb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) ab += a[i] * b[i], aa += a[i] * a[i], bb += b[i] * b[i];
  return ab / std::sqrt(aa * bb);
}

std::set<std::vector<int>> groups(const std::vector<int>& truth) {
  std::map<int, std::vector<int>> g;
  for (std::size_t i = 0; i < truth.size(); ++i) g[truth[i]].push_back(static_cast<int>(i));
  std::set<std::vector<int>> out;
  for (auto& [k, v] : g) out.insert(v);
  return out;
}

bool a2() {
  Criterion c("A2");

  std::mt19937_64 rng(21);
  std::normal_distribution<double> n01(0.0, 1.0);
  double worst = 0.0;
  for (std::uint64_t salt : {3u, 11u, 12345u}) {
    for (std::uint64_t round = 1; round <= 3; ++round) {
      for (int pair = 0; pair < 100; ++pair) {
        const std::size_t dim = 5 + rng() % 300;
        std::vector<double> a(dim), b(dim);
        for (auto& v : a) v = n01(rng);
        for (auto& v : b) v = n01(rng) + (pair % 2 ? 0.5 * a[&v - b.data()] : 0.0);
        const SecParams sec{salt};
        const double got = ssc_compute(ssc_encrypt(0, a, sec, round), ssc_encrypt(1, b, sec, round));
        worst = std::max(worst, std::abs(got - plain_cosine(a, b)));
      }
    }
  }
  c.check(worst <= 1e-9, fmt("masked similarity equals plaintext cosine on 100 pairs x 3 rounds x 3 salts (max error %.1e)", worst));

  int recovered = 0;
  double min_intra = 1.0, max_inter = 0.0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    std::mt19937_64 g(seed);
    const auto b = planted_bundles(30, 3, 500, 0.008, g);
    const auto [intra, inter] = bundle_cosines(b);
    min_intra = std::min(min_intra, intra);
    max_inter = std::max(max_inter, inter);
    std::vector<MaskedParams> up;
    for (std::size_t i = 0; i < b.vectors.size(); ++i) up.push_back(ssc_encrypt(static_cast<int>(i), b.vectors[i], SecParams{9}, 1));
    const auto res = affinity_propagation(build_similarity_matrix(up));
    const std::set<std::vector<int>> found(res.partition.members.begin(), res.partition.members.end());
    recovered += found == groups(b.truth);
  }
  c.check(min_intra > 0.95 && max_inter < 0.2,
          fmt("planted instances: min intra-cosine %.3f > 0.95, max inter-cosine %.3f < 0.2", min_intra, max_inter));
  c.check(recovered == 10, fmt("affinity propagation recovers the planted 3-way partition on %.0f/10 instances", recovered));

  return c.finish("secure similarity and clustering");
}

// --- A3 -------------------------------------------------------------------

SimConfig a3_config(Variant v, std::size_t threads) {
  SimConfig c;
  c.clients = 20;
  c.epsilon = 0.05;
  c.rounds = 50;
  c.act = 0.5;
  c.seeds = {0, 1, 2};
  c.variant = v;
  c.threads = threads;
  return c;
}

bool a3(std::size_t threads) {
  Criterion c("A3");
  std::map<Variant, ExperimentResult> res;
  for (Variant v : {Variant::kFedAvg, Variant::kDisue, Variant::kDisueMinusIga, Variant::kDisueMinusGls,
                    Variant::kDisueMinusGwf, Variant::kDisueMinusLcf, Variant::kDisueMinusLdiv}) {
    res.emplace(v, run_experiment(a3_config(v, threads)));
    std::printf("    ... %-18s final_acc %.4f +- %.4f\n", variant_name(v).c_str(), res.at(v).mean_final_accuracy(),
                res.at(v).std_final_accuracy());
    std::fflush(stdout);
  }
  const double disue = res.at(Variant::kDisue).mean_final_accuracy();
  const double fedavg = res.at(Variant::kFedAvg).mean_final_accuracy();
  c.check(disue >= fedavg - 0.01, fmt("disue %.4f >= fedavg %.4f - 0.01", disue, fedavg));

  double worst = 0.0;
  const auto& a = res.at(Variant::kDisueMinusIga).runs;
  const auto& b = res.at(Variant::kFedAvg).runs;
  bool aligned = a.size() == b.size();
  for (std::size_t s = 0; aligned && s < a.size(); ++s) {
    aligned = a[s].rounds.size() == b[s].rounds.size();
    for (std::size_t t = 0; aligned && t < a[s].rounds.size(); ++t) {
      worst = std::max(worst, std::abs(a[s].rounds[t].global_acc - b[s].rounds[t].global_acc));
    }
  }
  c.check(aligned && worst <= 1e-6,
          fmt("disue_minus_iga trajectory equals fedavg per round (max difference %.1e)", worst));

  for (Variant v : {Variant::kDisueMinusGls, Variant::kDisueMinusGwf, Variant::kDisueMinusLcf, Variant::kDisueMinusLdiv}) {
    const double other = res.at(v).mean_final_accuracy();
    c.check(disue >= other - 0.005,
            variant_name(v) + fmt(": disue %.4f >= %.4f - 0.005", disue, other));
  }
  return c.finish("directional end-to-end (N=20, eps=0.05, T=50, act=0.5, seeds 0-2)");
}

// --- A4 -------------------------------------------------------------------

bool a4() {
  Criterion c("A4");
  for (Variant v : {Variant::kDisue, Variant::kCflOnly}) {
    auto cfg = a3_config(v, 1);
    cfg.rounds = 10;
    cfg.seeds = {4};
    std::vector<std::string> csv;
    for (std::size_t threads : {1u, 4u, 1u}) {
      cfg.threads = threads;
      const auto dir = scratch_dir("acceptance_a4_" + std::to_string(csv.size()));
      emit_metrics({run_experiment(cfg)}, dir, false);
      csv.push_back(read_file(dir / (variant_name(v) + "_seed4.csv")));
    }
    c.check(!csv[0].empty() && csv[0] == csv[1] && csv[0] == csv[2],
            variant_name(v) + ": metrics CSV byte-identical across re-runs at 1 and 4 threads");
  }
  return c.finish("determinism");
}

// --- A5 -------------------------------------------------------------------

bool a5() {
  Criterion c("A5");
  SimConfig cfg;
  cfg.clients = 6;
  cfg.rounds = 5;
  cfg.act = 1.0;
  cfg.seeds = {3};
  cfg.dataset.identical_clients = true;
  cfg.batch_size = 100000;  // full batch, so the shuffle order cannot matter
  const auto disue = run_seed(cfg, 3);
  cfg.variant = Variant::kFedAvg;
  const auto fedavg = run_seed(cfg, 3);
  std::size_t max_k = 0;
  for (const auto& m : disue.rounds) max_k = std::max(max_k, m.k);
  c.check(max_k == 1, fmt("identical clients collapse to one cluster every round (max K = %.0f)", max_k));
  double worst = 0.0;
  const auto& a = disue.final_state.global.params.values();
  const auto& b = fedavg.final_state.global.params.values();
  for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
  c.check(worst <= 1e-6, fmt("disue and fedavg final models agree per parameter (max difference %.1e)", worst));
  return c.finish("fixed point with identical clients");
}

}  // namespace

int main() {
  const std::size_t threads = std::clamp<std::size_t>(std::thread::hardware_concurrency(), 1, 4);
  bool ok = true;
  ok &= a1();
  ok &= a2();
  ok &= a3(threads);
  ok &= a4();
  ok &= a5();
  std::printf("%s\n", ok ? "ALL CRITERIA PASS" : "SOME CRITERIA FAIL");
  return ok ? 0 : 1;
}
