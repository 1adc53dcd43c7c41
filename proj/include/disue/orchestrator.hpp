#pragma once

// Round loop of the clustered federated simulation: client sampling, local
// training, masked similarity upload, affinity-propagation clustering,
// intra-cluster averaging, global averaging and inter-group distillation.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <utility>
#include <vector>

#include "disue/aggregation.hpp"
#include "disue/clustering.hpp"
#include "disue/data.hpp"
#include "disue/distill.hpp"
#include "disue/error.hpp"
#include "disue/nn/model.hpp"
#include "disue/partition.hpp"
#include "disue/rng.hpp"
#include "disue/secure_sim.hpp"

namespace disue {

enum class Variant {
  kDisue,
  kFedAvg,
  kCflOnly,
  kDisueMinusIga,
  kDisueMinusGls,
  kDisueMinusGwf,
  kDisueMinusLcf,
  kDisueMinusLdiv,
};

inline constexpr std::pair<Variant, std::string_view> kVariantNames[] = {
    {Variant::kDisue, "disue"},
    {Variant::kFedAvg, "fedavg"},
    {Variant::kCflOnly, "cfl_only"},
    {Variant::kDisueMinusIga, "disue_minus_iga"},
    {Variant::kDisueMinusGls, "disue_minus_gls"},
    {Variant::kDisueMinusGwf, "disue_minus_gwf"},
    {Variant::kDisueMinusLcf, "disue_minus_lcf"},
    {Variant::kDisueMinusLdiv, "disue_minus_ldiv"},
};

inline std::string variant_name(Variant v) {
  for (const auto& [var, name] : kVariantNames)
    if (var == v) return std::string(name);
  return "unknown";
}

inline std::optional<Variant> parse_variant(std::string_view name) {
  for (const auto& [var, n] : kVariantNames)
    if (n == name) return var;
  return std::nullopt;
}

inline bool uses_clustering(Variant v) { return v != Variant::kFedAvg; }

inline bool uses_iga(Variant v) {
  return v != Variant::kFedAvg && v != Variant::kCflOnly && v != Variant::kDisueMinusIga;
}

enum class FailurePolicy { kHalt, kSkipRound };

struct DatasetConfig {
  std::size_t num_classes = 4;
  std::size_t samples_per_class = 500;
  std::size_t feature_dim = 2;
  double radius = 0.5;
  double separation_in_std = 2.5;
  double test_fraction = 0.2;
  double holdout_fraction = 0.2;
  // Every client gets the whole training pool instead of a Dirichlet share.
  bool identical_clients = false;

  friend bool operator==(const DatasetConfig&, const DatasetConfig&) = default;
};

struct SimConfig {
  std::size_t rounds = 50;
  std::size_t clients = 100;
  double act = 0.15;
  std::size_t local_epochs = 5;
  std::size_t batch_size = 50;
  double local_lr = 0.1;
  double weight_decay = 1e-3;
  double epsilon = 0.01;
  Variant variant = Variant::kDisue;
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};
  std::size_t threads = 1;
  std::size_t hidden = 64;
  FailurePolicy failure_policy = FailurePolicy::kHalt;
  // GLS uses class totals summed over all rounds so far instead of the
  // current active set only.
  bool accumulate_label_stats = false;
  // Re-initialize the generator at the start of every round.
  bool reinit_generator = false;
  // Record wall-clock time per round; off keeps metrics byte-reproducible.
  bool record_timing = false;
  // Cluster on local updates (local minus broadcast parameters) rather than
  // on the raw local parameters.
  bool cluster_on_updates = false;
  std::uint64_t sec_seed = 0x5eed5eedULL;
  DatasetConfig dataset;
  DistillConfig distill;

  friend bool operator==(const SimConfig&, const SimConfig&) = default;
};

// Validates ranges; throws ConfigError naming the first bad key.
inline void validate(const SimConfig& c) {
  if (c.rounds < 1) throw ConfigError("rounds", "must be >= 1");
  if (c.clients < 2) throw ConfigError("clients", "must be >= 2");
  if (!(c.act > 0.0 && c.act <= 1.0)) throw ConfigError("act", "must be in (0, 1]");
  if (c.local_epochs < 1) throw ConfigError("local_epochs", "must be >= 1");
  if (c.batch_size < 1) throw ConfigError("batch_size", "must be >= 1");
  if (!(c.local_lr >= 0.0)) throw ConfigError("local_lr", "must be >= 0");
  if (!(c.weight_decay >= 0.0)) throw ConfigError("weight_decay", "must be >= 0");
  if (!(c.epsilon > 0.0)) throw ConfigError("epsilon", "must be > 0");
  if (c.seeds.empty()) throw ConfigError("seeds", "need at least one seed");
  if (c.threads < 1) throw ConfigError("threads", "must be >= 1");
  if (c.hidden < 1) throw ConfigError("hidden", "must be >= 1");
  const auto& d = c.dataset;
  if (d.num_classes < 2) throw ConfigError("dataset.num_classes", "must be >= 2");
  if (d.feature_dim < 2) throw ConfigError("dataset.feature_dim", "must be >= 2");
  if (d.samples_per_class < 1) throw ConfigError("dataset.samples_per_class", "must be >= 1");
  if (!(d.radius > 0.0)) throw ConfigError("dataset.radius", "must be > 0");
  if (!(d.separation_in_std > 0.0)) throw ConfigError("dataset.separation_in_std", "must be > 0");
  if (!(d.test_fraction >= 0.0 && d.test_fraction < 1.0)) throw ConfigError("dataset.test_fraction", "must be in [0, 1)");
  if (!(d.holdout_fraction >= 0.0 && d.holdout_fraction < 1.0)) {
    throw ConfigError("dataset.holdout_fraction", "must be in [0, 1)");
  }
  const auto& g = c.distill;
  if (!(g.beta_cf >= 0.0)) throw ConfigError("distill.beta_cf", "must be >= 0");
  if (!(g.beta_div >= 0.0)) throw ConfigError("distill.beta_div", "must be >= 0");
  if (g.noise_dim < 1) throw ConfigError("distill.noise_dim", "must be >= 1");
  if (g.label_embed_dim < 1) throw ConfigError("distill.label_embed_dim", "must be >= 1");
  if (g.generator_hidden < 1) throw ConfigError("distill.generator_hidden", "must be >= 1");
  if (g.pseudo_batch < 1) throw ConfigError("distill.pseudo_batch", "must be >= 1");
  if (!(g.gen_lr > 0.0)) throw ConfigError("distill.gen_lr", "must be > 0");
  if (!(g.student_lr > 0.0)) throw ConfigError("distill.student_lr", "must be > 0");
}

// ---------------------------------------------------------------------------

inline double accuracy(const nn::ClassifierModel& model, const Dataset& d) {
  if (d.size() == 0) return 0.0;
  const auto pred = nn::argmax_rows(nn::forward_classifier(model, d.all_features()));
  std::size_t hit = 0;
  for (std::size_t i = 0; i < d.size(); ++i) hit += pred[i] == d.labels[i];
  return static_cast<double>(hit) / static_cast<double>(d.size());
}

struct LocalResult {
  nn::ParamVector params;
  double loss = 0.0;  // mean mini-batch loss over the final epoch
  bool diverged = false;
};

// Mini-batch SGD on one client's data starting from `init`. Batches are
// reshuffled every epoch from `rng`. On divergence the starting parameters
// are returned with `diverged` set.
inline LocalResult local_train(const nn::ClassifierModel& arch, const Dataset& data, const nn::ParamVector& init,
                               std::size_t epochs, double lr, std::size_t batch_size, double weight_decay, Rng& rng) {
  if (data.size() < 1) throw InvalidState("local_train: client has no training samples");
  nn::ClassifierModel model = nn::with_params(arch, init.values());
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  LocalResult res;
  try {
    for (std::size_t e = 0; e < epochs; ++e) {
      std::shuffle(order.begin(), order.end(), rng);
      double loss_sum = 0.0;
      std::size_t batches = 0;
      for (std::size_t start = 0; start < order.size(); start += batch_size) {
        const std::size_t end = std::min(order.size(), start + batch_size);
        std::span<const std::size_t> idx(order.data() + start, end - start);
        std::vector<int> labels;
        for (auto i : idx) labels.push_back(data.labels[i]);
        nn::ParamBinding bound(model.params, true);
        auto loss = nn::cross_entropy(nn::forward_classifier(model, bound, nn::Var::constant(data.batch(idx))), labels);
        if (!std::isfinite(loss.item())) throw DivergenceError("local loss is not finite");
        nn::backward(loss);
        nn::sgd_step(model.params, bound.flat_grad(), lr, weight_decay);
        loss_sum += loss.item();
        ++batches;
      }
      res.loss = loss_sum / static_cast<double>(batches);
    }
  } catch (const DivergenceError&) {
    return LocalResult{init, 0.0, true};
  }
  res.params = std::move(model.params);
  return res;
}

// ceil(act * N) distinct client ids, ascending, from a round-keyed stream.
inline std::vector<int> sample_active_clients(std::size_t n, double act, std::uint64_t round,
                                              std::uint64_t master_seed) {
  if (!(act > 0.0 && act <= 1.0)) throw ConfigError("act", "must be in (0, 1]");
  // The epsilon keeps products like 0.15 * 100 = 15.000000000000002 at 15.
  auto count = static_cast<std::size_t>(std::ceil(act * static_cast<double>(n) - 1e-9));
  count = std::clamp<std::size_t>(count, 1, n);
  std::vector<int> ids(n);
  std::iota(ids.begin(), ids.end(), 0);
  Rng rng = derive_rng(master_seed, Stream::kActiveSet, {round});
  for (std::size_t i = 0; i < count; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, n - 1);
    std::swap(ids[i], ids[pick(rng)]);
  }
  ids.resize(count);
  std::sort(ids.begin(), ids.end());
  return ids;
}

// ---------------------------------------------------------------------------

struct Event {
  std::size_t round = 0;
  std::string kind;
  std::string detail;
};

struct RoundMetrics {
  std::size_t round = 0;
  std::size_t k = 1;
  double global_acc = 0.0;
  std::vector<double> cluster_acc;
  double cluster_acc_mean = 0.0;
  double loss_local = 0.0;
  double loss_cd = 0.0;
  double loss_cf = 0.0;
  double loss_div = 0.0;
  double wall_ms = 0.0;
  ClusterPartition partition;
  std::vector<double> gls;
  std::vector<std::vector<double>> gwf;
};

// Fixed per-seed world: data shards, test sets and model templates.
struct Environment {
  SimConfig cfg;
  std::uint64_t seed = 0;
  Dataset test;
  std::vector<Dataset> client_train;
  std::vector<Dataset> client_holdout;
  std::vector<std::vector<std::int64_t>> client_label_counts;  // reported alongside uploads
  nn::ClassifierModel classifier;                              // initial global model
  nn::GeneratorModel generator;                                // initial generator

  static Environment build(const SimConfig& cfg, std::uint64_t seed) {
    validate(cfg);
    Environment env;
    env.cfg = cfg;
    env.seed = seed;
    const auto& dc = cfg.dataset;
    SyntheticSpec spec{dc.num_classes, dc.samples_per_class, dc.feature_dim, dc.radius, dc.separation_in_std};
    auto split = stratified_split(make_synthetic_dataset(spec, seed), dc.test_fraction, seed);
    env.test = std::move(split.test);

    std::vector<ClientDataset> shards;
    if (dc.identical_clients) {
      for (std::size_t c = 0; c < cfg.clients; ++c) shards.push_back({static_cast<int>(c), split.train, {}});
    } else {
      shards = dirichlet_partition(split.train, cfg.clients, cfg.epsilon, seed);
    }
    for (const auto& s : shards) {
      const std::size_t n = s.n();
      auto n_hold = static_cast<std::size_t>(std::floor(dc.holdout_fraction * static_cast<double>(n)));
      n_hold = std::min(n_hold, n - 1);
      std::vector<std::size_t> order(n);
      std::iota(order.begin(), order.end(), std::size_t{0});
      const std::uint64_t key = dc.identical_clients ? 0 : static_cast<std::uint64_t>(s.client_id);
      Rng rng = derive_rng(seed, Stream::kSplit, {key + 1});
      std::shuffle(order.begin(), order.end(), rng);
      std::vector<std::size_t> hold(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_hold));
      std::vector<std::size_t> train(order.begin() + static_cast<std::ptrdiff_t>(n_hold), order.end());
      std::sort(hold.begin(), hold.end());
      std::sort(train.begin(), train.end());
      env.client_train.push_back(s.data.subset(train));
      env.client_holdout.push_back(s.data.subset(hold));
      env.client_label_counts.push_back(label_counts(env.client_train.back()));
    }

    Rng init = derive_rng(seed, Stream::kModelInit);
    env.classifier =
        nn::make_classifier(nn::classifier_architecture(dc.feature_dim, dc.num_classes, cfg.hidden), init);
    Rng ginit = derive_rng(seed, Stream::kGeneratorInit);
    const auto& g = cfg.distill;
    env.generator = nn::make_generator(g.noise_dim, g.label_embed_dim, dc.num_classes, dc.feature_dim,
                                       g.generator_hidden, ginit);
    return env;
  }
};

struct SimState {
  std::size_t round = 0;  // completed rounds
  nn::ClassifierModel global;
  nn::GeneratorModel generator;
  std::vector<nn::ParamVector> client_models;  // each client's current local model
  std::vector<std::int64_t> label_totals;      // running class totals (accumulate_label_stats)

  static SimState initial(const Environment& env) {
    SimState s;
    s.global = env.classifier;
    s.generator = env.generator;
    s.client_models.assign(env.cfg.clients, env.classifier.params);
    s.label_totals.assign(env.cfg.dataset.num_classes, 0);
    return s;
  }
};

namespace detail {

inline std::vector<LocalResult> train_actives(const Environment& env, const SimState& state,
                                              const std::vector<int>& actives, std::uint64_t round) {
  const auto& cfg = env.cfg;
  std::vector<LocalResult> out(actives.size());
  auto work = [&](std::size_t slot) {
    const int cid = actives[slot];
    const auto& init = cfg.variant == Variant::kCflOnly ? state.client_models[static_cast<std::size_t>(cid)]
                                                        : state.global.params;
    Rng rng = derive_rng(env.seed, Stream::kLocalTrain, {static_cast<std::uint64_t>(cid), round});
    out[slot] = local_train(env.classifier, env.client_train[static_cast<std::size_t>(cid)], init, cfg.local_epochs,
                            cfg.local_lr, cfg.batch_size, cfg.weight_decay, rng);
  };
  const std::size_t workers = std::min(cfg.threads, actives.size());
  if (workers <= 1) {
    for (std::size_t i = 0; i < actives.size(); ++i) work(i);
    return out;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = w; i < actives.size(); i += workers) work(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

inline Dataset concat(std::span<const Dataset* const> parts, const Dataset& shape_like) {
  Dataset out{shape_like.feature_dim, shape_like.num_classes, {}, {}};
  for (const Dataset* d : parts) {
    out.features.insert(out.features.end(), d->features.begin(), d->features.end());
    out.labels.insert(out.labels.end(), d->labels.begin(), d->labels.end());
  }
  return out;
}

}  // namespace detail

struct RoundOutcome {
  SimState state;
  std::optional<RoundMetrics> metrics;  // empty when the round was skipped
  std::vector<Event> events;
};

// Executes one communication round. Any stage error either propagates (halt)
// or rolls the state back and drops the round (skip_round).
inline RoundOutcome run_round(const SimState& prev, const Environment& env) {
  const auto& cfg = env.cfg;
  const auto t0 = std::chrono::steady_clock::now();
  const std::uint64_t round = prev.round + 1;
  RoundOutcome out{prev, std::nullopt, {}};
  SimState& st = out.state;

  try {
    const auto actives = sample_active_clients(cfg.clients, cfg.act, round, env.seed);
    const auto local = detail::train_actives(env, st, actives, round);

    RoundMetrics m;
    m.round = round;
    double loss_sum = 0.0;
    for (std::size_t i = 0; i < actives.size(); ++i) {
      if (local[i].diverged) {
        out.events.push_back({round, "local_divergence", "client " + std::to_string(actives[i])});
      }
      loss_sum += local[i].loss;
      st.client_models[static_cast<std::size_t>(actives[i])] = local[i].params;
    }
    m.loss_local = loss_sum / static_cast<double>(actives.size());

    auto weight_of = [&](int cid) {
      return static_cast<double>(env.client_train[static_cast<std::size_t>(cid)].size());
    };
    auto slot_of = [&](int cid) {
      return static_cast<std::size_t>(std::lower_bound(actives.begin(), actives.end(), cid) - actives.begin());
    };

    // C-phase: similarity only ever sees masked uploads.
    ClusterPartition partition = ClusterPartition::single(actives);
    if (uses_clustering(cfg.variant) && actives.size() >= 2) {
      const SecParams sec{cfg.sec_seed};
      std::vector<MaskedParams> uploads;
      for (std::size_t i = 0; i < actives.size(); ++i) {
        if (cfg.cluster_on_updates) {
          const auto& base = cfg.variant == Variant::kCflOnly ? prev.client_models[static_cast<std::size_t>(actives[i])]
                                                              : prev.global.params;
          std::vector<double> delta(local[i].params.values());
          for (std::size_t j = 0; j < delta.size(); ++j) delta[j] -= base.values()[j];
          uploads.push_back(ssc_encrypt(actives[i], std::span<const double>(delta), sec, round));
        } else {
          uploads.push_back(ssc_encrypt(actives[i], local[i].params, sec, round));
        }
      }
      auto ap = affinity_propagation(build_similarity_matrix(uploads));
      if (ap.fell_back) out.events.push_back({round, "ap_fallback", "no exemplar emerged; using one cluster"});
      partition = std::move(ap.partition);
    }
    m.k = partition.k();
    m.partition = partition;

    std::vector<std::vector<double>> cluster_params;
    std::vector<double> cluster_weight;
    for (const auto& members : partition.members) {
      std::vector<WeightedParams> w;
      double total = 0.0;
      for (int cid : members) {
        w.push_back({local[slot_of(cid)].params.data(), weight_of(cid)});
        total += weight_of(cid);
      }
      cluster_params.push_back(intra_group_aggregate(w));
      cluster_weight.push_back(total);
    }
    std::vector<WeightedParams> cw;
    for (std::size_t k = 0; k < cluster_params.size(); ++k) cw.push_back({cluster_params[k], cluster_weight[k]});
    auto averaged = nn::with_params(env.classifier, global_average(cw));

    std::vector<nn::ClassifierModel> teachers;
    for (auto& p : cluster_params) teachers.push_back(nn::with_params(env.classifier, std::move(p)));

    if (uses_iga(cfg.variant)) {
      const auto hist = collect_label_histogram(partition, actives, env.client_label_counts, cfg.dataset.num_classes);
      for (std::size_t y = 0; y < hist.classes(); ++y) st.label_totals[y] += hist.totals_per_class[y];
      const GlsDistribution gls = cfg.variant == Variant::kDisueMinusGls ? uniform_gls(cfg.dataset.num_classes)
                                  : cfg.accumulate_label_stats           ? compute_gls(st.label_totals)
                                                                         : compute_gls(hist);
      const GwfWeights gwf = cfg.variant == Variant::kDisueMinusGwf ? uniform_gwf(partition.k(), hist.classes())
                                                                    : compute_gwf(hist);
      m.gls = gls.probs;
      m.gwf = gwf.alpha;

      DistillConfig dc = cfg.distill;
      if (cfg.variant == Variant::kDisueMinusLcf) dc.beta_cf = 0.0;
      if (cfg.variant == Variant::kDisueMinusLdiv) dc.beta_div = 0.0;
      if (cfg.reinit_generator) {
        Rng ginit = derive_rng(env.seed, Stream::kGeneratorInit, {round});
        st.generator = nn::make_generator(dc.noise_dim, dc.label_embed_dim, cfg.dataset.num_classes,
                                          cfg.dataset.feature_dim, dc.generator_hidden, ginit);
      }
      Rng rng = derive_rng(env.seed, Stream::kDistill, {round});
      auto iga = iga_round(teachers, averaged, st.generator, gls, gwf, dc, rng);
      if (iga.diverged) out.events.push_back({round, "iga_divergence", iga.message});
      st.global = std::move(iga.student);
      st.generator = std::move(iga.generator);
      double cd = 0.0, cf = 0.0, div = 0.0;
      for (const auto& it : iga.trace) {
        cd += it.generator.cd;
        cf += it.generator.cf;
        div += it.generator.div;
      }
      if (!iga.trace.empty()) {
        const auto n = static_cast<double>(iga.trace.size());
        m.loss_cd = cd / n;
        m.loss_cf = cf / n;
        m.loss_div = div / n;
      }
    } else {
      st.global = std::move(averaged);
    }

    if (cfg.variant == Variant::kCflOnly) {
      for (std::size_t k = 0; k < partition.k(); ++k)
        for (int cid : partition.members[k]) st.client_models[static_cast<std::size_t>(cid)] = teachers[k].params;
    }

    m.global_acc = accuracy(st.global, env.test);
    double acc_sum = 0.0;
    for (std::size_t k = 0; k < partition.k(); ++k) {
      std::vector<const Dataset*> parts;
      for (int cid : partition.members[k]) parts.push_back(&env.client_holdout[static_cast<std::size_t>(cid)]);
      const Dataset shard = detail::concat(parts, env.test);
      const double a = accuracy(teachers[k], shard.size() ? shard : env.test);
      m.cluster_acc.push_back(a);
      acc_sum += a;
    }
    m.cluster_acc_mean = acc_sum / static_cast<double>(partition.k());

    st.round = round;
    if (cfg.record_timing) {
      m.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    }
    out.metrics = std::move(m);
  } catch (const std::exception& e) {
    if (cfg.failure_policy == FailurePolicy::kHalt) throw;
    out.state = prev;
    out.state.round = round;
    out.metrics.reset();
    out.events.push_back({round, "round_skipped", e.what()});
  }
  return out;
}

struct SeedRun {
  std::uint64_t seed = 0;
  std::vector<RoundMetrics> rounds;
  std::vector<Event> events;
  SimState final_state;

  // Mean global accuracy over the last min(10, rounds) rounds.
  double final_accuracy() const {
    if (rounds.empty()) return 0.0;
    const std::size_t n = std::min<std::size_t>(10, rounds.size());
    double s = 0.0;
    for (std::size_t i = rounds.size() - n; i < rounds.size(); ++i) s += rounds[i].global_acc;
    return s / static_cast<double>(n);
  }
};

inline SeedRun run_seed(const SimConfig& cfg, std::uint64_t seed) {
  const Environment env = Environment::build(cfg, seed);
  SeedRun run;
  run.seed = seed;
  SimState st = SimState::initial(env);
  for (std::size_t t = 0; t < cfg.rounds; ++t) {
    auto outcome = run_round(st, env);
    st = std::move(outcome.state);
    if (outcome.metrics) run.rounds.push_back(std::move(*outcome.metrics));
    run.events.insert(run.events.end(), outcome.events.begin(), outcome.events.end());
  }
  run.final_state = std::move(st);
  return run;
}

struct ExperimentResult {
  SimConfig cfg;
  std::vector<SeedRun> runs;

  std::vector<double> final_accuracies() const {
    std::vector<double> out;
    for (const auto& r : runs) out.push_back(r.final_accuracy());
    return out;
  }
  double mean_final_accuracy() const {
    const auto a = final_accuracies();
    return std::accumulate(a.begin(), a.end(), 0.0) / static_cast<double>(a.size());
  }
  // Sample standard deviation across seeds (0 for a single seed).
  double std_final_accuracy() const {
    const auto a = final_accuracies();
    if (a.size() < 2) return 0.0;
    const double mu = mean_final_accuracy();
    double s = 0.0;
    for (double v : a) s += (v - mu) * (v - mu);
    return std::sqrt(s / static_cast<double>(a.size() - 1));
  }
};

inline ExperimentResult run_experiment(const SimConfig& cfg) {
  validate(cfg);
  ExperimentResult res;
  res.cfg = cfg;
  for (auto seed : cfg.seeds) res.runs.push_back(run_seed(cfg, seed));
  return res;
}

}  // namespace disue
