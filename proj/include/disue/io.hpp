#pragma once

// Configuration documents and metrics writers.
//
// Config files are JSON objects mirroring SimConfig plus output settings.
// Unknown keys and wrongly typed values are rejected with the key's dotted
// path. An empty file means "all defaults".

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <type_traits>
#include <vector>

#include "json.hpp"

#include "disue/error.hpp"
#include "disue/orchestrator.hpp"

namespace disue {

using json = nlohmann::json;

struct RunConfig {
  SimConfig sim;
  std::string out_dir = "out";
  bool plot_data = false;

  friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

namespace detail {

// Reads known keys from one JSON object and remembers which were consumed.
class FieldReader {
 public:
  FieldReader(const json& obj, std::string prefix) : obj_(obj), prefix_(std::move(prefix)) {
    if (!obj_.is_object()) throw ConfigError(prefix_.empty() ? "<root>" : prefix_, "expected a JSON object");
  }

  std::string path(const std::string& key) const { return prefix_.empty() ? key : prefix_ + "." + key; }

  template <typename T>
  void field(const std::string& key, T& out) {
    seen_.push_back(key);
    auto it = obj_.find(key);
    if (it == obj_.end()) return;
    read(*it, key, out);
  }

  const json* sub(const std::string& key) {
    seen_.push_back(key);
    auto it = obj_.find(key);
    return it == obj_.end() ? nullptr : &*it;
  }

  void reject_unknown() const {
    for (auto it = obj_.begin(); it != obj_.end(); ++it) {
      if (std::find(seen_.begin(), seen_.end(), it.key()) == seen_.end()) {
        throw ConfigError(path(it.key()), "unknown key");
      }
    }
  }

 private:
  void read(const json& v, const std::string& key, bool& out) {
    if (!v.is_boolean()) throw ConfigError(path(key), "expected true or false");
    out = v.get<bool>();
  }
  void read(const json& v, const std::string& key, double& out) {
    if (!v.is_number()) throw ConfigError(path(key), "expected a number");
    out = v.get<double>();
  }
  template <typename U>
    requires std::is_integral_v<U> && std::is_unsigned_v<U> && (!std::is_same_v<U, bool>)
  void read(const json& v, const std::string& key, U& out) {
    if (!v.is_number_unsigned()) throw ConfigError(path(key), "expected a non-negative integer");
    out = v.get<U>();
  }
  void read(const json& v, const std::string& key, std::string& out) {
    if (!v.is_string()) throw ConfigError(path(key), "expected a string");
    out = v.get<std::string>();
  }
  void read(const json& v, const std::string& key, std::vector<std::uint64_t>& out) {
    if (!v.is_array()) throw ConfigError(path(key), "expected an array of non-negative integers");
    out.clear();
    for (const auto& e : v) {
      if (!e.is_number_unsigned()) throw ConfigError(path(key), "expected an array of non-negative integers");
      out.push_back(e.get<std::uint64_t>());
    }
  }
  void read(const json& v, const std::string& key, Variant& out) {
    if (!v.is_string()) throw ConfigError(path(key), "expected a variant name");
    auto parsed = parse_variant(v.get<std::string>());
    if (!parsed) throw ConfigError(path(key), "unknown variant '" + v.get<std::string>() + "'");
    out = *parsed;
  }
  void read(const json& v, const std::string& key, FailurePolicy& out) {
    const std::string s = v.is_string() ? v.get<std::string>() : "";
    if (s == "halt") {
      out = FailurePolicy::kHalt;
    } else if (s == "skip_round") {
      out = FailurePolicy::kSkipRound;
    } else {
      throw ConfigError(path(key), "expected \"halt\" or \"skip_round\"");
    }
  }

  const json& obj_;
  std::string prefix_;
  std::vector<std::string> seen_;
};

inline void read_dataset(const json& j, DatasetConfig& d) {
  FieldReader r(j, "dataset");
  r.field("num_classes", d.num_classes);
  r.field("samples_per_class", d.samples_per_class);
  r.field("feature_dim", d.feature_dim);
  r.field("radius", d.radius);
  r.field("separation_in_std", d.separation_in_std);
  r.field("test_fraction", d.test_fraction);
  r.field("holdout_fraction", d.holdout_fraction);
  r.field("identical_clients", d.identical_clients);
  r.reject_unknown();
}

inline void read_distill(const json& j, DistillConfig& d) {
  FieldReader r(j, "distill");
  r.field("beta_cf", d.beta_cf);
  r.field("beta_div", d.beta_div);
  r.field("noise_dim", d.noise_dim);
  r.field("label_embed_dim", d.label_embed_dim);
  r.field("generator_hidden", d.generator_hidden);
  r.field("pseudo_batch", d.pseudo_batch);
  r.field("inner_iters", d.inner_iters);
  r.field("gen_steps", d.gen_steps);
  r.field("student_steps", d.student_steps);
  r.field("gen_lr", d.gen_lr);
  r.field("student_lr", d.student_lr);
  r.field("literal_signs", d.literal_signs);
  r.reject_unknown();
}

}  // namespace detail

// Applies the keys present in `j` on top of `cfg`.
inline void apply_config_json(const json& j, RunConfig& cfg) {
  detail::FieldReader r(j, "");
  auto& s = cfg.sim;
  r.field("rounds", s.rounds);
  r.field("clients", s.clients);
  r.field("act", s.act);
  r.field("local_epochs", s.local_epochs);
  r.field("batch_size", s.batch_size);
  r.field("local_lr", s.local_lr);
  r.field("weight_decay", s.weight_decay);
  r.field("epsilon", s.epsilon);
  r.field("variant", s.variant);
  r.field("seeds", s.seeds);
  r.field("threads", s.threads);
  r.field("hidden", s.hidden);
  r.field("failure_policy", s.failure_policy);
  r.field("accumulate_label_stats", s.accumulate_label_stats);
  r.field("reinit_generator", s.reinit_generator);
  r.field("record_timing", s.record_timing);
  r.field("cluster_on_updates", s.cluster_on_updates);
  r.field("sec_seed", s.sec_seed);
  if (const json* d = r.sub("dataset")) detail::read_dataset(*d, s.dataset);
  if (const json* d = r.sub("distill")) detail::read_distill(*d, s.distill);
  r.field("out_dir", cfg.out_dir);
  r.field("plot_data", cfg.plot_data);
  r.reject_unknown();
}

inline json config_to_json(const RunConfig& cfg) {
  const auto& s = cfg.sim;
  const auto& d = s.dataset;
  const auto& g = s.distill;
  return json{
      {"rounds", s.rounds},
      {"clients", s.clients},
      {"act", s.act},
      {"local_epochs", s.local_epochs},
      {"batch_size", s.batch_size},
      {"local_lr", s.local_lr},
      {"weight_decay", s.weight_decay},
      {"epsilon", s.epsilon},
      {"variant", variant_name(s.variant)},
      {"seeds", s.seeds},
      {"threads", s.threads},
      {"hidden", s.hidden},
      {"failure_policy", s.failure_policy == FailurePolicy::kHalt ? "halt" : "skip_round"},
      {"accumulate_label_stats", s.accumulate_label_stats},
      {"reinit_generator", s.reinit_generator},
      {"record_timing", s.record_timing},
      {"cluster_on_updates", s.cluster_on_updates},
      {"sec_seed", s.sec_seed},
      {"dataset",
       {{"num_classes", d.num_classes},
        {"samples_per_class", d.samples_per_class},
        {"feature_dim", d.feature_dim},
        {"radius", d.radius},
        {"separation_in_std", d.separation_in_std},
        {"test_fraction", d.test_fraction},
        {"holdout_fraction", d.holdout_fraction},
        {"identical_clients", d.identical_clients}}},
      {"distill",
       {{"beta_cf", g.beta_cf},
        {"beta_div", g.beta_div},
        {"noise_dim", g.noise_dim},
        {"label_embed_dim", g.label_embed_dim},
        {"generator_hidden", g.generator_hidden},
        {"pseudo_batch", g.pseudo_batch},
        {"inner_iters", g.inner_iters},
        {"gen_steps", g.gen_steps},
        {"student_steps", g.student_steps},
        {"gen_lr", g.gen_lr},
        {"student_lr", g.student_lr},
        {"literal_signs", g.literal_signs}}},
      {"out_dir", cfg.out_dir},
      {"plot_data", cfg.plot_data},
  };
}

inline RunConfig parse_config_text(const std::string& text) {
  RunConfig cfg;
  if (text.find_first_not_of(" \t\r\n") == std::string::npos) {
    validate(cfg.sim);
    return cfg;
  }
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError("<document>", std::string("malformed JSON: ") + e.what());
  }
  apply_config_json(j, cfg);
  validate(cfg.sim);
  return cfg;
}

inline RunConfig parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("--config", "cannot read " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

// ---------------------------------------------------------------------------
// Metrics

inline constexpr const char* kMetricsHeader =
    "round,K,global_acc,cluster_acc_mean,loss_local,loss_cd,loss_cf,loss_div,wall_ms";

inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string metrics_csv(const std::vector<RoundMetrics>& rounds) {
  std::string out = kMetricsHeader;
  out += '\n';
  for (const auto& m : rounds) {
    out += std::to_string(m.round) + ',' + std::to_string(m.k) + ',' + format_double(m.global_acc) + ',' +
           format_double(m.cluster_acc_mean) + ',' + format_double(m.loss_local) + ',' + format_double(m.loss_cd) +
           ',' + format_double(m.loss_cf) + ',' + format_double(m.loss_div) + ',' + format_double(m.wall_ms) + '\n';
  }
  return out;
}

// Per-round partition, cluster accuracies and GLS/GWF snapshots, one JSON
// object per line.
inline std::string round_trace_jsonl(const std::vector<RoundMetrics>& rounds) {
  std::string out;
  for (const auto& m : rounds) {
    json j{{"round", m.round},     {"K", m.k},         {"clusters", m.partition.members},
           {"exemplars", m.partition.exemplars}, {"cluster_acc", m.cluster_acc}, {"gls", m.gls},
           {"gwf", m.gwf}};
    out += j.dump() + '\n';
  }
  return out;
}

inline std::string events_csv(const std::vector<Event>& events) {
  std::string out = "round,kind,detail\n";
  for (const auto& e : events) {
    std::string detail = e.detail;
    for (auto& c : detail)
      if (c == ',' || c == '\n') c = ' ';
    out += std::to_string(e.round) + ',' + e.kind + ',' + detail + '\n';
  }
  return out;
}

// Long-format (round, series, value) rows for external plotting.
inline std::string plot_data_csv(const std::vector<ExperimentResult>& results) {
  std::string out = "round,series,value\n";
  for (const auto& r : results) {
    for (const auto& run : r.runs) {
      const std::string series = variant_name(r.cfg.variant) + "/seed" + std::to_string(run.seed);
      for (const auto& m : run.rounds) out += std::to_string(m.round) + ',' + series + ',' + format_double(m.global_acc) + '\n';
    }
  }
  return out;
}

inline std::string csv_name(const ExperimentResult& r, const SeedRun& run) {
  return variant_name(r.cfg.variant) + "_seed" + std::to_string(run.seed) + ".csv";
}

inline json summary_json(const std::vector<ExperimentResult>& results, const std::string& label_key = "variant",
                         const std::vector<std::string>& labels = {}) {
  json variants = json::array();
  for (std::size_t i = 0; i < results.size(); ++i) {
    const auto& r = results[i];
    const std::string prefix = labels.empty() ? "" : labels[i] + "_";
    json runs = json::array();
    for (const auto& run : r.runs) {
      runs.push_back({{"seed", run.seed},
                      {"csv", prefix + csv_name(r, run)},
                      {"rounds", run.rounds.size()},
                      {"final_acc", run.final_accuracy()}});
    }
    json entry{{"variant", variant_name(r.cfg.variant)},
               {"final_acc_mean", r.mean_final_accuracy()},
               {"final_acc_std", r.std_final_accuracy()},
               {"runs", runs}};
    if (!labels.empty()) entry[label_key] = labels[i];
    variants.push_back(std::move(entry));
  }
  return json{{"statistic", "mean global_acc over the final min(10, T) rounds; std is the sample std over seeds"},
              {"results", variants}};
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidInput("cannot write " + path.string());
  out << text;
  if (!out) throw InvalidInput("failed writing " + path.string());
}

// Writes one CSV, trace and event log per (variant, seed), the summary and
// optionally the long-format plot data. Returns the files written.
inline std::vector<std::filesystem::path> emit_metrics(const std::vector<ExperimentResult>& results,
                                                       const std::filesystem::path& dir, bool plot_data,
                                                       const std::string& label_key = "variant",
                                                       const std::vector<std::string>& labels = {}) {
  if (results.empty()) throw InvalidInput("emit_metrics: no results to write");
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw InvalidInput("cannot create output directory " + dir.string() + ": " + ec.message());
  std::vector<std::filesystem::path> written;
  for (std::size_t i = 0; i < results.size(); ++i) {
    const auto& r = results[i];
    const std::string prefix = labels.empty() ? "" : labels[i] + "_";
    for (const auto& run : r.runs) {
      const std::string base = prefix + csv_name(r, run);
      const auto stem = base.substr(0, base.size() - 4);
      written.push_back(dir / base);
      write_text(written.back(), metrics_csv(run.rounds));
      written.push_back(dir / (stem + ".trace.jsonl"));
      write_text(written.back(), round_trace_jsonl(run.rounds));
      written.push_back(dir / (stem + ".events.csv"));
      write_text(written.back(), events_csv(run.events));
    }
  }
  written.push_back(dir / "summary.json");
  write_text(written.back(), summary_json(results, label_key, labels).dump(2) + '\n');
  if (plot_data) {
    written.push_back(dir / "plot_data.csv");
    write_text(written.back(), plot_data_csv(results));
  }
  return written;
}

inline void write_effective_config(const RunConfig& cfg, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw InvalidInput("cannot create output directory " + dir.string() + ": " + ec.message());
  write_text(dir / "config.json", config_to_json(cfg).dump(2) + '\n');
}

}  // namespace disue
