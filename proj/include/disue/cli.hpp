#pragma once

// Command-line driver. Kept in a header so tests can drive it in-process.
//
//   disue_cli run     [--variant V] [flags]
//   disue_cli compare V1 V2 ... [flags]
//   disue_cli ablate  [flags]
//   disue_cli sweep   --param beta_cf|beta_div|noise_dim --values a,b,c [flags]

#include <cstdint>
#include <iostream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "disue/error.hpp"
#include "disue/io.hpp"
#include "disue/orchestrator.hpp"

namespace disue {

// Flag values that override the config file when present.
struct CliOverrides {
  std::optional<std::string> config_path;
  std::vector<std::uint64_t> seeds;
  std::optional<std::size_t> rounds;
  std::optional<std::string> variant;
  std::optional<double> epsilon;
  std::optional<std::string> out_dir;
  std::optional<double> act;
  std::optional<std::size_t> clients;
  std::optional<std::size_t> threads;
};

inline RunConfig resolve_config(const CliOverrides& o) {
  RunConfig cfg = o.config_path ? parse_config_file(*o.config_path) : RunConfig{};
  auto& s = cfg.sim;
  if (!o.seeds.empty()) s.seeds = o.seeds;
  if (o.rounds) s.rounds = *o.rounds;
  if (o.variant) {
    auto v = parse_variant(*o.variant);
    if (!v) throw ConfigError("variant", "unknown variant '" + *o.variant + "'");
    s.variant = *v;
  }
  if (o.epsilon) s.epsilon = *o.epsilon;
  if (o.out_dir) cfg.out_dir = *o.out_dir;
  if (o.act) s.act = *o.act;
  if (o.clients) s.clients = *o.clients;
  if (o.threads) s.threads = *o.threads;
  validate(s);
  return cfg;
}

inline const std::vector<Variant>& ablation_variants() {
  static const std::vector<Variant> v{Variant::kDisue,         Variant::kDisueMinusGls,  Variant::kDisueMinusGwf,
                                      Variant::kDisueMinusIga, Variant::kDisueMinusLcf,  Variant::kDisueMinusLdiv};
  return v;
}

namespace detail {

inline void print_summary(std::ostream& out, const std::vector<ExperimentResult>& results,
                          const std::vector<std::string>& labels) {
  for (std::size_t i = 0; i < results.size(); ++i) {
    const auto& r = results[i];
    const std::string name = labels.empty() ? variant_name(r.cfg.variant) : labels[i];
    out << name << ": final_acc " << r.mean_final_accuracy() << " +- " << r.std_final_accuracy() << " over "
        << r.runs.size() << " seed(s)\n";
  }
}

inline std::vector<double> parse_value_list(const std::string& text) {
  std::vector<double> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto comma = text.find(',', start);
    const std::string item = text.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
    if (item.empty()) throw ConfigError("values", "empty entry in '" + text + "'");
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != item.size()) throw ConfigError("values", "not a number: '" + item + "'");
    out.push_back(v);
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

inline SimConfig with_sweep_value(SimConfig s, const std::string& param, double v) {
  if (param == "beta_cf") {
    s.distill.beta_cf = v;
  } else if (param == "beta_div") {
    s.distill.beta_div = v;
  } else if (param == "noise_dim") {
    if (!(v >= 1.0) || v != static_cast<double>(static_cast<std::size_t>(v))) {
      throw ConfigError("values", "noise_dim values must be positive integers");
    }
    s.distill.noise_dim = static_cast<std::size_t>(v);
  } else {
    throw ConfigError("param", "expected beta_cf, beta_div or noise_dim, got '" + param + "'");
  }
  validate(s);
  return s;
}

}  // namespace detail

// Returns the process exit code. Diagnostics go to `err`, progress to `out`.
inline int run_cli(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Clustered federated learning simulator with inter-group distillation"};
  app.require_subcommand(1);

  CliOverrides o;
  std::string config_path, variant, out_dir;
  std::size_t rounds = 0, clients = 0, threads = 0;
  double epsilon = 0.0, act = 0.0;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON config file");
    sub->add_option("--seed", o.seeds, "Seed(s); repeat or comma-separate")->delimiter(',');
    sub->add_option("--rounds", rounds, "Communication rounds");
    sub->add_option("--epsilon", epsilon, "Dirichlet concentration");
    sub->add_option("--out-dir", out_dir, "Output directory");
    sub->add_option("--act", act, "Active client fraction in (0, 1]");
    sub->add_option("--clients", clients, "Number of clients");
    sub->add_option("--threads", threads, "Worker threads for local training");
  };

  auto* run = app.add_subcommand("run", "Run a single variant");
  add_common(run);
  run->add_option("--variant", variant, "Algorithm variant");

  std::vector<std::string> compare_names;
  auto* compare = app.add_subcommand("compare", "Run several variants on shared seeds");
  add_common(compare);
  compare->add_option("variants", compare_names, "Variants to compare")->required()->expected(1, -1);

  auto* ablate = app.add_subcommand("ablate", "Full model plus each single-component ablation");
  add_common(ablate);

  std::string sweep_param, sweep_values;
  auto* sweep = app.add_subcommand("sweep", "Grid over one distillation hyperparameter");
  add_common(sweep);
  sweep->add_option("--variant", variant, "Algorithm variant");
  sweep->add_option("--param", sweep_param, "beta_cf, beta_div or noise_dim")->required();
  sweep->add_option("--values", sweep_values, "Comma-separated values")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  try {
    for (auto* sub : app.get_subcommands()) {
      if (sub->count("--config")) o.config_path = config_path;
      if (sub->count("--rounds")) o.rounds = rounds;
      if (sub->count("--epsilon")) o.epsilon = epsilon;
      if (sub->count("--out-dir")) o.out_dir = out_dir;
      if (sub->count("--act")) o.act = act;
      if (sub->count("--clients")) o.clients = clients;
      if (sub->count("--threads")) o.threads = threads;
      if ((sub == run || sub == sweep) && sub->count("--variant")) o.variant = variant;
    }
    const RunConfig cfg = resolve_config(o);

    std::vector<SimConfig> plan;
    std::vector<std::string> labels;
    if (app.got_subcommand(run)) {
      plan.push_back(cfg.sim);
    } else if (app.got_subcommand(compare)) {
      for (const auto& name : compare_names) {
        auto v = parse_variant(name);
        if (!v) throw ConfigError("variants", "unknown variant '" + name + "'");
        SimConfig s = cfg.sim;
        s.variant = *v;
        plan.push_back(s);
      }
    } else if (app.got_subcommand(ablate)) {
      for (Variant v : ablation_variants()) {
        SimConfig s = cfg.sim;
        s.variant = v;
        plan.push_back(s);
      }
    } else {
      for (double v : detail::parse_value_list(sweep_values)) {
        plan.push_back(detail::with_sweep_value(cfg.sim, sweep_param, v));
        labels.push_back(sweep_param + "=" + format_double(v));
      }
    }

    write_effective_config(cfg, cfg.out_dir);
    std::vector<ExperimentResult> results;
    for (const auto& s : plan) {
      out << "running " << variant_name(s.variant) << " on " << s.seeds.size() << " seed(s)\n";
      results.push_back(run_experiment(s));
    }
    emit_metrics(results, cfg.out_dir, cfg.plot_data, "setting", labels);
    detail::print_summary(out, results, labels);
    return 0;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
  }
  return 1;
}

}  // namespace disue
