#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "disue/data.hpp"
#include "disue/error.hpp"
#include "disue/rng.hpp"

namespace disue {

// One model's parameters and its aggregation weight (a sample count).
struct WeightedParams {
  std::span<const double> params;
  double weight = 0.0;
};

namespace detail {

inline std::vector<double> weighted_average(std::span<const WeightedParams> models, const char* what) {
  if (models.empty()) throw InvalidState(std::string(what) + ": nothing to aggregate");
  const std::size_t len = models.front().params.size();
  double total = 0.0;
  for (const auto& m : models) {
    if (m.params.size() != len) throw InvalidInput(std::string(what) + ": parameter lengths differ");
    if (!(m.weight >= 0.0)) throw InvalidInput(std::string(what) + ": negative weight");
    total += m.weight;
  }
  if (!(total > 0.0)) throw InvalidState(std::string(what) + ": total weight is zero");
  std::vector<double> out(len, 0.0);
  for (const auto& m : models) {
    const double w = m.weight / total;
    for (std::size_t i = 0; i < len; ++i) out[i] += w * m.params[i];
  }
  return out;
}

}  // namespace detail

// Sample-weighted mean of a cluster's member models.
inline std::vector<double> intra_group_aggregate(std::span<const WeightedParams> members) {
  return detail::weighted_average(members, "intra_group_aggregate");
}

// Cluster models weighted by cluster sample counts, so that intra-then-global
// averaging equals client-level FedAvg.
inline std::vector<double> global_average(std::span<const WeightedParams> cluster_models) {
  if (cluster_models.size() == 1) {
    const auto& only = cluster_models.front().params;
    return {only.begin(), only.end()};
  }
  return detail::weighted_average(cluster_models, "global_average");
}

// Label-sampling distribution p(y) over classes.
struct GlsDistribution {
  std::vector<double> probs;
};

// alpha[k][y]: share of class-y samples that sit in cluster k.
struct GwfWeights {
  std::vector<std::vector<double>> alpha;

  std::size_t clusters() const { return alpha.size(); }
  double at(std::size_t k, int y) const { return alpha[k][static_cast<std::size_t>(y)]; }
};

inline GlsDistribution compute_gls(std::span<const std::int64_t> totals_per_class) {
  std::int64_t total = 0;
  for (auto t : totals_per_class) {
    if (t < 0) throw InvalidInput("compute_gls: negative class count");
    total += t;
  }
  if (total == 0) throw InvalidState("compute_gls: label histogram is all zero");
  GlsDistribution g;
  for (auto t : totals_per_class) g.probs.push_back(static_cast<double>(t) / static_cast<double>(total));
  return g;
}

inline GlsDistribution compute_gls(const LabelHistogram& hist) { return compute_gls(hist.totals_per_class); }

inline GwfWeights compute_gwf(const LabelHistogram& hist) {
  if (hist.clusters() == 0 || hist.total() == 0) throw InvalidState("compute_gwf: label histogram is empty");
  GwfWeights w;
  w.alpha.assign(hist.clusters(), std::vector<double>(hist.classes(), 0.0));
  for (std::size_t y = 0; y < hist.classes(); ++y) {
    const auto col = hist.totals_per_class[y];
    if (col == 0) continue;
    for (std::size_t k = 0; k < hist.clusters(); ++k) {
      w.alpha[k][y] = static_cast<double>(hist.counts[k][y]) / static_cast<double>(col);
    }
  }
  return w;
}

// Replacement used when label-guided sampling is disabled.
inline GlsDistribution uniform_gls(std::size_t num_classes) {
  return {std::vector<double>(num_classes, 1.0 / static_cast<double>(num_classes))};
}

// Replacement used when class-aware cluster weighting is disabled.
inline GwfWeights uniform_gwf(std::size_t clusters, std::size_t num_classes) {
  return {std::vector<std::vector<double>>(clusters,
                                           std::vector<double>(num_classes, 1.0 / static_cast<double>(clusters)))};
}

inline std::vector<int> sample_labels(const GlsDistribution& gls, std::size_t count, Rng& rng) {
  if (count < 1) throw InvalidInput("sample_labels: need at least one draw");
  std::discrete_distribution<int> dist(gls.probs.begin(), gls.probs.end());
  std::vector<int> out(count);
  for (auto& y : out) y = dist(rng);
  return out;
}

}  // namespace disue
