#pragma once

// Synthetic classification data, Dirichlet non-IID partitioning and label
// statistics.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numbers>
#include <numeric>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "disue/error.hpp"
#include "disue/nn/tensor.hpp"
#include "disue/partition.hpp"
#include "disue/rng.hpp"

namespace disue {

// Row-major feature matrix with one integer label per row.
struct Dataset {
  std::size_t feature_dim = 0;
  std::size_t num_classes = 0;
  std::vector<double> features;
  std::vector<int> labels;

  std::size_t size() const { return labels.size(); }

  std::span<const double> row(std::size_t i) const { return {features.data() + i * feature_dim, feature_dim}; }

  Dataset subset(std::span<const std::size_t> indices) const {
    Dataset out{feature_dim, num_classes, {}, {}};
    out.features.reserve(indices.size() * feature_dim);
    out.labels.reserve(indices.size());
    for (auto i : indices) {
      auto r = row(i);
      out.features.insert(out.features.end(), r.begin(), r.end());
      out.labels.push_back(labels[i]);
    }
    return out;
  }

  nn::Tensor batch(std::span<const std::size_t> indices) const {
    nn::Tensor t({indices.size(), feature_dim});
    for (std::size_t b = 0; b < indices.size(); ++b) {
      auto r = row(indices[b]);
      std::copy(r.begin(), r.end(), &t[b * feature_dim]);
    }
    return t;
  }

  nn::Tensor all_features() const { return nn::Tensor({size(), feature_dim}, features); }

  friend bool operator==(const Dataset&, const Dataset&) = default;
};

struct ClientDataset {
  int client_id = 0;
  Dataset data;
  std::vector<std::size_t> source_indices;  // rows of the partitioned dataset

  std::size_t n() const { return data.size(); }
};

inline std::vector<std::int64_t> label_counts(const Dataset& d) {
  std::vector<std::int64_t> counts(d.num_classes, 0);
  for (int y : d.labels) ++counts[static_cast<std::size_t>(y)];
  return counts;
}

// Class-conditional Gaussian layout. Means sit on a circle of `radius` in the
// first two coordinates (or on scaled simplex vertices when feature_dim >=
// num_classes); the per-coordinate std is the smallest centroid separation
// divided by `separation_in_std`.
struct SyntheticSpec {
  std::size_t num_classes = 4;
  std::size_t samples_per_class = 500;
  std::size_t feature_dim = 2;
  double radius = 0.5;
  double separation_in_std = 2.5;
};

inline std::vector<std::vector<double>> class_means(const SyntheticSpec& spec) {
  std::vector<std::vector<double>> means(spec.num_classes, std::vector<double>(spec.feature_dim, 0.0));
  const bool simplex = spec.feature_dim >= spec.num_classes && spec.feature_dim > 2;
  for (std::size_t y = 0; y < spec.num_classes; ++y) {
    if (simplex) {
      means[y][y] = spec.radius;
    } else {
      const double angle = 2.0 * std::numbers::pi * static_cast<double>(y) / static_cast<double>(spec.num_classes);
      means[y][0] = spec.radius * std::cos(angle);
      means[y][1] = spec.radius * std::sin(angle);
    }
  }
  return means;
}

inline double min_centroid_separation(const SyntheticSpec& spec) {
  auto means = class_means(spec);
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t a = 0; a < means.size(); ++a) {
    for (std::size_t b = a + 1; b < means.size(); ++b) {
      double s = 0.0;
      for (std::size_t c = 0; c < spec.feature_dim; ++c) s += (means[a][c] - means[b][c]) * (means[a][c] - means[b][c]);
      best = std::min(best, std::sqrt(s));
    }
  }
  return best;
}

inline double class_std(const SyntheticSpec& spec) { return min_centroid_separation(spec) / spec.separation_in_std; }

inline Dataset make_synthetic_dataset(const SyntheticSpec& spec, std::uint64_t seed) {
  if (spec.num_classes < 2) throw InvalidInput("synthetic dataset needs at least 2 classes");
  if (spec.feature_dim < 2) throw InvalidInput("synthetic dataset needs feature_dim >= 2");
  if (spec.samples_per_class < 1) throw InvalidInput("synthetic dataset needs samples_per_class >= 1");
  if (!(spec.separation_in_std > 0.0) || !(spec.radius > 0.0)) {
    throw InvalidInput("synthetic dataset needs positive radius and separation");
  }
  Rng rng = derive_rng(seed, Stream::kDataset);
  const auto means = class_means(spec);
  std::normal_distribution<double> noise(0.0, class_std(spec));

  const std::size_t n = spec.num_classes * spec.samples_per_class;
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), rng);

  Dataset d{spec.feature_dim, spec.num_classes, std::vector<double>(n * spec.feature_dim), std::vector<int>(n)};
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t y = k / spec.samples_per_class;
    const std::size_t slot = order[k];
    d.labels[slot] = static_cast<int>(y);
    for (std::size_t c = 0; c < spec.feature_dim; ++c) d.features[slot * spec.feature_dim + c] = means[y][c] + noise(rng);
  }
  return d;
}

inline Dataset make_synthetic_dataset(std::size_t num_classes, std::size_t samples_per_class, std::size_t feature_dim,
                                      std::uint64_t seed) {
  SyntheticSpec spec;
  spec.num_classes = num_classes;
  spec.samples_per_class = samples_per_class;
  spec.feature_dim = feature_dim;
  return make_synthetic_dataset(spec, seed);
}

struct TrainTestSplit {
  Dataset train;
  Dataset test;
};

// Per-class split: round(fraction * n_y) samples of every class go to test.
inline TrainTestSplit stratified_split(const Dataset& d, double test_fraction, std::uint64_t seed) {
  if (test_fraction < 0.0 || test_fraction >= 1.0) throw InvalidInput("test fraction must be in [0, 1)");
  Rng rng = derive_rng(seed, Stream::kSplit);
  std::vector<std::vector<std::size_t>> by_class(d.num_classes);
  for (std::size_t i = 0; i < d.size(); ++i) by_class[static_cast<std::size_t>(d.labels[i])].push_back(i);
  std::vector<std::size_t> train_idx, test_idx;
  for (auto& idx : by_class) {
    std::shuffle(idx.begin(), idx.end(), rng);
    const auto n_test = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(idx.size())));
    test_idx.insert(test_idx.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_test));
    train_idx.insert(train_idx.end(), idx.begin() + static_cast<std::ptrdiff_t>(n_test), idx.end());
  }
  std::sort(train_idx.begin(), train_idx.end());
  std::sort(test_idx.begin(), test_idx.end());
  return {d.subset(train_idx), d.subset(test_idx)};
}

// Draws one Dirichlet(epsilon) vector of length n. Gamma variates are drawn
// in log space via G(a) = G(a + 1) * U^(1/a), which stays representable for
// concentrations as small as 1e-3 where direct gamma draws underflow to 0.
inline std::vector<double> sample_dirichlet(std::size_t n, double epsilon, Rng& rng) {
  std::gamma_distribution<double> gamma(epsilon + 1.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<double> logs(n);
  for (auto& l : logs) {
    double u = unif(rng);
    while (u <= 0.0) u = unif(rng);
    l = std::log(gamma(rng)) + std::log(u) / epsilon;
  }
  const double mx = *std::max_element(logs.begin(), logs.end());
  double s = 0.0;
  for (auto& l : logs) {
    l = std::exp(l - mx);
    s += l;
  }
  for (auto& l : logs) l /= s;
  return logs;
}

// Splits `total` items by `props` with largest-remainder rounding; ties in
// the remainder go to the lower index.
inline std::vector<std::size_t> largest_remainder(std::span<const double> props, std::size_t total) {
  std::vector<std::size_t> out(props.size());
  std::vector<std::pair<double, std::size_t>> rema;
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < props.size(); ++i) {
    const double exact = props[i] * static_cast<double>(total);
    out[i] = static_cast<std::size_t>(std::floor(exact));
    assigned += out[i];
    rema.emplace_back(exact - std::floor(exact), i);
  }
  std::stable_sort(rema.begin(), rema.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t r = 0; assigned < total; ++r, ++assigned) ++out[rema[r % rema.size()].second];
  return out;
}

// Per-class Dirichlet allocation of `d` over `num_clients` clients. Every
// client ends up with at least one sample; empty clients take one sample from
// the currently largest client.
inline std::vector<ClientDataset> dirichlet_partition(const Dataset& d, std::size_t num_clients, double epsilon,
                                                      std::uint64_t seed) {
  if (num_clients < 2) throw InvalidInput("dirichlet_partition needs at least 2 clients");
  if (!(epsilon > 0.0)) throw InvalidInput("dirichlet_partition needs epsilon > 0");
  if (num_clients > d.size()) {
    throw ConfigError("clients", "more clients (" + std::to_string(num_clients) + ") than samples (" +
                                     std::to_string(d.size()) + ")");
  }
  Rng rng = derive_rng(seed, Stream::kPartition);
  std::vector<std::vector<std::size_t>> by_class(d.num_classes);
  for (std::size_t i = 0; i < d.size(); ++i) by_class[static_cast<std::size_t>(d.labels[i])].push_back(i);

  std::vector<std::vector<std::size_t>> owned(num_clients);
  for (auto& idx : by_class) {
    if (idx.empty()) continue;
    std::shuffle(idx.begin(), idx.end(), rng);
    const auto props = sample_dirichlet(num_clients, epsilon, rng);
    const auto counts = largest_remainder(props, idx.size());
    std::size_t pos = 0;
    for (std::size_t c = 0; c < num_clients; ++c) {
      owned[c].insert(owned[c].end(), idx.begin() + static_cast<std::ptrdiff_t>(pos),
                      idx.begin() + static_cast<std::ptrdiff_t>(pos + counts[c]));
      pos += counts[c];
    }
  }

  for (std::size_t c = 0; c < num_clients; ++c) {
    if (!owned[c].empty()) continue;
    std::size_t donor = 0;
    for (std::size_t j = 1; j < num_clients; ++j)
      if (owned[j].size() > owned[donor].size()) donor = j;
    owned[c].push_back(owned[donor].back());
    owned[donor].pop_back();
  }

  std::vector<ClientDataset> clients(num_clients);
  for (std::size_t c = 0; c < num_clients; ++c) {
    std::sort(owned[c].begin(), owned[c].end());
    clients[c].client_id = static_cast<int>(c);
    clients[c].data = d.subset(owned[c]);
    clients[c].source_indices = std::move(owned[c]);
  }
  return clients;
}

// Shannon entropy (nats) of each client's label distribution.
inline std::vector<double> label_entropies(std::span<const ClientDataset> clients) {
  std::vector<double> out;
  for (const auto& c : clients) {
    const auto counts = label_counts(c.data);
    const double n = static_cast<double>(c.n());
    double h = 0.0;
    for (auto k : counts) {
      if (k == 0) continue;
      const double p = static_cast<double>(k) / n;
      h -= p * std::log(p);
    }
    out.push_back(h);
  }
  return out;
}

inline double mean_label_entropy(std::span<const ClientDataset> clients) {
  const auto h = label_entropies(clients);
  return std::accumulate(h.begin(), h.end(), 0.0) / static_cast<double>(h.size());
}

// Per-(cluster, class) sample counts of the clustered clients.
struct LabelHistogram {
  std::vector<std::vector<std::int64_t>> counts;  // [K][Y]
  std::vector<std::int64_t> totals_per_class;     // column sums

  std::size_t clusters() const { return counts.size(); }
  std::size_t classes() const { return totals_per_class.size(); }

  std::int64_t total() const { return std::accumulate(totals_per_class.begin(), totals_per_class.end(), std::int64_t{0}); }

  std::int64_t cluster_total(std::size_t k) const {
    return std::accumulate(counts[k].begin(), counts[k].end(), std::int64_t{0});
  }

  static LabelHistogram from_counts(std::vector<std::vector<std::int64_t>> counts) {
    LabelHistogram h;
    const std::size_t y = counts.empty() ? 0 : counts.front().size();
    h.totals_per_class.assign(y, 0);
    for (const auto& row : counts) {
      if (row.size() != y) throw InvalidInput("label histogram rows have different class counts");
      for (std::size_t c = 0; c < y; ++c) {
        if (row[c] < 0) throw InvalidInput("label histogram counts must be non-negative");
        h.totals_per_class[c] += row[c];
      }
    }
    h.counts = std::move(counts);
    return h;
  }
};

// Counts from client-reported per-class tallies (`reported[i]` belongs to
// client id `ids[i]`).
inline LabelHistogram collect_label_histogram(const ClusterPartition& partition, std::span<const int> ids,
                                              std::span<const std::vector<std::int64_t>> reported,
                                              std::size_t num_classes) {
  std::vector<std::vector<std::int64_t>> counts(partition.k(), std::vector<std::int64_t>(num_classes, 0));
  for (std::size_t k = 0; k < partition.k(); ++k) {
    for (int cid : partition.members[k]) {
      auto it = std::find(ids.begin(), ids.end(), cid);
      if (it == ids.end()) {
        throw InvalidState("client " + std::to_string(cid) + " is in the partition but has no dataset");
      }
      const auto& row = reported[static_cast<std::size_t>(it - ids.begin())];
      if (row.size() != num_classes) throw InvalidInput("reported label counts have the wrong class count");
      for (std::size_t y = 0; y < num_classes; ++y) counts[k][y] += row[y];
    }
  }
  return LabelHistogram::from_counts(std::move(counts));
}

inline LabelHistogram collect_label_histogram(const ClusterPartition& partition,
                                              std::span<const ClientDataset> clients) {
  std::vector<int> ids;
  std::vector<std::vector<std::int64_t>> reported;
  std::size_t num_classes = 0;
  for (const auto& c : clients) {
    ids.push_back(c.client_id);
    reported.push_back(label_counts(c.data));
    num_classes = std::max(num_classes, c.data.num_classes);
  }
  return collect_label_histogram(partition, ids, reported, num_classes);
}

// Plain-text dump: one sample per line, label then features, space separated.
inline void save_dataset(const Dataset& d, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw InvalidInput("cannot open " + path + " for writing");
  out << std::setprecision(17);
  for (std::size_t i = 0; i < d.size(); ++i) {
    out << d.labels[i];
    for (double v : d.row(i)) out << ' ' << v;
    out << '\n';
  }
  if (!out) throw InvalidInput("failed writing " + path);
}

inline Dataset load_dataset(const std::string& path, std::size_t num_classes) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open " + path);
  Dataset d;
  d.num_classes = num_classes;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ss(line);
    int y;
    if (!(ss >> y) || y < 0 || static_cast<std::size_t>(y) >= num_classes) {
      throw InvalidInput(path + ":" + std::to_string(lineno) + ": bad label");
    }
    std::vector<double> row;
    double v;
    while (ss >> v) row.push_back(v);
    if (d.feature_dim == 0) d.feature_dim = row.size();
    if (row.empty() || row.size() != d.feature_dim) {
      throw InvalidInput(path + ":" + std::to_string(lineno) + ": expected " + std::to_string(d.feature_dim) +
                         " features");
    }
    d.labels.push_back(y);
    d.features.insert(d.features.end(), row.begin(), row.end());
  }
  return d;
}

}  // namespace disue
