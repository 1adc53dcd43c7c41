#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "disue/error.hpp"
#include "disue/partition.hpp"
#include "disue/secure_sim.hpp"

namespace disue {

// Symmetric n x n similarity matrix over `client_ids`. The diagonal holds the
// affinity-propagation preferences.
struct SimilarityMatrix {
  std::vector<int> client_ids;
  std::vector<double> values;

  std::size_t n() const { return client_ids.size(); }
  double& at(std::size_t u, std::size_t v) { return values[u * n() + v]; }
  double at(std::size_t u, std::size_t v) const { return values[u * n() + v]; }

  static SimilarityMatrix zeros(std::vector<int> ids) {
    SimilarityMatrix s;
    const std::size_t n = ids.size();
    s.client_ids = std::move(ids);
    s.values.assign(n * n, 0.0);
    return s;
  }
};

// Median of the off-diagonal entries.
inline double median_off_diagonal(const SimilarityMatrix& sim) {
  std::vector<double> off;
  off.reserve(sim.n() * sim.n());
  for (std::size_t u = 0; u < sim.n(); ++u)
    for (std::size_t v = 0; v < sim.n(); ++v)
      if (u != v) off.push_back(sim.at(u, v));
  if (off.empty()) throw InvalidInput("median_off_diagonal: matrix has no off-diagonal entries");
  std::sort(off.begin(), off.end());
  const std::size_t m = off.size();
  return m % 2 ? off[m / 2] : 0.5 * (off[m / 2 - 1] + off[m / 2]);
}

inline void set_preference(SimilarityMatrix& sim, double preference) {
  for (std::size_t u = 0; u < sim.n(); ++u) sim.at(u, u) = preference;
}

// Pairwise masked similarities; the diagonal gets the median preference.
inline SimilarityMatrix build_similarity_matrix(std::span<const MaskedParams> masked) {
  if (masked.size() < 2) {
    throw InvalidInput("build_similarity_matrix needs at least 2 clients, got " + std::to_string(masked.size()));
  }
  std::vector<int> ids;
  for (const auto& m : masked) ids.push_back(m.client_id);
  auto sim = SimilarityMatrix::zeros(std::move(ids));
  for (std::size_t u = 0; u < masked.size(); ++u) {
    for (std::size_t v = u + 1; v < masked.size(); ++v) {
      const double s = std::clamp(ssc_compute(masked[u], masked[v]), -1.0, 1.0);
      sim.at(u, v) = s;
      sim.at(v, u) = s;
    }
  }
  set_preference(sim, median_off_diagonal(sim));
  return sim;
}

struct ApOptions {
  double damping = 0.5;
  int max_iterations = 200;
  int convergence_window = 15;
  // Similarities closer than this count as equal for the degenerate check.
  double equal_tolerance = 1e-12;
};

struct ApResult {
  ClusterPartition partition;
  int iterations = 0;
  bool converged = false;
  bool fell_back = false;  // no exemplar emerged; everything put in one cluster
};

namespace detail {

inline ClusterPartition assign_to_exemplars(const SimilarityMatrix& sim, const std::vector<std::size_t>& exemplars) {
  const std::size_t n = sim.n();
  std::vector<std::size_t> owner(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto self = std::find(exemplars.begin(), exemplars.end(), i);
    if (self != exemplars.end()) {
      owner[i] = static_cast<std::size_t>(self - exemplars.begin());
      continue;
    }
    std::size_t best = 0;
    for (std::size_t e = 1; e < exemplars.size(); ++e)
      if (sim.at(i, exemplars[e]) > sim.at(i, exemplars[best])) best = e;
    owner[i] = best;
  }
  ClusterPartition p;
  p.members.resize(exemplars.size());
  for (std::size_t e = 0; e < exemplars.size(); ++e) p.exemplars.push_back(sim.client_ids[exemplars[e]]);
  for (std::size_t i = 0; i < n; ++i) p.members[owner[i]].push_back(sim.client_ids[i]);
  for (auto& m : p.members) std::sort(m.begin(), m.end());
  return p;
}

// All off-diagonal similarities equal and all preferences equal: message
// passing has nothing to separate. Returns n singletons when the preference
// exceeds the shared similarity, otherwise one cluster.
inline bool equal_similarities(const SimilarityMatrix& sim, double tol, ApResult& out) {
  const std::size_t n = sim.n();
  const double off = sim.at(0, 1);
  const double pref = sim.at(0, 0);
  for (std::size_t u = 0; u < n; ++u) {
    for (std::size_t v = 0; v < n; ++v) {
      const double ref = u == v ? pref : off;
      if (std::abs(sim.at(u, v) - ref) > tol) return false;
    }
  }
  std::vector<std::size_t> ex;
  if (pref > off + tol) {
    for (std::size_t i = 0; i < n; ++i) ex.push_back(i);
  } else {
    ex.push_back(0);
  }
  out.partition = assign_to_exemplars(sim, ex);
  out.converged = true;
  return true;
}

}  // namespace detail

// Frey-Dueck affinity propagation with damped responsibility and availability
// messages. The diagonal of `sim` is the preference. Points join the exemplar
// they are most similar to; ties go to the lower exemplar index.
inline ApResult affinity_propagation(const SimilarityMatrix& sim, const ApOptions& opt = {}) {
  const std::size_t n = sim.n();
  if (n < 2) throw InvalidInput("affinity_propagation needs at least 2 points");
  if (sim.values.size() != n * n) throw InvalidInput("affinity_propagation: matrix is not n x n");

  ApResult result;
  if (detail::equal_similarities(sim, opt.equal_tolerance, result)) return result;

  const double lam = opt.damping;
  std::vector<double> R(n * n, 0.0), A(n * n, 0.0);
  std::vector<std::size_t> prev, current;
  int stable = 0;

  for (int it = 0; it < opt.max_iterations; ++it) {
    result.iterations = it + 1;

    for (std::size_t i = 0; i < n; ++i) {
      double best = -std::numeric_limits<double>::infinity(), second = best;
      std::size_t arg = 0;
      for (std::size_t k = 0; k < n; ++k) {
        const double v = A[i * n + k] + sim.at(i, k);
        if (v > best) {
          second = best;
          best = v;
          arg = k;
        } else if (v > second) {
          second = v;
        }
      }
      for (std::size_t k = 0; k < n; ++k) {
        const double fresh = sim.at(i, k) - (k == arg ? second : best);
        R[i * n + k] = lam * R[i * n + k] + (1.0 - lam) * fresh;
      }
    }

    for (std::size_t k = 0; k < n; ++k) {
      double pos = 0.0;
      for (std::size_t i = 0; i < n; ++i)
        if (i != k) pos += std::max(0.0, R[i * n + k]);
      for (std::size_t i = 0; i < n; ++i) {
        const double fresh =
            i == k ? pos : std::min(0.0, R[k * n + k] + pos - std::max(0.0, R[i * n + k]));
        A[i * n + k] = lam * A[i * n + k] + (1.0 - lam) * fresh;
      }
    }

    current.clear();
    for (std::size_t k = 0; k < n; ++k)
      if (R[k * n + k] + A[k * n + k] > 0.0) current.push_back(k);
    stable = (it > 0 && current == prev) ? stable + 1 : 1;
    prev = current;
    if (stable >= opt.convergence_window && !current.empty()) {
      result.converged = true;
      break;
    }
  }

  if (current.empty()) {
    result.fell_back = true;
    result.partition = ClusterPartition::single(sim.client_ids);
    return result;
  }
  result.partition = detail::assign_to_exemplars(sim, current);
  return result;
}

}  // namespace disue
