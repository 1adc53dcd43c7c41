#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "disue/nn/model.hpp"
#include "disue/secure_sim.hpp"

namespace disue::testing {

// Central differences of a scalar function of a flat vector.
inline std::vector<double> numeric_gradient(const std::function<double(const std::vector<double>&)>& f,
                                            std::vector<double> x, double h = 1e-5) {
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double keep = x[i];
    x[i] = keep + h;
    const double up = f(x);
    x[i] = keep - h;
    const double down = f(x);
    x[i] = keep;
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

// max_i |a_i - b_i| / max(1, |a_i|, |b_i|); the floor keeps tiny gradients
// from turning round-off into large relative errors.
inline double max_rel_error(const std::vector<double>& a, const std::vector<double>& b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double scale = std::max({1.0, std::abs(a[i]), std::abs(b[i])});
    worst = std::max(worst, std::abs(a[i] - b[i]) / scale);
  }
  return worst;
}

inline nn::Tensor random_tensor(nn::Shape shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  nn::Tensor t(std::move(shape));
  for (auto& v : t.values()) v = u(rng);
  return t;
}

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("disue_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

struct PlantedBundles {
  std::vector<std::vector<double>> vectors;
  std::vector<int> truth;  // bundle index per client
};

// `groups` tight Gaussian bundles around random near-orthogonal directions in
// `dim` dimensions; clients are interleaved so bundle membership is not
// contiguous in id order.
inline PlantedBundles planted_bundles(std::size_t clients, std::size_t groups, std::size_t dim, double noise,
                                      std::mt19937_64& rng) {
  std::normal_distribution<double> n01(0.0, 1.0);
  std::vector<std::vector<double>> centers(groups, std::vector<double>(dim));
  for (auto& c : centers) {
    for (auto& v : c) v = n01(rng);
    const double norm = nn::norm2(c);
    for (auto& v : c) v /= norm;
  }
  PlantedBundles out;
  for (std::size_t i = 0; i < clients; ++i) {
    const std::size_t g = (i * 7) % groups;
    std::vector<double> v(dim);
    for (std::size_t d = 0; d < dim; ++d) v[d] = centers[g][d] + noise * n01(rng);
    out.vectors.push_back(std::move(v));
    out.truth.push_back(static_cast<int>(g));
  }
  return out;
}

// Largest |cosine| between vectors of different bundles and smallest cosine
// within a bundle.
inline std::pair<double, double> bundle_cosines(const PlantedBundles& b) {
  double inter = 0.0, intra = 1.0;
  for (std::size_t i = 0; i < b.vectors.size(); ++i)
    for (std::size_t j = i + 1; j < b.vectors.size(); ++j) {
      const double c = cosine_similarity(b.vectors[i], b.vectors[j]);
      if (b.truth[i] == b.truth[j]) {
        intra = std::min(intra, c);
      } else {
        inter = std::max(inter, std::abs(c));
      }
    }
  return {intra, inter};
}

}  // namespace disue::testing
