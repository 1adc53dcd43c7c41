#pragma once

// Similarity-preserving masking of client parameter vectors.
//
// Clients share a secret seed the server does not hold. Each round they
// unit-normalize their parameters and apply the same seed-derived orthogonal
// map (a random sign flip followed by a random permutation). Inner products
// survive the map, so the server recovers exact pairwise cosines from masked
// uploads while the coordinates it sees are scrambled.
//
// Only the similarity path is masked: aggregation still needs plaintext
// parameters, and the server learns the full similarity matrix.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "disue/error.hpp"
#include "disue/nn/model.hpp"
#include "disue/rng.hpp"

namespace disue {

struct SecParams {
  std::uint64_t shared_seed = 0;
};

struct MaskedParams {
  int client_id = 0;
  std::uint64_t round = 0;
  std::vector<double> masked;
};

// The orthogonal map for one (seed, round, length): out[perm[i]] = sign[i] * v[i].
struct RoundMask {
  std::vector<std::size_t> perm;
  std::vector<signed char> sign;

  static RoundMask derive(const SecParams& sec, std::uint64_t round, std::size_t length) {
    Rng rng = derive_rng(sec.shared_seed, Stream::kMask, {round, length});
    RoundMask m;
    m.perm.resize(length);
    std::iota(m.perm.begin(), m.perm.end(), std::size_t{0});
    std::shuffle(m.perm.begin(), m.perm.end(), rng);
    m.sign.resize(length);
    for (auto& s : m.sign) s = (rng() & 1u) ? 1 : -1;
    return m;
  }
};

inline MaskedParams ssc_encrypt(int client_id, std::span<const double> params, const SecParams& sec,
                                std::uint64_t round) {
  const double norm = nn::norm2(params);
  if (!(norm > 0.0) || !std::isfinite(norm)) {
    throw InvalidInput("ssc_encrypt: client " + std::to_string(client_id) +
                       " uploaded a zero or non-finite vector; cosine similarity is undefined");
  }
  const RoundMask mask = RoundMask::derive(sec, round, params.size());
  MaskedParams out{client_id, round, std::vector<double>(params.size())};
  for (std::size_t i = 0; i < params.size(); ++i) out.masked[mask.perm[i]] = mask.sign[i] * (params[i] / norm);
  return out;
}

inline MaskedParams ssc_encrypt(int client_id, const nn::ParamVector& params, const SecParams& sec,
                                std::uint64_t round) {
  return ssc_encrypt(client_id, params.data(), sec, round);
}

inline double ssc_compute(const MaskedParams& a, const MaskedParams& b) {
  if (a.round != b.round) {
    throw PairingError("ssc_compute: uploads from rounds " + std::to_string(a.round) + " and " +
                       std::to_string(b.round) + " cannot be compared");
  }
  if (a.masked.size() != b.masked.size()) throw InvalidInput("ssc_compute: vector lengths differ");
  return nn::dot(a.masked, b.masked);
}

// Plaintext cosine similarity.
inline double cosine_similarity(std::span<const double> u, std::span<const double> v) {
  return nn::dot(u, v) / (nn::norm2(u) * nn::norm2(v));
}

}  // namespace disue
