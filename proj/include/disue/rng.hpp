#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <vector>

namespace disue {

using Rng = std::mt19937_64;

// Stream tags keep independent consumers of one master seed apart.
enum class Stream : std::uint64_t {
  kDataset = 1,
  kPartition = 2,
  kModelInit = 3,
  kGeneratorInit = 4,
  kLocalTrain = 5,
  kActiveSet = 6,
  kDistill = 7,
  kMask = 8,
  kSplit = 9,
};

namespace detail {
inline Rng seeded(std::initializer_list<std::uint64_t> head, std::initializer_list<std::uint64_t> keys) {
  std::vector<std::uint32_t> words;
  words.reserve(2 * (head.size() + keys.size()));
  auto push = [&](std::uint64_t v) {
    words.push_back(static_cast<std::uint32_t>(v & 0xffffffffu));
    words.push_back(static_cast<std::uint32_t>(v >> 32));
  };
  for (auto v : head) push(v);
  for (auto v : keys) push(v);
  std::seed_seq seq(words.begin(), words.end());
  return Rng(seq);
}
}  // namespace detail

// Derives an engine from a master seed, a stream tag and a list of keys
// (client id, round, ...). Identical inputs always yield identical streams,
// independent of call order or threading.
inline Rng derive_rng(std::uint64_t seed, Stream stream, std::initializer_list<std::uint64_t> keys = {}) {
  return detail::seeded({seed, static_cast<std::uint64_t>(stream)}, keys);
}

}  // namespace disue
