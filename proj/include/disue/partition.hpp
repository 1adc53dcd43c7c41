#pragma once

#include <algorithm>
#include <cstddef>
#include <string>
#include <vector>

#include "disue/error.hpp"

namespace disue {

// K disjoint client groups. `members[k]` lists client ids in ascending order
// and `exemplars[k]` is the member that represents group k.
struct ClusterPartition {
  std::vector<std::vector<int>> members;
  std::vector<int> exemplars;

  std::size_t k() const { return members.size(); }

  int cluster_of(int client_id) const {
    for (std::size_t c = 0; c < members.size(); ++c) {
      if (std::binary_search(members[c].begin(), members[c].end(), client_id)) return static_cast<int>(c);
    }
    throw InvalidInput("client " + std::to_string(client_id) + " is not in the partition");
  }

  std::vector<int> all_clients() const {
    std::vector<int> out;
    for (const auto& m : members) out.insert(out.end(), m.begin(), m.end());
    std::sort(out.begin(), out.end());
    return out;
  }

  static ClusterPartition single(std::vector<int> clients) {
    std::sort(clients.begin(), clients.end());
    ClusterPartition p;
    p.exemplars.push_back(clients.front());
    p.members.push_back(std::move(clients));
    return p;
  }

  friend bool operator==(const ClusterPartition&, const ClusterPartition&) = default;
};

}  // namespace disue
