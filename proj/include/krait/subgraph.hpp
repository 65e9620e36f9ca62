// Copyright 2026 The Krait Lab Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <vector>

#include "krait/graph.hpp"

namespace krait {

enum class NodeRole : std::uint8_t { kEgo, kPrompt, kTrigger };

/// The unit the GNN consumes: an ego-network, optionally with prompt and
/// trigger tokens appended after the ego nodes. The center stays at index 0.
struct Subgraph {
  Matrix features;
  std::vector<Edge> edges;       // local indices, u < v
  std::vector<NodeRole> roles;   // one per node
  std::vector<int> origin;       // original node id for ego nodes, -1 for tokens
  std::vector<int> token_slot;   // row in the owning prompt for tokens, -1 for ego nodes
  int label = -1;

  int node_count() const { return static_cast<int>(features.rows()); }
  int feature_dim() const { return static_cast<int>(features.cols()); }
  int count(NodeRole role) const;
  /// Mean node degree, 2|E| / n.
  double mean_degree() const;
  std::vector<std::vector<int>> adjacency_lists() const;
};

Subgraph to_subgraph(const EgoNetwork& ego);

}  // namespace krait
