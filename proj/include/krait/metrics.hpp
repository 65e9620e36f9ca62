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

#include <span>
#include <vector>

#include "krait/graph.hpp"
#include "krait/subgraph.hpp"

namespace krait {

/// Mean over subgraph nodes of cos(r_u, x_u), r_u = sum_{w in N(u)} x_w / sqrt(d_u d_w),
/// neighborhoods and degrees taken inside the subgraph. Isolated nodes and zero
/// aggregates contribute 0.
double local_subgraph_homophily(const Subgraph& subgraph);
double local_subgraph_homophily(const EgoNetwork& ego);

/// Per-node cos(t_v, Z_v), t_v = sum_{u in N(v)} Z_u / sqrt(d_v d_u) over the
/// full graph topology. Isolated nodes map to 0.
std::vector<double> global_view_homophily(const Graph& graph, const Matrix& subgraph_embeddings);

/// sum_y |mu(y) - 1/|Y||; requires a probability simplex within 1e-9.
double label_nonuniformity(std::span<const double> soft_prediction);

/// Label non-uniformity homophily over 1-hop neighbors; 0 for isolated nodes.
double lnh_score(const Graph& graph, int v);
/// Same score over an explicit label vector (e.g. a label-flipped copy).
double lnh_score(const Graph& graph, std::span<const int> labels, int num_labels, int v);

struct CentroidSet {
  Matrix centroids;          // num_labels x dim; rows of absent labels are NaN
  std::vector<int> counts;   // samples per label

  bool present(int label) const {
    return label >= 0 && label < static_cast<int>(counts.size()) && counts[label] > 0;
  }
  Vector centroid(int label) const;
};

CentroidSet compute_centroids(const Matrix& embeddings, std::span<const int> labels, int num_labels);

struct CentroidStats {
  double alignment = 0.0;
  double misalignment = 0.0;
  double difference = 0.0;
};

CentroidStats centroid_stats(const Vector& embedding, int own_label, int other_label,
                             const CentroidSet& centroids);

struct DistributionDeltas {
  double add = 0.0;  // mean degree, clean minus poisoned
  double ahd = 0.0;  // local homophily, clean minus poisoned, percentage points
};

DistributionDeltas distribution_deltas(std::span<const Subgraph> clean, std::span<const Subgraph> poisoned);

}  // namespace krait
