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

#include <compare>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "krait/common.hpp"

namespace krait {

/// Undirected edge, stored once with u < v.
struct Edge {
  int u = 0;
  int v = 0;
  auto operator<=>(const Edge&) const = default;
};

inline Edge make_edge(int a, int b) { return a < b ? Edge{a, b} : Edge{b, a}; }

/// Undirected attributed graph with node labels and a train/test split.
///
/// The constructor validates every invariant (no self-loops, no duplicate
/// edges, ids in range, disjoint masks, every label id occurring) and throws
/// krait::Error otherwise. Instances are immutable; the with_* helpers return
/// modified copies.
class Graph {
 public:
  Graph(int node_count, std::vector<Edge> edges, Matrix features,
        std::vector<int> labels, int num_labels, std::vector<bool> train_mask,
        std::vector<bool> test_mask);

  int node_count() const { return node_count_; }
  int feature_dim() const { return static_cast<int>(features_.cols()); }
  int num_labels() const { return num_labels_; }
  const std::vector<Edge>& edges() const { return edges_; }
  const Matrix& features() const { return features_; }
  const std::vector<int>& labels() const { return labels_; }
  int label(int v) const { return labels_[v]; }
  const std::vector<bool>& train_mask() const { return train_mask_; }
  const std::vector<bool>& test_mask() const { return test_mask_; }

  /// Sorted ascending.
  std::span<const int> neighbors(int v) const { return adjacency_[v]; }
  int degree(int v) const { return static_cast<int>(adjacency_[v].size()); }
  bool has_edge(int a, int b) const;

  std::vector<int> train_nodes() const;
  std::vector<int> test_nodes() const;

  Graph with_labels(std::vector<int> labels) const;
  Graph with_features(Matrix features) const;
  Graph with_masks(std::vector<bool> train_mask, std::vector<bool> test_mask) const;

  /// Fraction of edges whose endpoints share a label; 0 for edgeless graphs.
  double label_homophily() const;

 private:
  int node_count_;
  std::vector<Edge> edges_;
  Matrix features_;
  std::vector<int> labels_;
  int num_labels_;
  std::vector<bool> train_mask_;
  std::vector<bool> test_mask_;
  std::vector<std::vector<int>> adjacency_;
};

/// Seeded shuffle: the first round(train_fraction * n) nodes train, the rest test.
Graph assign_split(const Graph& graph, double train_fraction, Seed seed);

struct SplitSpec {
  double train_fraction = 0.5;
  Seed seed = 0;
};

struct LoadReport {
  int self_loops_dropped = 0;
  int duplicate_edges_dropped = 0;
};

struct LoadedGraph {
  Graph graph;
  LoadReport report;
};

/// Reads an edge list (whitespace-separated id pairs), a CSV feature matrix
/// (one row per node) and a label file (one integer per line).
LoadedGraph load_graph(const std::filesystem::path& edge_path,
                       const std::filesystem::path& feature_path,
                       const std::filesystem::path& label_path, const SplitSpec& split);

/// Bundled single-file JSON graph; see docs/graph_format.md. Masks are taken
/// from the file when present, otherwise drawn from `split`.
LoadedGraph load_graph_json(const std::filesystem::path& path, const SplitSpec& split);
void save_graph_json(const Graph& graph, const std::filesystem::path& path);

/// Builds a graph from raw, possibly unclean edges: self-loops and duplicate or
/// reversed pairs are dropped and counted.
LoadedGraph build_graph(std::vector<std::pair<int, int>> raw_edges, Matrix features,
                        std::vector<int> labels, const SplitSpec& split);

struct SbmParams {
  int classes = 4;
  int nodes_per_class = 100;
  double p_in = 0.3;
  double p_out = 0.03;
  int feature_dim = 32;
  double class_sep = 3.0;
  double train_fraction = 0.5;
  Seed seed = 0;
};

struct SbmGraph {
  Graph graph;
  double label_homophily = 0.0;
};

/// Stochastic block model with per-class Gaussian features. Class means are
/// class_sep / sqrt(2) along distinct coordinate axes (pairwise distance
/// class_sep) when classes <= feature_dim, and random directions with the
/// same norm otherwise. Noise is standard Gaussian per entry.
SbmGraph generate_sbm(const SbmParams& params);

/// k-hop induced subgraph around a center node.
struct EgoNetwork {
  int center = 0;
  std::vector<int> nodes;         // original ids, BFS order, center first
  std::vector<Edge> local_edges;  // over local indices, u < v, sorted
  Matrix features;
  int label = 0;
  int hops = 0;
};

EgoNetwork ego_network(const Graph& graph, int center, int k);

struct SvdProjection {
  Matrix basis;            // feature_dim x k, orthonormal columns
  Vector singular_values;  // all singular values, descending
};

/// Top right singular directions of `features`; k = min(target_dim, feature_dim).
SvdProjection fit_svd_projection(const Matrix& features, int target_dim);

/// Projects rows onto the top target_dim right singular directions, or
/// returns the input unchanged when target_dim >= feature_dim.
Matrix svd_reduce_features(const Matrix& features, int target_dim);

}  // namespace krait
