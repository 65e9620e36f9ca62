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

#include "krait/graph.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numeric>
#include <random>

namespace krait {

Graph::Graph(int node_count, std::vector<Edge> edges, Matrix features,
             std::vector<int> labels, int num_labels, std::vector<bool> train_mask,
             std::vector<bool> test_mask)
    : node_count_(node_count),
      edges_(std::move(edges)),
      features_(std::move(features)),
      labels_(std::move(labels)),
      num_labels_(num_labels),
      train_mask_(std::move(train_mask)),
      test_mask_(std::move(test_mask)) {
  if (node_count_ < 0) throw Error("graph: negative node count");
  if (features_.rows() != node_count_) throw Error("graph: feature rows != node count");
  if (static_cast<int>(labels_.size()) != node_count_) throw Error("graph: label count != node count");
  if (static_cast<int>(train_mask_.size()) != node_count_ ||
      static_cast<int>(test_mask_.size()) != node_count_) {
    throw Error("graph: mask size != node count");
  }
  for (auto& e : edges_) {
    if (e.u == e.v) throw Error("graph: self-loop on node " + std::to_string(e.u));
    if (e.u < 0 || e.v < 0 || e.u >= node_count_ || e.v >= node_count_) {
      throw Error("graph: edge endpoint out of range");
    }
    e = make_edge(e.u, e.v);
  }
  std::sort(edges_.begin(), edges_.end());
  if (std::adjacent_find(edges_.begin(), edges_.end()) != edges_.end()) {
    throw Error("graph: duplicate edge");
  }
  std::vector<int> seen(num_labels_ > 0 ? num_labels_ : 0, 0);
  for (int y : labels_) {
    if (y < 0 || y >= num_labels_) throw Error("graph: label " + std::to_string(y) + " out of range");
    ++seen[y];
  }
  for (int j = 0; j < num_labels_; ++j) {
    if (seen[j] == 0) throw Error("graph: label id " + std::to_string(j) + " never occurs");
  }
  for (int v = 0; v < node_count_; ++v) {
    if (train_mask_[v] && test_mask_[v]) throw Error("graph: train and test masks overlap");
  }
  adjacency_.assign(node_count_, {});
  for (const auto& e : edges_) {
    adjacency_[e.u].push_back(e.v);
    adjacency_[e.v].push_back(e.u);
  }
  for (auto& nbrs : adjacency_) std::sort(nbrs.begin(), nbrs.end());
}

bool Graph::has_edge(int a, int b) const {
  const auto nbrs = neighbors(a);
  return std::binary_search(nbrs.begin(), nbrs.end(), b);
}

std::vector<int> Graph::train_nodes() const {
  std::vector<int> out;
  for (int v = 0; v < node_count_; ++v)
    if (train_mask_[v]) out.push_back(v);
  return out;
}

std::vector<int> Graph::test_nodes() const {
  std::vector<int> out;
  for (int v = 0; v < node_count_; ++v)
    if (test_mask_[v]) out.push_back(v);
  return out;
}

Graph Graph::with_labels(std::vector<int> labels) const {
  return Graph(node_count_, edges_, features_, std::move(labels), num_labels_, train_mask_, test_mask_);
}

Graph Graph::with_features(Matrix features) const {
  return Graph(node_count_, edges_, std::move(features), labels_, num_labels_, train_mask_, test_mask_);
}

Graph Graph::with_masks(std::vector<bool> train_mask, std::vector<bool> test_mask) const {
  return Graph(node_count_, edges_, features_, labels_, num_labels_, std::move(train_mask),
               std::move(test_mask));
}

double Graph::label_homophily() const {
  if (edges_.empty()) return 0.0;
  std::size_t same = 0;
  for (const auto& e : edges_)
    if (labels_[e.u] == labels_[e.v]) ++same;
  return static_cast<double>(same) / static_cast<double>(edges_.size());
}

Graph assign_split(const Graph& graph, double train_fraction, Seed seed) {
  if (!(train_fraction >= 0.0 && train_fraction <= 1.0)) throw Error("split: train fraction outside [0,1]");
  const int n = graph.node_count();
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  const int n_train = static_cast<int>(std::lround(train_fraction * n));
  std::vector<bool> train(n, false), test(n, false);
  for (int i = 0; i < n; ++i) (i < n_train ? train : test)[order[i]] = true;
  return graph.with_masks(std::move(train), std::move(test));
}

EgoNetwork ego_network(const Graph& graph, int center, int k) {
  if (center < 0 || center >= graph.node_count()) throw Error("ego_network: center out of range");
  if (k < 0) throw Error("ego_network: negative hop count");
  EgoNetwork ego;
  ego.center = center;
  ego.hops = k;
  ego.label = graph.label(center);

  std::vector<int> dist(graph.node_count(), -1);
  std::deque<int> queue{center};
  dist[center] = 0;
  while (!queue.empty()) {
    const int u = queue.front();
    queue.pop_front();
    ego.nodes.push_back(u);
    if (dist[u] == k) continue;
    for (int w : graph.neighbors(u)) {
      if (dist[w] >= 0) continue;
      dist[w] = dist[u] + 1;
      queue.push_back(w);
    }
  }

  std::vector<int> local(graph.node_count(), -1);
  for (int i = 0; i < static_cast<int>(ego.nodes.size()); ++i) local[ego.nodes[i]] = i;
  for (int i = 0; i < static_cast<int>(ego.nodes.size()); ++i) {
    for (int w : graph.neighbors(ego.nodes[i])) {
      const int j = local[w];
      if (j > i) ego.local_edges.push_back({i, j});
    }
  }
  std::sort(ego.local_edges.begin(), ego.local_edges.end());

  ego.features.resize(static_cast<Eigen::Index>(ego.nodes.size()), graph.feature_dim());
  for (int i = 0; i < static_cast<int>(ego.nodes.size()); ++i) {
    ego.features.row(i) = graph.features().row(ego.nodes[i]);
  }
  return ego;
}

SvdProjection fit_svd_projection(const Matrix& features, int target_dim) {
  if (features.size() == 0) throw Error("svd_reduce_features: empty matrix");
  if (target_dim < 1) throw Error("svd_reduce_features: target_dim must be >= 1");
  Eigen::BDCSVD<Matrix> svd(features, Eigen::ComputeThinV);
  const int k = std::min<int>(target_dim, static_cast<int>(features.cols()));
  const Vector& sv = svd.singularValues();
  SvdProjection out;
  out.basis = svd.matrixV().leftCols(std::min<Eigen::Index>(k, svd.matrixV().cols()));
  // Thin V has min(n, d) columns; pad with an orthonormal complement if k exceeds it.
  if (out.basis.cols() < k) {
    Eigen::HouseholderQR<Matrix> qr(out.basis);
    Matrix q = qr.householderQ() * Matrix::Identity(features.cols(), k);
    q.leftCols(out.basis.cols()) = out.basis;
    out.basis = q;
  }
  out.singular_values = Vector::Zero(features.cols());
  out.singular_values.head(sv.size()) = sv;
  return out;
}

Matrix svd_reduce_features(const Matrix& features, int target_dim) {
  if (features.size() == 0) throw Error("svd_reduce_features: empty matrix");
  if (target_dim < 1) throw Error("svd_reduce_features: target_dim must be >= 1");
  if (target_dim >= features.cols()) return features;
  return features * fit_svd_projection(features, target_dim).basis;
}

}  // namespace krait
