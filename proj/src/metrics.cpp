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

#include "krait/metrics.hpp"

#include <cmath>
#include <limits>

namespace krait {

int Subgraph::count(NodeRole role) const {
  int c = 0;
  for (auto r : roles) c += r == role;
  return c;
}

double Subgraph::mean_degree() const {
  if (node_count() == 0) return 0.0;
  return 2.0 * static_cast<double>(edges.size()) / node_count();
}

std::vector<std::vector<int>> Subgraph::adjacency_lists() const {
  std::vector<std::vector<int>> adj(node_count());
  for (const auto& e : edges) {
    adj[e.u].push_back(e.v);
    adj[e.v].push_back(e.u);
  }
  return adj;
}

Subgraph to_subgraph(const EgoNetwork& ego) {
  Subgraph s;
  s.features = ego.features;
  s.edges = ego.local_edges;
  s.roles.assign(ego.nodes.size(), NodeRole::kEgo);
  s.origin = ego.nodes;
  s.token_slot.assign(ego.nodes.size(), -1);
  s.label = ego.label;
  return s;
}

double local_subgraph_homophily(const Subgraph& subgraph) {
  const int n = subgraph.node_count();
  if (n == 0) return 0.0;
  const auto adj = subgraph.adjacency_lists();
  double total = 0.0;
  for (int u = 0; u < n; ++u) {
    if (adj[u].empty()) continue;
    Vector r = Vector::Zero(subgraph.feature_dim());
    const double du = static_cast<double>(adj[u].size());
    for (int w : adj[u]) {
      const double dw = static_cast<double>(adj[w].size());
      r += subgraph.features.row(w).transpose() / std::sqrt(du * dw);
    }
    total += cosine(r, subgraph.features.row(u).transpose());
  }
  return total / n;
}

double local_subgraph_homophily(const EgoNetwork& ego) { return local_subgraph_homophily(to_subgraph(ego)); }

std::vector<double> global_view_homophily(const Graph& graph, const Matrix& subgraph_embeddings) {
  if (subgraph_embeddings.rows() != graph.node_count()) {
    throw Error("global_view_homophily: embedding rows != node count");
  }
  std::vector<double> h(graph.node_count(), 0.0);
  for (int v = 0; v < graph.node_count(); ++v) {
    if (graph.degree(v) == 0) continue;
    Vector t = Vector::Zero(subgraph_embeddings.cols());
    for (int u : graph.neighbors(v)) {
      t += subgraph_embeddings.row(u).transpose() /
           std::sqrt(static_cast<double>(graph.degree(v)) * graph.degree(u));
    }
    h[v] = cosine(t, subgraph_embeddings.row(v).transpose());
  }
  return h;
}

double label_nonuniformity(std::span<const double> soft_prediction) {
  if (soft_prediction.empty()) throw Error("label_nonuniformity: empty prediction");
  double sum = 0.0;
  for (double p : soft_prediction) {
    if (!(p >= 0.0)) throw Error("label_nonuniformity: negative or NaN entry");
    sum += p;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw Error("label_nonuniformity: entries do not sum to 1");
  const double uniform = 1.0 / static_cast<double>(soft_prediction.size());
  double w = 0.0;
  for (double p : soft_prediction) w += std::abs(p - uniform);
  return w;
}

double lnh_score(const Graph& graph, std::span<const int> labels, int num_labels, int v) {
  if (v < 0 || v >= graph.node_count()) throw Error("lnh_score: node out of range");
  const auto nbrs = graph.neighbors(v);
  if (nbrs.empty()) return 0.0;
  std::vector<int> counts(num_labels, 0);
  for (int u : nbrs) ++counts[labels[u]];
  const double deg = static_cast<double>(nbrs.size());
  const double heterophily = 1.0 - counts[labels[v]] / deg;
  const double uniform = 1.0 / num_labels;
  double ldn = 0.0;
  for (int c : counts) ldn += std::abs(c / deg - uniform);
  return heterophily * ldn;
}

double lnh_score(const Graph& graph, int v) {
  return lnh_score(graph, graph.labels(), graph.num_labels(), v);
}

Vector CentroidSet::centroid(int label) const {
  if (!present(label)) throw Error("centroid for label " + std::to_string(label) + " is absent");
  return centroids.row(label).transpose();
}

CentroidSet compute_centroids(const Matrix& embeddings, std::span<const int> labels, int num_labels) {
  if (static_cast<Eigen::Index>(labels.size()) != embeddings.rows()) {
    throw Error("compute_centroids: label count != embedding rows");
  }
  CentroidSet set;
  set.centroids = Matrix::Zero(num_labels, embeddings.cols());
  set.counts.assign(num_labels, 0);
  for (Eigen::Index i = 0; i < embeddings.rows(); ++i) {
    const int y = labels[i];
    if (y < 0 || y >= num_labels) throw Error("compute_centroids: label out of range");
    set.centroids.row(y) += embeddings.row(i);
    ++set.counts[y];
  }
  for (int j = 0; j < num_labels; ++j) {
    if (set.counts[j] > 0) {
      set.centroids.row(j) /= static_cast<double>(set.counts[j]);
    } else {
      set.centroids.row(j).setConstant(std::numeric_limits<double>::quiet_NaN());
    }
  }
  return set;
}

CentroidStats centroid_stats(const Vector& embedding, int own_label, int other_label,
                             const CentroidSet& centroids) {
  if (own_label == other_label) throw Error("centroid_stats: labels must differ");
  CentroidStats s;
  s.alignment = cosine(embedding, centroids.centroid(own_label));
  s.misalignment = cosine(embedding, centroids.centroid(other_label));
  s.difference = s.alignment - s.misalignment;
  return s;
}

DistributionDeltas distribution_deltas(std::span<const Subgraph> clean, std::span<const Subgraph> poisoned) {
  if (clean.empty() || poisoned.empty()) throw Error("distribution_deltas: empty subgraph list");
  auto means = [](std::span<const Subgraph> list) {
    double deg = 0.0, hom = 0.0;
    for (const auto& s : list) {
      deg += s.mean_degree();
      hom += local_subgraph_homophily(s);
    }
    const double n = static_cast<double>(list.size());
    return std::pair{deg / n, hom / n};
  };
  const auto [clean_deg, clean_hom] = means(clean);
  const auto [pois_deg, pois_hom] = means(poisoned);
  return {clean_deg - pois_deg, (clean_hom - pois_hom) * 100.0};
}

}  // namespace krait
