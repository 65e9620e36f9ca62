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

#include "krait/defense.hpp"

#include <cmath>
#include <random>

namespace krait {
namespace {

void check_sigma(double sigma) {
  if (!(sigma >= 0.0) || !std::isfinite(sigma)) throw Error("noise sigma must be finite and >= 0");
}

}  // namespace

std::string to_string(DefenseKind kind) {
  switch (kind) {
    case DefenseKind::kNone: return "none";
    case DefenseKind::kGnnSvd: return "gnn_svd";
    case DefenseKind::kNoisyFeatures: return "noisy_fea";
    case DefenseKind::kNoisyEmbedding: return "noisy_emb";
  }
  return "?";
}

DefenseKind parse_defense_kind(const std::string& text) {
  if (text == "none") return DefenseKind::kNone;
  if (text == "gnn_svd") return DefenseKind::kGnnSvd;
  if (text == "noisy_fea") return DefenseKind::kNoisyFeatures;
  if (text == "noisy_emb") return DefenseKind::kNoisyEmbedding;
  throw Error("unknown defense kind '" + text + "'");
}

void DefenseConfig::validate() const {
  if (rank < 1) throw Error("defense: rank must be >= 1");
  if (!std::isfinite(threshold)) throw Error("defense: threshold must be finite");
  check_sigma(sigma);
}

Subgraph gnn_svd_filter(const Subgraph& subgraph, int rank, double threshold) {
  if (rank < 1) throw Error("gnn_svd_filter: rank must be >= 1");
  const int n = subgraph.node_count();
  if (n == 0) throw Error("gnn_svd_filter: empty subgraph");

  Matrix a = Matrix::Zero(n, n);
  for (const auto& e : subgraph.edges) a(e.u, e.v) = a(e.v, e.u) = 1.0;
  Eigen::JacobiSVD<Matrix> svd(a, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const int r = std::min(rank, n);
  const Matrix low = svd.matrixU().leftCols(r) * svd.singularValues().head(r).asDiagonal() *
                     svd.matrixV().leftCols(r).transpose();

  Subgraph out = subgraph;
  out.edges.clear();
  for (int u = 0; u < n; ++u)
    for (int v = u + 1; v < n; ++v)
      if (0.5 * (low(u, v) + low(v, u)) >= threshold) out.edges.push_back({u, v});
  return out;
}

Subgraph inject_feature_noise(const Subgraph& subgraph, double sigma, Seed seed) {
  check_sigma(sigma);
  Subgraph out = subgraph;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (int i = 0; i < out.features.rows(); ++i)
    for (int j = 0; j < out.features.cols(); ++j) out.features(i, j) += sigma * gauss(rng);
  return out;
}

Vector inject_embedding_noise(const Vector& embedding, double sigma, Seed seed) {
  check_sigma(sigma);
  Vector out = embedding;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (Eigen::Index i = 0; i < out.size(); ++i) out(i) += sigma * gauss(rng);
  return out;
}

}  // namespace krait
