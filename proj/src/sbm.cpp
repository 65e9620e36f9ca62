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

#include <cmath>
#include <random>

#include "krait/graph.hpp"

namespace krait {

SbmGraph generate_sbm(const SbmParams& params) {
  if (params.classes < 2) throw Error("generate_sbm: need at least 2 classes");
  if (params.nodes_per_class < 1) throw Error("generate_sbm: nodes_per_class must be >= 1");
  if (params.feature_dim < 1) throw Error("generate_sbm: feature_dim must be >= 1");
  const bool degenerate_empty = params.p_in == 0.0 && params.p_out == 0.0;
  if (!(params.p_out >= 0.0 && params.p_in <= 1.0 && (params.p_out < params.p_in || degenerate_empty))) {
    throw Error("generate_sbm: require 0 <= p_out < p_in <= 1");
  }

  const int n = params.classes * params.nodes_per_class;
  std::mt19937_64 rng(params.seed);
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);

  std::vector<int> labels(n);
  for (int i = 0; i < n; ++i) labels[i] = i / params.nodes_per_class;

  std::vector<Edge> edges;
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      const double p = labels[i] == labels[j] ? params.p_in : params.p_out;
      if (coin(rng) < p) edges.push_back({i, j});
    }
  }

  const double radius = params.class_sep / std::sqrt(2.0);
  Matrix means = Matrix::Zero(params.classes, params.feature_dim);
  if (params.classes <= params.feature_dim) {
    for (int c = 0; c < params.classes; ++c) means(c, c) = radius;
  } else {
    for (int c = 0; c < params.classes; ++c) {
      Vector dir(params.feature_dim);
      for (int j = 0; j < params.feature_dim; ++j) dir(j) = gauss(rng);
      means.row(c) = radius * dir.normalized().transpose();
    }
  }
  Matrix features(n, params.feature_dim);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < params.feature_dim; ++j) features(i, j) = means(labels[i], j) + gauss(rng);

  Graph base(n, std::move(edges), std::move(features), std::move(labels), params.classes,
             std::vector<bool>(n, false), std::vector<bool>(n, false));
  Graph split = assign_split(base, params.train_fraction, derive_seed(params.seed, 1));
  const double h = split.label_homophily();
  return {std::move(split), h};
}

}  // namespace krait
