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
// Central finite-difference checks for GNN gradients.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <random>
#include <string>

#include "krait/gnn.hpp"

namespace fdcheck {

using krait::GnnGrads;
using krait::GnnParams;
using krait::Matrix;
using krait::Subgraph;

struct Report {
  double worst = 0.0;  // largest relative error seen
  int entries = 0;
  std::string where;
};

inline std::string sci(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6e", x);
  return buf;
}

inline double relative_error(double analytic, double numeric, double floor = 1e-6) {
  const double scale = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / scale;
}

/// Random connected-ish subgraph with n nodes and dim features.
inline Subgraph random_subgraph(std::mt19937_64& rng, int n, int dim) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::bernoulli_distribution coin(0.5);
  Subgraph s;
  s.features.resize(n, dim);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < dim; ++j) s.features(i, j) = gauss(rng);
  for (int v = 1; v < n; ++v) {
    std::uniform_int_distribution<int> pick(0, v - 1);
    const int u = pick(rng);
    s.edges.push_back(krait::make_edge(u, v));
    for (int w = 0; w < v; ++w)
      if (w != u && coin(rng) && coin(rng)) s.edges.push_back(krait::make_edge(w, v));
  }
  std::sort(s.edges.begin(), s.edges.end());
  s.roles.assign(n, krait::NodeRole::kEgo);
  s.origin.resize(n);
  for (int i = 0; i < n; ++i) s.origin[i] = i;
  s.token_slot.assign(n, -1);
  s.label = 0;
  return s;
}

/// Compares every entry of `analytic` against central differences of `loss`
/// with respect to each parameter block and the input features.
inline Report compare(GnnParams params, Subgraph subgraph, const GnnGrads& analytic,
                      const std::function<double(const GnnParams&, const Subgraph&)>& loss, double eps = 1e-5) {
  Report r;
  // Entries smaller than the rounding noise of a central difference on this
  // loss value are compared in absolute terms at that noise level.
  const double noise = 8 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(loss(params, subgraph))) /
                       (2 * eps);
  const double floor = std::max(1e-6, noise / 1e-4);
  auto probe = [&](Matrix& m, const Matrix& g, const char* name) {
    for (int i = 0; i < m.rows(); ++i)
      for (int j = 0; j < m.cols(); ++j) {
        const double keep = m(i, j);
        m(i, j) = keep + eps;
        const double up = loss(params, subgraph);
        m(i, j) = keep - eps;
        const double down = loss(params, subgraph);
        m(i, j) = keep;
        const double err = relative_error(g(i, j), (up - down) / (2 * eps), floor);
        ++r.entries;
        if (err > r.worst) {
          r.worst = err;
          r.where = std::string(name) + "(" + std::to_string(i) + "," + std::to_string(j) + ") analytic " +
                    sci(g(i, j)) + " numeric " + sci((up - down) / (2 * eps));
        }
      }
  };
  probe(params.layer1, analytic.layer1, "layer1");
  probe(params.layer2, analytic.layer2, "layer2");
  probe(params.classifier, analytic.classifier, "classifier");
  {
    for (int i = 0; i < params.classifier_bias.size(); ++i) {
      const double keep = params.classifier_bias(i);
      params.classifier_bias(i) = keep + eps;
      const double up = loss(params, subgraph);
      params.classifier_bias(i) = keep - eps;
      const double down = loss(params, subgraph);
      params.classifier_bias(i) = keep;
      const double err = relative_error(analytic.classifier_bias(i), (up - down) / (2 * eps), floor);
      ++r.entries;
      if (err > r.worst) {
        r.worst = err;
        r.where = "bias(" + std::to_string(i) + ")";
      }
    }
  }
  probe(subgraph.features, analytic.features, "features");
  return r;
}

}  // namespace fdcheck
