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

#include "krait/common.hpp"
#include "krait/subgraph.hpp"

namespace krait {

enum class DefenseKind { kNone, kGnnSvd, kNoisyFeatures, kNoisyEmbedding };

std::string to_string(DefenseKind kind);
DefenseKind parse_defense_kind(const std::string& text);

struct DefenseConfig {
  DefenseKind kind = DefenseKind::kNone;
  int rank = 10;
  double threshold = 0.5;  // binarization cutoff for the low-rank reconstruction
  double sigma = 0.1;
  Seed seed = 0;

  void validate() const;
};

/// Replaces the dense adjacency with its best rank-`rank` approximation and
/// keeps off-diagonal entries >= threshold as edges. Node rows are untouched.
Subgraph gnn_svd_filter(const Subgraph& subgraph, int rank = 10, double threshold = 0.5);

/// features + sigma * N(0, 1), drawn row-major from a seeded engine.
Subgraph inject_feature_noise(const Subgraph& subgraph, double sigma, Seed seed);
Vector inject_embedding_noise(const Vector& embedding, double sigma, Seed seed);

}  // namespace krait
