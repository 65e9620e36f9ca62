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

#include <cmath>
#include <span>
#include <vector>

#include "krait/gnn.hpp"
#include "krait/subgraph.hpp"

namespace krait {

/// All-in-One style graph prompt: learnable token features whose inner
/// links and insertion links are derived from logistic similarity.
struct GraphPrompt {
  Matrix tokens;                  // token_count x in_dim
  double inner_threshold = 0.3;   // token-token link iff sigmoid(p_i . p_j) >= this
  double cross_threshold = 0.1;   // token-node link iff sigmoid(p_i . x_u) >= this
  bool learnable = true;

  int token_count() const { return static_cast<int>(tokens.rows()); }
  int in_dim() const { return static_cast<int>(tokens.cols()); }
};

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

GraphPrompt init_prompt(int token_count, int in_dim, Seed seed, double stddev = 0.1);

struct PromptSpec {
  int token_count = 10;
  double inner_threshold = 0.3;
  double cross_threshold = 0.1;
  double init_std = 0.1;
};

GraphPrompt init_prompt(const PromptSpec& spec, int in_dim, Seed seed);

/// Token-token links over token indices, u < v.
std::vector<Edge> inner_links(const GraphPrompt& prompt);

/// Appends the prompt's tokens after every existing node (ego nodes and any
/// previously inserted tokens). A token with no cross link is attached to its
/// most similar existing node. Original edges are never touched.
Subgraph insert_prompt(const Subgraph& subgraph, const GraphPrompt& prompt,
                       NodeRole role = NodeRole::kPrompt);
Subgraph insert_prompt(const EgoNetwork& ego, const GraphPrompt& prompt);

/// Sums the feature gradients of all `role` rows into a token_count x in_dim matrix.
Matrix gather_token_grads(const Subgraph& subgraph, const Matrix& feature_grads, NodeRole role,
                          int token_count);

struct TuneConfig {
  int epochs = 10;
  double learning_rate = 0.05;
  int batch_size = 10;
  Seed seed = 0;
};

struct TuneResult {
  GraphPrompt prompt;
  GnnParams params;                 // GNN blocks untouched, classifier tuned
  std::vector<double> step_losses;  // mean cross-entropy of each batch before its update
  std::vector<double> epoch_losses;
};

/// Gradient descent on mean cross-entropy over prompted subgraphs, updating
/// the prompt tokens and the classifier. Each training subgraph is used as
/// given (it may already carry a trigger) and labeled by its `label` field.
/// Link sets are recomputed from the current tokens at every step.
TuneResult tune_prompt(const GnnParams& frozen_params, GraphPrompt prompt,
                       std::span<const Subgraph> training, const TuneConfig& config);

/// Softmax prediction for a subgraph with the prompt inserted.
Vector predict_prompted(const GnnParams& params, const GraphPrompt& prompt, const Subgraph& subgraph);

}  // namespace krait
