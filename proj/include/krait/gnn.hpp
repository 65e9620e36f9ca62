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

#include <functional>
#include <span>
#include <utility>
#include <vector>

#include "krait/graph.hpp"
#include "krait/subgraph.hpp"

namespace krait {

struct FrozenFlags {
  bool layer1 = false;
  bool layer2 = false;
  bool classifier = false;
  bool operator==(const FrozenFlags&) const = default;
};

/// Two bias-free GCN layers, mean readout, and a linear classifier with bias.
struct GnnParams {
  Matrix layer1;           // in_dim x hidden
  Matrix layer2;           // hidden x hidden
  Matrix classifier;       // hidden x num_labels
  Vector classifier_bias;  // num_labels
  FrozenFlags frozen;

  int in_dim() const { return static_cast<int>(layer1.rows()); }
  int hidden_dim() const { return static_cast<int>(layer1.cols()); }
  int num_labels() const { return static_cast<int>(classifier.cols()); }

  /// Gaussian init with std sqrt(2 / fan_in); classifier may have 0 labels.
  static GnnParams init(int in_dim, int hidden_dim, int num_labels, Seed seed);
  /// Copy with a freshly initialized, unfrozen classifier head.
  GnnParams with_classifier(int num_labels, Seed seed) const;
  void validate() const;
};

struct ForwardResult {
  Matrix node_embeddings;  // H2
  Vector graph_embedding;  // row mean of H2
  Vector logits;
  Vector softmax;
};

/// Intermediates kept for backprop.
struct ForwardTrace {
  Matrix adjacency;  // D^-1/2 (A + I) D^-1/2, dense
  Matrix ax;         // adjacency * X
  Matrix pre1;       // ax * W1
  Matrix h1;
  Matrix ah1;        // adjacency * H1
  Matrix pre2;
  ForwardResult out;
};

/// Symmetric renormalized adjacency with self-loops.
Matrix normalized_adjacency(const Subgraph& subgraph);

ForwardTrace gcn_trace(const GnnParams& params, const Subgraph& subgraph);
ForwardResult gcn_forward(const GnnParams& params, const Subgraph& subgraph);

/// Classifier on an externally supplied graph embedding (used by embedding-noise defenses).
Vector classify_embedding(const GnnParams& params, const Vector& embedding);
Vector softmax(const Vector& logits);

/// Gradient record mirroring GnnParams, plus the input-feature gradient.
struct GnnGrads {
  Matrix layer1;
  Matrix layer2;
  Matrix classifier;
  Vector classifier_bias;
  Matrix features;

  static GnnGrads zeros_like(const GnnParams& params, int node_count);
  GnnGrads& operator+=(const GnnGrads& other);
};

/// A scalar loss on (graph_embedding, logits) with its partial derivatives.
struct HeadResult {
  double loss = 0.0;
  Vector d_embedding;
  Vector d_logits;
};
using LossHead = std::function<HeadResult(const Vector& embedding, const Vector& logits)>;

LossHead cross_entropy_head(int target);
/// Cross-entropy of softmax(logits) at `target`, with d/dlogits.
std::pair<double, Vector> cross_entropy(const Vector& logits, int target);

/// Backpropagates the head's partials through classifier, readout and both layers.
/// Frozen blocks receive exactly zero gradient.
GnnGrads backward(const GnnParams& params, const ForwardTrace& trace, const Vector& d_embedding,
                  const Vector& d_logits);

struct LossAndGrads {
  double loss = 0.0;
  GnnGrads grads;
};

LossAndGrads backprop_grads(const GnnParams& params, const Subgraph& subgraph, const LossHead& head);

struct PretrainConfig {
  double temperature = 0.2;
  double edge_drop_rate = 0.2;
  double feature_mask_rate = 0.2;
  int epochs = 100;
  double learning_rate = 0.01;
  double weight_decay = 1e-4;
  int batch_size = 10;
  int hidden_dim = 100;
  Seed seed = 0;

  void validate() const;
};

std::pair<Subgraph, Subgraph> augment_views(const EgoNetwork& ego, const PretrainConfig& config, Seed seed);
std::pair<Subgraph, Subgraph> augment_views(const Subgraph& subgraph, const PretrainConfig& config, Seed seed);

struct NtXentResult {
  double loss = 0.0;                 // mean over anchors
  std::vector<double> per_anchor;
  std::vector<Vector> d_view1;
  std::vector<Vector> d_view2;
};

/// Anchor i: -log( exp(s(z1_i, z2_i)/tau) / sum_{j != i} exp(s(z1_i, z2_j)/tau) ),
/// s = cosine similarity, averaged over anchors.
NtXentResult nt_xent(std::span<const Vector> view1, std::span<const Vector> view2, double temperature);

struct PretrainResult {
  GnnParams params;
  std::vector<double> epoch_losses;
};

/// Contrastive pretraining with plain gradient descent plus weight decay.
/// Returned params have both GCN layers frozen and an empty classifier.
PretrainResult pretrain_contrastive(std::span<const EgoNetwork> egos, const PretrainConfig& config);

}  // namespace krait
