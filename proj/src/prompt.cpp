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

#include "krait/prompt.hpp"

#include <algorithm>
#include <numeric>
#include <random>

namespace krait {

GraphPrompt init_prompt(int token_count, int in_dim, Seed seed, double stddev) {
  if (token_count < 0 || in_dim < 0) throw Error("init_prompt: negative size");
  GraphPrompt p;
  p.tokens.resize(token_count, in_dim);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, stddev);
  for (int i = 0; i < token_count; ++i)
    for (int j = 0; j < in_dim; ++j) p.tokens(i, j) = gauss(rng);
  return p;
}

GraphPrompt init_prompt(const PromptSpec& spec, int in_dim, Seed seed) {
  GraphPrompt p = init_prompt(spec.token_count, in_dim, seed, spec.init_std);
  p.inner_threshold = spec.inner_threshold;
  p.cross_threshold = spec.cross_threshold;
  return p;
}

std::vector<Edge> inner_links(const GraphPrompt& prompt) {
  std::vector<Edge> links;
  for (int i = 0; i < prompt.token_count(); ++i)
    for (int j = i + 1; j < prompt.token_count(); ++j)
      if (sigmoid(prompt.tokens.row(i).dot(prompt.tokens.row(j))) >= prompt.inner_threshold)
        links.push_back({i, j});
  return links;
}

Subgraph insert_prompt(const Subgraph& subgraph, const GraphPrompt& prompt, NodeRole role) {
  if (prompt.token_count() == 0) return subgraph;
  if (prompt.in_dim() != subgraph.feature_dim()) {
    throw Error("insert_prompt: prompt dim " + std::to_string(prompt.in_dim()) + " != feature dim " +
                std::to_string(subgraph.feature_dim()));
  }
  const int n = subgraph.node_count();
  const int t = prompt.token_count();
  Subgraph out;
  out.label = subgraph.label;
  out.features.resize(n + t, subgraph.feature_dim());
  out.features.topRows(n) = subgraph.features;
  out.features.bottomRows(t) = prompt.tokens;
  out.edges = subgraph.edges;
  out.roles = subgraph.roles;
  out.origin = subgraph.origin;
  out.token_slot = subgraph.token_slot;
  for (int i = 0; i < t; ++i) {
    out.roles.push_back(role);
    out.origin.push_back(-1);
    out.token_slot.push_back(i);
  }
  for (const auto& e : inner_links(prompt)) out.edges.push_back({n + e.u, n + e.v});

  const Matrix dots = prompt.tokens * subgraph.features.transpose();  // t x n
  for (int i = 0; i < t; ++i) {
    bool linked = false;
    for (int u = 0; u < n; ++u) {
      if (sigmoid(dots(i, u)) >= prompt.cross_threshold) {
        out.edges.push_back({u, n + i});
        linked = true;
      }
    }
    if (!linked && n > 0) {
      Eigen::Index best = 0;
      dots.row(i).maxCoeff(&best);  // first maximum, i.e. lowest index on ties
      out.edges.push_back({static_cast<int>(best), n + i});
    }
  }
  return out;
}

Subgraph insert_prompt(const EgoNetwork& ego, const GraphPrompt& prompt) {
  return insert_prompt(to_subgraph(ego), prompt, NodeRole::kPrompt);
}

Matrix gather_token_grads(const Subgraph& subgraph, const Matrix& feature_grads, NodeRole role,
                          int token_count) {
  Matrix g = Matrix::Zero(token_count, feature_grads.cols());
  for (int i = 0; i < subgraph.node_count(); ++i)
    if (subgraph.roles[i] == role) g.row(subgraph.token_slot[i]) += feature_grads.row(i);
  return g;
}

Vector predict_prompted(const GnnParams& params, const GraphPrompt& prompt, const Subgraph& subgraph) {
  return gcn_forward(params, insert_prompt(subgraph, prompt)).softmax;
}

TuneResult tune_prompt(const GnnParams& frozen_params, GraphPrompt prompt,
                       std::span<const Subgraph> training, const TuneConfig& config) {
  if (training.empty()) throw Error("tune_prompt: empty training list");
  if (config.epochs < 1) throw Error("tune_prompt: epochs must be >= 1");
  if (config.batch_size < 1) throw Error("tune_prompt: batch_size must be >= 1");
  if (!frozen_params.frozen.layer1 || !frozen_params.frozen.layer2) {
    throw Error("tune_prompt: GNN layers must be frozen");
  }
  if (frozen_params.num_labels() < 1) throw Error("tune_prompt: classifier head has no labels");
  frozen_params.validate();

  TuneResult result;
  result.params = frozen_params;
  GnnParams& params = result.params;
  const int n = static_cast<int>(training.size());
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(config.seed);

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    int batches = 0;
    for (int start = 0; start < n; start += config.batch_size) {
      const int end = std::min(n, start + config.batch_size);
      const double scale = 1.0 / (end - start);
      Matrix prompt_grad = Matrix::Zero(prompt.token_count(), prompt.in_dim());
      Matrix cls_grad = Matrix::Zero(params.classifier.rows(), params.classifier.cols());
      Vector bias_grad = Vector::Zero(params.classifier_bias.size());
      double batch_loss = 0.0;
      for (int k = start; k < end; ++k) {
        const Subgraph& sample = training[order[k]];
        const Subgraph prompted = insert_prompt(sample, prompt);
        const auto lg = backprop_grads(params, prompted, cross_entropy_head(sample.label));
        batch_loss += scale * lg.loss;
        cls_grad += scale * lg.grads.classifier;
        bias_grad += scale * lg.grads.classifier_bias;
        if (prompt.learnable && prompt.token_count() > 0) {
          prompt_grad += scale * gather_token_grads(prompted, lg.grads.features, NodeRole::kPrompt,
                                                    prompt.token_count());
        }
      }
      if (prompt.learnable) prompt.tokens -= config.learning_rate * prompt_grad;
      params.classifier -= config.learning_rate * cls_grad;
      params.classifier_bias -= config.learning_rate * bias_grad;
      result.step_losses.push_back(batch_loss);
      epoch_loss += batch_loss;
      ++batches;
    }
    result.epoch_losses.push_back(epoch_loss / batches);
  }
  result.prompt = std::move(prompt);
  return result;
}

}  // namespace krait
