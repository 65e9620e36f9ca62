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

#include "krait/gnn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

namespace krait {
namespace {

Matrix gaussian_matrix(int rows, int cols, double stddev, std::mt19937_64& rng) {
  std::normal_distribution<double> gauss(0.0, stddev);
  Matrix m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = gauss(rng);
  return m;
}

Matrix relu(const Matrix& m) { return m.cwiseMax(0.0); }

Matrix relu_mask(const Matrix& pre) { return (pre.array() > 0.0).cast<double>().matrix(); }

}  // namespace

GnnParams GnnParams::init(int in_dim, int hidden_dim, int num_labels, Seed seed) {
  if (in_dim < 1 || hidden_dim < 1 || num_labels < 0) throw Error("GnnParams::init: bad dimensions");
  std::mt19937_64 rng(seed);
  GnnParams p;
  p.layer1 = gaussian_matrix(in_dim, hidden_dim, std::sqrt(2.0 / in_dim), rng);
  p.layer2 = gaussian_matrix(hidden_dim, hidden_dim, std::sqrt(2.0 / hidden_dim), rng);
  p.classifier = gaussian_matrix(hidden_dim, num_labels, std::sqrt(2.0 / hidden_dim), rng);
  p.classifier_bias = Vector::Zero(num_labels);
  return p;
}

GnnParams GnnParams::with_classifier(int num_labels, Seed seed) const {
  if (num_labels < 1) throw Error("with_classifier: need at least one label");
  std::mt19937_64 rng(seed);
  GnnParams p = *this;
  p.classifier = gaussian_matrix(hidden_dim(), num_labels, std::sqrt(2.0 / hidden_dim()), rng);
  p.classifier_bias = Vector::Zero(num_labels);
  p.frozen.classifier = false;
  return p;
}

void GnnParams::validate() const {
  if (layer2.rows() != layer1.cols() || layer2.cols() != layer1.cols() ||
      classifier.rows() != layer2.cols() || classifier_bias.size() != classifier.cols()) {
    throw Error("GnnParams: dimension chain broken");
  }
}

Matrix normalized_adjacency(const Subgraph& subgraph) {
  const int n = subgraph.node_count();
  Vector deg = Vector::Ones(n);
  for (const auto& e : subgraph.edges) {
    deg(e.u) += 1.0;
    deg(e.v) += 1.0;
  }
  const Vector inv_sqrt = deg.cwiseSqrt().cwiseInverse();
  Matrix a = Matrix::Zero(n, n);
  for (int i = 0; i < n; ++i) a(i, i) = inv_sqrt(i) * inv_sqrt(i);
  for (const auto& e : subgraph.edges) {
    const double w = inv_sqrt(e.u) * inv_sqrt(e.v);
    a(e.u, e.v) = w;
    a(e.v, e.u) = w;
  }
  return a;
}

Vector softmax(const Vector& logits) {
  if (logits.size() == 0) return logits;
  const Vector shifted = (logits.array() - logits.maxCoeff()).exp().matrix();
  return shifted / shifted.sum();
}

Vector classify_embedding(const GnnParams& params, const Vector& embedding) {
  return params.classifier.transpose() * embedding + params.classifier_bias;
}

ForwardTrace gcn_trace(const GnnParams& params, const Subgraph& subgraph) {
  if (subgraph.feature_dim() != params.in_dim()) {
    throw Error("gcn_forward: feature dim " + std::to_string(subgraph.feature_dim()) +
                " != layer1 input " + std::to_string(params.in_dim()));
  }
  if (subgraph.node_count() == 0) throw Error("gcn_forward: empty subgraph");
  ForwardTrace t;
  t.adjacency = normalized_adjacency(subgraph);
  t.ax.noalias() = t.adjacency * subgraph.features;
  t.pre1.noalias() = t.ax * params.layer1;
  t.h1 = relu(t.pre1);
  t.ah1.noalias() = t.adjacency * t.h1;
  t.pre2.noalias() = t.ah1 * params.layer2;
  t.out.node_embeddings = relu(t.pre2);
  t.out.graph_embedding = t.out.node_embeddings.colwise().mean().transpose();
  t.out.logits = classify_embedding(params, t.out.graph_embedding);
  t.out.softmax = softmax(t.out.logits);
  return t;
}

ForwardResult gcn_forward(const GnnParams& params, const Subgraph& subgraph) {
  return gcn_trace(params, subgraph).out;
}

GnnGrads GnnGrads::zeros_like(const GnnParams& params, int node_count) {
  GnnGrads g;
  g.layer1 = Matrix::Zero(params.layer1.rows(), params.layer1.cols());
  g.layer2 = Matrix::Zero(params.layer2.rows(), params.layer2.cols());
  g.classifier = Matrix::Zero(params.classifier.rows(), params.classifier.cols());
  g.classifier_bias = Vector::Zero(params.classifier_bias.size());
  g.features = Matrix::Zero(node_count, params.in_dim());
  return g;
}

GnnGrads& GnnGrads::operator+=(const GnnGrads& other) {
  layer1 += other.layer1;
  layer2 += other.layer2;
  classifier += other.classifier;
  classifier_bias += other.classifier_bias;
  // Feature gradients belong to distinct subgraphs and are not summed.
  return *this;
}

std::pair<double, Vector> cross_entropy(const Vector& logits, int target) {
  if (target < 0 || target >= logits.size()) throw Error("cross_entropy: target out of range");
  const double m = logits.maxCoeff();
  const double lse = m + std::log((logits.array() - m).exp().sum());
  Vector d = softmax(logits);
  d(target) -= 1.0;
  return {lse - logits(target), d};
}

LossHead cross_entropy_head(int target) {
  return [target](const Vector& embedding, const Vector& logits) {
    auto [loss, d_logits] = cross_entropy(logits, target);
    return HeadResult{loss, Vector::Zero(embedding.size()), std::move(d_logits)};
  };
}

GnnGrads backward(const GnnParams& params, const ForwardTrace& t, const Vector& d_embedding,
                  const Vector& d_logits) {
  const int n = static_cast<int>(t.adjacency.rows());
  GnnGrads g;
  const Vector& z = t.out.graph_embedding;
  g.classifier = z * d_logits.transpose();
  g.classifier_bias = d_logits;
  const Vector dz = d_embedding + params.classifier * d_logits;

  Matrix d_pre2 = (dz.transpose() / static_cast<double>(n)).replicate(n, 1);
  d_pre2.array() *= relu_mask(t.pre2).array();
  g.layer2.noalias() = t.ah1.transpose() * d_pre2;
  Matrix d_h1;
  d_h1.noalias() = t.adjacency * (d_pre2 * params.layer2.transpose());
  Matrix d_pre1 = d_h1.cwiseProduct(relu_mask(t.pre1));
  g.layer1.noalias() = t.ax.transpose() * d_pre1;
  g.features.noalias() = t.adjacency * (d_pre1 * params.layer1.transpose());

  if (params.frozen.layer1) g.layer1.setZero();
  if (params.frozen.layer2) g.layer2.setZero();
  if (params.frozen.classifier) {
    g.classifier.setZero();
    g.classifier_bias.setZero();
  }
  return g;
}

LossAndGrads backprop_grads(const GnnParams& params, const Subgraph& subgraph, const LossHead& head) {
  const ForwardTrace trace = gcn_trace(params, subgraph);
  HeadResult h = head(trace.out.graph_embedding, trace.out.logits);
  if (!std::isfinite(h.loss)) throw Error("backprop_grads: non-finite loss");
  if (h.d_embedding.size() == 0) h.d_embedding = Vector::Zero(trace.out.graph_embedding.size());
  if (h.d_logits.size() == 0) h.d_logits = Vector::Zero(trace.out.logits.size());
  return {h.loss, backward(params, trace, h.d_embedding, h.d_logits)};
}

void PretrainConfig::validate() const {
  if (!(temperature > 0.0)) throw Error("pretrain: temperature must be > 0");
  if (!(edge_drop_rate >= 0.0 && edge_drop_rate <= 1.0)) {
    throw Error("pretrain: edge_drop_rate outside [0,1]");
  }
  if (!(feature_mask_rate >= 0.0 && feature_mask_rate <= 1.0)) {
    throw Error("pretrain: feature_mask_rate outside [0,1]");
  }
  if (epochs < 1) throw Error("pretrain: epochs must be >= 1");
  if (batch_size < 2) throw Error("pretrain: batch_size must be >= 2 (negatives must exist)");
  if (!(learning_rate >= 0.0) || !(weight_decay >= 0.0)) throw Error("pretrain: negative rate");
  if (hidden_dim < 1) throw Error("pretrain: hidden_dim must be >= 1");
}

std::pair<Subgraph, Subgraph> augment_views(const Subgraph& subgraph, const PretrainConfig& config, Seed seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  auto one_view = [&] {
    Subgraph view = subgraph;
    view.edges.clear();
    for (const auto& e : subgraph.edges)
      if (!(coin(rng) < config.edge_drop_rate)) view.edges.push_back(e);
    for (int j = 0; j < view.feature_dim(); ++j)
      if (coin(rng) < config.feature_mask_rate) view.features.col(j).setZero();
    return view;
  };
  Subgraph first = one_view();
  Subgraph second = one_view();
  return {std::move(first), std::move(second)};
}

std::pair<Subgraph, Subgraph> augment_views(const EgoNetwork& ego, const PretrainConfig& config, Seed seed) {
  return augment_views(to_subgraph(ego), config, seed);
}

NtXentResult nt_xent(std::span<const Vector> view1, std::span<const Vector> view2, double temperature) {
  const int n = static_cast<int>(view1.size());
  if (n < 2) throw Error("nt_xent: need at least 2 samples");
  if (static_cast<int>(view2.size()) != n) throw Error("nt_xent: view size mismatch");
  if (!(temperature > 0.0)) throw Error("nt_xent: temperature must be > 0");
  NtXentResult r;
  r.per_anchor.resize(n);
  r.d_view1.assign(n, Vector::Zero(view1[0].size()));
  r.d_view2.assign(n, Vector::Zero(view2[0].size()));
  const double scale = 1.0 / n;
  for (int i = 0; i < n; ++i) {
    std::vector<double> s(n);
    for (int j = 0; j < n; ++j) s[j] = cosine(view1[i], view2[j]) / temperature;
    double m = -std::numeric_limits<double>::infinity();
    for (int j = 0; j < n; ++j)
      if (j != i) m = std::max(m, s[j]);
    double denom = 0.0;
    for (int j = 0; j < n; ++j)
      if (j != i) denom += std::exp(s[j] - m);
    const double lse = m + std::log(denom);
    r.per_anchor[i] = lse - s[i];
    r.loss += r.per_anchor[i] * scale;

    // d loss_i / d s_ij : -1 for the positive, softmax weight for negatives.
    const double inv_t = 1.0 / temperature;
    r.d_view1[i] -= scale * inv_t * cosine_grad(view1[i], view2[i]);
    r.d_view2[i] -= scale * inv_t * cosine_grad(view2[i], view1[i]);
    for (int j = 0; j < n; ++j) {
      if (j == i) continue;
      const double w = std::exp(s[j] - lse) * scale * inv_t;
      r.d_view1[i] += w * cosine_grad(view1[i], view2[j]);
      r.d_view2[j] += w * cosine_grad(view2[j], view1[i]);
    }
  }
  return r;
}

PretrainResult pretrain_contrastive(std::span<const EgoNetwork> egos, const PretrainConfig& config) {
  config.validate();
  if (egos.size() < 2) throw Error("pretrain_contrastive: need at least 2 ego-networks per batch");
  const int in_dim = static_cast<int>(egos.front().features.cols());
  PretrainResult result;
  result.params = GnnParams::init(in_dim, config.hidden_dim, 0, derive_seed(config.seed, 0));
  GnnParams& params = result.params;

  std::vector<Subgraph> base;
  base.reserve(egos.size());
  for (const auto& e : egos) base.push_back(to_subgraph(e));

  const int n = static_cast<int>(base.size());
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 shuffle_rng(derive_seed(config.seed, 1));

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    std::vector<std::pair<int, int>> batches;
    for (int start = 0; start < n; start += config.batch_size) {
      batches.emplace_back(start, std::min(n, start + config.batch_size));
    }
    if (batches.size() > 1 && batches.back().second - batches.back().first < 2) {
      batches[batches.size() - 2].second = batches.back().second;
      batches.pop_back();
    }
    double epoch_loss = 0.0;
    for (const auto& [begin, end] : batches) {
      const int b = end - begin;
      std::vector<ForwardTrace> t1, t2;
      std::vector<Vector> z1, z2;
      for (int k = begin; k < end; ++k) {
        const int idx = order[k];
        const Seed s = derive_seed(config.seed, 1000003ULL * (epoch + 1) + static_cast<Seed>(idx));
        auto [v1, v2] = augment_views(base[idx], config, s);
        t1.push_back(gcn_trace(params, v1));
        t2.push_back(gcn_trace(params, v2));
        z1.push_back(t1.back().out.graph_embedding);
        z2.push_back(t2.back().out.graph_embedding);
      }
      const NtXentResult loss = nt_xent(z1, z2, config.temperature);
      if (!std::isfinite(loss.loss)) throw Error("pretrain_contrastive: non-finite loss");
      GnnGrads total = GnnGrads::zeros_like(params, 0);
      const Vector no_logits = Vector::Zero(0);
      for (int k = 0; k < b; ++k) {
        total += backward(params, t1[k], loss.d_view1[k], no_logits);
        total += backward(params, t2[k], loss.d_view2[k], no_logits);
      }
      params.layer1 -= config.learning_rate * (total.layer1 + config.weight_decay * params.layer1);
      params.layer2 -= config.learning_rate * (total.layer2 + config.weight_decay * params.layer2);
      epoch_loss += loss.loss;
    }
    result.epoch_losses.push_back(epoch_loss / static_cast<double>(batches.size()));
  }
  params.frozen.layer1 = true;
  params.frozen.layer2 = true;
  return result;
}

}  // namespace krait
