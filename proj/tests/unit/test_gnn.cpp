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

#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "fd_check.hpp"
#include "krait/gnn.hpp"

using namespace krait;

namespace {

double ce_loss(const GnnParams& p, const Subgraph& s, int target) {
  return cross_entropy(gcn_forward(p, s).logits, target).first;
}

Subgraph isolated(const Matrix& x) {
  Subgraph s;
  s.features = x;
  s.roles.assign(x.rows(), NodeRole::kEgo);
  s.origin.assign(x.rows(), 0);
  s.token_slot.assign(x.rows(), -1);
  return s;
}

}  // namespace

TEST(Forward, ZeroWeightsGiveUniformSoftmax) {
  std::mt19937_64 rng(1);
  const Subgraph s = fdcheck::random_subgraph(rng, 5, 4);
  GnnParams p = GnnParams::init(4, 6, 3, 2);
  p.layer1.setZero();
  p.layer2.setZero();
  p.classifier.setZero();
  p.classifier_bias.setZero();
  const auto out = gcn_forward(p, s);
  EXPECT_EQ(out.graph_embedding.norm(), 0.0);
  for (int y = 0; y < 3; ++y) EXPECT_NEAR(out.softmax(y), 1.0 / 3, 1e-15);
}

TEST(Forward, IsolatedNodeIdentityWeights) {
  Matrix x(1, 3);
  x << 0.5, 2.0, 0.0;
  GnnParams p = GnnParams::init(3, 3, 2, 0);
  p.layer1 = Matrix::Identity(3, 3);
  p.layer2 = Matrix::Identity(3, 3);
  const auto out = gcn_forward(p, isolated(x));
  EXPECT_TRUE(out.graph_embedding.isApprox(x.row(0).transpose(), 1e-15));
}

TEST(Forward, NormalizedAdjacencyOfPair) {
  Subgraph s = isolated(Matrix::Ones(2, 1));
  s.edges = {{0, 1}};
  const Matrix a = normalized_adjacency(s);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) EXPECT_NEAR(a(i, j), 0.5, 1e-15);
}

TEST(Forward, PermutationInvariantReadout) {
  std::mt19937_64 rng(3);
  const Subgraph s = fdcheck::random_subgraph(rng, 6, 4);
  const GnnParams p = GnnParams::init(4, 8, 3, 5);
  std::vector<int> perm(6);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  Subgraph t = s;
  for (int i = 0; i < 6; ++i) t.features.row(perm[i]) = s.features.row(i);
  t.edges.clear();
  for (const auto& e : s.edges) t.edges.push_back(make_edge(perm[e.u], perm[e.v]));
  std::sort(t.edges.begin(), t.edges.end());
  const auto a = gcn_forward(p, s), b = gcn_forward(p, t);
  EXPECT_LT((a.graph_embedding - b.graph_embedding).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Backprop, ConstantHeadGivesZeroGradients) {
  std::mt19937_64 rng(4);
  const Subgraph s = fdcheck::random_subgraph(rng, 5, 4);
  GnnParams p = GnnParams::init(4, 5, 3, 1);
  const LossHead constant = [](const Vector& e, const Vector& l) {
    return HeadResult{3.0, Vector::Zero(e.size()), Vector::Zero(l.size())};
  };
  const auto r = backprop_grads(p, s, constant);
  EXPECT_EQ(r.loss, 3.0);
  EXPECT_EQ(r.grads.layer1.norm(), 0.0);
  EXPECT_EQ(r.grads.layer2.norm(), 0.0);
  EXPECT_EQ(r.grads.classifier.norm(), 0.0);
  EXPECT_EQ(r.grads.features.norm(), 0.0);
}

TEST(Backprop, CrossEntropyMatchesFiniteDifferences) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 10; ++trial) {
    const Subgraph s = fdcheck::random_subgraph(rng, 5, 4);
    GnnParams p = GnnParams::init(4, 6, 3, 100 + trial);
    p.classifier_bias = Vector::Random(3);
    const int target = trial % 3;
    const auto r = backprop_grads(p, s, cross_entropy_head(target));
    EXPECT_NEAR(r.loss, ce_loss(p, s, target), 1e-14);
    const auto rep = fdcheck::compare(p, s, r.grads, [&](const GnnParams& q, const Subgraph& t) {
      return ce_loss(q, t, target);
    });
    EXPECT_LE(rep.worst, 1e-4) << "trial " << trial << " at " << rep.where;
  }
}

TEST(Backprop, FrozenBlocksGetZero) {
  std::mt19937_64 rng(5);
  const Subgraph s = fdcheck::random_subgraph(rng, 5, 4);
  GnnParams p = GnnParams::init(4, 6, 3, 1);
  p.frozen.layer1 = true;
  auto r = backprop_grads(p, s, cross_entropy_head(1));
  EXPECT_EQ(r.grads.layer1.norm(), 0.0);
  EXPECT_GT(r.grads.layer2.norm(), 0.0);
  p.frozen = {true, true, true};
  r = backprop_grads(p, s, cross_entropy_head(1));
  EXPECT_EQ(r.grads.layer2.norm(), 0.0);
  EXPECT_EQ(r.grads.classifier.norm(), 0.0);
  EXPECT_EQ(r.grads.classifier_bias.norm(), 0.0);
  EXPECT_GT(r.grads.features.norm(), 0.0);  // the input gradient still flows for prompt tuning
}

TEST(CrossEntropy, HandValue) {
  Vector logits(2);
  logits << 0.0, 0.0;
  const auto [loss, grad] = cross_entropy(logits, 0);
  EXPECT_NEAR(loss, std::log(2.0), 1e-15);
  EXPECT_NEAR(grad(0), -0.5, 1e-15);
  EXPECT_NEAR(grad(1), 0.5, 1e-15);
}

TEST(Augment, ZeroRatesCopyInput) {
  std::mt19937_64 rng(6);
  const Subgraph s = fdcheck::random_subgraph(rng, 6, 3);
  PretrainConfig c;
  c.edge_drop_rate = 0.0;
  c.feature_mask_rate = 0.0;
  const auto [a, b] = augment_views(s, c, 9);
  EXPECT_EQ(a.edges, s.edges);
  EXPECT_EQ(b.edges, s.edges);
  EXPECT_TRUE(a.features == s.features);
  EXPECT_TRUE(b.features == s.features);
}

TEST(Augment, FullDropIsEdgeless) {
  std::mt19937_64 rng(7);
  const Subgraph s = fdcheck::random_subgraph(rng, 6, 3);
  PretrainConfig c;
  c.edge_drop_rate = 1.0;
  const auto [a, b] = augment_views(s, c, 1);
  EXPECT_TRUE(a.edges.empty());
  EXPECT_TRUE(b.edges.empty());
}

TEST(Augment, HalfDropMonteCarlo) {
  Subgraph s = isolated(Matrix::Ones(11, 2));
  for (int v = 1; v <= 10; ++v) s.edges.push_back({0, v});
  PretrainConfig c;
  c.edge_drop_rate = 0.5;
  c.feature_mask_rate = 0.0;
  double total = 0.0;
  for (Seed seed = 0; seed < 1000; ++seed) {
    const auto [a, b] = augment_views(s, c, seed);
    total += static_cast<double>(a.edges.size());
  }
  EXPECT_NEAR(total / 1000.0, 5.0, 0.5);
}

TEST(NtXent, IdenticalEmbeddingsGiveLogNMinus1) {
  for (int n : {2, 3, 5, 10}) {
    std::vector<Vector> v(n, Vector::Ones(4));
    const auto r = nt_xent(v, v, 0.2);
    for (double l : r.per_anchor) EXPECT_NEAR(l, std::log(n - 1.0), 1e-12);
    EXPECT_NEAR(r.loss, std::log(n - 1.0), 1e-12);
  }
}

TEST(NtXent, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> g;
  const int n = 4, d = 3;
  std::vector<Vector> a(n, Vector(d)), b(n, Vector(d));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j) {
      a[i](j) = g(rng);
      b[i](j) = g(rng);
    }
  const auto r = nt_xent(a, b, 0.5);
  const double eps = 1e-6;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j) {
      auto up = a, down = a;
      up[i](j) += eps;
      down[i](j) -= eps;
      const double num = (nt_xent(up, b, 0.5).loss - nt_xent(down, b, 0.5).loss) / (2 * eps);
      EXPECT_LE(fdcheck::relative_error(r.d_view1[i](j), num), 1e-5);
      auto up2 = b, down2 = b;
      up2[i](j) += eps;
      down2[i](j) -= eps;
      const double num2 = (nt_xent(a, up2, 0.5).loss - nt_xent(a, down2, 0.5).loss) / (2 * eps);
      EXPECT_LE(fdcheck::relative_error(r.d_view2[i](j), num2), 1e-5);
    }
}

TEST(NtXent, RejectsSingleSample) {
  std::vector<Vector> v(1, Vector::Ones(2));
  EXPECT_THROW(nt_xent(v, v, 0.2), Error);
}

TEST(Pretrain, BatchSizeOneRejected) {
  PretrainConfig c;
  c.batch_size = 1;
  EXPECT_THROW(c.validate(), Error);
}

TEST(Pretrain, LossDescendsOnSbmEgos) {
  const Graph g = generate_sbm({4, 10, 0.3, 0.03, 8, 3.0, 0.5, 3}).graph;
  std::vector<EgoNetwork> egos;
  for (int v = 0; v < 40; ++v) egos.push_back(ego_network(g, v, 1));
  PretrainConfig c;
  c.hidden_dim = 16;
  c.seed = 4;
  const auto r = pretrain_contrastive(egos, c);
  ASSERT_EQ(r.epoch_losses.size(), 100u);
  EXPECT_LT(r.epoch_losses.back(), r.epoch_losses.front());
  EXPECT_TRUE(r.params.frozen.layer1);
  EXPECT_TRUE(r.params.frozen.layer2);
  EXPECT_EQ(r.params.num_labels(), 0);
}

TEST(Params, WithClassifierKeepsLayers) {
  const GnnParams p = GnnParams::init(4, 6, 0, 1);
  const GnnParams q = p.with_classifier(3, 2);
  EXPECT_TRUE(q.layer1 == p.layer1);
  EXPECT_TRUE(q.layer2 == p.layer2);
  EXPECT_EQ(q.num_labels(), 3);
  EXPECT_NO_THROW(q.validate());
}
