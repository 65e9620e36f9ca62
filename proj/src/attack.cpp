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

#include "krait/attack.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>

namespace krait {
namespace {

std::atomic<std::uint64_t> g_constraint_evaluations{0};

std::vector<int> training_label_counts(const Graph& graph) {
  std::vector<int> counts(graph.num_labels(), 0);
  for (int v = 0; v < graph.node_count(); ++v)
    if (graph.train_mask()[v]) ++counts[graph.label(v)];
  return counts;
}

std::vector<int> training_nodes_with_label(const Graph& graph, int label) {
  std::vector<int> out;
  for (int v = 0; v < graph.node_count(); ++v)
    if (graph.train_mask()[v] && graph.label(v) == label) out.push_back(v);
  return out;
}

// ceil(p * count) without floating-point spill (0.05 * 60 must give 3).
int budget(double rate, int count) {
  return static_cast<int>(std::ceil(rate * count - 1e-9));
}

PromptSpec trigger_spec(const AttackPlan& plan) {
  PromptSpec spec = plan.prompt;
  spec.token_count = plan.trigger_size;
  return spec;
}

}  // namespace

std::string to_string(AttackType type) {
  switch (type) {
    case AttackType::kOneToOne: return "one-to-one";
    case AttackType::kAllToOne: return "all-to-one";
    case AttackType::kAllToAll: return "all-to-all";
  }
  return "?";
}

std::string to_string(TriggerMethod method) {
  switch (method) {
    case TriggerMethod::kInvoke: return "invoke";
    case TriggerMethod::kInteract: return "interact";
    case TriggerMethod::kModify: return "modify";
  }
  return "?";
}

AttackType parse_attack_type(const std::string& text) {
  if (text == "one-to-one") return AttackType::kOneToOne;
  if (text == "all-to-one") return AttackType::kAllToOne;
  if (text == "all-to-all") return AttackType::kAllToAll;
  throw Error("unknown attack type '" + text + "'");
}

TriggerMethod parse_trigger_method(const std::string& text) {
  if (text == "invoke") return TriggerMethod::kInvoke;
  if (text == "interact") return TriggerMethod::kInteract;
  if (text == "modify") return TriggerMethod::kModify;
  throw Error("unknown trigger method '" + text + "'");
}

void AttackPlan::validate() const {
  if (!(poisoning_rate > 0.0 && poisoning_rate <= 1.0)) throw Error("plan: poisoning rate outside (0,1]");
  if (trigger_size < 1) throw Error("plan: trigger size must be >= 1");
  if (!(alpha >= 0.0)) throw Error("plan: alpha must be >= 0");
  if (!(beta >= 0.0)) throw Error("plan: beta must be >= 0");
  if (!(warmup_fraction > 0.0 && warmup_fraction <= 1.0)) throw Error("plan: warmup fraction outside (0,1]");
  if (epochs < 1) throw Error("plan: epochs must be >= 1");
  if (batch_size < 1) throw Error("plan: batch size must be >= 1");
  if (degree_threshold && *degree_threshold < 0) throw Error("plan: negative degree threshold");
  if (attack_type == AttackType::kOneToOne && target_label && victim_label && *target_label == *victim_label) {
    throw Error("plan: one-to-one requires target != victim");
  }
}

AttackLabels choose_attack_labels(const Graph& graph, const AttackPlan& plan) {
  const int num_labels = graph.num_labels();
  if (num_labels < 2) throw Error("choose_attack_labels: need at least 2 labels");
  const auto counts = training_label_counts(graph);
  const bool largest = plan.target_policy == TargetPolicy::kLargest;

  // Extreme label over `candidates` by training count; first (lowest id) wins ties.
  auto extreme = [&](bool want_largest, int exclude) {
    int best = -1;
    for (int j = 0; j < num_labels; ++j) {
      if (j == exclude) continue;
      if (best < 0 || (want_largest ? counts[j] > counts[best] : counts[j] < counts[best])) best = j;
    }
    return best;
  };

  AttackLabels out;
  out.pair_target.assign(num_labels, -1);
  if (plan.attack_type == AttackType::kAllToAll) {
    for (int y = 0; y < num_labels; ++y) {
      out.victims.push_back(y);
      out.pair_target[y] = (y + 1) % num_labels;
    }
    return out;
  }

  out.target = plan.target_label.value_or(extreme(largest, -1));
  if (out.target < 0 || out.target >= num_labels) throw Error("choose_attack_labels: target label out of range");
  if (plan.attack_type == AttackType::kOneToOne) {
    const int victim = plan.victim_label.value_or(extreme(!largest, out.target));
    if (victim < 0 || victim >= num_labels) throw Error("choose_attack_labels: victim label out of range");
    if (victim == out.target) throw Error("choose_attack_labels: one-to-one requires target != victim");
    out.victims.push_back(victim);
  } else {
    for (int y = 0; y < num_labels; ++y)
      if (y != out.target) out.victims.push_back(y);
  }
  for (int y : out.victims) out.pair_target[y] = out.target;
  return out;
}

bool PoisonSet::contains(int node) const {
  return std::any_of(entries.begin(), entries.end(), [node](const PoisonEntry& e) { return e.node == node; });
}

std::vector<int> PoisonSet::nodes() const {
  std::vector<int> out;
  for (const auto& e : entries) out.push_back(e.node);
  return out;
}

int default_degree_threshold(const Graph& graph, std::span<const int> nodes) {
  if (nodes.empty()) return 0;
  std::vector<int> degrees;
  for (int v : nodes) degrees.push_back(graph.degree(v));
  std::sort(degrees.begin(), degrees.end());
  const auto rank = static_cast<std::size_t>(std::ceil(0.75 * static_cast<double>(degrees.size())));
  return degrees[std::max<std::size_t>(rank, 1) - 1];
}

PoisonSelection select_poisoned_candidates(const Graph& graph, const AttackPlan& plan) {
  plan.validate();
  AttackLabels labels = choose_attack_labels(graph, plan);
  PoisonSet poison;
  poison.by_label.assign(graph.num_labels(), {});
  std::vector<int> new_labels = graph.labels();

  for (int victim : labels.victims) {
    const auto members = training_nodes_with_label(graph, victim);
    const int d_pre = plan.degree_threshold.value_or(default_degree_threshold(graph, members));
    std::vector<std::pair<double, int>> scored;
    for (int v : members)
      if (graph.degree(v) <= d_pre) scored.emplace_back(lnh_score(graph, v), v);
    if (scored.empty()) {
      throw Error("select_poisoned_candidates: no training node of label " + std::to_string(victim) +
                  " passes the degree filter d_pre=" + std::to_string(d_pre));
    }
    std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
      return a.first != b.first ? a.first > b.first : a.second < b.second;
    });
    const int k = std::min<int>(budget(plan.poisoning_rate, static_cast<int>(members.size())),
                                static_cast<int>(scored.size()));
    for (int i = 0; i < k; ++i) {
      const int v = scored[i].second;
      const int flipped = labels.pair_target[victim];
      poison.entries.push_back({v, victim, flipped});
      poison.by_label[victim].push_back(v);
      new_labels[v] = flipped;
    }
  }
  return {std::move(poison), graph.with_labels(std::move(new_labels)), std::move(labels)};
}

void write_poison_csv(const PoisonSet& poison, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << "node,old_label,new_label\n";
  for (const auto& e : poison.entries) out << e.node << ',' << e.original_label << ',' << e.flipped_label << '\n';
}

Graph restore_labels(const Graph& poisoned, const PoisonSet& poison) {
  std::vector<int> labels = poisoned.labels();
  for (const auto& e : poison.entries) labels[e.node] = e.original_label;
  return poisoned.with_labels(std::move(labels));
}

std::uint64_t constraint_evaluations() { return g_constraint_evaluations.load(); }
void reset_constraint_evaluations() { g_constraint_evaluations.store(0); }

BackdoorLoss backdoor_loss(std::span<const SampleOutput> clean, std::span<const SampleOutput> poisoned,
                           const CentroidSet& centroids, double alpha, double beta) {
  BackdoorLoss r;
  const std::size_t total = clean.size() + poisoned.size();
  if (total == 0) return r;
  const double ce_scale = 1.0 / static_cast<double>(total);
  auto classify = [&](const SampleOutput& s, std::vector<Vector>& d_emb, std::vector<Vector>& d_log) {
    auto [loss, d] = cross_entropy(s.logits, s.label);
    r.classification += ce_scale * loss;
    d_log.push_back(ce_scale * d);
    d_emb.push_back(Vector::Zero(s.embedding.size()));
  };
  for (const auto& s : clean) classify(s, r.d_embedding_clean, r.d_logits_clean);
  for (const auto& s : poisoned) classify(s, r.d_embedding_poisoned, r.d_logits_poisoned);

  if (!poisoned.empty() && alpha != 0.0) {
    g_constraint_evaluations.fetch_add(1);
    const double weight = alpha / static_cast<double>(poisoned.size());
    for (std::size_t j = 0; j < poisoned.size(); ++j) {
      const auto& s = poisoned[j];
      const Vector positive = centroids.centroid(s.label);
      const Vector negative = centroids.centroid(s.original_label);
      const double cf = cosine(s.embedding, positive) - cosine(s.embedding, negative);
      const double hinge = beta - cf;
      if (hinge > 0.0) {
        r.constraint += weight * hinge;
        r.d_embedding_poisoned[j] -=
            weight * (cosine_grad(s.embedding, positive) - cosine_grad(s.embedding, negative));
      }
    }
  }
  r.total = r.classification + r.constraint;
  return r;
}

BackdoorLoss backdoor_loss(std::span<const SampleOutput> clean, std::span<const SampleOutput> poisoned,
                           const CentroidSet& centroids, const AttackPlan& plan) {
  return backdoor_loss(clean, poisoned, centroids, plan.alpha, plan.beta);
}

Subgraph PromptModel::clean_input(const Subgraph& ego) const {
  return insert_prompt(ego, prompt, NodeRole::kPrompt);
}

Subgraph PromptModel::triggered_input(const Subgraph& ego) const {
  if (!trigger) return clean_input(ego);
  if (order == TriggerOrder::kBeforePrompt) {
    return insert_prompt(insert_prompt(ego, *trigger, NodeRole::kTrigger), prompt, NodeRole::kPrompt);
  }
  return insert_prompt(insert_prompt(ego, prompt, NodeRole::kPrompt), *trigger, NodeRole::kTrigger);
}

std::vector<Subgraph> build_egos(const Graph& graph, std::span<const int> nodes, int hops) {
  std::vector<Subgraph> out;
  out.reserve(nodes.size());
  for (int v : nodes) out.push_back(to_subgraph(ego_network(graph, v, hops)));
  return out;
}

WarmupResult build_trigger_invoke(const AttackPlan& plan, const GnnParams& surrogate_params,
                                  const Graph& graph, int hops) {
  plan.validate();
  const AttackLabels labels = choose_attack_labels(graph, plan);
  std::vector<int> warm_labels = graph.labels();
  std::mt19937_64 rng(derive_seed(plan.seed, 11));
  int poisons = 0;
  for (int victim : labels.victims) {
    auto members = training_nodes_with_label(graph, victim);
    std::shuffle(members.begin(), members.end(), rng);
    const int k = static_cast<int>(std::floor(plan.warmup_fraction * members.size() + 1e-9));
    for (int i = 0; i < k; ++i) warm_labels[members[i]] = labels.pair_target[victim];
    poisons += k;
  }
  std::vector<int> present(graph.num_labels(), 0);
  for (int v : graph.train_nodes()) present[warm_labels[v]] = 1;
  if (std::accumulate(present.begin(), present.end(), 0) < 2) {
    throw Error("build_trigger_invoke: warm-up leaves fewer than 2 labels among training nodes");
  }

  const Graph warm = graph.with_labels(std::move(warm_labels));
  const auto train = warm.train_nodes();
  const auto egos = build_egos(warm, train, hops);
  const GnnParams head = surrogate_params.with_classifier(graph.num_labels(), derive_seed(plan.seed, 12));
  GraphPrompt start = init_prompt(trigger_spec(plan), graph.feature_dim(), derive_seed(plan.seed, 13));
  TuneConfig tune{plan.epochs, plan.learning_rate, plan.batch_size, derive_seed(plan.seed, 14)};
  TuneResult tuned = tune_prompt(head, std::move(start), egos, tune);
  WarmupResult out{std::move(tuned.prompt), poisons};
  out.trigger.learnable = false;
  return out;
}

BackdoorResult train_backdoored(const AttackPlan& plan, const GnnParams& frozen_params, const Graph& graph,
                                int hops) {
  plan.validate();
  if (!frozen_params.frozen.layer1 || !frozen_params.frozen.layer2) {
    throw Error("train_backdoored: GNN layers must be frozen");
  }
  PoisonSelection selection = select_poisoned_candidates(graph, plan);
  const Graph& poisoned_graph = selection.poisoned_graph;
  const int d = graph.feature_dim();

  BackdoorResult result;
  PromptModel& model = result.model;
  model.params = frozen_params.with_classifier(graph.num_labels(), derive_seed(plan.seed, 21));
  model.prompt = init_prompt(plan.prompt, d, derive_seed(plan.seed, 22));
  if (plan.trigger_method == TriggerMethod::kInvoke) {
    model.trigger = build_trigger_invoke(plan, frozen_params, graph, hops).trigger;
  } else {
    model.trigger = init_prompt(trigger_spec(plan), d, derive_seed(plan.seed, 23));
  }
  model.order = plan.trigger_method == TriggerMethod::kModify ? TriggerOrder::kAfterPrompt
                                                               : TriggerOrder::kBeforePrompt;

  const auto train = poisoned_graph.train_nodes();
  const auto egos = build_egos(poisoned_graph, train, hops);
  std::vector<bool> is_poisoned(train.size(), false);
  std::vector<int> original(train.size());
  for (std::size_t i = 0; i < train.size(); ++i) {
    is_poisoned[i] = selection.poison.contains(train[i]);
    original[i] = graph.label(train[i]);
  }

  std::vector<int> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(derive_seed(plan.seed, 24));
  const int n = static_cast<int>(train.size());

  for (int epoch = 0; epoch < plan.epochs; ++epoch) {
    // Centroids from clean samples under the current benign prompt.
    CentroidSet centroids;
    if (plan.alpha != 0.0) {
      std::vector<int> clean_labels;
      std::vector<Vector> rows;
      for (int i = 0; i < n; ++i) {
        if (is_poisoned[i]) continue;
        rows.push_back(gcn_forward(model.params, model.clean_input(egos[i])).graph_embedding);
        clean_labels.push_back(egos[i].label);
      }
      Matrix emb(static_cast<Eigen::Index>(rows.size()), model.params.hidden_dim());
      for (std::size_t r = 0; r < rows.size(); ++r) emb.row(r) = rows[r].transpose();
      centroids = compute_centroids(emb, clean_labels, graph.num_labels());
    }

    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0, epoch_constraint = 0.0;
    int batches = 0;
    for (int start = 0; start < n; start += plan.batch_size) {
      const int end = std::min(n, start + plan.batch_size);
      std::vector<int> clean_idx, pois_idx;
      std::vector<Subgraph> clean_in, pois_in;
      std::vector<ForwardTrace> clean_tr, pois_tr;
      std::vector<SampleOutput> clean_out, pois_out;
      for (int k = start; k < end; ++k) {
        const int i = order[k];
        const bool p = is_poisoned[i];
        Subgraph input = p ? model.triggered_input(egos[i]) : model.clean_input(egos[i]);
        ForwardTrace tr = gcn_trace(model.params, input);
        SampleOutput so{tr.out.graph_embedding, tr.out.logits, egos[i].label, original[i]};
        (p ? pois_in : clean_in).push_back(std::move(input));
        (p ? pois_tr : clean_tr).push_back(std::move(tr));
        (p ? pois_out : clean_out).push_back(std::move(so));
      }
      const BackdoorLoss loss = backdoor_loss(clean_out, pois_out, centroids, plan);
      if (!std::isfinite(loss.total)) throw Error("train_backdoored: non-finite loss");

      Matrix prompt_grad = Matrix::Zero(model.prompt.token_count(), d);
      Matrix trigger_grad = Matrix::Zero(model.trigger->token_count(), d);
      Matrix cls_grad = Matrix::Zero(model.params.classifier.rows(), model.params.classifier.cols());
      Vector bias_grad = Vector::Zero(model.params.classifier_bias.size());
      auto accumulate = [&](const Subgraph& in, const ForwardTrace& tr, const Vector& de, const Vector& dl) {
        const GnnGrads g = backward(model.params, tr, de, dl);
        cls_grad += g.classifier;
        bias_grad += g.classifier_bias;
        prompt_grad += gather_token_grads(in, g.features, NodeRole::kPrompt, model.prompt.token_count());
        trigger_grad += gather_token_grads(in, g.features, NodeRole::kTrigger, model.trigger->token_count());
      };
      for (std::size_t j = 0; j < clean_in.size(); ++j)
        accumulate(clean_in[j], clean_tr[j], loss.d_embedding_clean[j], loss.d_logits_clean[j]);
      for (std::size_t j = 0; j < pois_in.size(); ++j)
        accumulate(pois_in[j], pois_tr[j], loss.d_embedding_poisoned[j], loss.d_logits_poisoned[j]);
      if (!prompt_grad.allFinite() || !trigger_grad.allFinite() || !cls_grad.allFinite()) {
        throw Error("train_backdoored: non-finite gradient");
      }

      model.prompt.tokens -= plan.learning_rate * prompt_grad;
      if (model.trigger->learnable) model.trigger->tokens -= plan.learning_rate * trigger_grad;
      model.params.classifier -= plan.learning_rate * cls_grad;
      model.params.classifier_bias -= plan.learning_rate * bias_grad;
      epoch_loss += loss.total;
      epoch_constraint += loss.constraint;
      ++batches;
    }
    result.epoch_losses.push_back(epoch_loss / batches);
    result.epoch_constraint.push_back(epoch_constraint / batches);
  }
  result.poison = std::move(selection.poison);
  result.labels = std::move(selection.labels);
  return result;
}

BenignTraining default_benign_training(const GnnParams& victim_params, int token_count, int num_labels,
                                       const TuneConfig& config) {
  return [victim_params, token_count, num_labels, config](std::span<const Subgraph> training) {
    const int d = victim_params.in_dim();
    const GnnParams head = victim_params.with_classifier(num_labels, derive_seed(config.seed, 31));
    GraphPrompt prompt = init_prompt(token_count, d, derive_seed(config.seed, 32));
    return tune_prompt(head, std::move(prompt), training, config);
  };
}

BlackBoxResult black_box_pipeline(const AttackPlan& plan, const GnnParams& surrogate_params, const Graph& graph,
                                  int hops, const BenignTraining& victim_training) {
  if (plan.trigger_method != TriggerMethod::kInvoke) {
    throw Error("black_box_pipeline: only the invoke trigger method is available without prompt interaction");
  }
  AttackPlan bb = plan;
  bb.alpha = 0.0;
  PoisonSelection selection = select_poisoned_candidates(graph, bb);
  const GraphPrompt trigger = build_trigger_invoke(bb, surrogate_params, graph, hops).trigger;

  const auto train = selection.poisoned_graph.train_nodes();
  auto egos = build_egos(selection.poisoned_graph, train, hops);
  for (std::size_t i = 0; i < train.size(); ++i) {
    if (selection.poison.contains(train[i])) egos[i] = insert_prompt(egos[i], trigger, NodeRole::kTrigger);
  }
  TuneResult tuned = victim_training(egos);
  BlackBoxResult out;
  out.model.params = std::move(tuned.params);
  out.model.prompt = std::move(tuned.prompt);
  out.model.trigger = trigger;
  out.model.order = TriggerOrder::kBeforePrompt;
  out.poison = std::move(selection.poison);
  out.labels = std::move(selection.labels);
  return out;
}

}  // namespace krait
