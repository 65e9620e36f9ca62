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

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "krait/graph.hpp"
#include "krait/metrics.hpp"
#include "krait/prompt.hpp"

namespace krait {

enum class AttackType { kOneToOne, kAllToOne, kAllToAll };
enum class TriggerMethod { kInvoke, kInteract, kModify };
enum class TargetPolicy { kLargest, kSmallest };

std::string to_string(AttackType type);
std::string to_string(TriggerMethod method);
AttackType parse_attack_type(const std::string& text);
TriggerMethod parse_trigger_method(const std::string& text);

struct AttackPlan {
  AttackType attack_type = AttackType::kOneToOne;
  std::optional<int> target_label;  // overrides the policy when set
  std::optional<int> victim_label;  // one-to-one only
  TargetPolicy target_policy = TargetPolicy::kLargest;
  double poisoning_rate = 0.05;       // fraction of victim-label training nodes
  std::optional<int> degree_threshold;  // unset: 75th percentile of victim-label degrees
  TriggerMethod trigger_method = TriggerMethod::kInvoke;
  int trigger_size = 10;
  PromptSpec prompt;  // benign prompt; the trigger shares its thresholds
  double alpha = 10.0;
  double beta = 1.0;
  double warmup_fraction = 0.9;
  int epochs = 10;
  double learning_rate = 0.05;
  int batch_size = 10;
  Seed seed = 0;

  void validate() const;
};

/// Target label and the victim label(s) it is paired with. For all-to-all,
/// pair_target[y] = (y + 1) mod |Y|; for the other types it maps every victim
/// to `target`. Non-victims map to -1.
struct AttackLabels {
  int target = -1;
  std::vector<int> victims;
  std::vector<int> pair_target;

  bool is_victim(int label) const { return pair_target.at(label) >= 0; }
};

AttackLabels choose_attack_labels(const Graph& graph, const AttackPlan& plan);

struct PoisonEntry {
  int node = 0;
  int original_label = 0;
  int flipped_label = 0;
};

struct PoisonSet {
  std::vector<PoisonEntry> entries;           // grouped by victim label, then LNH rank
  std::vector<std::vector<int>> by_label;     // node ids per original label

  bool contains(int node) const;
  std::vector<int> nodes() const;
};

struct PoisonSelection {
  PoisonSet poison;
  Graph poisoned_graph;
  AttackLabels labels;
};

/// Nearest-rank 75th percentile of the degrees of `nodes`.
int default_degree_threshold(const Graph& graph, std::span<const int> nodes);

/// Per victim label: training nodes of that label with degree <= d_pre, ranked
/// by LNH descending (ties: lower id), top ceil(p * count) kept and flipped.
PoisonSelection select_poisoned_candidates(const Graph& graph, const AttackPlan& plan);

/// Writes "node,old_label,new_label" rows.
void write_poison_csv(const PoisonSet& poison, const std::filesystem::path& path);
/// Restores original labels; the inverse of the flip.
Graph restore_labels(const Graph& poisoned, const PoisonSet& poison);

/// Forward outputs of one sample as seen by the backdoor loss.
struct SampleOutput {
  Vector embedding;
  Vector logits;
  int label = 0;           // training label (flipped target for poisoned samples)
  int original_label = 0;  // victim label for poisoned samples
};

struct BackdoorLoss {
  double total = 0.0;
  double classification = 0.0;
  double constraint = 0.0;
  std::vector<Vector> d_embedding_clean, d_logits_clean;
  std::vector<Vector> d_embedding_poisoned, d_logits_poisoned;
};

/// Mean cross-entropy over clean (true labels) and poisoned (flipped targets)
/// samples, plus (alpha / |poisoned|) * sum_j max(0, beta - CF_j) where CF_j is
/// the centroid difference with the target centroid positive and the victim
/// centroid negative. Centroids are constants. An empty poisoned batch has a
/// zero constraint term.
BackdoorLoss backdoor_loss(std::span<const SampleOutput> clean, std::span<const SampleOutput> poisoned,
                           const CentroidSet& centroids, double alpha, double beta);
BackdoorLoss backdoor_loss(std::span<const SampleOutput> clean, std::span<const SampleOutput> poisoned,
                           const CentroidSet& centroids, const AttackPlan& plan);

/// Number of times the centroid constraint has been evaluated in this process.
std::uint64_t constraint_evaluations();
void reset_constraint_evaluations();

enum class TriggerOrder { kBeforePrompt, kAfterPrompt };

/// Everything needed to run the (possibly backdoored) downstream model.
struct PromptModel {
  GnnParams params;
  GraphPrompt prompt;
  std::optional<GraphPrompt> trigger;
  TriggerOrder order = TriggerOrder::kBeforePrompt;

  /// Benign path: prompt only.
  Subgraph clean_input(const Subgraph& ego) const;
  /// Trigger path: trigger and prompt in the configured order.
  Subgraph triggered_input(const Subgraph& ego) const;
};

struct WarmupResult {
  GraphPrompt trigger;
  int warmup_poisons = 0;
};

/// Tunes a prompt on a warm-up copy of the graph where warmup_fraction of each
/// victim label's training nodes carry their attack target, and returns it
/// frozen as the trigger.
WarmupResult build_trigger_invoke(const AttackPlan& plan, const GnnParams& surrogate_params,
                                  const Graph& graph, int hops);

struct BackdoorResult {
  PromptModel model;
  PoisonSet poison;
  AttackLabels labels;
  std::vector<double> epoch_losses;
  std::vector<double> epoch_constraint;
};

/// Trains benign prompt, trigger and classifier under the backdoor loss.
BackdoorResult train_backdoored(const AttackPlan& plan, const GnnParams& frozen_params,
                                const Graph& graph, int hops);

/// Benign tuning callback used by the black-box pipeline: receives the
/// training subgraphs (poisoned ones already trigger-injected, labels flipped).
using BenignTraining = std::function<TuneResult(std::span<const Subgraph> training)>;

BenignTraining default_benign_training(const GnnParams& victim_params, int token_count, int num_labels,
                                       const TuneConfig& config);

struct BlackBoxResult {
  PromptModel model;
  PoisonSet poison;
  AttackLabels labels;
};

/// Trigger from the surrogate (Invoke), attached to the selected poisons and
/// fed with clean samples to an untouched benign tuning run. No constraint.
BlackBoxResult black_box_pipeline(const AttackPlan& plan, const GnnParams& surrogate_params,
                                  const Graph& graph, int hops, const BenignTraining& victim_training);

std::vector<Subgraph> build_egos(const Graph& graph, std::span<const int> nodes, int hops);

}  // namespace krait
