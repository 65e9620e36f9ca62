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

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "krait/attack.hpp"
#include "krait/defense.hpp"
#include "krait/gnn.hpp"
#include "krait/graph.hpp"
#include "krait/prompt.hpp"

namespace krait {

enum class ThreatModel { kWhiteBox, kBlackBox };

struct DataSource {
  std::string graph_json;  // takes priority when non-empty
  std::string edge_file, feature_file, label_file;
  SbmParams sbm;
  int reduce_dim = 0;  // SVD feature reduction when > 0
};

struct ExperimentConfig {
  DataSource data;
  double train_fraction = 0.5;
  int hops = 1;
  PretrainConfig pretrain;
  int pretrain_samples = 0;  // 0: every node's ego network
  PromptSpec prompt;
  TuneConfig tune;
  bool attack_enabled = true;
  ThreatModel threat = ThreatModel::kWhiteBox;
  AttackPlan plan;
  DefenseConfig defense;
  int trials = 5;
  int histogram_bins = 10;
  std::string output_dir = "krait_out";
  Seed seed = 0;

  void validate() const;
};

/// JSON round trip. Missing keys keep their defaults; unknown keys are rejected.
ExperimentConfig config_from_json(const std::string& text);
std::string config_to_json(const ExperimentConfig& config);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Loads or generates the configured graph (masks from train_fraction and seed).
Graph load_experiment_graph(const ExperimentConfig& config, Seed seed);

/// Contrastive pretraining on the configured ego networks (optionally a seeded sample of them).
PretrainResult pretrain_on_graph(const ExperimentConfig& config, const Graph& graph, Seed seed);

struct TestSplit {
  std::vector<int> clean;
  std::vector<int> triggered;
};

/// Shuffles the test nodes and halves them; the clean half gets the extra node.
TestSplit split_test_set(std::span<const int> test_nodes, Seed seed);

struct PredictionRecord {
  int node = 0;
  bool triggered = false;
  int true_label = 0;
  int target = -1;  // attack target for triggered samples
  int predicted = 0;
  Vector probs;
  Vector embedding;
  double mean_degree = 0.0;
  double local_homophily = 0.0;
};

struct PredictionSet {
  std::vector<PredictionRecord> records;
  std::optional<DistributionDeltas> deltas;  // set when both halves are present
};

/// Runs the model on the clean half (benign prompt) and, when `labels` is
/// given, on the triggered half restricted to victim-labeled nodes.
PredictionSet predict_split(const PromptModel& model, const Graph& graph, const TestSplit& split,
                            const AttackLabels* labels, int hops, const DefenseConfig& defense);

struct MetricsReport {
  std::optional<double> asr;
  std::optional<double> amc;
  std::optional<double> ca;
  std::optional<double> pr;
  std::optional<double> add;
  std::optional<double> ahd;
  std::optional<double> benign_accuracy;
  std::optional<double> benign_f1;
  int attacked = 0;
  int successes = 0;
};

double accuracy(std::span<const int> truth, std::span<const int> predicted);
double macro_f1(std::span<const int> truth, std::span<const int> predicted, int num_labels);

/// ASR/AMC over triggered records, CA over clean ones, deltas copied, PR from the plan.
MetricsReport evaluate_attack(const PredictionSet& predictions, const AttackPlan& plan);

struct Histogram {
  std::vector<double> edges;  // bins + 1 values on [0, 1]
  std::vector<int> clean;
  std::vector<int> poisoned;
};

/// Bins each sample's max softmax probability; 1.0 lands in the last bin.
Histogram confidence_histogram(std::span<const Vector> clean, std::span<const Vector> poisoned, int bins);

struct Projection {
  Matrix coordinates;  // n x 2
  double explained[2] = {0.0, 0.0};
};

/// PCA onto the top two principal directions of the mean-centered rows.
Projection project_embeddings_2d(const Matrix& embeddings);

struct TrialOutcome {
  MetricsReport report;
  std::optional<MetricsReport> defended;
  PromptModel model;
  PoisonSet poison;
  PredictionSet predictions;
  PredictionSet defended_predictions;
};

/// One seeded trial: split, pretrain, benign baseline, attack, evaluation.
TrialOutcome run_trial(const ExperimentConfig& config, int trial);

struct ExperimentSummary {
  std::vector<MetricsReport> trials;
  std::vector<std::optional<MetricsReport>> defended;
  MetricsReport mean;
  std::optional<MetricsReport> defended_mean;
};

/// Arithmetic mean of every field present in all rows.
MetricsReport mean_report(std::span<const MetricsReport> rows);

/// Runs all trials and writes per-trial artifacts plus the merged report and summary.
ExperimentSummary run_experiment(const ExperimentConfig& config);

std::string report_csv(std::span<const MetricsReport> rows, const MetricsReport* mean);
void write_predictions_csv(const PredictionSet& predictions, const std::filesystem::path& path);
void write_histogram_csv(const Histogram& histogram, const std::filesystem::path& path);
void write_projection_csv(const Projection& projection, std::span<const PredictionRecord> records,
                          const std::filesystem::path& path);

}  // namespace krait
