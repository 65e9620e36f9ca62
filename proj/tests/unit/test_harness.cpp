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

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "krait/harness.hpp"
#include "oracles.hpp"

using namespace krait;
namespace fs = std::filesystem;

namespace {

PredictionRecord record(bool triggered, int truth, int target, int predicted, Vector probs) {
  PredictionRecord r;
  r.triggered = triggered;
  r.true_label = truth;
  r.target = target;
  r.predicted = predicted;
  r.probs = std::move(probs);
  return r;
}

Vector probs_with(int hot, double p, int n = 2) {
  Vector v = Vector::Constant(n, (1.0 - p) / (n - 1));
  v(hot) = p;
  return v;
}

ExperimentConfig tiny_config(const fs::path& out) {
  ExperimentConfig c;
  c.data.sbm = {3, 10, 0.4, 0.05, 4, 3.0, 0.5, 0};
  c.pretrain.epochs = 2;
  c.pretrain.hidden_dim = 8;
  c.pretrain_samples = 12;
  c.prompt.token_count = 3;
  c.tune = {2, 0.5, 10, 0};
  c.plan.trigger_size = 3;
  c.plan.epochs = 2;
  c.plan.learning_rate = 0.5;
  c.plan.poisoning_rate = 0.2;
  c.trials = 2;
  c.output_dir = out.string();
  c.seed = 3;
  return c;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST(EvaluateAttack, AllSucceedWithFullConfidence) {
  PredictionSet s;
  s.records = {record(false, 0, -1, 0, probs_with(0, 0.9)), record(true, 1, 0, 0, probs_with(0, 1.0)),
               record(true, 1, 0, 0, probs_with(0, 1.0))};
  const auto r = evaluate_attack(s, AttackPlan{});
  EXPECT_EQ(*r.asr, 1.0);
  EXPECT_EQ(*r.amc, 1.0);
  EXPECT_EQ(*r.ca, 1.0);
  EXPECT_DOUBLE_EQ(*r.pr, 0.05);
  EXPECT_FALSE(r.add.has_value());
}

TEST(EvaluateAttack, ZeroSuccessesLeaveAmcAbsent) {
  PredictionSet s;
  s.records = {record(false, 0, -1, 1, probs_with(1, 0.9)), record(true, 1, 0, 1, probs_with(1, 0.7))};
  const auto r = evaluate_attack(s, AttackPlan{});
  EXPECT_EQ(*r.asr, 0.0);
  EXPECT_FALSE(r.amc.has_value());
  EXPECT_EQ(*r.ca, 0.0);
}

TEST(EvaluateAttack, ThreeOfFour) {
  PredictionSet s;
  s.records = {record(false, 0, -1, 0, probs_with(0, 0.9)), record(true, 1, 0, 0, probs_with(0, 0.8)),
               record(true, 1, 0, 0, probs_with(0, 0.6)), record(true, 1, 0, 0, probs_with(0, 1.0)),
               record(true, 1, 0, 1, probs_with(1, 0.9))};
  s.deltas = DistributionDeltas{-1.5, 2.0};
  const auto r = evaluate_attack(s, AttackPlan{});
  EXPECT_DOUBLE_EQ(*r.asr, 0.75);
  EXPECT_NEAR(*r.amc, 0.8, 1e-15);
  EXPECT_EQ(r.attacked, 4);
  EXPECT_EQ(r.successes, 3);
  EXPECT_EQ(*r.add, -1.5);
  EXPECT_EQ(*r.ahd, 2.0);
}

TEST(EvaluateAttack, EmptyHalvesRejected) {
  PredictionSet s;
  s.records = {record(false, 0, -1, 0, probs_with(0, 0.9))};
  EXPECT_THROW(evaluate_attack(s, AttackPlan{}), Error);
  s.records = {record(true, 0, 1, 0, probs_with(0, 0.9))};
  EXPECT_THROW(evaluate_attack(s, AttackPlan{}), Error);
}

TEST(ClassificationMetrics, AccuracyAndMacroF1) {
  const std::vector<int> truth{0, 0, 1, 1, 2}, pred{0, 1, 1, 1, 0};
  EXPECT_DOUBLE_EQ(accuracy(truth, pred), 0.6);
  // Per label F1: 0 -> p 1/2 r 1/2 = 1/2; 1 -> p 2/3 r 1 = 0.8; 2 -> 0.
  EXPECT_NEAR(macro_f1(truth, pred, 3), (0.5 + 0.8 + 0.0) / 3, 1e-12);
  EXPECT_DOUBLE_EQ(macro_f1(truth, truth, 3), 1.0);
}

TEST(Histogram, UniformSoftmaxOneBin) {
  std::vector<Vector> probs(7, Vector::Constant(4, 0.25));
  const auto h = confidence_histogram(probs, {}, 10);
  ASSERT_EQ(h.edges.size(), 11u);
  EXPECT_EQ(h.clean[2], 7);
  int total = 0;
  for (int c : h.clean) total += c;
  EXPECT_EQ(total, 7);
}

TEST(Histogram, MatchesLoopOracle) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<Vector> clean, poisoned;
  for (int i = 0; i < 50; ++i) {
    Vector v(3);
    for (int j = 0; j < 3; ++j) v(j) = u(rng);
    v /= v.sum();
    (i % 3 ? clean : poisoned).push_back(v);
  }
  clean.push_back(probs_with(0, 1.0, 3));
  const int bins = 7;
  const auto h = confidence_histogram(clean, poisoned, bins);
  auto oracle_counts = [&](const std::vector<Vector>& list) {
    std::vector<int> counts(bins, 0);
    for (const auto& v : list) {
      double m = v(0);
      for (int j = 1; j < v.size(); ++j) m = std::max(m, v(j));
      for (int b = 0; b < bins; ++b) {
        const double lo = static_cast<double>(b) / bins, hi = static_cast<double>(b + 1) / bins;
        if ((m >= lo && m < hi) || (b == bins - 1 && m == 1.0)) {
          ++counts[b];
          break;
        }
      }
    }
    return counts;
  };
  EXPECT_EQ(h.clean, oracle_counts(clean));
  EXPECT_EQ(h.poisoned, oracle_counts(poisoned));
  EXPECT_EQ(h.clean.back() >= 1, true);
}

TEST(Projection, PlanarPointsExplainEverything) {
  Matrix x(6, 4);
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g;
  Vector a = Vector::Random(4), b = Vector::Random(4);
  for (int i = 0; i < 6; ++i) x.row(i) = (g(rng) * a + g(rng) * b).transpose();
  const auto p = project_embeddings_2d(x);
  EXPECT_NEAR(p.explained[0] + p.explained[1], 1.0, 1e-9);
}

TEST(Projection, CollinearSecondComponentZero) {
  Matrix x(5, 3);
  for (int i = 0; i < 5; ++i) x.row(i) << i, 2.0 * i, -i;
  const auto p = project_embeddings_2d(x);
  EXPECT_NEAR(p.explained[1], 0.0, 1e-12);
  EXPECT_NEAR(p.explained[0], 1.0, 1e-12);
}

TEST(Projection, ContractsDistancesAndMatchesOracle) {
  std::mt19937_64 rng(6);
  std::normal_distribution<double> g;
  Matrix x(20, 5);
  oracle::Mat ox = oracle::zeros(20, 5);
  for (int i = 0; i < 20; ++i)
    for (int j = 0; j < 5; ++j) ox[i][j] = x(i, j) = g(rng);
  const auto p = project_embeddings_2d(x);
  for (int i = 0; i < 20; ++i)
    for (int j = i + 1; j < 20; ++j)
      EXPECT_LE((p.coordinates.row(i) - p.coordinates.row(j)).norm(), (x.row(i) - x.row(j)).norm() + 1e-12);
  // Oracle: covariance eigenvalues via Jacobi on plain loops.
  oracle::Mat cov = oracle::zeros(5, 5);
  std::vector<double> mean(5, 0.0);
  for (int j = 0; j < 5; ++j) {
    for (int i = 0; i < 20; ++i) mean[j] += ox[i][j];
    mean[j] /= 20;
  }
  for (int a = 0; a < 5; ++a)
    for (int b = 0; b < 5; ++b) {
      for (int i = 0; i < 20; ++i) cov[a][b] += (ox[i][a] - mean[a]) * (ox[i][b] - mean[b]);
      cov[a][b] /= 19;
    }
  const auto [values, _] = oracle::jacobi_eigen(cov);
  double total = 0.0;
  for (double v : values) total += v;
  EXPECT_NEAR(p.explained[0] + p.explained[1], (values[0] + values[1]) / total, 1e-8);
  // Retained variance directly from the coordinates.
  double kept = 0.0;
  for (int i = 0; i < 20; ++i) kept += p.coordinates.row(i).squaredNorm();
  EXPECT_NEAR(kept / 19, values[0] + values[1], 1e-8);
}

TEST(SplitTestSet, HalvesDisjointAndSorted) {
  const std::vector<int> test{3, 5, 8, 13, 21, 34, 55};
  const auto s = split_test_set(test, 1);
  EXPECT_EQ(s.clean.size(), 4u);
  EXPECT_EQ(s.triggered.size(), 3u);
  EXPECT_TRUE(std::is_sorted(s.clean.begin(), s.clean.end()));
  std::vector<int> all = s.clean;
  all.insert(all.end(), s.triggered.begin(), s.triggered.end());
  std::sort(all.begin(), all.end());
  EXPECT_EQ(all, test);
}

TEST(MeanReport, ExactAndFieldRules) {
  MetricsReport a, b;
  a.asr = 0.5;
  b.asr = 1.0;
  a.amc = 0.9;  // absent in b
  a.attacked = 4;
  b.attacked = 6;
  a.successes = 2;
  b.successes = 6;
  const std::vector<MetricsReport> rows{a, b};
  const auto m = mean_report(rows);
  EXPECT_EQ(*m.asr, 0.75);
  EXPECT_FALSE(m.amc.has_value());
  EXPECT_EQ(m.attacked, 10);
  EXPECT_EQ(m.successes, 8);
}

TEST(ReportCsv, HeaderAndBlanks) {
  MetricsReport r;
  r.benign_accuracy = 0.5;
  const std::vector<MetricsReport> rows{r};
  const auto text = report_csv(rows, nullptr);
  EXPECT_EQ(text.substr(0, text.find('\n')), "trial,asr,amc,ca,pr,add,ahd,benign_accuracy,benign_f1,attacked,successes");
  EXPECT_NE(text.find("0,,,,,,,0.5,,0,0"), std::string::npos);
}

TEST(Config, JsonRoundTrip) {
  ExperimentConfig c = tiny_config("/tmp/x");
  c.plan.attack_type = AttackType::kAllToAll;
  c.plan.victim_label = 2;
  c.defense.kind = DefenseKind::kNoisyEmbedding;
  c.threat = ThreatModel::kBlackBox;
  c.plan.alpha = 0.3;
  const auto text = config_to_json(c);
  const auto back = config_from_json(text);
  EXPECT_EQ(config_to_json(back), text);
  EXPECT_EQ(back.plan.attack_type, AttackType::kAllToAll);
  EXPECT_EQ(back.plan.victim_label, 2);
  EXPECT_EQ(back.threat, ThreatModel::kBlackBox);
  EXPECT_EQ(back.plan.alpha, 0.3);
}

TEST(Config, UnknownKeysAndBadValuesRejected) {
  EXPECT_THROW(config_from_json(R"({"trails": 3})"), Error);
  EXPECT_THROW(config_from_json(R"({"attack": {"typ": "one-to-one"}})"), Error);
  EXPECT_THROW(config_from_json(R"({"attack": {"type": "many"}})"), Error);
  EXPECT_THROW(config_from_json(R"({"trials": 0})").validate(), Error);
  EXPECT_NO_THROW(config_from_json("{}"));
}

TEST(PredictSplit, ZeroSigmaMatchesUndefended) {
  const ExperimentConfig c = tiny_config("/tmp/unused");
  const Graph g = load_experiment_graph(c, 1);
  GnnParams p = GnnParams::init(g.feature_dim(), 8, g.num_labels(), 2);
  p.frozen.layer1 = p.frozen.layer2 = true;
  PromptModel model{p, init_prompt(3, g.feature_dim(), 3), init_prompt(3, g.feature_dim(), 4),
                    TriggerOrder::kBeforePrompt};
  AttackPlan plan;
  const auto labels = choose_attack_labels(g, plan);
  const auto split = split_test_set(g.test_nodes(), 5);
  const auto base = predict_split(model, g, split, &labels, 1, DefenseConfig{});
  for (auto kind : {DefenseKind::kNoisyEmbedding, DefenseKind::kNoisyFeatures}) {
    DefenseConfig d;
    d.kind = kind;
    d.sigma = 0.0;
    const auto out = predict_split(model, g, split, &labels, 1, d);
    ASSERT_EQ(out.records.size(), base.records.size());
    for (std::size_t i = 0; i < out.records.size(); ++i) {
      EXPECT_TRUE(out.records[i].probs == base.records[i].probs);
      EXPECT_EQ(out.records[i].predicted, base.records[i].predicted);
    }
  }
  for (const auto& r : base.records)
    if (r.triggered) {
      EXPECT_TRUE(labels.is_victim(r.true_label));
      EXPECT_EQ(r.target, labels.target);
    }
  ASSERT_TRUE(base.deltas.has_value());
}

TEST(RunExperiment, DeterministicReports) {
  const fs::path a = fs::temp_directory_path() / "krait_det_a", b = fs::temp_directory_path() / "krait_det_b";
  fs::remove_all(a);
  fs::remove_all(b);
  run_experiment(tiny_config(a));
  run_experiment(tiny_config(b));
  for (const char* f : {"report.csv", "summary.json", "trial_0/predictions.csv", "trial_1/poison_set.csv",
                        "trial_0/checkpoint.json", "trial_1/histogram.csv"}) {
    ASSERT_TRUE(fs::exists(a / f)) << f;
    EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
  }
}

TEST(RunExperiment, BenignOnlyHasNoAsr) {
  const fs::path out = fs::temp_directory_path() / "krait_benign";
  fs::remove_all(out);
  ExperimentConfig c = tiny_config(out);
  c.attack_enabled = false;
  c.trials = 1;
  const auto s = run_experiment(c);
  EXPECT_FALSE(s.mean.asr.has_value());
  EXPECT_FALSE(s.mean.ca.has_value());
  EXPECT_TRUE(s.mean.benign_accuracy.has_value());
  EXPECT_TRUE(s.mean.benign_f1.has_value());
  const auto text = slurp(out / "report.csv");
  EXPECT_NE(text.find("trial,asr"), std::string::npos);
}
