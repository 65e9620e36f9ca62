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

#include "krait/harness.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <json.hpp>

#include "krait/checkpoint.hpp"
#include "krait/metrics.hpp"

namespace krait {
namespace {

using nlohmann::json;

// ---- config JSON helpers -------------------------------------------------

void check_keys(const json& obj, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!obj.is_object()) throw Error("config: '" + where + "' must be an object");
  std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [key, _] : obj.items())
    if (!ok.count(key)) throw Error("config: unknown key '" + where + "." + key + "'");
}

template <typename T>
void read(const json& obj, const char* key, T& field) {
  if (obj.contains(key)) field = obj.at(key).get<T>();
}

template <typename T>
void read_optional(const json& obj, const char* key, std::optional<T>& field) {
  if (!obj.contains(key)) return;
  if (obj.at(key).is_null()) {
    field.reset();
  } else {
    field = obj.at(key).get<T>();
  }
}

template <typename T>
json optional_json(const std::optional<T>& v) {
  return v ? json(*v) : json(nullptr);
}

std::string threat_name(ThreatModel t) { return t == ThreatModel::kWhiteBox ? "white-box" : "black-box"; }

ThreatModel parse_threat(const std::string& s) {
  if (s == "white-box") return ThreatModel::kWhiteBox;
  if (s == "black-box") return ThreatModel::kBlackBox;
  throw Error("config: unknown threat model '" + s + "'");
}

std::string policy_name(TargetPolicy p) { return p == TargetPolicy::kLargest ? "largest" : "smallest"; }

TargetPolicy parse_policy(const std::string& s) {
  if (s == "largest") return TargetPolicy::kLargest;
  if (s == "smallest") return TargetPolicy::kSmallest;
  throw Error("config: unknown target policy '" + s + "'");
}

// ---- formatting ----------------------------------------------------------

std::string num(double x) { return fmt::format("{}", x); }
std::string opt(const std::optional<double>& x) { return x ? num(*x) : std::string(); }

json report_json(const MetricsReport& r) {
  return {{"asr", optional_json(r.asr)},
          {"amc", optional_json(r.amc)},
          {"ca", optional_json(r.ca)},
          {"pr", optional_json(r.pr)},
          {"add", optional_json(r.add)},
          {"ahd", optional_json(r.ahd)},
          {"benign_accuracy", optional_json(r.benign_accuracy)},
          {"benign_f1", optional_json(r.benign_f1)},
          {"attacked", r.attacked},
          {"successes", r.successes}};
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
}

template <typename F>
auto stage(const char* name, F&& body) -> decltype(body()) {
  try {
    return body();
  } catch (const std::exception& e) {
    throw Error(fmt::format("[{}] {}", name, e.what()));
  }
}

// ---- model evaluation ----------------------------------------------------

struct Output {
  Vector embedding;
  Vector probs;
};

Output defended_forward(const GnnParams& params, const Subgraph& input, const DefenseConfig& defense,
                        Seed sample_seed) {
  switch (defense.kind) {
    case DefenseKind::kNone: {
      auto f = gcn_forward(params, input);
      return {std::move(f.graph_embedding), std::move(f.softmax)};
    }
    case DefenseKind::kGnnSvd: {
      auto f = gcn_forward(params, gnn_svd_filter(input, defense.rank, defense.threshold));
      return {std::move(f.graph_embedding), std::move(f.softmax)};
    }
    case DefenseKind::kNoisyFeatures: {
      auto f = gcn_forward(params, inject_feature_noise(input, defense.sigma, sample_seed));
      return {std::move(f.graph_embedding), std::move(f.softmax)};
    }
    case DefenseKind::kNoisyEmbedding: {
      const auto f = gcn_forward(params, input);
      Vector z = inject_embedding_noise(f.graph_embedding, defense.sigma, sample_seed);
      Vector p = softmax(classify_embedding(params, z));
      return {std::move(z), std::move(p)};
    }
  }
  throw Error("unknown defense");
}

int argmax(const Vector& v) {
  Eigen::Index i = 0;
  v.maxCoeff(&i);
  return static_cast<int>(i);
}

std::vector<EgoNetwork> pretraining_egos(const Graph& graph, int hops, int cap, Seed seed) {
  std::vector<int> nodes(graph.node_count());
  std::iota(nodes.begin(), nodes.end(), 0);
  if (cap > 0 && cap < graph.node_count()) {
    std::mt19937_64 rng(seed);
    std::shuffle(nodes.begin(), nodes.end(), rng);
    nodes.resize(cap);
    std::sort(nodes.begin(), nodes.end());
  }
  std::vector<EgoNetwork> egos;
  egos.reserve(nodes.size());
  for (int v : nodes) egos.push_back(ego_network(graph, v, hops));
  return egos;
}

}  // namespace

PretrainResult pretrain_on_graph(const ExperimentConfig& config, const Graph& graph, Seed seed) {
  PretrainConfig pc = config.pretrain;
  pc.seed = seed;
  const auto egos = pretraining_egos(graph, config.hops, config.pretrain_samples, derive_seed(seed, 7));
  return pretrain_contrastive(egos, pc);
}

// ---- config --------------------------------------------------------------

void ExperimentConfig::validate() const {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw Error("config: train_fraction outside (0,1)");
  if (hops < 0) throw Error("config: hops must be >= 0");
  if (trials < 1) throw Error("config: trials must be >= 1");
  if (histogram_bins < 1) throw Error("config: histogram_bins must be >= 1");
  if (pretrain_samples < 0) throw Error("config: pretrain_samples must be >= 0");
  if (prompt.token_count < 0) throw Error("config: prompt.token_count must be >= 0");
  if (tune.epochs < 1 || tune.batch_size < 1) throw Error("config: tune epochs and batch_size must be >= 1");
  if (data.reduce_dim < 0) throw Error("config: data.reduce_dim must be >= 0");
  pretrain.validate();
  plan.validate();
  defense.validate();
}

ExperimentConfig config_from_json(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(std::string("config: malformed JSON: ") + e.what());
  }
  ExperimentConfig c;
  try {
    check_keys(doc,
               {"data", "train_fraction", "hops", "pretrain", "pretrain_samples", "prompt", "tune", "attack",
                "defense", "trials", "histogram_bins", "output_dir", "seed"},
               "config");
    if (doc.contains("data")) {
      const auto& d = doc.at("data");
      check_keys(d, {"graph_json", "edge_file", "feature_file", "label_file", "reduce_dim", "sbm"}, "data");
      read(d, "graph_json", c.data.graph_json);
      read(d, "edge_file", c.data.edge_file);
      read(d, "feature_file", c.data.feature_file);
      read(d, "label_file", c.data.label_file);
      read(d, "reduce_dim", c.data.reduce_dim);
      if (d.contains("sbm")) {
        const auto& s = d.at("sbm");
        check_keys(s, {"classes", "nodes_per_class", "p_in", "p_out", "feature_dim", "class_sep"}, "data.sbm");
        read(s, "classes", c.data.sbm.classes);
        read(s, "nodes_per_class", c.data.sbm.nodes_per_class);
        read(s, "p_in", c.data.sbm.p_in);
        read(s, "p_out", c.data.sbm.p_out);
        read(s, "feature_dim", c.data.sbm.feature_dim);
        read(s, "class_sep", c.data.sbm.class_sep);
      }
    }
    read(doc, "train_fraction", c.train_fraction);
    read(doc, "hops", c.hops);
    read(doc, "pretrain_samples", c.pretrain_samples);
    read(doc, "trials", c.trials);
    read(doc, "histogram_bins", c.histogram_bins);
    read(doc, "output_dir", c.output_dir);
    read(doc, "seed", c.seed);
    if (doc.contains("pretrain")) {
      const auto& p = doc.at("pretrain");
      check_keys(p,
                 {"temperature", "edge_drop_rate", "feature_mask_rate", "epochs", "learning_rate", "weight_decay",
                  "batch_size", "hidden_dim"},
                 "pretrain");
      read(p, "temperature", c.pretrain.temperature);
      read(p, "edge_drop_rate", c.pretrain.edge_drop_rate);
      read(p, "feature_mask_rate", c.pretrain.feature_mask_rate);
      read(p, "epochs", c.pretrain.epochs);
      read(p, "learning_rate", c.pretrain.learning_rate);
      read(p, "weight_decay", c.pretrain.weight_decay);
      read(p, "batch_size", c.pretrain.batch_size);
      read(p, "hidden_dim", c.pretrain.hidden_dim);
    }
    if (doc.contains("prompt")) {
      const auto& p = doc.at("prompt");
      check_keys(p, {"token_count", "inner_threshold", "cross_threshold", "init_std"}, "prompt");
      read(p, "token_count", c.prompt.token_count);
      read(p, "inner_threshold", c.prompt.inner_threshold);
      read(p, "cross_threshold", c.prompt.cross_threshold);
      read(p, "init_std", c.prompt.init_std);
    }
    if (doc.contains("tune")) {
      const auto& t = doc.at("tune");
      check_keys(t, {"epochs", "learning_rate", "batch_size"}, "tune");
      read(t, "epochs", c.tune.epochs);
      read(t, "learning_rate", c.tune.learning_rate);
      read(t, "batch_size", c.tune.batch_size);
    }
    if (doc.contains("attack")) {
      const auto& a = doc.at("attack");
      check_keys(a,
                 {"enabled", "threat", "type", "target_label", "victim_label", "target_policy", "poisoning_rate",
                  "degree_threshold", "trigger_method", "trigger_size", "alpha", "beta", "warmup_fraction",
                  "epochs", "learning_rate", "batch_size"},
                 "attack");
      read(a, "enabled", c.attack_enabled);
      if (a.contains("threat")) c.threat = parse_threat(a.at("threat").get<std::string>());
      if (a.contains("type")) c.plan.attack_type = parse_attack_type(a.at("type").get<std::string>());
      read_optional(a, "target_label", c.plan.target_label);
      read_optional(a, "victim_label", c.plan.victim_label);
      if (a.contains("target_policy")) c.plan.target_policy = parse_policy(a.at("target_policy").get<std::string>());
      read(a, "poisoning_rate", c.plan.poisoning_rate);
      read_optional(a, "degree_threshold", c.plan.degree_threshold);
      if (a.contains("trigger_method")) {
        c.plan.trigger_method = parse_trigger_method(a.at("trigger_method").get<std::string>());
      }
      read(a, "trigger_size", c.plan.trigger_size);
      read(a, "alpha", c.plan.alpha);
      read(a, "beta", c.plan.beta);
      read(a, "warmup_fraction", c.plan.warmup_fraction);
      read(a, "epochs", c.plan.epochs);
      read(a, "learning_rate", c.plan.learning_rate);
      read(a, "batch_size", c.plan.batch_size);
    }
    if (doc.contains("defense")) {
      const auto& d = doc.at("defense");
      check_keys(d, {"kind", "rank", "threshold", "sigma"}, "defense");
      if (d.contains("kind")) c.defense.kind = parse_defense_kind(d.at("kind").get<std::string>());
      read(d, "rank", c.defense.rank);
      read(d, "threshold", c.defense.threshold);
      read(d, "sigma", c.defense.sigma);
    }
  } catch (const json::exception& e) {
    throw Error(std::string("config: ") + e.what());
  }
  c.plan.prompt = c.prompt;
  c.validate();
  return c;
}

std::string config_to_json(const ExperimentConfig& c) {
  const auto& s = c.data.sbm;
  const auto& p = c.plan;
  json doc = {
      {"data",
       {{"graph_json", c.data.graph_json},
        {"edge_file", c.data.edge_file},
        {"feature_file", c.data.feature_file},
        {"label_file", c.data.label_file},
        {"reduce_dim", c.data.reduce_dim},
        {"sbm",
         {{"classes", s.classes},
          {"nodes_per_class", s.nodes_per_class},
          {"p_in", s.p_in},
          {"p_out", s.p_out},
          {"feature_dim", s.feature_dim},
          {"class_sep", s.class_sep}}}}},
      {"train_fraction", c.train_fraction},
      {"hops", c.hops},
      {"pretrain",
       {{"temperature", c.pretrain.temperature},
        {"edge_drop_rate", c.pretrain.edge_drop_rate},
        {"feature_mask_rate", c.pretrain.feature_mask_rate},
        {"epochs", c.pretrain.epochs},
        {"learning_rate", c.pretrain.learning_rate},
        {"weight_decay", c.pretrain.weight_decay},
        {"batch_size", c.pretrain.batch_size},
        {"hidden_dim", c.pretrain.hidden_dim}}},
      {"pretrain_samples", c.pretrain_samples},
      {"prompt",
       {{"token_count", c.prompt.token_count},
        {"inner_threshold", c.prompt.inner_threshold},
        {"cross_threshold", c.prompt.cross_threshold},
        {"init_std", c.prompt.init_std}}},
      {"tune",
       {{"epochs", c.tune.epochs}, {"learning_rate", c.tune.learning_rate}, {"batch_size", c.tune.batch_size}}},
      {"attack",
       {{"enabled", c.attack_enabled},
        {"threat", threat_name(c.threat)},
        {"type", to_string(p.attack_type)},
        {"target_label", optional_json(p.target_label)},
        {"victim_label", optional_json(p.victim_label)},
        {"target_policy", policy_name(p.target_policy)},
        {"poisoning_rate", p.poisoning_rate},
        {"degree_threshold", optional_json(p.degree_threshold)},
        {"trigger_method", to_string(p.trigger_method)},
        {"trigger_size", p.trigger_size},
        {"alpha", p.alpha},
        {"beta", p.beta},
        {"warmup_fraction", p.warmup_fraction},
        {"epochs", p.epochs},
        {"learning_rate", p.learning_rate},
        {"batch_size", p.batch_size}}},
      {"defense",
       {{"kind", to_string(c.defense.kind)},
        {"rank", c.defense.rank},
        {"threshold", c.defense.threshold},
        {"sigma", c.defense.sigma}}},
      {"trials", c.trials},
      {"histogram_bins", c.histogram_bins},
      {"output_dir", c.output_dir},
      {"seed", c.seed}};
  return doc.dump(2) + "\n";
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return config_from_json(ss.str());
}

Graph load_experiment_graph(const ExperimentConfig& config, Seed seed) {
  const SplitSpec split{config.train_fraction, derive_seed(seed, 1)};
  Graph graph = [&] {
    if (!config.data.graph_json.empty()) return load_graph_json(config.data.graph_json, split).graph;
    if (!config.data.edge_file.empty()) {
      return load_graph(config.data.edge_file, config.data.feature_file, config.data.label_file, split).graph;
    }
    SbmParams sbm = config.data.sbm;
    sbm.train_fraction = config.train_fraction;
    sbm.seed = seed;
    return generate_sbm(sbm).graph;
  }();
  if (config.data.reduce_dim > 0 && config.data.reduce_dim < graph.feature_dim()) {
    graph = graph.with_features(svd_reduce_features(graph.features(), config.data.reduce_dim));
  }
  return graph;
}

// ---- evaluation ----------------------------------------------------------

TestSplit split_test_set(std::span<const int> test_nodes, Seed seed) {
  std::vector<int> nodes(test_nodes.begin(), test_nodes.end());
  std::mt19937_64 rng(seed);
  std::shuffle(nodes.begin(), nodes.end(), rng);
  const std::size_t clean = nodes.size() - nodes.size() / 2;
  TestSplit s;
  s.clean.assign(nodes.begin(), nodes.begin() + static_cast<std::ptrdiff_t>(clean));
  s.triggered.assign(nodes.begin() + static_cast<std::ptrdiff_t>(clean), nodes.end());
  std::sort(s.clean.begin(), s.clean.end());
  std::sort(s.triggered.begin(), s.triggered.end());
  return s;
}

PredictionSet predict_split(const PromptModel& model, const Graph& graph, const TestSplit& split,
                            const AttackLabels* labels, int hops, const DefenseConfig& defense) {
  PredictionSet out;
  std::vector<Subgraph> clean_inputs, triggered_inputs;
  auto run = [&](int v, bool triggered, int target) {
    const Subgraph ego = to_subgraph(ego_network(graph, v, hops));
    Subgraph input = triggered ? model.triggered_input(ego) : model.clean_input(ego);
    const Seed sample_seed = derive_seed(defense.seed, 2 * static_cast<Seed>(v) + (triggered ? 1 : 0));
    Output o = defended_forward(model.params, input, defense, sample_seed);
    PredictionRecord r;
    r.node = v;
    r.triggered = triggered;
    r.true_label = graph.label(v);
    r.target = target;
    r.predicted = argmax(o.probs);
    r.probs = std::move(o.probs);
    r.embedding = std::move(o.embedding);
    r.mean_degree = input.mean_degree();
    r.local_homophily = local_subgraph_homophily(input);
    out.records.push_back(std::move(r));
    (triggered ? triggered_inputs : clean_inputs).push_back(std::move(input));
  };
  for (int v : split.clean) run(v, false, -1);
  if (labels) {
    for (int v : split.triggered) {
      const int y = graph.label(v);
      if (labels->is_victim(y)) run(v, true, labels->pair_target[y]);
    }
  }
  if (!clean_inputs.empty() && !triggered_inputs.empty()) {
    out.deltas = distribution_deltas(clean_inputs, triggered_inputs);
  }
  return out;
}

double accuracy(std::span<const int> truth, std::span<const int> predicted) {
  if (truth.size() != predicted.size()) throw Error("accuracy: size mismatch");
  if (truth.empty()) throw Error("accuracy: empty input");
  int hits = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) hits += truth[i] == predicted[i];
  return static_cast<double>(hits) / static_cast<double>(truth.size());
}

double macro_f1(std::span<const int> truth, std::span<const int> predicted, int num_labels) {
  if (truth.size() != predicted.size()) throw Error("macro_f1: size mismatch");
  if (truth.empty()) throw Error("macro_f1: empty input");
  std::vector<int> tp(num_labels, 0), fp(num_labels, 0), fn(num_labels, 0);
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] < 0 || truth[i] >= num_labels || predicted[i] < 0 || predicted[i] >= num_labels) {
      throw Error("macro_f1: label out of range");
    }
    if (truth[i] == predicted[i]) {
      ++tp[truth[i]];
    } else {
      ++fp[predicted[i]];
      ++fn[truth[i]];
    }
  }
  // Averaged over labels that occur in either the truth or the predictions.
  double sum = 0.0;
  int used = 0;
  for (int y = 0; y < num_labels; ++y) {
    const int denom = 2 * tp[y] + fp[y] + fn[y];
    if (denom == 0) continue;
    sum += 2.0 * tp[y] / denom;
    ++used;
  }
  return sum / used;
}

MetricsReport evaluate_attack(const PredictionSet& predictions, const AttackPlan& plan) {
  MetricsReport r;
  int clean = 0, correct = 0;
  double confidence = 0.0;
  for (const auto& rec : predictions.records) {
    if (rec.triggered) {
      ++r.attacked;
      if (rec.predicted == rec.target) {
        ++r.successes;
        confidence += rec.probs(rec.target);
      }
    } else {
      ++clean;
      correct += rec.predicted == rec.true_label;
    }
  }
  if (clean == 0) throw Error("evaluate_attack: empty clean half");
  if (r.attacked == 0) throw Error("evaluate_attack: empty triggered half");
  r.asr = static_cast<double>(r.successes) / r.attacked;
  if (r.successes > 0) r.amc = confidence / r.successes;
  r.ca = static_cast<double>(correct) / clean;
  r.pr = plan.poisoning_rate;
  if (predictions.deltas) {
    r.add = predictions.deltas->add;
    r.ahd = predictions.deltas->ahd;
  }
  return r;
}

Histogram confidence_histogram(std::span<const Vector> clean, std::span<const Vector> poisoned, int bins) {
  if (bins < 1) throw Error("confidence_histogram: bins must be >= 1");
  Histogram h;
  for (int i = 0; i <= bins; ++i) h.edges.push_back(static_cast<double>(i) / bins);
  auto fill = [bins](std::span<const Vector> list) {
    std::vector<int> counts(bins, 0);
    for (const auto& p : list) {
      const double m = p.size() ? p.maxCoeff() : 0.0;
      const int b = std::clamp(static_cast<int>(std::floor(m * bins)), 0, bins - 1);
      ++counts[b];
    }
    return counts;
  };
  h.clean = fill(clean);
  h.poisoned = fill(poisoned);
  return h;
}

Projection project_embeddings_2d(const Matrix& embeddings) {
  if (embeddings.rows() < 2) throw Error("project_embeddings_2d: need at least 2 rows");
  const Matrix centered = embeddings.rowwise() - embeddings.colwise().mean();
  const Matrix cov = centered.transpose() * centered / static_cast<double>(embeddings.rows() - 1);
  Eigen::SelfAdjointEigenSolver<Matrix> eig(cov);
  const Vector values = eig.eigenvalues().reverse().cwiseMax(0.0);
  const Matrix vectors = eig.eigenvectors().rowwise().reverse();
  const int k = std::min<int>(2, static_cast<int>(embeddings.cols()));
  Projection p;
  p.coordinates = Matrix::Zero(embeddings.rows(), 2);
  p.coordinates.leftCols(k) = centered * vectors.leftCols(k);
  const double total = values.sum();
  for (int i = 0; i < k; ++i) p.explained[i] = total > 0.0 ? values(i) / total : 0.0;
  return p;
}

// ---- experiment ----------------------------------------------------------

TrialOutcome run_trial(const ExperimentConfig& config, int trial) {
  config.validate();
  const Seed ts = derive_seed(config.seed, 100 + static_cast<Seed>(trial));
  const Graph graph = stage("load", [&] { return load_experiment_graph(config, derive_seed(ts, 1)); });
  const TestSplit split = stage("split", [&] {
    const auto test = graph.test_nodes();
    if (test.size() < 2) throw Error("need at least 2 test nodes");
    return split_test_set(test, derive_seed(ts, 2));
  });
  const GnnParams victim = stage("pretrain", [&] { return pretrain_on_graph(config, graph, derive_seed(ts, 3)).params; });

  TuneConfig tune = config.tune;
  tune.seed = derive_seed(ts, 4);
  const auto train = graph.train_nodes();

  TrialOutcome out;
  stage("benign", [&] {
    const auto egos = build_egos(graph, train, config.hops);
    TuneResult tuned = default_benign_training(victim, config.prompt.token_count, graph.num_labels(), tune)(egos);
    PromptModel benign{std::move(tuned.params), std::move(tuned.prompt), std::nullopt, TriggerOrder::kBeforePrompt};
    PredictionSet preds = predict_split(benign, graph, split, nullptr, config.hops, DefenseConfig{});
    std::vector<int> truth, predicted;
    for (const auto& r : preds.records) {
      truth.push_back(r.true_label);
      predicted.push_back(r.predicted);
    }
    out.report.benign_accuracy = accuracy(truth, predicted);
    out.report.benign_f1 = macro_f1(truth, predicted, graph.num_labels());
    if (!config.attack_enabled) {
      out.model = std::move(benign);
      out.predictions = std::move(preds);
    }
  });
  if (!config.attack_enabled) return out;

  AttackPlan plan = config.plan;
  plan.prompt = config.prompt;
  plan.seed = derive_seed(ts, 5);
  AttackLabels labels;
  stage("attack", [&] {
    if (config.threat == ThreatModel::kWhiteBox) {
      BackdoorResult r = train_backdoored(plan, victim, graph, config.hops);
      out.model = std::move(r.model);
      out.poison = std::move(r.poison);
      labels = std::move(r.labels);
    } else {
      const GnnParams surrogate = pretrain_on_graph(config, graph, derive_seed(ts, 6)).params;
      const auto training = default_benign_training(victim, config.prompt.token_count, graph.num_labels(), tune);
      BlackBoxResult r = black_box_pipeline(plan, surrogate, graph, config.hops, training);
      out.model = std::move(r.model);
      out.poison = std::move(r.poison);
      labels = std::move(r.labels);
    }
  });

  stage("eval", [&] {
    out.predictions = predict_split(out.model, graph, split, &labels, config.hops, DefenseConfig{});
    MetricsReport attacked = evaluate_attack(out.predictions, plan);
    attacked.benign_accuracy = out.report.benign_accuracy;
    attacked.benign_f1 = out.report.benign_f1;
    out.report = attacked;
  });

  if (config.defense.kind != DefenseKind::kNone) {
    stage("defend", [&] {
      DefenseConfig defense = config.defense;
      defense.seed = derive_seed(ts, 8);
      out.defended_predictions = predict_split(out.model, graph, split, &labels, config.hops, defense);
      MetricsReport d = evaluate_attack(out.defended_predictions, plan);
      d.benign_accuracy = out.report.benign_accuracy;
      d.benign_f1 = out.report.benign_f1;
      out.defended = d;
    });
  }
  return out;
}

MetricsReport mean_report(std::span<const MetricsReport> rows) {
  if (rows.empty()) throw Error("mean_report: no rows");
  MetricsReport m;
  auto field = [&](std::optional<double> MetricsReport::*f) {
    double sum = 0.0;
    for (const auto& r : rows) {
      if (!(r.*f)) return;
      sum += *(r.*f);
    }
    m.*f = sum / static_cast<double>(rows.size());
  };
  field(&MetricsReport::asr);
  field(&MetricsReport::amc);
  field(&MetricsReport::ca);
  field(&MetricsReport::pr);
  field(&MetricsReport::add);
  field(&MetricsReport::ahd);
  field(&MetricsReport::benign_accuracy);
  field(&MetricsReport::benign_f1);
  for (const auto& r : rows) {
    m.attacked += r.attacked;
    m.successes += r.successes;
  }
  return m;
}

std::string report_csv(std::span<const MetricsReport> rows, const MetricsReport* mean) {
  std::string s = "trial,asr,amc,ca,pr,add,ahd,benign_accuracy,benign_f1,attacked,successes\n";
  auto line = [&](const std::string& name, const MetricsReport& r, bool counts) {
    s += fmt::format("{},{},{},{},{},{},{},{},{},{},{}\n", name, opt(r.asr), opt(r.amc), opt(r.ca), opt(r.pr),
                     opt(r.add), opt(r.ahd), opt(r.benign_accuracy), opt(r.benign_f1),
                     counts ? std::to_string(r.attacked) : "", counts ? std::to_string(r.successes) : "");
  };
  for (std::size_t i = 0; i < rows.size(); ++i) line(std::to_string(i), rows[i], true);
  if (mean) line("mean", *mean, false);
  return s;
}

void write_predictions_csv(const PredictionSet& predictions, const std::filesystem::path& path) {
  std::string s = "node,half,true_label,target,predicted,mean_degree,local_homophily,probs\n";
  for (const auto& r : predictions.records) {
    std::string probs;
    for (Eigen::Index i = 0; i < r.probs.size(); ++i) probs += (i ? ";" : "") + num(r.probs(i));
    s += fmt::format("{},{},{},{},{},{},{},{}\n", r.node, r.triggered ? "triggered" : "clean", r.true_label,
                     r.target, r.predicted, num(r.mean_degree), num(r.local_homophily), probs);
  }
  write_text(path, s);
}

void write_histogram_csv(const Histogram& h, const std::filesystem::path& path) {
  std::string s = "bin_lo,bin_hi,clean,poisoned\n";
  for (std::size_t i = 0; i + 1 < h.edges.size(); ++i)
    s += fmt::format("{},{},{},{}\n", num(h.edges[i]), num(h.edges[i + 1]), h.clean[i], h.poisoned[i]);
  write_text(path, s);
}

void write_projection_csv(const Projection& p, std::span<const PredictionRecord> records,
                          const std::filesystem::path& path) {
  if (static_cast<std::size_t>(p.coordinates.rows()) != records.size()) {
    throw Error("write_projection_csv: row count mismatch");
  }
  std::string s = "node,half,true_label,x,y\n";
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    s += fmt::format("{},{},{},{},{}\n", r.node, r.triggered ? "triggered" : "clean", r.true_label,
                     num(p.coordinates(i, 0)), num(p.coordinates(i, 1)));
  }
  write_text(path, s);
}

ExperimentSummary run_experiment(const ExperimentConfig& config) {
  config.validate();
  namespace fs = std::filesystem;
  const fs::path root = config.output_dir;
  fs::create_directories(root);
  write_text(root / "config.json", config_to_json(config));

  ExperimentSummary summary;
  json trials = json::array();
  for (int t = 0; t < config.trials; ++t) {
    const fs::path dir = root / fmt::format("trial_{}", t);
    fs::create_directories(dir);
    fs::remove(dir / "FAILED");
    const auto before = constraint_evaluations();
    TrialOutcome o;
    try {
      o = run_trial(config, t);
    } catch (const std::exception& e) {
      write_text(dir / "FAILED", std::string(e.what()) + "\n");
      throw;
    }
    const auto evaluations = constraint_evaluations() - before;

    std::vector<Vector> clean_probs, poisoned_probs;
    Matrix emb(static_cast<Eigen::Index>(o.predictions.records.size()), o.model.params.hidden_dim());
    for (std::size_t i = 0; i < o.predictions.records.size(); ++i) {
      const auto& r = o.predictions.records[i];
      (r.triggered ? poisoned_probs : clean_probs).push_back(r.probs);
      emb.row(static_cast<Eigen::Index>(i)) = r.embedding.transpose();
    }
    const Histogram hist = confidence_histogram(clean_probs, poisoned_probs, config.histogram_bins);
    const Projection proj = project_embeddings_2d(emb);

    const MetricsReport row[1] = {o.report};
    write_text(dir / "report.csv", report_csv(row, nullptr));
    write_poison_csv(o.poison, dir / "poison_set.csv");
    write_predictions_csv(o.predictions, dir / "predictions.csv");
    write_histogram_csv(hist, dir / "histogram.csv");
    write_projection_csv(proj, o.predictions.records, dir / "projection.csv");
    save_checkpoint(to_checkpoint(o.model), dir / "checkpoint.json");
    if (o.defended) {
      const MetricsReport drow[1] = {*o.defended};
      write_text(dir / "defended_report.csv", report_csv(drow, nullptr));
      write_predictions_csv(o.defended_predictions, dir / "defended_predictions.csv");
    }

    trials.push_back({{"trial", t},
                      {"report", report_json(o.report)},
                      {"defended", o.defended ? report_json(*o.defended) : json(nullptr)},
                      {"poisoned_nodes", o.poison.nodes()},
                      {"constraint_evaluations", evaluations},
                      {"explained_variance", {proj.explained[0], proj.explained[1]}}});
    summary.trials.push_back(o.report);
    summary.defended.push_back(o.defended);
  }
  summary.mean = mean_report(summary.trials);
  if (config.defense.kind != DefenseKind::kNone) {
    std::vector<MetricsReport> d;
    for (const auto& r : summary.defended) d.push_back(*r);
    summary.defended_mean = mean_report(d);
    write_text(root / "defended_report.csv", report_csv(d, &*summary.defended_mean));
  }
  write_text(root / "report.csv", report_csv(summary.trials, &summary.mean));

  json doc = {{"trials", trials},
              {"mean", report_json(summary.mean)},
              {"defended_mean", summary.defended_mean ? report_json(*summary.defended_mean) : json(nullptr)},
              {"defense", to_string(config.defense.kind)},
              {"threat", threat_name(config.threat)},
              {"attack_enabled", config.attack_enabled}};
  if (summary.defended_mean && summary.mean.asr && summary.defended_mean->asr) {
    doc["defense_asr_delta"] = *summary.defended_mean->asr - *summary.mean.asr;
  }
  write_text(root / "summary.json", doc.dump(2) + "\n");
  return summary;
}

}  // namespace krait
