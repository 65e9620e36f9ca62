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

// Command-line front end for the Krait laboratory.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "krait/attack.hpp"
#include "krait/checkpoint.hpp"
#include "krait/harness.hpp"

namespace fs = std::filesystem;
using namespace krait;

namespace {

struct Common {
  std::string config_path;
  std::string graph_path;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<int> trials;
  std::optional<std::string> output_dir;
};

void add_common(CLI::App* cmd, Common& c, bool with_graph) {
  cmd->add_option("-c,--config", c.config_path, "experiment config JSON");
  if (with_graph) cmd->add_option("-g,--graph", c.graph_path, "graph JSON (overrides data source)");
  cmd->add_option("-s,--seed", c.seed, "global seed (overrides config)");
}

ExperimentConfig resolve(const Common& c) {
  ExperimentConfig cfg = c.config_path.empty() ? ExperimentConfig{} : load_config(c.config_path);
  if (!c.graph_path.empty()) cfg.data.graph_json = c.graph_path;
  if (c.seed) cfg.seed = *c.seed;
  if (c.trials) cfg.trials = *c.trials;
  if (c.output_dir) cfg.output_dir = *c.output_dir;
  cfg.validate();
  return cfg;
}

// Single-trial context shared by the staged subcommands (trial 0 seeds).
struct Stage {
  ExperimentConfig cfg;
  Seed ts;
  Graph graph;
};

Stage open_stage(const Common& c) {
  ExperimentConfig cfg = resolve(c);
  const Seed ts = derive_seed(cfg.seed, 100);
  Graph g = load_experiment_graph(cfg, derive_seed(ts, 1));
  return {std::move(cfg), ts, std::move(g)};
}

AttackPlan stage_plan(const Stage& s) {
  AttackPlan plan = s.cfg.plan;
  plan.prompt = s.cfg.prompt;
  plan.seed = derive_seed(s.ts, 5);
  return plan;
}

void print_report(const MetricsReport& r) {
  const MetricsReport rows[1] = {r};
  std::cout << report_csv(rows, nullptr);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Krait graph-prompt backdoor laboratory"};
  app.require_subcommand(1);

  // gen-data
  SbmParams sbm;
  std::string gen_out = "graph.json";
  auto* gen = app.add_subcommand("gen-data", "generate a stochastic block model graph as JSON");
  gen->add_option("--classes", sbm.classes);
  gen->add_option("--nodes-per-class", sbm.nodes_per_class);
  gen->add_option("--p-in", sbm.p_in);
  gen->add_option("--p-out", sbm.p_out);
  gen->add_option("--feature-dim", sbm.feature_dim);
  gen->add_option("--class-sep", sbm.class_sep);
  gen->add_option("--train-fraction", sbm.train_fraction);
  gen->add_option("--seed", sbm.seed);
  gen->add_option("-o,--out", gen_out);

  Common pre_c;
  auto* pre = app.add_subcommand("pretrain", "contrastive pretraining; writes a GNN checkpoint");
  add_common(pre, pre_c, true);
  pre->add_option("-o,--out", pre_c.out, "checkpoint path")->required();

  Common tune_c;
  std::string tune_gnn;
  auto* tune = app.add_subcommand("tune", "benign prompt tuning on a pretrained GNN");
  add_common(tune, tune_c, true);
  tune->add_option("--gnn", tune_gnn, "pretrained GNN checkpoint")->required();
  tune->add_option("-o,--out", tune_c.out, "model checkpoint path")->required();

  Common atk_c;
  std::string atk_gnn, atk_surrogate, atk_poison;
  auto* atk = app.add_subcommand("attack", "train a backdoored prompt model");
  add_common(atk, atk_c, true);
  atk->add_option("--gnn", atk_gnn, "victim GNN checkpoint")->required();
  atk->add_option("--surrogate", atk_surrogate, "surrogate GNN checkpoint (black-box threat)");
  atk->add_option("-o,--out", atk_c.out, "model checkpoint path")->required();
  atk->add_option("--poison-out", atk_poison, "poison set CSV path");

  Common eval_c;
  std::string eval_model, eval_pred;
  auto* eval = app.add_subcommand("eval", "evaluate a model checkpoint on the 1:1 test split");
  add_common(eval, eval_c, true);
  eval->add_option("-m,--model", eval_model, "model checkpoint")->required();
  eval->add_option("--predictions", eval_pred, "write per-sample predictions CSV");

  Common def_c;
  std::string def_model, def_kind = "gnn_svd";
  DefenseConfig def_cfg;
  auto* def = app.add_subcommand("defend", "evaluate a model checkpoint under a defense");
  add_common(def, def_c, true);
  def->add_option("-m,--model", def_model, "model checkpoint")->required();
  def->add_option("--kind", def_kind, "gnn_svd | noisy_fea | noisy_emb");
  def->add_option("--rank", def_cfg.rank);
  def->add_option("--threshold", def_cfg.threshold);
  def->add_option("--sigma", def_cfg.sigma);

  std::string report_dir;
  auto* rep = app.add_subcommand("report", "re-aggregate per-trial reports from an output directory");
  rep->add_option("dir", report_dir)->required();

  Common run_c;
  auto* run = app.add_subcommand("run", "run the full experiment described by a config");
  add_common(run, run_c, true);
  run->add_option("-t,--trials", run_c.trials);
  run->add_option("-o,--output-dir", run_c.output_dir);

  Common demo_c;
  demo_c.config_path = KRAIT_DEMO_CONFIG;
  auto* demo = app.add_subcommand("demo", "run the bundled desk-scale demo");
  add_common(demo, demo_c, false);
  demo->add_option("-t,--trials", demo_c.trials);
  demo->add_option("-o,--output-dir", demo_c.output_dir);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen) {
      const SbmGraph g = generate_sbm(sbm);
      save_graph_json(g.graph, gen_out);
      std::cout << fmt::format("wrote {} ({} nodes, {} edges, label homophily {:.4f})\n", gen_out,
                               g.graph.node_count(), g.graph.edges().size(), g.label_homophily);
    } else if (*pre) {
      Stage s = open_stage(pre_c);
      const PretrainResult r = pretrain_on_graph(s.cfg, s.graph, derive_seed(s.ts, 3));
      save_checkpoint(to_checkpoint(r.params), pre_c.out);
      std::cout << fmt::format("final contrastive loss {:.6f}\n", r.epoch_losses.back());
    } else if (*tune) {
      Stage s = open_stage(tune_c);
      TuneConfig tc = s.cfg.tune;
      tc.seed = derive_seed(s.ts, 4);
      const GnnParams gnn = params_from_checkpoint(load_checkpoint(tune_gnn));
      const auto egos = build_egos(s.graph, s.graph.train_nodes(), s.cfg.hops);
      TuneResult r = default_benign_training(gnn, s.cfg.prompt.token_count, s.graph.num_labels(), tc)(egos);
      PromptModel m{std::move(r.params), std::move(r.prompt), std::nullopt, TriggerOrder::kBeforePrompt};
      save_checkpoint(to_checkpoint(m), tune_c.out);
      std::cout << fmt::format("final tuning loss {:.6f}\n", r.epoch_losses.back());
    } else if (*atk) {
      Stage s = open_stage(atk_c);
      const AttackPlan plan = stage_plan(s);
      const GnnParams gnn = params_from_checkpoint(load_checkpoint(atk_gnn));
      PromptModel model;
      PoisonSet poison;
      if (s.cfg.threat == ThreatModel::kBlackBox) {
        if (atk_surrogate.empty()) throw Error("black-box attack needs --surrogate");
        const GnnParams sur = params_from_checkpoint(load_checkpoint(atk_surrogate));
        TuneConfig tc = s.cfg.tune;
        tc.seed = derive_seed(s.ts, 4);
        auto r = black_box_pipeline(plan, sur, s.graph, s.cfg.hops,
                                    default_benign_training(gnn, s.cfg.prompt.token_count, s.graph.num_labels(), tc));
        model = std::move(r.model);
        poison = std::move(r.poison);
      } else {
        auto r = train_backdoored(plan, gnn, s.graph, s.cfg.hops);
        model = std::move(r.model);
        poison = std::move(r.poison);
      }
      save_checkpoint(to_checkpoint(model), atk_c.out);
      if (!atk_poison.empty()) write_poison_csv(poison, atk_poison);
      std::cout << fmt::format("poisoned {} training nodes\n", poison.entries.size());
    } else if (*eval || *def) {
      const bool defending = def->parsed();
      Stage s = open_stage(defending ? def_c : eval_c);
      const PromptModel model = model_from_checkpoint(load_checkpoint(defending ? def_model : eval_model));
      const TestSplit split = split_test_set(s.graph.test_nodes(), derive_seed(s.ts, 2));
      DefenseConfig dc;
      if (defending) {
        dc = def_cfg;
        dc.kind = parse_defense_kind(def_kind);
        dc.seed = derive_seed(s.ts, 8);
        dc.validate();
      }
      const AttackPlan plan = stage_plan(s);
      std::optional<AttackLabels> labels;
      if (model.trigger) labels = choose_attack_labels(s.graph, plan);
      const PredictionSet preds = predict_split(model, s.graph, split, labels ? &*labels : nullptr, s.cfg.hops, dc);
      if (!defending && !eval_pred.empty()) write_predictions_csv(preds, eval_pred);
      if (labels) {
        print_report(evaluate_attack(preds, plan));
      } else {
        std::vector<int> truth, predicted;
        for (const auto& r : preds.records) {
          truth.push_back(r.true_label);
          predicted.push_back(r.predicted);
        }
        MetricsReport r;
        r.benign_accuracy = accuracy(truth, predicted);
        r.benign_f1 = macro_f1(truth, predicted, s.graph.num_labels());
        print_report(r);
      }
    } else if (*rep) {
      std::vector<MetricsReport> rows;
      for (int t = 0;; ++t) {
        const fs::path f = fs::path(report_dir) / fmt::format("trial_{}", t) / "report.csv";
        if (!fs::exists(f)) break;
        std::ifstream in(f);
        std::string header, line;
        std::getline(in, header);
        std::getline(in, line);
        std::vector<std::string> cells;
        std::stringstream ss(line);
        for (std::string cell; std::getline(ss, cell, ',');) cells.push_back(cell);
        cells.resize(11);
        auto o = [&](int i) { return cells[i].empty() ? std::optional<double>{} : std::stod(cells[i]); };
        MetricsReport r;
        r.asr = o(1);
        r.amc = o(2);
        r.ca = o(3);
        r.pr = o(4);
        r.add = o(5);
        r.ahd = o(6);
        r.benign_accuracy = o(7);
        r.benign_f1 = o(8);
        r.attacked = cells[9].empty() ? 0 : std::stoi(cells[9]);
        r.successes = cells[10].empty() ? 0 : std::stoi(cells[10]);
        rows.push_back(r);
      }
      if (rows.empty()) throw Error("no trial_*/report.csv under " + report_dir);
      const MetricsReport mean = mean_report(rows);
      std::cout << report_csv(rows, &mean);
    } else if (*run || *demo) {
      const ExperimentConfig cfg = resolve(*run ? run_c : demo_c);
      const ExperimentSummary s = run_experiment(cfg);
      std::cout << report_csv(s.trials, &s.mean);
      if (s.defended_mean) {
        std::cout << "defended:\n";
        std::vector<MetricsReport> d;
        for (const auto& r : s.defended) d.push_back(*r);
        std::cout << report_csv(d, &*s.defended_mean);
      }
      std::cout << "artifacts in " << cfg.output_dir << "\n";
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
