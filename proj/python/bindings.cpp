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

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <fstream>
#include <sstream>

#include "krait/attack.hpp"
#include "krait/defense.hpp"
#include "krait/graph.hpp"
#include "krait/harness.hpp"
#include "krait/metrics.hpp"

namespace py = pybind11;
using namespace krait;

namespace {

std::vector<std::pair<int, int>> edge_pairs(const std::vector<Edge>& edges) {
  std::vector<std::pair<int, int>> out;
  out.reserve(edges.size());
  for (const auto& e : edges) out.emplace_back(e.u, e.v);
  return out;
}

Subgraph bare_subgraph(int n, const std::vector<std::pair<int, int>>& edges) {
  Subgraph s;
  s.features = Matrix::Zero(n, 1);
  for (auto [a, b] : edges) {
    if (a == b || a < 0 || b < 0 || a >= n || b >= n) throw Error("edge out of range or self-loop");
    s.edges.push_back(make_edge(a, b));
  }
  std::sort(s.edges.begin(), s.edges.end());
  s.edges.erase(std::unique(s.edges.begin(), s.edges.end()), s.edges.end());
  s.roles.assign(n, NodeRole::kEgo);
  s.origin.resize(n);
  for (int i = 0; i < n; ++i) s.origin[i] = i;
  s.token_slot.assign(n, -1);
  return s;
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Graph prompt backdoor experiments: graphs, metrics, poisoning and the experiment harness";
  py::register_exception<Error>(m, "KraitError", PyExc_ValueError);

  py::class_<Graph>(m, "Graph")
      .def_property_readonly("node_count", &Graph::node_count)
      .def_property_readonly("num_labels", &Graph::num_labels)
      .def_property_readonly("feature_dim", &Graph::feature_dim)
      .def_property_readonly("edges", [](const Graph& g) { return edge_pairs(g.edges()); })
      .def_property_readonly("features", [](const Graph& g) { return g.features(); })
      .def_property_readonly("labels", [](const Graph& g) { return g.labels(); })
      .def_property_readonly("train_mask", [](const Graph& g) { return g.train_mask(); })
      .def_property_readonly("test_mask", [](const Graph& g) { return g.test_mask(); })
      .def("degree", &Graph::degree, py::arg("v"))
      .def("neighbors", [](const Graph& g, int v) {
        if (v < 0 || v >= g.node_count()) throw Error("node out of range");
        auto nb = g.neighbors(v);
        return std::vector<int>(nb.begin(), nb.end());
      })
      .def("label_homophily", &Graph::label_homophily)
      .def("save_json", [](const Graph& g, const std::filesystem::path& p) { save_graph_json(g, p); })
      .def("__repr__", [](const Graph& g) {
        return "<Graph nodes=" + std::to_string(g.node_count()) + " edges=" + std::to_string(g.edges().size()) +
               " labels=" + std::to_string(g.num_labels()) + ">";
      });

  m.def(
      "generate_sbm",
      [](int classes, int nodes_per_class, double p_in, double p_out, int feature_dim, double class_sep,
         double train_fraction, Seed seed) {
        return generate_sbm({classes, nodes_per_class, p_in, p_out, feature_dim, class_sep, train_fraction, seed})
            .graph;
      },
      py::arg("classes") = 4, py::arg("nodes_per_class") = 100, py::arg("p_in") = 0.3, py::arg("p_out") = 0.03,
      py::arg("feature_dim") = 32, py::arg("class_sep") = 3.0, py::arg("train_fraction") = 0.5, py::arg("seed") = 0);
  m.def(
      "load_graph",
      [](const std::filesystem::path& edges, const std::filesystem::path& features,
         const std::filesystem::path& labels, double train_fraction, Seed seed) {
        return load_graph(edges, features, labels, {train_fraction, seed}).graph;
      },
      py::arg("edge_path"), py::arg("feature_path"), py::arg("label_path"), py::arg("train_fraction") = 0.5,
      py::arg("seed") = 0);
  m.def(
      "load_graph_json",
      [](const std::filesystem::path& path, double train_fraction, Seed seed) {
        return load_graph_json(path, {train_fraction, seed}).graph;
      },
      py::arg("path"), py::arg("train_fraction") = 0.5, py::arg("seed") = 0);
  m.def(
      "ego_network",
      [](const Graph& g, int center, int k) {
        const auto ego = ego_network(g, center, k);
        return py::make_tuple(ego.nodes, edge_pairs(ego.local_edges));
      },
      py::arg("graph"), py::arg("center"), py::arg("k"), "Returns (node ids, local edges).");
  m.def("svd_reduce_features", &svd_reduce_features, py::arg("features"), py::arg("target_dim"));

  m.def("lnh_score", py::overload_cast<const Graph&, int>(&lnh_score), py::arg("graph"), py::arg("v"));
  m.def(
      "label_nonuniformity", [](const std::vector<double>& p) { return label_nonuniformity(p); },
      py::arg("soft_prediction"));
  m.def("global_view_homophily", &global_view_homophily, py::arg("graph"), py::arg("embeddings"));
  m.def(
      "accuracy", [](const std::vector<int>& t, const std::vector<int>& p) { return accuracy(t, p); },
      py::arg("truth"), py::arg("predicted"));
  m.def(
      "macro_f1",
      [](const std::vector<int>& t, const std::vector<int>& p, int n) { return macro_f1(t, p, n); },
      py::arg("truth"), py::arg("predicted"), py::arg("num_labels"));
  m.def(
      "project_embeddings_2d",
      [](const Matrix& z) {
        const auto p = project_embeddings_2d(z);
        return py::make_tuple(p.coordinates, std::vector<double>{p.explained[0], p.explained[1]});
      },
      py::arg("embeddings"), "Returns (n x 2 coordinates, explained variance fractions).");

  m.def(
      "select_poisoned",
      [](const Graph& g, const std::string& attack_type, double poisoning_rate, std::optional<int> degree_threshold,
         const std::string& target_policy) {
        AttackPlan plan;
        plan.attack_type = parse_attack_type(attack_type);
        plan.poisoning_rate = poisoning_rate;
        plan.degree_threshold = degree_threshold;
        if (target_policy == "smallest") {
          plan.target_policy = TargetPolicy::kSmallest;
        } else if (target_policy != "largest") {
          throw Error("target_policy must be 'largest' or 'smallest'");
        }
        const auto sel = select_poisoned_candidates(g, plan);
        std::vector<std::tuple<int, int, int>> out;
        for (const auto& e : sel.poison.entries) out.emplace_back(e.node, e.original_label, e.flipped_label);
        return out;
      },
      py::arg("graph"), py::arg("attack_type") = "one-to-one", py::arg("poisoning_rate") = 0.05,
      py::arg("degree_threshold") = py::none(), py::arg("target_policy") = "largest",
      "Returns (node, original label, flipped label) triples in selection order.");

  m.def(
      "gnn_svd_filter",
      [](int n, const std::vector<std::pair<int, int>>& edges, int rank, double threshold) {
        return edge_pairs(gnn_svd_filter(bare_subgraph(n, edges), rank, threshold).edges);
      },
      py::arg("node_count"), py::arg("edges"), py::arg("rank") = 10, py::arg("threshold") = 0.5);
  m.def("inject_embedding_noise", &inject_embedding_noise, py::arg("embedding"), py::arg("sigma") = 0.1,
        py::arg("seed") = 0);
  m.def("derive_seed", &derive_seed, py::arg("parent"), py::arg("stream"));

  m.def(
      "normalize_config", [](const std::string& text) {
        const auto c = config_from_json(text);
        c.validate();
        return config_to_json(c);
      },
      py::arg("json_text"), "Parses, validates and re-serializes an experiment config with all defaults filled in.");
  m.def(
      "run_experiment",
      [](const std::string& text) {
        const auto c = config_from_json(text);
        {
          py::gil_scoped_release release;
          run_experiment(c);
        }
        return read_text(std::filesystem::path(c.output_dir) / "summary.json");
      },
      py::arg("json_text"), "Runs every trial, writes artifacts to output_dir and returns summary.json's text.");
  m.def("constraint_evaluations", &constraint_evaluations);
}
