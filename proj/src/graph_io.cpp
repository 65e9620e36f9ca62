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

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "krait/graph.hpp"

namespace krait {
namespace {

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  return in;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

}  // namespace

LoadedGraph build_graph(std::vector<std::pair<int, int>> raw_edges, Matrix features,
                        std::vector<int> labels, const SplitSpec& split) {
  const int n = static_cast<int>(features.rows());
  if (static_cast<int>(labels.size()) != n) {
    throw Error("label count " + std::to_string(labels.size()) + " != feature rows " + std::to_string(n));
  }
  LoadReport report;
  std::set<Edge> unique;
  for (const auto& [a, b] : raw_edges) {
    if (a < 0 || b < 0 || a >= n || b >= n) {
      throw Error("edge references node " + std::to_string(std::max(a, b)) + " absent from features");
    }
    if (a == b) {
      ++report.self_loops_dropped;
      continue;
    }
    if (!unique.insert(make_edge(a, b)).second) ++report.duplicate_edges_dropped;
  }
  int num_labels = 0;
  for (int y : labels) {
    if (y < 0) throw Error("label " + std::to_string(y) + " out of range");
    num_labels = std::max(num_labels, y + 1);
  }
  std::vector<Edge> edges(unique.begin(), unique.end());
  Graph base(n, std::move(edges), std::move(features), std::move(labels), num_labels,
             std::vector<bool>(n, false), std::vector<bool>(n, false));
  return {assign_split(base, split.train_fraction, split.seed), report};
}

LoadedGraph load_graph(const std::filesystem::path& edge_path,
                       const std::filesystem::path& feature_path,
                       const std::filesystem::path& label_path, const SplitSpec& split) {
  std::vector<std::vector<double>> rows;
  {
    auto in = open_input(feature_path);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      line = trim(line);
      if (line.empty()) continue;
      std::vector<double> row;
      std::stringstream ss(line);
      std::string cell;
      while (std::getline(ss, cell, ',')) {
        try {
          std::size_t used = 0;
          const std::string t = trim(cell);
          row.push_back(std::stod(t, &used));
          if (used != t.size()) throw std::invalid_argument(t);
        } catch (const std::exception&) {
          throw Error(feature_path.string() + ":" + std::to_string(line_no) + ": bad real '" + cell + "'");
        }
      }
      if (!rows.empty() && row.size() != rows.front().size()) {
        throw Error(feature_path.string() + ":" + std::to_string(line_no) + ": ragged feature row (" +
                    std::to_string(row.size()) + " columns, expected " +
                    std::to_string(rows.front().size()) + ")");
      }
      rows.push_back(std::move(row));
    }
  }
  if (rows.empty()) throw Error(feature_path.string() + ": no feature rows");
  Matrix features(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows[i].size(); ++j) features(i, j) = rows[i][j];

  std::vector<int> labels;
  {
    auto in = open_input(label_path);
    std::string line;
    while (std::getline(in, line)) {
      line = trim(line);
      if (line.empty()) continue;
      try {
        labels.push_back(std::stoi(line));
      } catch (const std::exception&) {
        throw Error(label_path.string() + ": bad label '" + line + "'");
      }
    }
  }

  std::vector<std::pair<int, int>> raw;
  {
    auto in = open_input(edge_path);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      line = trim(line);
      if (line.empty() || line.front() == '#') continue;
      std::stringstream ss(line);
      long a = 0, b = 0;
      if (!(ss >> a >> b)) throw Error(edge_path.string() + ":" + std::to_string(line_no) + ": malformed edge");
      raw.emplace_back(static_cast<int>(a), static_cast<int>(b));
    }
  }
  return build_graph(std::move(raw), std::move(features), std::move(labels), split);
}

LoadedGraph load_graph_json(const std::filesystem::path& path, const SplitSpec& split) {
  auto in = open_input(path);
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw Error(path.string() + ": " + e.what());
  }
  try {
    const auto feat = doc.at("features").get<std::vector<std::vector<double>>>();
    const int n = doc.contains("nodes") ? doc.at("nodes").get<int>() : static_cast<int>(feat.size());
    if (static_cast<int>(feat.size()) != n) throw Error(path.string() + ": features rows != nodes");
    const std::size_t dim = feat.empty() ? 0 : feat.front().size();
    Matrix features(n, static_cast<Eigen::Index>(dim));
    for (int i = 0; i < n; ++i) {
      if (feat[i].size() != dim) throw Error(path.string() + ": ragged feature row " + std::to_string(i));
      for (std::size_t j = 0; j < dim; ++j) features(i, j) = feat[i][j];
    }
    const auto raw = doc.at("edges").get<std::vector<std::pair<int, int>>>();
    auto labels = doc.at("labels").get<std::vector<int>>();
    auto loaded = build_graph(raw, std::move(features), labels, split);
    if (doc.contains("num_labels")) {
      const int declared = doc.at("num_labels").get<int>();
      if (declared != loaded.graph.num_labels()) {
        loaded.graph = Graph(loaded.graph.node_count(), loaded.graph.edges(), loaded.graph.features(),
                             loaded.graph.labels(), declared, loaded.graph.train_mask(),
                             loaded.graph.test_mask());
      }
    }
    if (doc.contains("train_mask") && doc.contains("test_mask")) {
      loaded.graph = loaded.graph.with_masks(doc.at("train_mask").get<std::vector<bool>>(),
                                             doc.at("test_mask").get<std::vector<bool>>());
    }
    return loaded;
  } catch (const nlohmann::json::exception& e) {
    throw Error(path.string() + ": " + e.what());
  }
}

void save_graph_json(const Graph& graph, const std::filesystem::path& path) {
  nlohmann::json doc;
  doc["nodes"] = graph.node_count();
  doc["num_labels"] = graph.num_labels();
  auto& edges = doc["edges"] = nlohmann::json::array();
  for (const auto& e : graph.edges()) edges.push_back({e.u, e.v});
  auto& feats = doc["features"] = nlohmann::json::array();
  for (int i = 0; i < graph.node_count(); ++i) {
    std::vector<double> row(graph.features().cols());
    for (int j = 0; j < graph.features().cols(); ++j) row[j] = graph.features()(i, j);
    feats.push_back(row);
  }
  doc["labels"] = graph.labels();
  doc["train_mask"] = graph.train_mask();
  doc["test_mask"] = graph.test_mask();
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << doc.dump() << '\n';
}

}  // namespace krait
