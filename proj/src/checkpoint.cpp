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

#include "krait/checkpoint.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

namespace krait {
namespace {

using nlohmann::json;

constexpr const char* kFormat = "krait-checkpoint";
constexpr int kVersion = 1;

const Matrix& block(const Checkpoint& c, const std::string& name) {
  auto it = c.blocks.find(name);
  if (it == c.blocks.end()) throw Error("checkpoint: missing block '" + name + "'");
  return it->second;
}

const std::string& meta(const Checkpoint& c, const std::string& key) {
  auto it = c.meta.find(key);
  if (it == c.meta.end()) throw Error("checkpoint: missing meta key '" + key + "'");
  return it->second;
}

std::string flag(bool b) { return b ? "1" : "0"; }
bool parse_flag(const std::string& s) { return s == "1"; }

std::string real(double x) { return json(x).dump(); }
double parse_real(const std::string& s) { return json::parse(s).get<double>(); }

void put_params(Checkpoint& c, const GnnParams& p) {
  c.blocks["gnn.layer1"] = p.layer1;
  c.blocks["gnn.layer2"] = p.layer2;
  c.blocks["gnn.classifier"] = p.classifier;
  c.blocks["gnn.classifier_bias"] = p.classifier_bias;
  c.meta["gnn.frozen.layer1"] = flag(p.frozen.layer1);
  c.meta["gnn.frozen.layer2"] = flag(p.frozen.layer2);
  c.meta["gnn.frozen.classifier"] = flag(p.frozen.classifier);
}

void put_prompt(Checkpoint& c, const std::string& prefix, const GraphPrompt& p) {
  c.blocks[prefix + ".tokens"] = p.tokens;
  c.meta[prefix + ".inner_threshold"] = real(p.inner_threshold);
  c.meta[prefix + ".cross_threshold"] = real(p.cross_threshold);
  c.meta[prefix + ".learnable"] = flag(p.learnable);
}

GraphPrompt get_prompt(const Checkpoint& c, const std::string& prefix) {
  GraphPrompt p;
  p.tokens = block(c, prefix + ".tokens");
  p.inner_threshold = parse_real(meta(c, prefix + ".inner_threshold"));
  p.cross_threshold = parse_real(meta(c, prefix + ".cross_threshold"));
  p.learnable = parse_flag(meta(c, prefix + ".learnable"));
  return p;
}

}  // namespace

std::string checkpoint_to_string(const Checkpoint& checkpoint) {
  json blocks = json::array();
  for (const auto& [name, m] : checkpoint.blocks) {
    json data = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      for (Eigen::Index j = 0; j < m.cols(); ++j) data.push_back(m(i, j));
    blocks.push_back({{"name", name}, {"rows", m.rows()}, {"cols", m.cols()}, {"data", std::move(data)}});
  }
  json doc = {{"format", kFormat}, {"version", kVersion}, {"meta", checkpoint.meta}, {"blocks", blocks}};
  return doc.dump(1) + "\n";
}

Checkpoint checkpoint_from_string(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(std::string("checkpoint: malformed JSON: ") + e.what());
  }
  if (doc.value("format", "") != kFormat) throw Error("checkpoint: not a krait checkpoint");
  if (doc.value("version", 0) != kVersion) throw Error("checkpoint: unsupported version");
  Checkpoint c;
  try {
    c.meta = doc.at("meta").get<std::map<std::string, std::string>>();
    for (const auto& b : doc.at("blocks")) {
      const auto rows = b.at("rows").get<Eigen::Index>();
      const auto cols = b.at("cols").get<Eigen::Index>();
      const auto& data = b.at("data");
      if (rows < 0 || cols < 0 || static_cast<Eigen::Index>(data.size()) != rows * cols) {
        throw Error("checkpoint: block '" + b.at("name").get<std::string>() + "' has inconsistent shape");
      }
      Matrix m(rows, cols);
      for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = data[i * cols + j].get<double>();
      c.blocks[b.at("name").get<std::string>()] = std::move(m);
    }
  } catch (const json::exception& e) {
    throw Error(std::string("checkpoint: ") + e.what());
  }
  return c;
}

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << checkpoint_to_string(checkpoint);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return checkpoint_from_string(ss.str());
}

Checkpoint to_checkpoint(const GnnParams& params) {
  Checkpoint c;
  put_params(c, params);
  c.meta["kind"] = "gnn";
  return c;
}

GnnParams params_from_checkpoint(const Checkpoint& c) {
  GnnParams p;
  p.layer1 = block(c, "gnn.layer1");
  p.layer2 = block(c, "gnn.layer2");
  p.classifier = block(c, "gnn.classifier");
  const Matrix& bias = block(c, "gnn.classifier_bias");
  if (bias.cols() != 1) throw Error("checkpoint: classifier bias must be a column");
  p.classifier_bias = bias.col(0);
  p.frozen.layer1 = parse_flag(meta(c, "gnn.frozen.layer1"));
  p.frozen.layer2 = parse_flag(meta(c, "gnn.frozen.layer2"));
  p.frozen.classifier = parse_flag(meta(c, "gnn.frozen.classifier"));
  p.validate();
  return p;
}

Checkpoint to_checkpoint(const PromptModel& model) {
  Checkpoint c;
  put_params(c, model.params);
  put_prompt(c, "prompt", model.prompt);
  if (model.trigger) put_prompt(c, "trigger", *model.trigger);
  c.meta["kind"] = "prompt-model";
  c.meta["trigger.order"] = model.order == TriggerOrder::kBeforePrompt ? "before" : "after";
  return c;
}

PromptModel model_from_checkpoint(const Checkpoint& c) {
  PromptModel m;
  m.params = params_from_checkpoint(c);
  m.prompt = get_prompt(c, "prompt");
  if (c.blocks.count("trigger.tokens")) m.trigger = get_prompt(c, "trigger");
  auto it = c.meta.find("trigger.order");
  m.order = (it != c.meta.end() && it->second == "after") ? TriggerOrder::kAfterPrompt : TriggerOrder::kBeforePrompt;
  return m;
}

}  // namespace krait
