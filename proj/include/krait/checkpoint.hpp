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
#include <map>
#include <string>

#include "krait/attack.hpp"
#include "krait/gnn.hpp"

namespace krait {

/// Named dense blocks plus string metadata, stored as JSON. Doubles are written
/// in shortest round-trip form, so save followed by load is bit-exact.
struct Checkpoint {
  std::map<std::string, Matrix> blocks;
  std::map<std::string, std::string> meta;
};

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);
std::string checkpoint_to_string(const Checkpoint& checkpoint);
Checkpoint checkpoint_from_string(const std::string& text);

Checkpoint to_checkpoint(const GnnParams& params);
GnnParams params_from_checkpoint(const Checkpoint& checkpoint);
Checkpoint to_checkpoint(const PromptModel& model);
PromptModel model_from_checkpoint(const Checkpoint& checkpoint);

}  // namespace krait
