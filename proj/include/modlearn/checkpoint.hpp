/*
 * Copyright 2026 The Modlearn Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "modlearn/models.hpp"

namespace modlearn {

/// Checkpoint layout: a directory holding manifest.json (model kind, spaces,
/// layer specs, seeds, parameter index) plus one NPY file per named tensor.
void save_checkpoint(const std::string& dir, Model& model,
                     const std::vector<std::pair<std::string, Tensor>>& extra,
                     std::uint64_t global_seed, bool force = true);

struct CheckpointParam {
  std::string name;
  std::string file;
  Shape shape;
};

struct CheckpointSummary {
  std::string kind;
  std::uint64_t global_seed = 0;
  std::vector<std::string> description_lines;  // human-readable model summary
  std::vector<CheckpointParam> params;
  std::vector<CheckpointParam> extra;
};

/// Parses manifest.json. Throws IoError on a corrupt manifest.
CheckpointSummary read_checkpoint_summary(const std::string& dir);

}  // namespace modlearn
