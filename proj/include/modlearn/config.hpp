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

#include <memory>
#include <string>
#include <vector>

#include "modlearn/diag.hpp"

namespace modlearn::config {

/// Experiment files are written in a YAML subset: block and flow mappings
/// and sequences, plain and quoted scalars, comments, anchors & aliases,
/// plus two extension tags -- `!obj:<type>` constructing a registered
/// object from a mapping, and `!npy:<path>` loading a tensor.
///
/// Aliases resolve to shared node identity: `y: *a` refers to the same
/// Node object its anchor marked, and instantiation later preserves that
/// sharing as shared object identity.

enum class NodeKind { kScalar, kSequence, kMapping, kTagged };
enum class ScalarType { kNull, kBool, kInt, kFloat, kString };

struct Node;
using NodePtr = std::shared_ptr<Node>;

struct MapEntry {
  std::string key;
  NodePtr value;
  int key_line = 0, key_col = 0;
};

struct Node {
  NodeKind kind = NodeKind::kScalar;
  int line = 0, col = 0;  // 1-based source position

  // scalar
  ScalarType stype = ScalarType::kNull;
  bool bval = false;
  long long ival = 0;
  double fval = 0.0;
  std::string sval;

  // sequence / mapping
  std::vector<NodePtr> items;
  std::vector<MapEntry> entries;

  // tagged: tag is the full text after '!', e.g. "obj:train.sgd" or
  // "npy:data/x.npy"; payload is null for npy tags
  std::string tag;
  NodePtr payload;

  const NodePtr* find(const std::string& key) const;
  double as_number() const;  // int or float
};

/// Parses one experiment document. Fails fast with a ConfigError whose
/// diagnostics carry line/column.
NodePtr parse(std::string_view text);
NodePtr parse_file(const std::string& path);

/// Re-serializes a tree in the supported subset. Shared nodes get anchors,
/// so parse(serialize(t)) is equal to t (including the sharing pattern).
std::string serialize(const NodePtr& root);

/// Structural equality that also requires the same node-sharing pattern.
bool deep_equal(const NodePtr& a, const NodePtr& b);

/// Replaces the node at a dotted path ("algorithm.learning_rate",
/// "model.layers.0.dim") with the parsed value text. Tagged nodes are
/// traversed transparently. Throws ConfigError (kBadOverride) when the path
/// does not exist.
void apply_override(const NodePtr& root, const std::string& dotted_path,
                    const std::string& value_text);

}  // namespace modlearn::config
