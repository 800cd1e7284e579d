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

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "modlearn/graph.hpp"
#include "modlearn/tensor.hpp"

namespace modlearn {

/// Max-norm projection constraint on a 2-D weight tensor. With per_column
/// set (the default), each column of the [in, out] matrix -- the incoming
/// weight vector of one output unit -- is kept within the limit.
struct MaxNormConstraint {
  double limit = 1.0;
  bool per_column = true;
};

/// A named, trainable tensor plus its update constraints.
struct Param {
  std::string name;
  Tensor value;
  bool is_weight = false;  // participates in weight decay
  bool non_negative = false;
  std::optional<MaxNormConstraint> max_norm;
};

/// Projects the parameter back into its feasible region, in place.
///
/// Rows/columns whose norm exceeds the limit are rescaled to the limit;
/// a relative guard of 1e-13 on the trigger makes the projection exactly
/// idempotent in floating point. Non-negative parameters are clamped at 0.
void censor_param(Param& p);

/// Tracks the variable node created for each parameter while a model builds
/// a symbolic expression, so training code can bind the current values and
/// request gradients uniformly.
class ExprContext {
 public:
  explicit ExprContext(Graph& g) : graph_(&g) {}

  Graph& graph() { return *graph_; }

  /// Variable node for this parameter (created on first use, named after it).
  NodeRef node_for(Param& p);

  /// Bind every tracked parameter's current value.
  void bind(Bindings& b) const;

  const std::vector<std::pair<Param*, NodeRef>>& entries() const { return entries_; }
  std::optional<NodeRef> node_of(const Param& p) const;

 private:
  Graph* graph_;
  std::vector<std::pair<Param*, NodeRef>> entries_;
};

}  // namespace modlearn
