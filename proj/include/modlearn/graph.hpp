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
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "modlearn/tensor.hpp"

namespace modlearn {

class Graph;

/// Expression operations. Models and costs compose these into symbolic
/// expressions; training algorithms evaluate and differentiate them.
///
/// Elementwise binary ops (add/sub/mul/div) additionally accept a rank-0
/// scalar on either side, which broadcasts against the other operand.
enum class Op : std::uint8_t {
  kVariable,
  kConstant,
  kAdd,
  kSub,
  kMul,
  kDiv,
  kMatmul,
  kNeg,
  kExp,
  kLog,
  kSqrt,
  kSquare,
  kSigmoid,
  kTanh,
  kRelu,
  kSoftplus,
  kSoftmax,      // rows of a 2-D tensor, max-subtracted for stability
  kLogSoftmax,   // rows of a 2-D tensor
  kSumAll,       // -> rank-0 scalar
  kMeanAll,      // -> rank-0 scalar
  kSumAxis,      // 2-D, iattrs = {axis}; the reduced axis is removed
  kMeanAxis,     // 2-D, iattrs = {axis}
  kReshape,      // iattrs = target shape, at most one -1 (inferred)
  kTranspose,    // iattrs = permutation
  kBroadcastRow,    // (row [k], ref [n,k]) -> [n,k]; ref supplies the shape only
  kBroadcastCol,    // (col [n], ref [n,k]) -> [n,k]
  kBroadcastLike,   // (scalar, ref) -> ref shape
  kReshapeLike,     // (x, ref) -> ref shape (element counts must agree)
  kConcat,          // iattrs = {axis}; two or more parents
  kSliceAxis,       // iattrs = {axis, start, len}; gradient-side helper
  kConv2d,          // (input [b,c,h,w], kernels [o,c,kh,kw]); iattrs = {stride, pad}
  kConv2dInputGrad,   // (grad [b,o,h',w'], kernels); iattrs = {in_h, in_w, stride, pad}
  kConv2dKernelGrad,  // (grad [b,o,h',w'], input); iattrs = {kh, kw, stride, pad}
  kMaxPool2d,         // iattrs = {ph, pw, sh, sw}
  kMaxPool2dGrad,     // (grad, input); iattrs as kMaxPool2d; ties go to the first max
  kDropoutMaskApply,  // (x, mask) elementwise product; mask carries the 1/p scale
  kGtZeroMask,        // 1 where x > 0 else 0 (relu subgradient; 0 at 0)
  kRowwiseArgmaxNeq,  // (a [n,k], b [n,k]) -> [n]; 1 where row argmaxes differ; ties -> lowest index
  kChannelBiasAdd,    // (x [b,c,h,w], bias [c])
  kSumPerChannel,     // [b,c,h,w] -> [c]
  kNumelLike,         // -> rank-0 scalar = element count of parent
  kExtent,            // iattrs = {axis}; -> rank-0 scalar = extent of parent axis
};

const char* op_name(Op op);

/// Handle to a node within a specific graph.
struct NodeRef {
  const Graph* graph = nullptr;
  int id = -1;

  bool valid() const { return graph != nullptr && id >= 0; }
  bool operator==(const NodeRef& o) const { return graph == o.graph && id == o.id; }
};

struct ExprNode {
  Op op;
  Shape shape;  // static; may contain the batch wildcard
  std::vector<int> parents;
  std::vector<long long> iattrs;
  std::string name;  // variables only
  Tensor payload;    // constants only
};

/// Map from variable nodes to the tensors bound to them for one evaluation.
class Bindings {
 public:
  void set(NodeRef var, Tensor value);
  const Tensor* find(int id) const;
  bool contains(int id) const { return map_.count(id) != 0; }

 private:
  std::unordered_map<int, Tensor> map_;
};

/// Append-only expression DAG. Nodes are immutable once created; parents
/// always precede children, so node order is a topological order.
///
/// Evaluation is a pure function of (graph, bindings) and is safe to call
/// concurrently from multiple threads with distinct bindings. Construction
/// (including grad, which appends nodes) is single-threaded.
class Graph {
 public:
  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  /// Leaf node. Name must be unique within the graph; at most one axis may
  /// be the batch wildcard.
  NodeRef variable(const std::string& name, Shape shape);

  NodeRef constant(Tensor value);
  NodeRef scalar_constant(double v) { return constant(Tensor::scalar(v)); }

  /// Generic construction; infers the static shape and validates parents.
  NodeRef apply(Op op, std::vector<NodeRef> parents,
                std::vector<long long> iattrs = {});

  // Convenience builders.
  NodeRef add(NodeRef a, NodeRef b) { return apply(Op::kAdd, {a, b}); }
  NodeRef sub(NodeRef a, NodeRef b) { return apply(Op::kSub, {a, b}); }
  NodeRef mul(NodeRef a, NodeRef b) { return apply(Op::kMul, {a, b}); }
  NodeRef div(NodeRef a, NodeRef b) { return apply(Op::kDiv, {a, b}); }
  NodeRef matmul(NodeRef a, NodeRef b) { return apply(Op::kMatmul, {a, b}); }
  NodeRef neg(NodeRef a) { return apply(Op::kNeg, {a}); }
  NodeRef exp(NodeRef a) { return apply(Op::kExp, {a}); }
  NodeRef log(NodeRef a) { return apply(Op::kLog, {a}); }
  NodeRef sqrt(NodeRef a) { return apply(Op::kSqrt, {a}); }
  NodeRef square(NodeRef a) { return apply(Op::kSquare, {a}); }
  NodeRef sigmoid(NodeRef a) { return apply(Op::kSigmoid, {a}); }
  NodeRef tanh(NodeRef a) { return apply(Op::kTanh, {a}); }
  NodeRef relu(NodeRef a) { return apply(Op::kRelu, {a}); }
  NodeRef softplus(NodeRef a) { return apply(Op::kSoftplus, {a}); }
  NodeRef softmax(NodeRef a) { return apply(Op::kSoftmax, {a}); }
  NodeRef log_softmax(NodeRef a) { return apply(Op::kLogSoftmax, {a}); }
  NodeRef sum_all(NodeRef a) { return apply(Op::kSumAll, {a}); }
  NodeRef mean_all(NodeRef a) { return apply(Op::kMeanAll, {a}); }
  NodeRef sum_axis(NodeRef a, long long axis) { return apply(Op::kSumAxis, {a}, {axis}); }
  NodeRef mean_axis(NodeRef a, long long axis) { return apply(Op::kMeanAxis, {a}, {axis}); }
  NodeRef reshape(NodeRef a, Shape target) {
    return apply(Op::kReshape, {a}, std::vector<long long>(target.begin(), target.end()));
  }
  NodeRef transpose(NodeRef a, std::vector<long long> perm) {
    return apply(Op::kTranspose, {a}, std::move(perm));
  }
  /// 2-D transpose.
  NodeRef transpose(NodeRef a) { return transpose(a, {1, 0}); }
  NodeRef broadcast_row(NodeRef row, NodeRef ref) { return apply(Op::kBroadcastRow, {row, ref}); }
  NodeRef broadcast_col(NodeRef col, NodeRef ref) { return apply(Op::kBroadcastCol, {col, ref}); }
  NodeRef broadcast_like(NodeRef s, NodeRef ref) { return apply(Op::kBroadcastLike, {s, ref}); }
  NodeRef reshape_like(NodeRef x, NodeRef ref) { return apply(Op::kReshapeLike, {x, ref}); }
  NodeRef concat(std::vector<NodeRef> parts, long long axis) {
    return apply(Op::kConcat, std::move(parts), {axis});
  }
  NodeRef conv2d(NodeRef x, NodeRef kernels, long long stride, long long pad) {
    return apply(Op::kConv2d, {x, kernels}, {stride, pad});
  }
  NodeRef max_pool_2d(NodeRef x, long long ph, long long pw, long long sh, long long sw) {
    return apply(Op::kMaxPool2d, {x}, {ph, pw, sh, sw});
  }
  NodeRef dropout_mask_apply(NodeRef x, NodeRef mask) {
    return apply(Op::kDropoutMaskApply, {x, mask});
  }
  NodeRef channel_bias_add(NodeRef x, NodeRef bias) {
    return apply(Op::kChannelBiasAdd, {x, bias});
  }

  std::size_t size() const { return nodes_.size(); }
  const ExprNode& node(int id) const { return nodes_[static_cast<std::size_t>(id)]; }
  const Shape& shape_of(NodeRef r) const { return node(check(r)).shape; }
  NodeRef ref(int id) const { return NodeRef{this, id}; }
  std::optional<NodeRef> find_variable(const std::string& name) const;

  /// Forward evaluation of the requested outputs. Every variable reachable
  /// from an output must be bound; shapes are re-validated against the
  /// concrete extents (the batch wildcard resolves here).
  std::vector<Tensor> eval(std::span<const NodeRef> outputs, const Bindings& bindings) const;
  Tensor eval_one(NodeRef output, const Bindings& bindings) const;

  /// Reverse-mode differentiation of a rank-0 (or single-element) target with
  /// respect to variables. Returns symbolic gradient nodes, one per entry of
  /// `wrt`, appended to this graph; existing nodes are never mutated.
  /// Variables the target does not depend on get zero nodes of their shape.
  std::vector<NodeRef> grad(NodeRef target, std::span<const NodeRef> wrt);

 private:
  int check(NodeRef r) const;

  std::vector<ExprNode> nodes_;
  std::unordered_map<std::string, int> variables_;

  friend class Evaluator;
};

namespace detail {
/// Shape rule shared by graph construction (wildcards allowed) and
/// evaluation (concrete extents).
Shape infer_shape(Op op, const std::vector<Shape>& parents,
                  const std::vector<long long>& iattrs);
}  // namespace detail

/// Standalone forward 2-D cross-correlation over a zero-padded input.
/// input [b,c,h,w], kernels [o,c,kh,kw]; out extents
/// h' = floor((h + 2 pad - kh)/stride) + 1 and likewise for w'.
Tensor conv2d_forward(const Tensor& input, const Tensor& kernels,
                      long long stride, long long pad);

/// Adjoint of conv2d_forward with respect to its input.
Tensor conv2d_input_backward(const Tensor& out_grad, const Tensor& kernels,
                             long long in_h, long long in_w, long long stride,
                             long long pad);

/// Adjoint of conv2d_forward with respect to the kernels.
Tensor conv2d_kernel_backward(const Tensor& out_grad, const Tensor& input,
                              long long kh, long long kw, long long stride,
                              long long pad);

}  // namespace modlearn
