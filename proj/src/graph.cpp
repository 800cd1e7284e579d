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

#include "modlearn/graph.hpp"

#include <algorithm>
#include <sstream>

namespace modlearn {

const char* op_name(Op op) {
  switch (op) {
    case Op::kVariable: return "variable";
    case Op::kConstant: return "constant";
    case Op::kAdd: return "add";
    case Op::kSub: return "sub";
    case Op::kMul: return "mul";
    case Op::kDiv: return "div";
    case Op::kMatmul: return "matmul";
    case Op::kNeg: return "neg";
    case Op::kExp: return "exp";
    case Op::kLog: return "log";
    case Op::kSqrt: return "sqrt";
    case Op::kSquare: return "square";
    case Op::kSigmoid: return "sigmoid";
    case Op::kTanh: return "tanh";
    case Op::kRelu: return "relu";
    case Op::kSoftplus: return "softplus";
    case Op::kSoftmax: return "softmax";
    case Op::kLogSoftmax: return "log_softmax";
    case Op::kSumAll: return "sum_all";
    case Op::kMeanAll: return "mean_all";
    case Op::kSumAxis: return "sum_axis";
    case Op::kMeanAxis: return "mean_axis";
    case Op::kReshape: return "reshape";
    case Op::kTranspose: return "transpose";
    case Op::kBroadcastRow: return "broadcast_row";
    case Op::kBroadcastCol: return "broadcast_col";
    case Op::kBroadcastLike: return "broadcast_like";
    case Op::kReshapeLike: return "reshape_like";
    case Op::kConcat: return "concat";
    case Op::kSliceAxis: return "slice_axis";
    case Op::kConv2d: return "conv2d";
    case Op::kConv2dInputGrad: return "conv2d_input_grad";
    case Op::kConv2dKernelGrad: return "conv2d_kernel_grad";
    case Op::kMaxPool2d: return "max_pool_2d";
    case Op::kMaxPool2dGrad: return "max_pool_2d_grad";
    case Op::kDropoutMaskApply: return "dropout_mask_apply";
    case Op::kGtZeroMask: return "gt_zero_mask";
    case Op::kRowwiseArgmaxNeq: return "rowwise_argmax_neq";
    case Op::kChannelBiasAdd: return "channel_bias_add";
    case Op::kSumPerChannel: return "sum_per_channel";
    case Op::kNumelLike: return "numel_like";
    case Op::kExtent: return "extent";
  }
  return "?";
}

namespace {

[[noreturn]] void shape_fail(Op op, const std::string& detail) {
  throw ShapeError(std::string(op_name(op)) + ": " + detail);
}

// Unifies two extents where kWild matches anything.
long long unify(Op op, long long a, long long b, const char* what) {
  if (a == kWild) return b;
  if (b == kWild) return a;
  if (a != b)
    shape_fail(op, std::string(what) + " mismatch (" + std::to_string(a) +
                       " vs " + std::to_string(b) + ")");
  return a;
}

Shape unify_shapes(Op op, const Shape& a, const Shape& b) {
  if (a.size() != b.size())
    shape_fail(op, "rank mismatch (" + shape_to_string(a) + " vs " +
                       shape_to_string(b) + ")");
  Shape out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = unify(op, a[i], b[i], "extent");
  return out;
}

bool is_scalar(const Shape& s) { return s.empty(); }

void require_rank(Op op, const Shape& s, std::size_t r) {
  if (s.size() != r)
    shape_fail(op, "expected rank " + std::to_string(r) + ", got " +
                       shape_to_string(s));
}

void require_parents(Op op, std::size_t got, std::size_t want) {
  if (got != want)
    shape_fail(op, "expected " + std::to_string(want) + " parents, got " +
                       std::to_string(got));
}

}  // namespace

int Graph::check(NodeRef r) const {
  if (r.graph != this) throw ValueError("node reference belongs to another graph");
  if (r.id < 0 || static_cast<std::size_t>(r.id) >= nodes_.size())
    throw ValueError("node reference out of range");
  return r.id;
}

std::optional<NodeRef> Graph::find_variable(const std::string& name) const {
  auto it = variables_.find(name);
  if (it == variables_.end()) return std::nullopt;
  return ref(it->second);
}

NodeRef Graph::variable(const std::string& name, Shape shape) {
  if (variables_.count(name))
    throw ValueError("duplicate variable name '" + name + "'");
  int wildcards = 0;
  for (long long e : shape) {
    if (e == kWild)
      ++wildcards;
    else if (e < 0)
      throw ShapeError("variable '" + name + "': negative extent in " +
                       shape_to_string(shape));
  }
  if (wildcards > 1)
    throw ShapeError("variable '" + name + "': at most one wildcard axis");
  ExprNode n;
  n.op = Op::kVariable;
  n.shape = std::move(shape);
  n.name = name;
  int id = static_cast<int>(nodes_.size());
  nodes_.push_back(std::move(n));
  variables_[name] = id;
  return ref(id);
}

NodeRef Graph::constant(Tensor value) {
  ExprNode n;
  n.op = Op::kConstant;
  n.shape = value.shape();
  n.payload = std::move(value);
  nodes_.push_back(std::move(n));
  return ref(static_cast<int>(nodes_.size()) - 1);
}

Shape detail::infer_shape(Op op, const std::vector<Shape>& parents,
                          const std::vector<long long>& iattrs) {
  auto ps = [&](std::size_t i) -> const Shape& { return parents[i]; };

  switch (op) {
    case Op::kVariable:
    case Op::kConstant:
      shape_fail(op, "not constructed through apply()");

    case Op::kAdd:
    case Op::kSub:
    case Op::kMul:
    case Op::kDiv: {
      require_parents(op, parents.size(), 2);
      const Shape& a = ps(0);
      const Shape& b = ps(1);
      if (is_scalar(a) && !is_scalar(b)) return b;
      if (is_scalar(b) && !is_scalar(a)) return a;
      return unify_shapes(op, a, b);
    }

    case Op::kMatmul: {
      require_parents(op, parents.size(), 2);
      const Shape& a = ps(0);
      const Shape& b = ps(1);
      require_rank(op, a, 2);
      require_rank(op, b, 2);
      if (a[1] != kWild && b[0] != kWild && a[1] != b[0])
        shape_fail(op, "inner extents differ: " + shape_to_string(a) + " x " +
                           shape_to_string(b));
      return Shape{a[0], b[1]};
    }

    case Op::kNeg:
    case Op::kExp:
    case Op::kLog:
    case Op::kSqrt:
    case Op::kSquare:
    case Op::kSigmoid:
    case Op::kTanh:
    case Op::kRelu:
    case Op::kSoftplus:
    case Op::kGtZeroMask: {
      require_parents(op, parents.size(), 1);
      return ps(0);
    }

    case Op::kSoftmax:
    case Op::kLogSoftmax: {
      require_parents(op, parents.size(), 1);
      require_rank(op, ps(0), 2);
      return ps(0);
    }

    case Op::kSumAll:
    case Op::kMeanAll:
    case Op::kNumelLike: {
      require_parents(op, parents.size(), 1);
      return Shape{};
    }

    case Op::kExtent: {
      require_parents(op, parents.size(), 1);
      if (iattrs.size() != 1 || iattrs[0] < 0 ||
          static_cast<std::size_t>(iattrs[0]) >= ps(0).size())
        shape_fail(op, "bad axis");
      return Shape{};
    }

    case Op::kSumAxis:
    case Op::kMeanAxis: {
      require_parents(op, parents.size(), 1);
      const Shape& a = ps(0);
      require_rank(op, a, 2);
      if (iattrs.size() != 1 || (iattrs[0] != 0 && iattrs[0] != 1))
        shape_fail(op, "axis must be 0 or 1");
      return iattrs[0] == 0 ? Shape{a[1]} : Shape{a[0]};
    }

    case Op::kReshape: {
      require_parents(op, parents.size(), 1);
      Shape target(iattrs.begin(), iattrs.end());
      int inferred = 0;
      long long known = 1;
      for (long long e : target) {
        if (e == kWild)
          ++inferred;
        else if (e < 0)
          shape_fail(op, "negative extent in target " + shape_to_string(target));
        else
          known *= e;
      }
      if (inferred > 1) shape_fail(op, "at most one inferred extent");
      const Shape& a = ps(0);
      if (shape_is_concrete(a)) {
        const long long total = static_cast<long long>(shape_numel(a));
        if (inferred == 1) {
          if (known == 0 || total % known != 0)
            shape_fail(op, "cannot infer extent reshaping " + shape_to_string(a) +
                               " to " + shape_to_string(target));
          for (long long& e : target)
            if (e == kWild) e = total / known;
        } else if (total != known) {
          shape_fail(op, "element count mismatch reshaping " + shape_to_string(a) +
                             " to " + shape_to_string(target));
        }
      }
      return target;
    }

    case Op::kTranspose: {
      require_parents(op, parents.size(), 1);
      const Shape& a = ps(0);
      if (iattrs.size() != a.size()) shape_fail(op, "permutation rank mismatch");
      std::vector<bool> seen(a.size(), false);
      Shape out(a.size());
      for (std::size_t i = 0; i < a.size(); ++i) {
        long long p = iattrs[i];
        if (p < 0 || static_cast<std::size_t>(p) >= a.size() ||
            seen[static_cast<std::size_t>(p)])
          shape_fail(op, "invalid permutation");
        seen[static_cast<std::size_t>(p)] = true;
        out[i] = a[static_cast<std::size_t>(p)];
      }
      return out;
    }

    case Op::kBroadcastRow: {
      require_parents(op, parents.size(), 2);
      const Shape& row = ps(0);
      const Shape& r = ps(1);
      require_rank(op, row, 1);
      require_rank(op, r, 2);
      return Shape{r[0], unify(op, row[0], r[1], "row width")};
    }

    case Op::kBroadcastCol: {
      require_parents(op, parents.size(), 2);
      const Shape& col = ps(0);
      const Shape& r = ps(1);
      require_rank(op, col, 1);
      require_rank(op, r, 2);
      return Shape{unify(op, col[0], r[0], "column height"), r[1]};
    }

    case Op::kBroadcastLike: {
      require_parents(op, parents.size(), 2);
      require_rank(op, ps(0), 0);
      return ps(1);
    }

    case Op::kReshapeLike: {
      require_parents(op, parents.size(), 2);
      const Shape& a = ps(0);
      const Shape& r = ps(1);
      if (shape_is_concrete(a) && shape_is_concrete(r) &&
          shape_numel(a) != shape_numel(r))
        shape_fail(op, "element count mismatch (" + shape_to_string(a) + " vs " +
                           shape_to_string(r) + ")");
      return r;
    }

    case Op::kConcat: {
      if (parents.size() < 2) shape_fail(op, "needs at least two parents");
      if (iattrs.size() != 1) shape_fail(op, "missing axis");
      const long long axis = iattrs[0];
      Shape out = ps(0);
      if (axis < 0 || static_cast<std::size_t>(axis) >= out.size())
        shape_fail(op, "bad axis");
      const auto ax = static_cast<std::size_t>(axis);
      if (out[ax] == kWild) shape_fail(op, "concat axis may not be the batch wildcard");
      for (std::size_t i = 1; i < parents.size(); ++i) {
        const Shape& s = ps(i);
        if (s.size() != out.size()) shape_fail(op, "rank mismatch");
        for (std::size_t a2 = 0; a2 < s.size(); ++a2) {
          if (a2 == ax) {
            if (s[a2] == kWild) shape_fail(op, "concat axis may not be the batch wildcard");
            out[a2] += s[a2];
          } else {
            out[a2] = unify(op, out[a2], s[a2], "extent");
          }
        }
      }
      return out;
    }

    case Op::kSliceAxis: {
      require_parents(op, parents.size(), 1);
      if (iattrs.size() != 3) shape_fail(op, "wants {axis, start, len}");
      const Shape& a = ps(0);
      const long long axis = iattrs[0], start = iattrs[1], len = iattrs[2];
      if (axis < 0 || static_cast<std::size_t>(axis) >= a.size())
        shape_fail(op, "bad axis");
      if (start < 0 || len < 0) shape_fail(op, "negative start/len");
      const long long e = a[static_cast<std::size_t>(axis)];
      if (e != kWild && start + len > e) shape_fail(op, "slice out of range");
      Shape out = a;
      out[static_cast<std::size_t>(axis)] = len;
      return out;
    }

    case Op::kConv2d: {
      require_parents(op, parents.size(), 2);
      const Shape& x = ps(0);
      const Shape& k = ps(1);
      require_rank(op, x, 4);
      require_rank(op, k, 4);
      if (iattrs.size() != 2) shape_fail(op, "wants {stride, pad}");
      const long long stride = iattrs[0], pad = iattrs[1];
      if (stride < 1) shape_fail(op, "stride must be >= 1");
      if (pad < 0) shape_fail(op, "negative padding");
      unify(op, x[1], k[1], "input channels");
      for (std::size_t i : {std::size_t{2}, std::size_t{3}}) {
        if (x[i] == kWild || k[i] == kWild)
          shape_fail(op, "spatial extents must be concrete");
      }
      const long long oh = x[2] + 2 * pad - k[2];
      const long long ow = x[3] + 2 * pad - k[3];
      if (oh < 0 || ow < 0)
        shape_fail(op, "kernel " + shape_to_string(k) + " larger than padded input " +
                           shape_to_string(x) + " (pad " + std::to_string(pad) + ")");
      return Shape{x[0], k[0], oh / stride + 1, ow / stride + 1};
    }

    case Op::kConv2dInputGrad: {
      require_parents(op, parents.size(), 2);
      const Shape& g = ps(0);
      const Shape& k = ps(1);
      require_rank(op, g, 4);
      require_rank(op, k, 4);
      if (iattrs.size() != 4) shape_fail(op, "wants {in_h, in_w, stride, pad}");
      unify(op, g[1], k[0], "output channels");
      return Shape{g[0], k[1], iattrs[0], iattrs[1]};
    }

    case Op::kConv2dKernelGrad: {
      require_parents(op, parents.size(), 2);
      const Shape& g = ps(0);
      const Shape& x = ps(1);
      require_rank(op, g, 4);
      require_rank(op, x, 4);
      if (iattrs.size() != 4) shape_fail(op, "wants {kh, kw, stride, pad}");
      unify(op, g[0], x[0], "batch");
      return Shape{g[1], x[1], iattrs[0], iattrs[1]};
    }

    case Op::kMaxPool2d: {
      require_parents(op, parents.size(), 1);
      const Shape& x = ps(0);
      require_rank(op, x, 4);
      if (iattrs.size() != 4) shape_fail(op, "wants {ph, pw, sh, sw}");
      const long long ph = iattrs[0], pw = iattrs[1], sh = iattrs[2], sw = iattrs[3];
      if (ph < 1 || pw < 1 || sh < 1 || sw < 1) shape_fail(op, "bad pool geometry");
      if (x[2] == kWild || x[3] == kWild)
        shape_fail(op, "spatial extents must be concrete");
      if (ph > x[2] || pw > x[3]) shape_fail(op, "pool window larger than input");
      return Shape{x[0], x[1], (x[2] - ph) / sh + 1, (x[3] - pw) / sw + 1};
    }

    case Op::kMaxPool2dGrad: {
      require_parents(op, parents.size(), 2);
      return ps(1);
    }

    case Op::kDropoutMaskApply: {
      require_parents(op, parents.size(), 2);
      return unify_shapes(op, ps(0), ps(1));
    }

    case Op::kRowwiseArgmaxNeq: {
      require_parents(op, parents.size(), 2);
      require_rank(op, ps(0), 2);
      Shape s = unify_shapes(op, ps(0), ps(1));
      return Shape{s[0]};
    }

    case Op::kChannelBiasAdd: {
      require_parents(op, parents.size(), 2);
      const Shape& x = ps(0);
      const Shape& b = ps(1);
      require_rank(op, x, 4);
      require_rank(op, b, 1);
      unify(op, x[1], b[0], "channels");
      return x;
    }

    case Op::kSumPerChannel: {
      require_parents(op, parents.size(), 1);
      const Shape& x = ps(0);
      require_rank(op, x, 4);
      return Shape{x[1]};
    }
  }
  shape_fail(op, "unhandled op");
}

NodeRef Graph::apply(Op op, std::vector<NodeRef> parents,
                     std::vector<long long> iattrs) {
  if (op == Op::kVariable || op == Op::kConstant)
    throw ValueError("use variable()/constant() for leaf nodes");
  ExprNode n;
  n.op = op;
  n.parents.reserve(parents.size());
  for (NodeRef p : parents) n.parents.push_back(check(p));
  n.iattrs = std::move(iattrs);
  std::vector<Shape> parent_shapes;
  parent_shapes.reserve(n.parents.size());
  for (int p : n.parents) parent_shapes.push_back(nodes_[static_cast<std::size_t>(p)].shape);
  n.shape = detail::infer_shape(op, parent_shapes, n.iattrs);
  nodes_.push_back(std::move(n));
  return ref(static_cast<int>(nodes_.size()) - 1);
}

void Bindings::set(NodeRef var, Tensor value) {
  if (!var.valid()) throw ValueError("binding an invalid node reference");
  map_[var.id] = std::move(value);
}

const Tensor* Bindings::find(int id) const {
  auto it = map_.find(id);
  return it == map_.end() ? nullptr : &it->second;
}

}  // namespace modlearn
