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

#include <optional>
#include <vector>

#include "modlearn/graph.hpp"

namespace modlearn {

namespace {

bool is_scalar_shape(const Shape& s) { return s.empty(); }

}  // namespace

std::vector<NodeRef> Graph::grad(NodeRef target, std::span<const NodeRef> wrt) {
  const int tid = check(target);
  const ExprNode& tn = nodes_[static_cast<std::size_t>(tid)];
  const bool scalar_target =
      tn.shape.empty() || (tn.shape.size() == 1 && tn.shape[0] == 1);
  if (!scalar_target)
    throw ValueError("grad target must be a scalar, got shape " +
                     shape_to_string(tn.shape));

  // Ancestors of the target; nothing else can receive an adjoint.
  std::vector<bool> influences(static_cast<std::size_t>(tid) + 1, false);
  {
    std::vector<int> stack{tid};
    influences[static_cast<std::size_t>(tid)] = true;
    while (!stack.empty()) {
      const int id = stack.back();
      stack.pop_back();
      for (int p : nodes_[static_cast<std::size_t>(id)].parents) {
        if (!influences[static_cast<std::size_t>(p)]) {
          influences[static_cast<std::size_t>(p)] = true;
          stack.push_back(p);
        }
      }
    }
  }

  std::vector<std::optional<NodeRef>> adj(static_cast<std::size_t>(tid) + 1);
  adj[static_cast<std::size_t>(tid)] = constant(Tensor::full(tn.shape, 1.0));

  auto accumulate = [&](int parent, NodeRef contribution) {
    auto& slot = adj[static_cast<std::size_t>(parent)];
    slot = slot ? add(*slot, contribution) : contribution;
  };

  // Sums a contribution down to a scalar when the parent broadcast.
  auto reduce_for = [&](int parent, NodeRef contribution) -> NodeRef {
    const Shape& ps = nodes_[static_cast<std::size_t>(parent)].shape;
    if (is_scalar_shape(ps) && !shape_of(contribution).empty())
      return sum_all(contribution);
    return contribution;
  };

  for (int id = tid; id >= 0; --id) {
    if (!influences[static_cast<std::size_t>(id)] ||
        !adj[static_cast<std::size_t>(id)])
      continue;
    const NodeRef g = *adj[static_cast<std::size_t>(id)];
    // Copy: nodes_ may reallocate while we append gradient nodes.
    const ExprNode n = nodes_[static_cast<std::size_t>(id)];
    const NodeRef self = ref(id);
    auto parent = [&](std::size_t i) { return ref(n.parents[i]); };

    switch (n.op) {
      case Op::kVariable:
      case Op::kConstant:
        break;

      case Op::kAdd:
        accumulate(n.parents[0], reduce_for(n.parents[0], g));
        accumulate(n.parents[1], reduce_for(n.parents[1], g));
        break;
      case Op::kSub:
        accumulate(n.parents[0], reduce_for(n.parents[0], g));
        accumulate(n.parents[1], reduce_for(n.parents[1], neg(g)));
        break;
      case Op::kMul:
      case Op::kDropoutMaskApply:
        accumulate(n.parents[0], reduce_for(n.parents[0], mul(g, parent(1))));
        accumulate(n.parents[1], reduce_for(n.parents[1], mul(g, parent(0))));
        break;
      case Op::kDiv: {
        accumulate(n.parents[0], reduce_for(n.parents[0], div(g, parent(1))));
        NodeRef gb = neg(mul(g, div(self, parent(1))));
        accumulate(n.parents[1], reduce_for(n.parents[1], gb));
        break;
      }
      case Op::kMatmul:
        accumulate(n.parents[0], matmul(g, transpose(parent(1))));
        accumulate(n.parents[1], matmul(transpose(parent(0)), g));
        break;
      case Op::kNeg:
        accumulate(n.parents[0], neg(g));
        break;
      case Op::kExp:
        accumulate(n.parents[0], mul(g, self));
        break;
      case Op::kLog:
        accumulate(n.parents[0], div(g, parent(0)));
        break;
      case Op::kSqrt:
        accumulate(n.parents[0], div(g, mul(scalar_constant(2.0), self)));
        break;
      case Op::kSquare:
        accumulate(n.parents[0], mul(g, mul(scalar_constant(2.0), parent(0))));
        break;
      case Op::kSigmoid:
        accumulate(n.parents[0], mul(g, sub(self, square(self))));
        break;
      case Op::kTanh:
        accumulate(n.parents[0], mul(g, sub(scalar_constant(1.0), square(self))));
        break;
      case Op::kRelu:
        accumulate(n.parents[0], mul(g, apply(Op::kGtZeroMask, {parent(0)})));
        break;
      case Op::kSoftplus:
        accumulate(n.parents[0], mul(g, sigmoid(parent(0))));
        break;
      case Op::kSoftmax: {
        NodeRef s = sum_axis(mul(g, self), 1);
        accumulate(n.parents[0], mul(self, sub(g, broadcast_col(s, self))));
        break;
      }
      case Op::kLogSoftmax: {
        NodeRef s = sum_axis(g, 1);
        accumulate(n.parents[0], sub(g, mul(exp(self), broadcast_col(s, self))));
        break;
      }
      case Op::kSumAll:
        accumulate(n.parents[0], broadcast_like(g, parent(0)));
        break;
      case Op::kMeanAll: {
        NodeRef scaled = div(g, apply(Op::kNumelLike, {parent(0)}));
        accumulate(n.parents[0], broadcast_like(scaled, parent(0)));
        break;
      }
      case Op::kSumAxis:
        accumulate(n.parents[0], n.iattrs[0] == 0 ? broadcast_row(g, parent(0))
                                                  : broadcast_col(g, parent(0)));
        break;
      case Op::kMeanAxis: {
        NodeRef denom = apply(Op::kExtent, {parent(0)}, {n.iattrs[0]});
        NodeRef scaled = div(g, denom);
        accumulate(n.parents[0], n.iattrs[0] == 0
                                     ? broadcast_row(scaled, parent(0))
                                     : broadcast_col(scaled, parent(0)));
        break;
      }
      case Op::kReshape:
      case Op::kReshapeLike:
        accumulate(n.parents[0], reshape_like(g, parent(0)));
        break;
      case Op::kTranspose: {
        std::vector<long long> inverse(n.iattrs.size());
        for (std::size_t i = 0; i < n.iattrs.size(); ++i)
          inverse[static_cast<std::size_t>(n.iattrs[i])] = static_cast<long long>(i);
        accumulate(n.parents[0], transpose(g, inverse));
        break;
      }
      case Op::kBroadcastRow:
        accumulate(n.parents[0], sum_axis(g, 0));
        break;
      case Op::kBroadcastCol:
        accumulate(n.parents[0], sum_axis(g, 1));
        break;
      case Op::kBroadcastLike:
        accumulate(n.parents[0], sum_all(g));
        break;
      case Op::kConcat: {
        long long offset = 0;
        for (std::size_t i = 0; i < n.parents.size(); ++i) {
          const long long len =
              nodes_[static_cast<std::size_t>(n.parents[i])]
                  .shape[static_cast<std::size_t>(n.iattrs[0])];
          accumulate(n.parents[i],
                     apply(Op::kSliceAxis, {g}, {n.iattrs[0], offset, len}));
          offset += len;
        }
        break;
      }
      case Op::kConv2d: {
        // copies: apply() below may reallocate the node vector
        const Shape xs = nodes_[static_cast<std::size_t>(n.parents[0])].shape;
        const Shape ks = nodes_[static_cast<std::size_t>(n.parents[1])].shape;
        accumulate(n.parents[0],
                   apply(Op::kConv2dInputGrad, {g, parent(1)},
                         {xs[2], xs[3], n.iattrs[0], n.iattrs[1]}));
        accumulate(n.parents[1],
                   apply(Op::kConv2dKernelGrad, {g, parent(0)},
                         {ks[2], ks[3], n.iattrs[0], n.iattrs[1]}));
        break;
      }
      case Op::kMaxPool2d:
        accumulate(n.parents[0],
                   apply(Op::kMaxPool2dGrad, {g, parent(0)}, n.iattrs));
        break;
      case Op::kChannelBiasAdd:
        accumulate(n.parents[0], g);
        accumulate(n.parents[1], apply(Op::kSumPerChannel, {g}));
        break;

      case Op::kGtZeroMask:
      case Op::kRowwiseArgmaxNeq:
      case Op::kSumPerChannel:
      case Op::kNumelLike:
      case Op::kExtent:
      case Op::kSliceAxis:
      case Op::kConv2dInputGrad:
      case Op::kConv2dKernelGrad:
      case Op::kMaxPool2dGrad:
        throw ValueError(std::string("op '") + op_name(n.op) +
                         "' is not differentiable");
    }
  }

  std::vector<NodeRef> out;
  out.reserve(wrt.size());
  for (NodeRef w : wrt) {
    const int wid = check(w);
    if (nodes_[static_cast<std::size_t>(wid)].op != Op::kVariable)
      throw ValueError("grad wrt targets must be variables");
    if (wid <= tid && adj[static_cast<std::size_t>(wid)]) {
      out.push_back(*adj[static_cast<std::size_t>(wid)]);
    } else {
      out.push_back(broadcast_like(scalar_constant(0.0), w));
    }
  }
  return out;
}

}  // namespace modlearn
