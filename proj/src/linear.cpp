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

#include "modlearn/linear.hpp"

#include <cmath>

namespace modlearn {

NodeRef ExprContext::node_for(Param& p) {
  for (auto& [param, node] : entries_)
    if (param == &p) return node;
  NodeRef node = graph_->variable(p.name, p.value.shape());
  entries_.emplace_back(&p, node);
  return node;
}

void ExprContext::bind(Bindings& b) const {
  for (const auto& [param, node] : entries_) b.set(node, param->value);
}

std::optional<NodeRef> ExprContext::node_of(const Param& p) const {
  for (const auto& [param, node] : entries_)
    if (param == &p) return node;
  return std::nullopt;
}

void censor_param(Param& p) {
  if (p.max_norm) {
    if (p.value.rank() != 2)
      throw ShapeError("max-norm constraint requires a 2-D parameter, got " +
                       shape_to_string(p.value.shape()));
    const double limit = p.max_norm->limit;
    const double guard = limit * (1.0 + 1e-13);
    const std::size_t rows = static_cast<std::size_t>(p.value.extent(0));
    const std::size_t cols = static_cast<std::size_t>(p.value.extent(1));
    if (p.max_norm->per_column) {
      for (std::size_t j = 0; j < cols; ++j) {
        double sq = 0.0;
        for (std::size_t i = 0; i < rows; ++i) sq += p.value.at(i, j) * p.value.at(i, j);
        const double norm = std::sqrt(sq);
        if (norm > guard) {
          const double scale = limit / norm;
          for (std::size_t i = 0; i < rows; ++i) p.value.at(i, j) *= scale;
        }
      }
    } else {
      for (std::size_t i = 0; i < rows; ++i) {
        double sq = 0.0;
        for (std::size_t j = 0; j < cols; ++j) sq += p.value.at(i, j) * p.value.at(i, j);
        const double norm = std::sqrt(sq);
        if (norm > guard) {
          const double scale = limit / norm;
          for (std::size_t j = 0; j < cols; ++j) p.value.at(i, j) *= scale;
        }
      }
    }
  }
  if (p.non_negative) {
    for (double& v : p.value.data())
      if (v < 0.0) v = 0.0;
  }
}

Tensor LinearTransform::as_dense() {
  const long long n = num_elements(input_space());
  Batch identity{Tensor::eye(static_cast<std::size_t>(n)), VectorSpace{n}};
  Batch out = lmul_eval(*this, format_as(identity, input_space()));
  return format_as(out, VectorSpace{num_elements(output_space())}).tensor;
}

DenseTransform::DenseTransform(Tensor w, std::string param_name) {
  if (w.rank() != 2)
    throw ShapeError("DenseTransform wants a [in, out] matrix, got " +
                     shape_to_string(w.shape()));
  in_ = VectorSpace{w.extent(0)};
  out_ = VectorSpace{w.extent(1)};
  weights_ = Param{std::move(param_name), std::move(w), /*is_weight=*/true};
}

NodeRef DenseTransform::lmul(ExprContext& ctx, NodeRef x) {
  return ctx.graph().matmul(x, ctx.node_for(weights_));
}

NodeRef DenseTransform::lmul_T(ExprContext& ctx, NodeRef y) {
  return ctx.graph().matmul(y, ctx.graph().transpose(ctx.node_for(weights_)));
}

Conv2DTransform::Conv2DTransform(Tensor kernels, Conv2DSpace input,
                                 long long stride, long long pad,
                                 std::string param_name)
    : stride_(stride), pad_(pad) {
  if (kernels.rank() != 4)
    throw ShapeError("Conv2DTransform wants [out_ch, in_ch, kh, kw] kernels, got " +
                     shape_to_string(kernels.shape()));
  if (kernels.extent(1) != input.channels)
    throw ShapeError("kernel input channels " + std::to_string(kernels.extent(1)) +
                     " != space channels " + std::to_string(input.channels));
  if (stride < 1) throw ValueError("stride must be >= 1");
  if (pad < 0) throw ValueError("padding must be >= 0");
  const long long oh = input.rows + 2 * pad - kernels.extent(2);
  const long long ow = input.cols + 2 * pad - kernels.extent(3);
  if (oh < 0 || ow < 0)
    throw ShapeError("kernel larger than padded input (" +
                     space_to_string(Space{input}) + ", kernel " +
                     shape_to_string(kernels.shape()) + ", pad " +
                     std::to_string(pad) + ")");
  in_ = input;
  out_ = Conv2DSpace{oh / stride + 1, ow / stride + 1, kernels.extent(0),
                     AxisOrder::bc01()};
  kernels_ = Param{std::move(param_name), std::move(kernels), /*is_weight=*/true};
}

NodeRef Conv2DTransform::lmul(ExprContext& ctx, NodeRef x) {
  Graph& g = ctx.graph();
  const auto& in = std::get<Conv2DSpace>(in_);
  Conv2DSpace compute = in;
  compute.axes = AxisOrder::bc01();
  NodeRef xc = sym_format_as(g, x, in_, Space{compute});
  return g.conv2d(xc, ctx.node_for(kernels_), stride_, pad_);
}

NodeRef Conv2DTransform::lmul_T(ExprContext& ctx, NodeRef y) {
  Graph& g = ctx.graph();
  const auto& in = std::get<Conv2DSpace>(in_);
  NodeRef xc = g.apply(Op::kConv2dInputGrad, {y, ctx.node_for(kernels_)},
                       {in.rows, in.cols, stride_, pad_});
  Conv2DSpace compute = in;
  compute.axes = AxisOrder::bc01();
  return sym_format_as(g, xc, Space{compute}, in_);
}

namespace {

Batch apply_transform(LinearTransform& t, const Batch& b, bool adjoint) {
  const Space& from = adjoint ? t.output_space() : t.input_space();
  const Space& to = adjoint ? t.input_space() : t.output_space();
  validate(from, b.tensor);
  Graph g;
  ExprContext ctx(g);
  NodeRef x = g.variable("x", batch_shape(from, kWild));
  NodeRef y = adjoint ? t.lmul_T(ctx, x) : t.lmul(ctx, x);
  Bindings bind;
  bind.set(x, b.tensor);
  ctx.bind(bind);
  return Batch{g.eval_one(y, bind), to};
}

}  // namespace

Batch lmul_eval(LinearTransform& t, const Batch& x) {
  return apply_transform(t, format_as(x, t.input_space()), false);
}

Batch lmul_T_eval(LinearTransform& t, const Batch& y) {
  return apply_transform(t, format_as(y, t.output_space()), true);
}

}  // namespace modlearn
