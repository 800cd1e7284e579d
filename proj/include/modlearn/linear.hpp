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

#include "modlearn/params.hpp"
#include "modlearn/spaces.hpp"

namespace modlearn {

/// Generic linear operator between two spaces. lmul applies the operator to
/// a symbolic batch of the input space; lmul_T applies the adjoint. Both
/// build graph nodes rather than computing numbers, so callers can
/// differentiate through applications.
///
/// The defining contract, with flattening in the canonical space order:
/// flatten(lmul(x)) == flatten(x) * as_dense() for every input batch x.
class LinearTransform {
 public:
  virtual ~LinearTransform() = default;

  virtual const Space& input_space() const = 0;
  virtual const Space& output_space() const = 0;
  virtual std::vector<Param*> params() = 0;

  /// x must be formatted for input_space; the result lives in output_space.
  virtual NodeRef lmul(ExprContext& ctx, NodeRef x) = 0;
  /// y must be formatted for output_space; the result lives in input_space.
  virtual NodeRef lmul_T(ExprContext& ctx, NodeRef y) = 0;

  /// Explicit [in_elements, out_elements] matrix realizing the operator.
  /// The default materializes it by applying lmul to an identity batch.
  virtual Tensor as_dense();
};

/// Multiplication by a dense matrix: VectorSpace(in) -> VectorSpace(out).
class DenseTransform : public LinearTransform {
 public:
  /// W has shape [in_dim, out_dim].
  explicit DenseTransform(Tensor w, std::string param_name = "W");

  const Space& input_space() const override { return in_; }
  const Space& output_space() const override { return out_; }
  std::vector<Param*> params() override { return {&weights_}; }
  NodeRef lmul(ExprContext& ctx, NodeRef x) override;
  NodeRef lmul_T(ExprContext& ctx, NodeRef y) override;
  Tensor as_dense() override { return weights_.value; }

  Param& weights() { return weights_; }

 private:
  Space in_, out_;
  Param weights_;
};

/// Discrete 2-D cross-correlation with finite support and zero padding.
/// Internally computes in bc01 order; inputs in other axis orders are
/// converted on the way in, and the output space is always bc01.
class Conv2DTransform : public LinearTransform {
 public:
  /// kernels has shape [out_channels, in_channels, kh, kw].
  Conv2DTransform(Tensor kernels, Conv2DSpace input, long long stride,
                  long long pad, std::string param_name = "K");

  const Space& input_space() const override { return in_; }
  const Space& output_space() const override { return out_; }
  std::vector<Param*> params() override { return {&kernels_}; }
  NodeRef lmul(ExprContext& ctx, NodeRef x) override;
  NodeRef lmul_T(ExprContext& ctx, NodeRef y) override;

  long long stride() const { return stride_; }
  long long pad() const { return pad_; }
  Param& kernels() { return kernels_; }

 private:
  Space in_, out_;
  Param kernels_;
  long long stride_, pad_;
};

/// Numeric convenience wrappers: apply a transform to a concrete batch by
/// building and evaluating a scratch graph.
Batch lmul_eval(LinearTransform& t, const Batch& x);
Batch lmul_T_eval(LinearTransform& t, const Batch& y);

}  // namespace modlearn
