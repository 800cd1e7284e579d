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

#include <functional>
#include <memory>

#include "modlearn/models.hpp"

namespace modlearn {

/// Gradient sources are a tagged union of symbolic nodes and per-batch
/// sampled tensors, so the optimizer treats exact and approximate gradients
/// uniformly.
///
/// All gradients follow the minimization convention: they point uphill in
/// the objective being minimized, and optimizers subtract them.
struct CostExpr {
  /// Training objective expression, or nullopt when the cost has no
  /// computable value (sampling-based costs).
  std::optional<NodeRef> value;

  /// Additive symbolic contributions per parameter: grad += coeff * node.
  std::vector<std::pair<Param*, std::vector<std::pair<double, NodeRef>>>> symbolic;

  /// Per-batch sampled contributions. Each function is invoked once per
  /// batch with the raw design-matrix rows and returns one tensor per
  /// parameter it contributes to; the coefficient scales them all.
  using SampledFn =
      std::function<std::vector<std::pair<Param*, Tensor>>(const Tensor& x_rows,
                                                           const Tensor* y_rows)>;
  std::vector<std::pair<double, SampledFn>> sampled;
};

/// A cost function independent of the algorithm that minimizes it.
class Cost {
 public:
  virtual ~Cost() = default;

  virtual std::string name() const = 0;
  virtual bool supervised() const { return false; }

  /// Scalar objective expression, or nullopt when no value exists.
  /// x is a symbolic batch in the model's input space.
  virtual std::optional<NodeRef> build_value(Model& m, ExprContext& ctx, NodeRef x,
                                             std::optional<NodeRef> y) = 0;

  /// Objective plus gradient sources for the training path. The default
  /// differentiates build_value for every model parameter.
  virtual CostExpr build(Model& m, ExprContext& ctx, NodeRef x,
                         std::optional<NodeRef> y);

  /// Called once per batch before evaluating the training graph; costs with
  /// sampled inputs (dropout masks) bind them here.
  virtual void bind_batch(Bindings& b, long long batch_size) { (void)b; (void)batch_size; }

  /// Channels for the monitoring path. Masks and other training-time
  /// stochasticity are off. The default exposes the objective when it exists.
  virtual std::vector<std::pair<std::string, NodeRef>> monitoring_channels(
      Model& m, ExprContext& ctx, NodeRef x, std::optional<NodeRef> y);

  /// Persistent cost state to checkpoint alongside the model (PCD chains).
  virtual std::vector<std::pair<std::string, Tensor*>> state() { return {}; }
};

/// Supervised costs that score an MLP's forward pass. Splitting the loss
/// from the forward pass lets the dropout wrapper reuse the same loss on a
/// masked pass.
class MlpCost : public Cost {
 public:
  bool supervised() const override { return true; }
  virtual NodeRef loss_from_output(Graph& g, const MLP::FpropResult& out,
                                   NodeRef y) = 0;
  std::optional<NodeRef> build_value(Model& m, ExprContext& ctx, NodeRef x,
                                     std::optional<NodeRef> y) override;

 protected:
  static MLP& require_mlp(Model& m, const std::string& cost_name);
  static NodeRef require_targets(std::optional<NodeRef> y, const std::string& cost_name);
};

/// Mean over the batch of -log p(correct class). Requires a softmax output
/// layer; computed in the fused log-softmax form for stability.
class NLLSoftmax : public MlpCost {
 public:
  std::string name() const override { return "nll"; }
  NodeRef loss_from_output(Graph& g, const MLP::FpropResult& out, NodeRef y) override;
  std::vector<std::pair<std::string, NodeRef>> monitoring_channels(
      Model& m, ExprContext& ctx, NodeRef x, std::optional<NodeRef> y) override;
};

/// Mean squared error over all output elements. Equal to the Gaussian
/// log likelihood up to an affine transformation, which leaves gradients
/// proportional.
class GaussianMSE : public MlpCost {
 public:
  std::string name() const override { return "mse"; }
  NodeRef loss_from_output(Graph& g, const MLP::FpropResult& out, NodeRef y) override;
};

/// coeff * sum of squared weights, per weight parameter. A single
/// coefficient applies to every weight; a list gives one per weight
/// parameter in model order.
class WeightDecay : public Cost {
 public:
  explicit WeightDecay(std::vector<double> coeffs) : coeffs_(std::move(coeffs)) {}
  std::string name() const override { return "weight_decay"; }
  std::optional<NodeRef> build_value(Model& m, ExprContext& ctx, NodeRef x,
                                     std::optional<NodeRef> y) override;

 private:
  std::vector<double> coeffs_;
};

/// Wraps an MLP cost: each layer input is multiplied by a Bernoulli
/// (include_prob) mask scaled by 1/include_prob (inverted dropout), so the
/// monitoring path needs no rescaling. Masks are bound variables sampled
/// per batch from the cost's own rng.
class DropoutCost : public MlpCost {
 public:
  DropoutCost(std::shared_ptr<MlpCost> base, double default_include_prob,
              std::vector<double> per_layer_include_probs, double default_scale,
              std::vector<double> per_layer_scales, std::uint64_t seed);

  std::string name() const override { return "dropout_" + base_->name(); }
  NodeRef loss_from_output(Graph& g, const MLP::FpropResult& out, NodeRef y) override {
    return base_->loss_from_output(g, out, y);
  }
  std::optional<NodeRef> build_value(Model& m, ExprContext& ctx, NodeRef x,
                                     std::optional<NodeRef> y) override;
  void bind_batch(Bindings& b, long long batch_size) override;
  std::vector<std::pair<std::string, NodeRef>> monitoring_channels(
      Model& m, ExprContext& ctx, NodeRef x, std::optional<NodeRef> y) override {
    return base_->monitoring_channels(m, ctx, x, y);
  }

 private:
  struct MaskSlot {
    NodeRef node;
    Space space;
    double include_prob;
    double scale;
  };
  std::shared_ptr<MlpCost> base_;
  double default_include_prob_;
  std::vector<double> include_probs_;
  double default_scale_;  // <= 0 means 1/include_prob
  std::vector<double> scales_;
  Rng rng_;
  std::vector<MaskSlot> slots_;
};

/// Linear combination of costs. The value is the coefficient-weighted sum,
/// or no-value if any term has none; gradients always combine.
class SumOfCosts : public Cost {
 public:
  explicit SumOfCosts(std::vector<std::pair<double, std::shared_ptr<Cost>>> terms);
  std::string name() const override { return "sum"; }
  bool supervised() const override;
  std::optional<NodeRef> build_value(Model& m, ExprContext& ctx, NodeRef x,
                                     std::optional<NodeRef> y) override;
  CostExpr build(Model& m, ExprContext& ctx, NodeRef x,
                 std::optional<NodeRef> y) override;
  void bind_batch(Bindings& b, long long batch_size) override;
  std::vector<std::pair<std::string, NodeRef>> monitoring_channels(
      Model& m, ExprContext& ctx, NodeRef x, std::optional<NodeRef> y) override;
  std::vector<std::pair<std::string, Tensor*>> state() override;

 private:
  std::vector<std::pair<double, std::shared_ptr<Cost>>> terms_;
};

/// Contrastive divergence with k Gibbs steps from the data. No cost value;
/// gradients are the difference of sufficient statistics between the
/// data-clamped distribution and the k-step reconstructions. The chain is
/// sampled throughout; statistics use exact hidden conditionals given the
/// sampled visibles.
class ContrastiveDivergence : public Cost {
 public:
  ContrastiveDivergence(long long k, std::uint64_t seed);
  std::string name() const override { return "cd"; }
  std::optional<NodeRef> build_value(Model&, ExprContext&, NodeRef,
                                     std::optional<NodeRef>) override {
    return std::nullopt;
  }
  CostExpr build(Model& m, ExprContext& ctx, NodeRef x,
                 std::optional<NodeRef> y) override;

 protected:
  long long k_;
  Rng rng_;
};

/// Persistent contrastive divergence: the negative phase advances and
/// reuses persistent chains instead of restarting from the data.
class PersistentCD : public Cost {
 public:
  PersistentCD(long long num_chains, long long k, std::uint64_t seed);
  std::string name() const override { return "pcd"; }
  std::optional<NodeRef> build_value(Model&, ExprContext&, NodeRef,
                                     std::optional<NodeRef>) override {
    return std::nullopt;
  }
  CostExpr build(Model& m, ExprContext& ctx, NodeRef x,
                 std::optional<NodeRef> y) override;
  std::vector<std::pair<std::string, Tensor*>> state() override {
    return {{"pcd_chains", &chains_}};
  }
  const Tensor& chains() const { return chains_; }

 private:
  long long num_chains_, k_;
  Rng rng_;
  Tensor chains_{Shape{0, 0}};
  bool chains_ready_ = false;
};

/// Sufficient-statistics gradient of the minimized objective for an RBM:
/// returns {W, b_vis, b_hid} contributions given positive-phase data and
/// negative-phase samples. Shared by CD and PCD.
std::vector<std::pair<Param*, Tensor>> rbm_stat_gradients(RBM& rbm,
                                                          const Tensor& v_data,
                                                          const Tensor& v_model);

}  // namespace modlearn
