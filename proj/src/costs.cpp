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

#include "modlearn/costs.hpp"

#include <cmath>

namespace modlearn {

CostExpr Cost::build(Model& m, ExprContext& ctx, NodeRef x, std::optional<NodeRef> y) {
  CostExpr expr;
  expr.value = build_value(m, ctx, x, y);
  if (!expr.value)
    throw ValueError("cost '" + name() +
                     "' has no value; it must override build() to supply gradients");
  std::vector<Param*> params = m.params();
  std::vector<NodeRef> wrt;
  wrt.reserve(params.size());
  for (Param* p : params) wrt.push_back(ctx.node_for(*p));
  std::vector<NodeRef> grads = ctx.graph().grad(*expr.value, wrt);
  for (std::size_t i = 0; i < params.size(); ++i)
    expr.symbolic.push_back({params[i], {{1.0, grads[i]}}});
  return expr;
}

std::vector<std::pair<std::string, NodeRef>> Cost::monitoring_channels(
    Model& m, ExprContext& ctx, NodeRef x, std::optional<NodeRef> y) {
  std::vector<std::pair<std::string, NodeRef>> out;
  if (auto v = build_value(m, ctx, x, y)) out.push_back({"objective", *v});
  return out;
}

// ---------------------------------------------------------------------------
// Supervised MLP costs

MLP& MlpCost::require_mlp(Model& m, const std::string& cost_name) {
  MLP* mlp = dynamic_cast<MLP*>(&m);
  if (!mlp) throw ValueError("cost '" + cost_name + "' requires an MLP model");
  return *mlp;
}

NodeRef MlpCost::require_targets(std::optional<NodeRef> y, const std::string& cost_name) {
  if (!y) throw ValueError("cost '" + cost_name + "' needs targets");
  return *y;
}

std::optional<NodeRef> MlpCost::build_value(Model& m, ExprContext& ctx, NodeRef x,
                                            std::optional<NodeRef> y) {
  MLP& mlp = require_mlp(m, name());
  NodeRef targets = require_targets(y, name());
  MLP::FpropResult out = mlp.fprop_detail(ctx, x);
  return loss_from_output(ctx.graph(), out, targets);
}

NodeRef NLLSoftmax::loss_from_output(Graph& g, const MLP::FpropResult& out, NodeRef y) {
  if (!out.final_logits)
    throw ValueError("nll cost requires a softmax output layer");
  NodeRef logp = g.log_softmax(*out.final_logits);
  NodeRef picked = g.sum_axis(g.mul(y, logp), 1);
  return g.mean_all(g.neg(picked));
}

std::vector<std::pair<std::string, NodeRef>> NLLSoftmax::monitoring_channels(
    Model& m, ExprContext& ctx, NodeRef x, std::optional<NodeRef> y) {
  MLP& mlp = require_mlp(m, name());
  NodeRef targets = require_targets(y, name());
  Graph& g = ctx.graph();
  MLP::FpropResult out = mlp.fprop_detail(ctx, x);
  NodeRef nll = loss_from_output(g, out, targets);
  NodeRef compare = out.final_logits ? *out.final_logits : out.output;
  NodeRef misclass =
      g.mean_all(g.apply(Op::kRowwiseArgmaxNeq, {compare, targets}));
  return {{"objective", nll}, {"nll", nll}, {"misclass", misclass}};
}

NodeRef GaussianMSE::loss_from_output(Graph& g, const MLP::FpropResult& out, NodeRef y) {
  return g.mean_all(g.square(g.sub(out.output, y)));
}

// ---------------------------------------------------------------------------
// Weight decay

std::optional<NodeRef> WeightDecay::build_value(Model& m, ExprContext& ctx, NodeRef,
                                                std::optional<NodeRef>) {
  Graph& g = ctx.graph();
  std::vector<Param*> weights;
  for (Param* p : m.params())
    if (p->is_weight) weights.push_back(p);
  if (weights.empty())
    throw ValueError("weight_decay: model has no weight parameters");
  if (coeffs_.size() != 1 && coeffs_.size() != weights.size())
    throw ValueError("weight_decay: got " + std::to_string(coeffs_.size()) +
                     " coefficients for " + std::to_string(weights.size()) +
                     " weight parameters");
  std::optional<NodeRef> total;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    const double c = coeffs_.size() == 1 ? coeffs_[0] : coeffs_[i];
    NodeRef term = g.mul(g.scalar_constant(c),
                         g.sum_all(g.square(ctx.node_for(*weights[i]))));
    total = total ? g.add(*total, term) : term;
  }
  return total;
}

// ---------------------------------------------------------------------------
// Dropout

DropoutCost::DropoutCost(std::shared_ptr<MlpCost> base, double default_include_prob,
                         std::vector<double> per_layer_include_probs,
                         double default_scale, std::vector<double> per_layer_scales,
                         std::uint64_t seed)
    : base_(std::move(base)),
      default_include_prob_(default_include_prob),
      include_probs_(std::move(per_layer_include_probs)),
      default_scale_(default_scale),
      scales_(std::move(per_layer_scales)),
      rng_(seed) {
  if (!base_) throw ValueError("dropout: missing base cost");
  auto check_prob = [](double p) {
    if (p <= 0.0 || p > 1.0)
      throw ValueError("dropout: include probability must be in (0, 1], got " +
                       std::to_string(p));
  };
  check_prob(default_include_prob_);
  for (double p : include_probs_) check_prob(p);
}

std::optional<NodeRef> DropoutCost::build_value(Model& m, ExprContext& ctx, NodeRef x,
                                                std::optional<NodeRef> y) {
  MLP& mlp = require_mlp(m, name());
  NodeRef targets = require_targets(y, name());
  Graph& g = ctx.graph();
  const std::size_t num_layers = mlp.layers().size();
  if (!include_probs_.empty() && include_probs_.size() != num_layers)
    throw ValueError("dropout: include_probs has " +
                     std::to_string(include_probs_.size()) + " entries for " +
                     std::to_string(num_layers) + " layers");
  if (!scales_.empty() && scales_.size() != num_layers)
    throw ValueError("dropout: scales has " + std::to_string(scales_.size()) +
                     " entries for " + std::to_string(num_layers) + " layers");

  slots_.clear();
  std::vector<std::optional<NodeRef>> masks(num_layers);
  for (std::size_t i = 0; i < num_layers; ++i) {
    const double p = include_probs_.empty() ? default_include_prob_ : include_probs_[i];
    const double scale =
        scales_.empty() ? (default_scale_ > 0.0 ? default_scale_ : 1.0 / p) : scales_[i];
    const Space& space = mlp.layer_input_space(i);
    NodeRef mask = g.variable("dropout_mask_" + std::to_string(i),
                              batch_shape(space, kWild));
    slots_.push_back(MaskSlot{mask, space, p, scale});
    masks[i] = mask;
  }
  MLP::FpropResult out = mlp.fprop_detail(ctx, x, &masks);
  return base_->loss_from_output(g, out, targets);
}

void DropoutCost::bind_batch(Bindings& b, long long batch_size) {
  for (const MaskSlot& slot : slots_) {
    Tensor mask(batch_shape(slot.space, batch_size));
    for (double& v : mask.data())
      v = rng_.bernoulli(slot.include_prob) ? slot.scale : 0.0;
    b.set(slot.node, std::move(mask));
  }
}

// ---------------------------------------------------------------------------
// Sum of costs

SumOfCosts::SumOfCosts(std::vector<std::pair<double, std::shared_ptr<Cost>>> terms)
    : terms_(std::move(terms)) {
  if (terms_.empty()) throw ValueError("sum of costs needs at least one term");
  for (const auto& [c, cost] : terms_) {
    if (!cost) throw ValueError("sum of costs: null term");
    if (!std::isfinite(c))
      throw ValueError("sum of costs: non-finite coefficient");
  }
}

bool SumOfCosts::supervised() const {
  for (const auto& [c, cost] : terms_)
    if (cost->supervised()) return true;
  return false;
}

std::optional<NodeRef> SumOfCosts::build_value(Model& m, ExprContext& ctx, NodeRef x,
                                               std::optional<NodeRef> y) {
  Graph& g = ctx.graph();
  std::optional<NodeRef> total;
  for (const auto& [c, cost] : terms_) {
    auto v = cost->build_value(m, ctx, x, y);
    if (!v) return std::nullopt;
    NodeRef term = g.mul(g.scalar_constant(c), *v);
    total = total ? g.add(*total, term) : term;
  }
  return total;
}

CostExpr SumOfCosts::build(Model& m, ExprContext& ctx, NodeRef x,
                           std::optional<NodeRef> y) {
  Graph& g = ctx.graph();
  CostExpr out;
  bool all_have_value = true;
  std::optional<NodeRef> total;
  for (const auto& [c, cost] : terms_) {
    CostExpr child = cost->build(m, ctx, x, y);
    if (child.value && all_have_value) {
      NodeRef term = g.mul(g.scalar_constant(c), *child.value);
      total = total ? g.add(*total, term) : term;
    } else {
      all_have_value = false;
    }
    for (auto& [param, nodes] : child.symbolic) {
      auto* slot = [&]() -> std::vector<std::pair<double, NodeRef>>* {
        for (auto& [p, v] : out.symbolic)
          if (p == param) return &v;
        out.symbolic.push_back({param, {}});
        return &out.symbolic.back().second;
      }();
      for (auto& [coeff, node] : nodes) slot->push_back({c * coeff, node});
    }
    for (auto& [coeff, fn] : child.sampled) out.sampled.push_back({c * coeff, fn});
  }
  if (all_have_value) out.value = total;
  return out;
}

void SumOfCosts::bind_batch(Bindings& b, long long batch_size) {
  for (const auto& [c, cost] : terms_) cost->bind_batch(b, batch_size);
}

std::vector<std::pair<std::string, NodeRef>> SumOfCosts::monitoring_channels(
    Model& m, ExprContext& ctx, NodeRef x, std::optional<NodeRef> y) {
  std::vector<std::pair<std::string, NodeRef>> out;
  if (auto v = build_value(m, ctx, x, y)) out.push_back({"objective", *v});
  for (std::size_t i = 0; i < terms_.size(); ++i) {
    const std::string prefix = "term" + std::to_string(i) + "_";
    for (auto& [name, node] : terms_[i].second->monitoring_channels(m, ctx, x, y))
      out.push_back({prefix + name, node});
  }
  return out;
}

std::vector<std::pair<std::string, Tensor*>> SumOfCosts::state() {
  std::vector<std::pair<std::string, Tensor*>> out;
  for (std::size_t i = 0; i < terms_.size(); ++i)
    for (auto& [name, tensor] : terms_[i].second->state())
      out.push_back({"term" + std::to_string(i) + "_" + name, tensor});
  return out;
}

// ---------------------------------------------------------------------------
// Contrastive divergence family

std::vector<std::pair<Param*, Tensor>> rbm_stat_gradients(RBM& rbm,
                                                          const Tensor& v_data,
                                                          const Tensor& v_model) {
  const std::size_t n = static_cast<std::size_t>(v_data.extent(0));
  const std::size_t m = static_cast<std::size_t>(v_model.extent(0));
  const std::size_t nv = static_cast<std::size_t>(rbm.nvis());
  const std::size_t nh = static_cast<std::size_t>(rbm.nhid());
  Tensor h_data = rbm.hidden_probs(v_data);
  Tensor h_model = rbm.hidden_probs(v_model);

  // Gradient of the minimized objective (negative log likelihood):
  // E_model[stats] - E_data[stats].
  Tensor gw(Shape{static_cast<long long>(nv), static_cast<long long>(nh)});
  for (std::size_t k = 0; k < nv; ++k)
    for (std::size_t j = 0; j < nh; ++j) {
      double pos = 0.0, neg = 0.0;
      for (std::size_t i = 0; i < n; ++i) pos += v_data.at(i, k) * h_data.at(i, j);
      for (std::size_t i = 0; i < m; ++i) neg += v_model.at(i, k) * h_model.at(i, j);
      gw.at(k, j) = neg / static_cast<double>(m) - pos / static_cast<double>(n);
    }
  Tensor gbv(Shape{static_cast<long long>(nv)});
  for (std::size_t k = 0; k < nv; ++k) {
    double pos = 0.0, neg = 0.0;
    for (std::size_t i = 0; i < n; ++i) pos += v_data.at(i, k);
    for (std::size_t i = 0; i < m; ++i) neg += v_model.at(i, k);
    gbv[k] = neg / static_cast<double>(m) - pos / static_cast<double>(n);
  }
  Tensor gbh(Shape{static_cast<long long>(nh)});
  for (std::size_t j = 0; j < nh; ++j) {
    double pos = 0.0, neg = 0.0;
    for (std::size_t i = 0; i < n; ++i) pos += h_data.at(i, j);
    for (std::size_t i = 0; i < m; ++i) neg += h_model.at(i, j);
    gbh[j] = neg / static_cast<double>(m) - pos / static_cast<double>(n);
  }
  return {{&rbm.weights(), std::move(gw)},
          {&rbm.visible_bias(), std::move(gbv)},
          {&rbm.hidden_bias(), std::move(gbh)}};
}

ContrastiveDivergence::ContrastiveDivergence(long long k, std::uint64_t seed)
    : k_(k), rng_(seed) {
  if (k < 1) throw ValueError("cd: k must be >= 1");
}

CostExpr ContrastiveDivergence::build(Model& m, ExprContext&, NodeRef,
                                      std::optional<NodeRef>) {
  RBM* rbm = dynamic_cast<RBM*>(&m);
  if (!rbm) throw ValueError("cd cost requires an rbm model");
  CostExpr expr;
  RBM* r = rbm;
  long long k = k_;
  Rng* rng = &rng_;
  expr.sampled.push_back(
      {1.0, [r, k, rng](const Tensor& x_rows, const Tensor*) {
         Tensor v = x_rows;
         for (long long step = 0; step < k; ++step) v = r->gibbs_step(v, *rng).v_next;
         return rbm_stat_gradients(*r, x_rows, v);
       }});
  return expr;
}

PersistentCD::PersistentCD(long long num_chains, long long k, std::uint64_t seed)
    : num_chains_(num_chains), k_(k), rng_(seed) {
  if (num_chains < 1) throw ValueError("pcd: num_chains must be >= 1");
  if (k < 1) throw ValueError("pcd: k must be >= 1");
}

CostExpr PersistentCD::build(Model& m, ExprContext&, NodeRef,
                             std::optional<NodeRef>) {
  RBM* rbm = dynamic_cast<RBM*>(&m);
  if (!rbm) throw ValueError("pcd cost requires an rbm model");
  if (!chains_ready_) {
    chains_ = Tensor(Shape{num_chains_, rbm->nvis()});
    for (double& v : chains_.data()) v = rng_.bernoulli(0.5) ? 1.0 : 0.0;
    chains_ready_ = true;
  } else if (chains_.extent(1) != rbm->nvis()) {
    throw ShapeError("pcd chains have " + std::to_string(chains_.extent(1)) +
                     " visible units, model has " + std::to_string(rbm->nvis()));
  }
  CostExpr expr;
  RBM* r = rbm;
  expr.sampled.push_back(
      {1.0, [this, r](const Tensor& x_rows, const Tensor*) {
         for (long long step = 0; step < k_; ++step)
           chains_ = r->gibbs_step(chains_, rng_).v_next;
         return rbm_stat_gradients(*r, x_rows, chains_);
       }});
  return expr;
}

}  // namespace modlearn
