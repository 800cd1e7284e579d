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

#include "modlearn/models.hpp"

#include <cmath>
#include <set>

namespace modlearn {

Activation activation_from_string(const std::string& s) {
  if (s == "linear") return Activation::kLinear;
  if (s == "sigmoid") return Activation::kSigmoid;
  if (s == "tanh") return Activation::kTanh;
  if (s == "relu") return Activation::kRelu;
  if (s == "softmax") return Activation::kSoftmax;
  throw ValueError("unknown activation '" + s + "'");
}

const char* activation_to_string(Activation a) {
  switch (a) {
    case Activation::kLinear: return "linear";
    case Activation::kSigmoid: return "sigmoid";
    case Activation::kTanh: return "tanh";
    case Activation::kRelu: return "relu";
    case Activation::kSoftmax: return "softmax";
  }
  return "?";
}

void Model::censor_updates() {
  for (Param* p : params()) censor_param(*p);
}

void Model::train_batch(const Tensor&) {
  throw CapabilityError("model '" + kind() + "' does not implement train_batch");
}

void Model::train_all(DenseDesignMatrix&) {
  throw CapabilityError("model '" + kind() + "' does not implement train_all");
}

Param* Model::find_param(const std::string& name) {
  for (Param* p : params())
    if (p->name == name) return p;
  return nullptr;
}

namespace {

Tensor uniform_init(Shape shape, double bound, Rng& rng) {
  Tensor t(std::move(shape));
  for (double& v : t.data()) v = rng.uniform(-bound, bound);
  return t;
}

NodeRef apply_activation(Graph& g, NodeRef pre, Activation a) {
  switch (a) {
    case Activation::kLinear: return pre;
    case Activation::kSigmoid: return g.sigmoid(pre);
    case Activation::kTanh: return g.tanh(pre);
    case Activation::kRelu: return g.relu(pre);
    case Activation::kSoftmax: return g.softmax(pre);
  }
  throw ValueError("bad activation");
}

}  // namespace

// ---------------------------------------------------------------------------
// MLP

MLP::MLP(Space input, const std::vector<LayerSpec>& specs, Rng rng)
    : input_space_(input) {
  if (specs.empty()) throw ValueError("mlp needs at least one layer");
  Space current = input;
  std::set<std::string> names;
  for (std::size_t i = 0; i < specs.size(); ++i) {
    const LayerSpec& spec = specs[i];
    Layer layer;
    layer.name = spec.name.empty() ? "L" + std::to_string(i) : spec.name;
    if (!names.insert(layer.name).second)
      throw ValueError("duplicate layer name '" + layer.name + "'");
    layer.activation = spec.activation;

    if (spec.conv) {
      const Conv2DSpace* in = std::get_if<Conv2DSpace>(&current);
      if (!in)
        throw ShapeError("layer '" + layer.name +
                         "': convolution needs a Conv2DSpace input, have " +
                         space_to_string(current));
      if (spec.out_channels < 1 || spec.kernel_rows < 1 || spec.kernel_cols < 1)
        throw ValueError("layer '" + layer.name + "': bad kernel geometry");
      const double fan_in =
          static_cast<double>(in->channels * spec.kernel_rows * spec.kernel_cols);
      const double bound = spec.init_scale.value_or(1.0 / std::sqrt(fan_in));
      Tensor kernels = uniform_init(
          Shape{spec.out_channels, in->channels, spec.kernel_rows, spec.kernel_cols},
          bound, rng);
      auto t = std::make_shared<Conv2DTransform>(std::move(kernels), *in, spec.stride,
                                                 spec.pad, layer.name + "_K");
      layer.bias = Param{layer.name + "_b", Tensor(Shape{spec.out_channels})};
      layer.transform = std::move(t);
      if (spec.activation == Activation::kSoftmax)
        throw ValueError("layer '" + layer.name + "': softmax needs a vector output");
    } else {
      if (spec.dim < 1)
        throw ValueError("layer '" + layer.name + "': dim must be >= 1");
      const long long in_dim = num_elements(current);
      const double bound =
          spec.init_scale.value_or(1.0 / std::sqrt(static_cast<double>(in_dim)));
      Tensor w = uniform_init(Shape{in_dim, spec.dim}, bound, rng);
      auto t = std::make_shared<DenseTransform>(std::move(w), layer.name + "_W");
      layer.bias = Param{layer.name + "_b", Tensor(Shape{spec.dim})};
      layer.transform = std::move(t);
    }
    if (spec.max_norm) {
      if (*spec.max_norm <= 0.0)
        throw ValueError("layer '" + layer.name + "': max_norm must be positive");
      layer.transform->params()[0]->max_norm = MaxNormConstraint{*spec.max_norm, true};
    }
    layer_input_spaces_.push_back(layer.transform->input_space());
    current = layer.transform->output_space();
    layers_.push_back(std::move(layer));
  }
  output_space_ = current;
}

std::vector<Param*> MLP::params() {
  std::vector<Param*> out;
  for (Layer& l : layers_) {
    for (Param* p : l.transform->params()) out.push_back(p);
    out.push_back(&l.bias);
  }
  return out;
}

MLP::FpropResult MLP::fprop_detail(ExprContext& ctx, NodeRef x,
                                   const std::vector<std::optional<NodeRef>>* input_masks) {
  Graph& g = ctx.graph();
  if (input_masks && input_masks->size() != layers_.size())
    throw ValueError("mask list must have one entry per layer");
  Space current = input_space_;
  NodeRef h = x;
  std::optional<NodeRef> final_logits;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    Layer& layer = layers_[i];
    const Space& in_space = layer.transform->input_space();
    h = sym_format_as(g, h, current, in_space);
    if (input_masks && (*input_masks)[i])
      h = g.dropout_mask_apply(h, *(*input_masks)[i]);
    NodeRef pre = layer.transform->lmul(ctx, h);
    NodeRef bias = ctx.node_for(layer.bias);
    if (std::holds_alternative<VectorSpace>(layer.transform->output_space()))
      pre = g.add(pre, g.broadcast_row(bias, pre));
    else
      pre = g.channel_bias_add(pre, bias);
    if (i + 1 == layers_.size() && layer.activation == Activation::kSoftmax)
      final_logits = pre;
    h = apply_activation(g, pre, layer.activation);
    current = layer.transform->output_space();
  }
  return FpropResult{h, final_logits};
}

Tensor MLP::fprop_eval(const Tensor& x_rows) {
  Graph g;
  ExprContext ctx(g);
  NodeRef x = g.variable("x", batch_shape(input_space_, kWild));
  Batch in = format_as(Batch{x_rows, VectorSpace{static_cast<long long>(x_rows.extent(1))}},
                       input_space_);
  NodeRef out = fprop(ctx, x);
  Bindings b;
  b.set(x, in.tensor);
  ctx.bind(b);
  return g.eval_one(out, b);
}

// ---------------------------------------------------------------------------
// Denoising autoencoder

DenoisingAutoencoder::DenoisingAutoencoder(long long nvis, long long nhid,
                                           double corruption, Rng rng)
    : input_space_(VectorSpace{nvis}), corruption_(corruption) {
  if (nvis < 1 || nhid < 1) throw ValueError("dae: nvis and nhid must be >= 1");
  if (corruption < 0.0 || corruption >= 1.0)
    throw ValueError("dae: corruption must be in [0, 1)");
  const double bound = 1.0 / std::sqrt(static_cast<double>(nvis));
  w_ = Param{"W", uniform_init(Shape{nvis, nhid}, bound, rng), /*is_weight=*/true};
  b_hid_ = Param{"b_hid", Tensor(Shape{nhid})};
  b_vis_ = Param{"b_vis", Tensor(Shape{nvis})};
}

DenoisingAutoencoder::ForwardResult DenoisingAutoencoder::forward(ExprContext& ctx,
                                                                  NodeRef x,
                                                                  NodeRef mask) {
  Graph& g = ctx.graph();
  NodeRef w = ctx.node_for(w_);
  NodeRef corrupted = g.dropout_mask_apply(x, mask);
  NodeRef pre_h = g.matmul(corrupted, w);
  pre_h = g.add(pre_h, g.broadcast_row(ctx.node_for(b_hid_), pre_h));
  NodeRef hidden = g.sigmoid(pre_h);
  NodeRef pre_r = g.matmul(hidden, g.transpose(w));
  pre_r = g.add(pre_r, g.broadcast_row(ctx.node_for(b_vis_), pre_r));
  return ForwardResult{hidden, g.sigmoid(pre_r)};
}

Tensor DenoisingAutoencoder::sample_mask(long long batch, Rng& rng) const {
  Tensor m(Shape{batch, nvis()});
  for (double& v : m.data()) v = rng.bernoulli(1.0 - corruption_) ? 1.0 : 0.0;
  return m;
}

// ---------------------------------------------------------------------------
// RBM

RBM::RBM(long long nvis, long long nhid, Rng init_rng, double cd_learning_rate)
    : input_space_(VectorSpace{nvis}), cd_learning_rate_(cd_learning_rate) {
  if (nvis < 1 || nhid < 1) throw ValueError("rbm: nvis and nhid must be >= 1");
  const double bound = 1.0 / std::sqrt(static_cast<double>(nvis));
  w_ = Param{"W", uniform_init(Shape{nvis, nhid}, bound, init_rng), /*is_weight=*/true};
  b_vis_ = Param{"b_vis", Tensor(Shape{nvis})};
  b_hid_ = Param{"b_hid", Tensor(Shape{nhid})};
  train_rng_ = Rng(init_rng.next_u64());
}

NodeRef RBM::free_energy(ExprContext& ctx, NodeRef v) {
  Graph& g = ctx.graph();
  NodeRef w = ctx.node_for(w_);
  NodeRef vis_term =
      g.sum_axis(g.mul(v, g.broadcast_row(ctx.node_for(b_vis_), v)), 1);
  NodeRef pre = g.matmul(v, w);
  pre = g.add(pre, g.broadcast_row(ctx.node_for(b_hid_), pre));
  NodeRef hid_term = g.sum_axis(g.softplus(pre), 1);
  return g.neg(g.add(vis_term, hid_term));
}

namespace {

double stable_sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

Tensor RBM::hidden_probs(const Tensor& v) const {
  const std::size_t n = static_cast<std::size_t>(v.extent(0));
  const std::size_t nv = static_cast<std::size_t>(nvis());
  const std::size_t nh = static_cast<std::size_t>(nhid());
  Tensor out(Shape{v.extent(0), static_cast<long long>(nh)});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < nh; ++j) {
      double acc = b_hid_.value[j];
      for (std::size_t k = 0; k < nv; ++k) acc += v.at(i, k) * w_.value.at(k, j);
      out.at(i, j) = stable_sigmoid(acc);
    }
  return out;
}

Tensor RBM::visible_probs(const Tensor& h) const {
  const std::size_t n = static_cast<std::size_t>(h.extent(0));
  const std::size_t nv = static_cast<std::size_t>(nvis());
  const std::size_t nh = static_cast<std::size_t>(nhid());
  Tensor out(Shape{h.extent(0), static_cast<long long>(nv)});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < nv; ++k) {
      double acc = b_vis_.value[k];
      for (std::size_t j = 0; j < nh; ++j) acc += h.at(i, j) * w_.value.at(k, j);
      out.at(i, k) = stable_sigmoid(acc);
    }
  return out;
}

Tensor sample_bernoulli(const Tensor& p, Rng& rng) {
  Tensor out(p.shape());
  for (std::size_t i = 0; i < p.size(); ++i)
    out[i] = rng.bernoulli(p[i]) ? 1.0 : 0.0;
  return out;
}

RBM::GibbsResult RBM::gibbs_step(const Tensor& v, Rng& rng) const {
  Tensor h = sample_bernoulli(hidden_probs(v), rng);
  Tensor v_next = sample_bernoulli(visible_probs(h), rng);
  return GibbsResult{std::move(v_next), std::move(h)};
}

void RBM::train_batch(const Tensor& x_rows) {
  validate(input_space_, x_rows);
  const std::size_t n = static_cast<std::size_t>(x_rows.extent(0));
  if (n == 0) return;
  const std::size_t nv = static_cast<std::size_t>(nvis());
  const std::size_t nh = static_cast<std::size_t>(nhid());

  Tensor h0p = hidden_probs(x_rows);
  Tensor h0 = sample_bernoulli(h0p, train_rng_);
  Tensor v1 = sample_bernoulli(visible_probs(h0), train_rng_);
  Tensor h1p = hidden_probs(v1);

  const double step = cd_learning_rate_ / static_cast<double>(n);
  for (std::size_t k = 0; k < nv; ++k)
    for (std::size_t j = 0; j < nh; ++j) {
      double pos = 0.0, neg = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        pos += x_rows.at(i, k) * h0p.at(i, j);
        neg += v1.at(i, k) * h1p.at(i, j);
      }
      w_.value.at(k, j) += step * (pos - neg);
    }
  for (std::size_t k = 0; k < nv; ++k) {
    double pos = 0.0, neg = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      pos += x_rows.at(i, k);
      neg += v1.at(i, k);
    }
    b_vis_.value[k] += step * (pos - neg);
  }
  for (std::size_t j = 0; j < nh; ++j) {
    double pos = 0.0, neg = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      pos += h0p.at(i, j);
      neg += h1p.at(i, j);
    }
    b_hid_.value[j] += step * (pos - neg);
  }
}

}  // namespace modlearn
