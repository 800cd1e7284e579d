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
#include <optional>
#include <string>
#include <vector>

#include "modlearn/datasets.hpp"
#include "modlearn/linear.hpp"
#include "modlearn/rng.hpp"

namespace modlearn {

enum class Activation { kLinear, kSigmoid, kTanh, kRelu, kSoftmax };

Activation activation_from_string(const std::string& s);
const char* activation_to_string(Activation a);

/// Parameter-holding object that emits symbolic expressions for whatever it
/// computes. Models do not know how to train themselves unless they opt into
/// the train_batch / train_all capabilities.
class Model {
 public:
  virtual ~Model() = default;

  virtual std::string kind() const = 0;
  virtual const Space& input_space() const = 0;
  virtual std::optional<Space> output_space() const { return std::nullopt; }
  /// Stable order, unique names.
  virtual std::vector<Param*> params() = 0;

  /// Projects all parameters back into their feasible region (max-norm
  /// rescale, non-negativity clamp), in place. Idempotent.
  void censor_updates();

  virtual bool supports_train_batch() const { return false; }
  virtual bool supports_train_all() const { return false; }
  /// One self-directed parameter update from a batch of design-matrix rows.
  virtual void train_batch(const Tensor& x_rows);
  /// Fully self-directed training.
  virtual void train_all(DenseDesignMatrix& ds);

  Param* find_param(const std::string& name);
};

/// One MLP layer: linear transform + bias + activation.
struct Layer {
  std::string name;
  std::shared_ptr<LinearTransform> transform;
  Param bias;
  Activation activation = Activation::kLinear;
};

/// Construction-time description of a layer; the MLP chains spaces and
/// initializes weights when it is built.
struct LayerSpec {
  std::string name;  // default L<i>
  Activation activation = Activation::kLinear;
  std::optional<double> max_norm;
  std::optional<double> init_scale;  // default 1/sqrt(fan_in)
  // dense
  long long dim = 0;
  // conv (used when conv is true)
  bool conv = false;
  long long out_channels = 0, kernel_rows = 0, kernel_cols = 0;
  long long stride = 1, pad = 0;
};

class MLP : public Model {
 public:
  /// Weight init is uniform in +-init_scale (default 1/sqrt(fan_in)),
  /// biases zero; deterministic in the rng seed.
  MLP(Space input, const std::vector<LayerSpec>& specs, Rng rng);

  std::string kind() const override { return "mlp"; }
  const Space& input_space() const override { return input_space_; }
  std::optional<Space> output_space() const override { return output_space_; }
  std::vector<Param*> params() override;

  struct FpropResult {
    NodeRef output;
    /// Pre-activation of the final layer when its activation is softmax;
    /// lets costs use the fused log-softmax form.
    std::optional<NodeRef> final_logits;
  };

  /// Symbolic forward pass. x must be a batch of input_space; consecutive
  /// layer spaces are bridged with format conversions where element counts
  /// allow. When input_masks is given it supplies one optional mask node per
  /// layer, multiplied onto that layer's input.
  FpropResult fprop_detail(ExprContext& ctx, NodeRef x,
                           const std::vector<std::optional<NodeRef>>* input_masks = nullptr);
  NodeRef fprop(ExprContext& ctx, NodeRef x) { return fprop_detail(ctx, x).output; }

  /// Numeric forward pass on a concrete batch of input rows.
  Tensor fprop_eval(const Tensor& x_rows);

  std::vector<Layer>& layers() { return layers_; }
  const Space& layer_input_space(std::size_t i) const { return layer_input_spaces_[i]; }

 private:
  Space input_space_;
  std::optional<Space> output_space_;
  std::vector<Layer> layers_;
  std::vector<Space> layer_input_spaces_;
};

/// Autoencoder with a tied decoder and zeroing-mask corruption.
class DenoisingAutoencoder : public Model {
 public:
  DenoisingAutoencoder(long long nvis, long long nhid, double corruption, Rng rng);

  std::string kind() const override { return "dae"; }
  const Space& input_space() const override { return input_space_; }
  std::vector<Param*> params() override { return {&w_, &b_hid_, &b_vis_}; }

  /// hidden = sigmoid((x . mask) W + b_hid);
  /// reconstruction = sigmoid(hidden W^T + b_vis).
  struct ForwardResult {
    NodeRef hidden;
    NodeRef reconstruction;
  };
  ForwardResult forward(ExprContext& ctx, NodeRef x, NodeRef mask);

  /// {0,1} mask, zeroing each input with probability `corruption`.
  Tensor sample_mask(long long batch, Rng& rng) const;

  double corruption() const { return corruption_; }
  long long nvis() const { return w_.value.extent(0); }
  long long nhid() const { return w_.value.extent(1); }

 private:
  Space input_space_;
  Param w_, b_hid_, b_vis_;
  double corruption_;
};

/// Binary-binary restricted Boltzmann machine.
class RBM : public Model {
 public:
  RBM(long long nvis, long long nhid, Rng init_rng, double cd_learning_rate = 0.1);

  std::string kind() const override { return "rbm"; }
  const Space& input_space() const override { return input_space_; }
  std::vector<Param*> params() override { return {&w_, &b_vis_, &b_hid_}; }

  /// Per-example free energy, shape [n]:
  /// F(v) = -v b_vis - sum_j softplus(b_hid_j + (v W)_j).
  NodeRef free_energy(ExprContext& ctx, NodeRef v);

  Tensor hidden_probs(const Tensor& v) const;   // sigmoid(b_hid + v W)
  Tensor visible_probs(const Tensor& h) const;  // sigmoid(b_vis + h W^T)

  /// One Gibbs sweep from visible configuration v: samples h given v, then
  /// v' given h. Deterministic in the rng state.
  struct GibbsResult {
    Tensor v_next;
    Tensor h;
  };
  GibbsResult gibbs_step(const Tensor& v, Rng& rng) const;

  /// Default learning rule: one CD-1 update with the fixed configured step.
  bool supports_train_batch() const override { return true; }
  void train_batch(const Tensor& x_rows) override;

  long long nvis() const { return w_.value.extent(0); }
  long long nhid() const { return w_.value.extent(1); }
  Param& weights() { return w_; }
  Param& visible_bias() { return b_vis_; }
  Param& hidden_bias() { return b_hid_; }

 private:
  Space input_space_;
  Param w_, b_vis_, b_hid_;
  double cd_learning_rate_;
  Rng train_rng_;
};

/// Samples a {0, 1} Bernoulli tensor with per-entry probabilities p.
Tensor sample_bernoulli(const Tensor& p, Rng& rng);

}  // namespace modlearn
