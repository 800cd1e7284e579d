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

#include "modlearn/costs.hpp"
#include "modlearn/monitor.hpp"

namespace modlearn {

/// Compiles a cost for one model into an executable gradient program.
/// Symbolic and sampled gradient sources are combined behind one interface,
/// so optimizers need no special cases for approximate-gradient costs.
class GradientProgram {
 public:
  /// target_dim: width of the target rows for supervised costs (ignored
  /// otherwise).
  GradientProgram(Model& model, Cost& cost, long long target_dim);

  bool has_value() const { return expr_.value.has_value(); }
  const std::vector<Param*>& params() const { return params_; }

  /// Per-batch bindings: input/target tensors plus whatever the cost samples
  /// for the batch (dropout masks). Parameter values are bound at use time,
  /// so one prepared batch can be re-evaluated while parameters move (line
  /// searches).
  struct PreparedBatch {
    Bindings bindings;
    Tensor x_rows;
    std::optional<Tensor> y_rows;
    long long n = 0;
  };
  PreparedBatch prepare(const Tensor& x_rows, const Tensor* y_rows);

  /// Gradients at the current parameter values, ordered like params().
  std::vector<Tensor> gradients(const PreparedBatch& batch);
  /// Objective at the current parameter values (same batch bindings), or
  /// nullopt for costs with no value.
  std::optional<double> value(const PreparedBatch& batch);

 private:
  Model& model_;
  Cost& cost_;
  Graph graph_;
  ExprContext ctx_;
  NodeRef x_;
  std::optional<NodeRef> y_;
  CostExpr expr_;
  std::vector<Param*> params_;
};

/// Backtracking-Armijo line search: starting from step 1.0 and halving,
/// accepts the first step with f(step) <= f0 + c1 * step * slope0
/// (c1 = 1e-4), giving up after 50 halvings. slope0 must be negative.
struct LineSearchResult {
  double step = 0.0;
  bool success = false;
};
LineSearchResult line_search(const std::function<double(double)>& f, double f0,
                             double slope0);

/// Bracketing line search: expands until the objective stops decreasing,
/// then refines by golden-section. The accepted step is still required to
/// satisfy the Armijo inequality.
LineSearchResult bracketing_line_search(const std::function<double(double)>& f,
                                        double f0, double slope0);

class TrainingAlgorithm {
 public:
  virtual ~TrainingAlgorithm() = default;
  virtual std::string kind() const = 0;

  virtual void setup(std::shared_ptr<Model> model,
                     std::shared_ptr<DenseDesignMatrix> train) = 0;
  /// One epoch over the training dataset.
  virtual void train() = 0;
  virtual bool continue_learning(const Monitor& monitor, long long epochs_done) const;

  virtual Cost* cost() { return nullptr; }
  TerminationCriterion* termination() { return termination_.get(); }

  /// Algorithm-side scalar channels (line-search failures and the like).
  virtual std::vector<std::pair<std::string, std::function<double()>>>
  callback_channels() {
    return {};
  }

  /// Called once after the last epoch (Polyak substitution happens here).
  virtual void finish() {}
  /// Extra tensors to store in checkpoints alongside model parameters.
  virtual std::vector<std::pair<std::string, Tensor>> extra_checkpoint_tensors() {
    return {};
  }

 protected:
  std::shared_ptr<TerminationCriterion> termination_;
  std::shared_ptr<Model> model_;
  std::shared_ptr<DenseDesignMatrix> data_;
};

/// Learning-rule extension slot for SGD: plain updates, classical heavy-ball
/// momentum, or Polyak averaging of the iterates over plain updates.
struct LearningRule {
  enum class Kind { kNone, kMomentum, kPolyak };
  Kind kind = Kind::kNone;
  double momentum = 0.0;             // kMomentum
  long long polyak_start_epoch = 0;  // kPolyak
  bool polyak_use_averaged = true;   // deliver averaged params at finish()

  static LearningRule none() { return {}; }
  static LearningRule with_momentum(double mu);
  static LearningRule polyak(long long start_epoch, bool use_averaged = true);
};

/// Minibatch stochastic gradient descent on a Cost.
class SGD : public TrainingAlgorithm {
 public:
  SGD(std::shared_ptr<Cost> cost, double learning_rate, long long batch_size,
      SchemeKind scheme, std::shared_ptr<TerminationCriterion> termination,
      std::uint64_t seed, LearningRule rule = LearningRule::none(),
      long long num_batches = 0);

  std::string kind() const override { return "sgd"; }
  void setup(std::shared_ptr<Model> model,
             std::shared_ptr<DenseDesignMatrix> train) override;
  void train() override;
  Cost* cost() override { return cost_.get(); }
  void finish() override;
  std::vector<std::pair<std::string, Tensor>> extra_checkpoint_tensors() override;

  /// Test instrumentation: invoked after every parameter update + projection.
  void set_update_observer(std::function<void()> fn) { observer_ = std::move(fn); }

  const std::vector<Tensor>& polyak_averages() const { return polyak_avg_; }
  long long epochs_trained() const { return epochs_trained_; }
  long long batch_size() const { return batch_size_; }
  SchemeKind scheme() const { return scheme_; }
  long long num_batches() const { return num_batches_; }

 private:
  std::shared_ptr<Cost> cost_;
  double learning_rate_;
  long long batch_size_;
  SchemeKind scheme_;
  long long num_batches_;
  LearningRule rule_;
  Rng rng_;
  std::unique_ptr<GradientProgram> program_;
  std::vector<Tensor> velocity_;
  std::vector<Tensor> polyak_avg_;
  std::vector<Tensor> final_iterate_;
  long long polyak_updates_ = 0;
  long long epochs_trained_ = 0;
  std::function<void()> observer_;
};

/// Batch gradient descent with gradient accumulation over several
/// minibatches per update, optional Polak-Ribiere nonlinear conjugate
/// directions, and a line search on the accumulated-batch objective.
class BGD : public TrainingAlgorithm {
 public:
  enum class Mode { kSteepestDescent, kConjugateGradient };
  enum class LineSearchKind { kBacktracking, kBracketing };

  BGD(std::shared_ptr<Cost> cost, long long batch_size, long long accumulate,
      long long updates_per_batch, Mode mode, LineSearchKind ls,
      std::shared_ptr<TerminationCriterion> termination, std::uint64_t seed);

  std::string kind() const override { return "bgd"; }
  void setup(std::shared_ptr<Model> model,
             std::shared_ptr<DenseDesignMatrix> train) override;
  void train() override;
  Cost* cost() override { return cost_.get(); }
  std::vector<std::pair<std::string, std::function<double()>>> callback_channels()
      override;
  void set_update_observer(std::function<void()> fn) { observer_ = std::move(fn); }
  long long line_search_failures() const { return ls_failures_; }
  long long batch_size() const { return batch_size_; }

 private:
  std::shared_ptr<Cost> cost_;
  long long batch_size_, accumulate_, updates_per_batch_;
  Mode mode_;
  LineSearchKind ls_;
  Rng rng_;
  std::unique_ptr<GradientProgram> program_;
  long long ls_failures_ = 0;
  std::function<void()> observer_;
};

/// Serves minibatches to the model's own train_batch learning rule.
class DefaultTrainingAlgorithm : public TrainingAlgorithm {
 public:
  DefaultTrainingAlgorithm(long long batch_size,
                           std::shared_ptr<TerminationCriterion> termination);

  std::string kind() const override { return "default"; }
  void setup(std::shared_ptr<Model> model,
             std::shared_ptr<DenseDesignMatrix> train) override;
  void train() override;

 private:
  long long batch_size_;
};

/// Top-level training run: wires the monitor, loops epochs against the
/// termination criterion, runs extensions (periodic checkpoints), and
/// delivers the final model.
class TrainHarness {
 public:
  struct Options {
    std::string save_path;     // empty: no periodic checkpoints
    long long save_freq = 0;   // epochs between checkpoints; 0 disables
    long long monitor_batch_size = 128;
  };

  TrainHarness(std::shared_ptr<DenseDesignMatrix> train, std::shared_ptr<Model> model,
               std::shared_ptr<TrainingAlgorithm> algorithm,
               std::vector<std::pair<std::string, std::shared_ptr<DenseDesignMatrix>>>
                   monitoring_datasets,
               Options options, std::uint64_t global_seed);

  /// Returns the number of training epochs executed.
  long long run();

  Model& model() { return *model_; }
  std::shared_ptr<Model> model_ptr() { return model_; }
  TrainingAlgorithm& algorithm() { return *algorithm_; }
  Monitor& monitor() { return monitor_; }
  std::shared_ptr<DenseDesignMatrix> training_data() { return train_; }
  const std::vector<std::pair<std::string, std::shared_ptr<DenseDesignMatrix>>>&
  monitoring_datasets() const {
    return monitoring_;
  }
  std::uint64_t global_seed() const { return global_seed_; }
  const Options& options() const { return options_; }

  /// Final checkpoint: model parameters plus algorithm/cost state.
  void save_final(const std::string& dir, bool force);

  /// Registers the cost and algorithm channels on a monitor. Used by run()
  /// and by configuration validation (on a throwaway monitor).
  void build_monitor(Monitor& monitor);

 private:

  std::shared_ptr<DenseDesignMatrix> train_;
  std::shared_ptr<Model> model_;
  std::shared_ptr<TrainingAlgorithm> algorithm_;
  std::vector<std::pair<std::string, std::shared_ptr<DenseDesignMatrix>>> monitoring_;
  Options options_;
  std::uint64_t global_seed_;
  Monitor monitor_;
  bool ran_ = false;
};

}  // namespace modlearn
