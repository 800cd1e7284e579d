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

#include "modlearn/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "modlearn/checkpoint.hpp"

namespace modlearn {

// ---------------------------------------------------------------------------
// GradientProgram

GradientProgram::GradientProgram(Model& model, Cost& cost, long long target_dim)
    : model_(model), cost_(cost), ctx_(graph_) {
  x_ = graph_.variable("X", batch_shape(model.input_space(), kWild));
  if (cost.supervised()) {
    if (target_dim < 1)
      throw ValueError("cost '" + cost.name() +
                       "' is supervised but the dataset has no targets");
    y_ = graph_.variable("y", Shape{kWild, target_dim});
  }
  expr_ = cost.build(model, ctx_, x_, y_);
  params_ = model.params();
}

GradientProgram::PreparedBatch GradientProgram::prepare(const Tensor& x_rows,
                                                        const Tensor* y_rows) {
  PreparedBatch pb;
  pb.x_rows = x_rows;
  pb.n = x_rows.extent(0);
  Batch formatted =
      format_as(Batch{x_rows, VectorSpace{x_rows.extent(1)}}, model_.input_space());
  pb.bindings.set(x_, formatted.tensor);
  if (y_) {
    if (!y_rows)
      throw ValueError("cost '" + cost_.name() + "' needs targets for every batch");
    pb.y_rows = *y_rows;
    pb.bindings.set(*y_, *y_rows);
  }
  cost_.bind_batch(pb.bindings, pb.n);
  return pb;
}

std::vector<Tensor> GradientProgram::gradients(const PreparedBatch& batch) {
  Bindings b = batch.bindings;
  ctx_.bind(b);

  std::vector<Tensor> out;
  out.reserve(params_.size());
  for (Param* p : params_) out.push_back(Tensor::zeros(p->value.shape()));
  auto index_of = [&](Param* p) -> std::size_t {
    for (std::size_t i = 0; i < params_.size(); ++i)
      if (params_[i] == p) return i;
    throw ValueError("gradient for a parameter the model does not own");
  };

  std::vector<NodeRef> nodes;
  std::vector<std::pair<std::size_t, double>> targets;  // param index, coeff
  for (auto& [param, terms] : expr_.symbolic) {
    const std::size_t pi = index_of(param);
    for (auto& [coeff, node] : terms) {
      nodes.push_back(node);
      targets.push_back({pi, coeff});
    }
  }
  if (!nodes.empty()) {
    std::vector<Tensor> vals = graph_.eval(nodes, b);
    for (std::size_t i = 0; i < vals.size(); ++i) {
      auto& [pi, coeff] = targets[i];
      Tensor& dst = out[pi];
      if (!dst.same_shape(vals[i]))
        throw ShapeError("gradient shape " + shape_to_string(vals[i].shape()) +
                         " does not match parameter '" + params_[pi]->name + "' " +
                         shape_to_string(dst.shape()));
      for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += coeff * vals[i][k];
    }
  }
  for (auto& [coeff, fn] : expr_.sampled) {
    auto contributions = fn(batch.x_rows, batch.y_rows ? &*batch.y_rows : nullptr);
    for (auto& [param, tensor] : contributions) {
      const std::size_t pi = index_of(param);
      Tensor& dst = out[pi];
      if (!dst.same_shape(tensor))
        throw ShapeError("sampled gradient shape mismatch for parameter '" +
                         params_[pi]->name + "'");
      for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += coeff * tensor[k];
    }
  }
  return out;
}

std::optional<double> GradientProgram::value(const PreparedBatch& batch) {
  if (!expr_.value) return std::nullopt;
  Bindings b = batch.bindings;
  ctx_.bind(b);
  return graph_.eval_one(*expr_.value, b)[0];
}

// ---------------------------------------------------------------------------
// Line searches

LineSearchResult line_search(const std::function<double(double)>& f, double f0,
                             double slope0) {
  if (!(slope0 < 0.0))
    throw ValueError("line search requires a descent direction (slope0 < 0)");
  const double c1 = 1e-4;
  double t = 1.0;
  for (int halvings = 0; halvings <= 50; ++halvings) {
    if (f(t) <= f0 + c1 * t * slope0) return {t, true};
    t *= 0.5;
  }
  return {0.0, false};
}

LineSearchResult bracketing_line_search(const std::function<double(double)>& f,
                                        double f0, double slope0) {
  if (!(slope0 < 0.0))
    throw ValueError("line search requires a descent direction (slope0 < 0)");

  // Establish a bracket (a, m, b) with f(m) below both ends.
  double a = 0.0, fa = f0;
  double m, fm, b, fb;
  double t = 1.0, ft = f(t);
  if (ft < f0) {
    double prev_t = 0.0;
    double last_t = t, last_f = ft;
    double next_t = 2.0;
    bool bracketed = false;
    for (int i = 0; i < 60; ++i) {
      const double fn = f(next_t);
      if (fn > last_f) {
        a = prev_t;
        fa = prev_t == 0.0 ? f0 : f(prev_t);
        m = last_t;
        fm = last_f;
        b = next_t;
        fb = fn;
        bracketed = true;
        break;
      }
      prev_t = last_t;
      last_t = next_t;
      last_f = fn;
      next_t *= 2.0;
    }
    if (!bracketed) {
      // Monotone decrease as far as we looked; take the best point seen.
      return last_f <= f0 + 1e-4 * last_t * slope0 ? LineSearchResult{last_t, true}
                                                   : line_search(f, f0, slope0);
    }
  } else {
    // Minimum lies inside (0, 1): shrink until below f0.
    double hi = 1.0, fhi = ft;
    double probe = 0.5;
    bool found = false;
    for (int i = 0; i < 60; ++i) {
      const double fp = f(probe);
      if (fp < f0) {
        a = 0.0;
        fa = f0;
        m = probe;
        fm = fp;
        b = hi;
        fb = fhi;
        found = true;
        break;
      }
      hi = probe;
      fhi = fp;
      probe *= 0.5;
    }
    if (!found) return line_search(f, f0, slope0);
  }

  // Golden-section narrowing with successive parabolic refinement; the
  // parabola step is exact for quadratic objectives.
  const double gr = 0.3819660112501051;  // 2 - golden ratio
  for (int iter = 0; iter < 120; ++iter) {
    if (b - a <= 1e-14 * std::max(1.0, b)) break;
    double u = 0.0;
    bool have_parabola = false;
    {
      const double d1 = (m - a), d2 = (m - b);
      const double num = d1 * d1 * (fm - fb) - d2 * d2 * (fm - fa);
      const double den = d1 * (fm - fb) - d2 * (fm - fa);
      if (den != 0.0 && std::isfinite(num / den)) {
        u = m - 0.5 * num / den;
        have_parabola = u > a && u < b && u != m;
      }
    }
    if (!have_parabola)
      u = (m - a > b - m) ? m - gr * (m - a) : m + gr * (b - m);
    if (u <= a || u >= b || u == m) break;
    const double fu = f(u);
    if (fu <= fm) {
      if (u < m) {
        b = m;
        fb = fm;
      } else {
        a = m;
        fa = fm;
      }
      m = u;
      fm = fu;
    } else {
      if (u < m) {
        a = u;
        fa = fu;
      } else {
        b = u;
        fb = fu;
      }
    }
  }

  if (m > 0.0 && fm <= f0 + 1e-4 * m * slope0) return {m, true};
  return line_search(f, f0, slope0);
}

namespace {

/// Bracketing line search used by BGD: brackets the sign change of the
/// directional derivative, refines by secant with bisection safeguards
/// (one secant step is exact on quadratics), and still requires the Armijo
/// inequality on the accepted step.
LineSearchResult detail_bracketing_slope_search(
    const std::function<double(double)>& f, const std::function<double(double)>& slope,
    double f0, double slope0) {
  if (!(slope0 < 0.0))
    throw ValueError("line search requires a descent direction (slope0 < 0)");
  const double c1 = 1e-4;
  auto armijo_ok = [&](double t) { return f(t) <= f0 + c1 * t * slope0; };

  double lo = 0.0, slo = slope0;
  double hi = 1.0, shi = slope(1.0);
  bool bracketed = shi >= 0.0;
  for (int i = 0; !bracketed && i < 60; ++i) {
    lo = hi;
    slo = shi;
    hi *= 2.0;
    shi = slope(hi);
    bracketed = shi >= 0.0;
  }
  if (!bracketed) {
    // monotone descent as far as we looked
    return armijo_ok(hi) ? LineSearchResult{hi, true} : line_search(f, f0, slope0);
  }

  double best = hi;
  for (int iter = 0; iter < 80; ++iter) {
    double t;
    if (shi != slo) {
      t = hi - shi * (hi - lo) / (shi - slo);  // secant
      if (!(t > lo && t < hi)) t = 0.5 * (lo + hi);
    } else {
      t = 0.5 * (lo + hi);
    }
    const double st = slope(t);
    best = t;
    if (std::fabs(st) <= 1e-13 * std::max(1.0, std::fabs(slope0))) break;
    if (hi - lo <= 1e-15 * std::max(1.0, hi)) break;
    if (st < 0.0) {
      lo = t;
      slo = st;
    } else {
      hi = t;
      shi = st;
    }
  }
  if (best > 0.0 && armijo_ok(best)) return {best, true};
  return line_search(f, f0, slope0);
}

}  // namespace

// ---------------------------------------------------------------------------
// TrainingAlgorithm base

bool TrainingAlgorithm::continue_learning(const Monitor& monitor,
                                          long long epochs_done) const {
  if (!termination_)
    throw ValueError("training algorithm has no termination criterion");
  return termination_->should_continue(monitor, epochs_done);
}

// ---------------------------------------------------------------------------
// SGD

LearningRule LearningRule::with_momentum(double mu) {
  if (mu < 0.0 || mu >= 1.0)
    throw ValueError("momentum coefficient must be in [0, 1)");
  LearningRule r;
  r.kind = Kind::kMomentum;
  r.momentum = mu;
  return r;
}

LearningRule LearningRule::polyak(long long start_epoch, bool use_averaged) {
  if (start_epoch < 0) throw ValueError("polyak start epoch must be >= 0");
  LearningRule r;
  r.kind = Kind::kPolyak;
  r.polyak_start_epoch = start_epoch;
  r.polyak_use_averaged = use_averaged;
  return r;
}

SGD::SGD(std::shared_ptr<Cost> cost, double learning_rate, long long batch_size,
         SchemeKind scheme, std::shared_ptr<TerminationCriterion> termination,
         std::uint64_t seed, LearningRule rule, long long num_batches)
    : cost_(std::move(cost)),
      learning_rate_(learning_rate),
      batch_size_(batch_size),
      scheme_(scheme),
      num_batches_(num_batches),
      rule_(rule),
      rng_(seed) {
  if (!cost_) throw ValueError("sgd needs a cost");
  if (!(learning_rate > 0.0)) throw ValueError("sgd learning_rate must be > 0");
  if (batch_size < 1) throw ValueError("sgd batch_size must be >= 1");
  if (!termination) throw ValueError("sgd needs a termination criterion");
  termination_ = std::move(termination);
}

void SGD::setup(std::shared_ptr<Model> model, std::shared_ptr<DenseDesignMatrix> train) {
  model_ = std::move(model);
  data_ = std::move(train);
  program_ = std::make_unique<GradientProgram>(*model_, *cost_, data_->target_dim());
  velocity_.clear();
  polyak_avg_.clear();
  for (Param* p : program_->params()) {
    velocity_.push_back(Tensor::zeros(p->value.shape()));
    polyak_avg_.push_back(Tensor::zeros(p->value.shape()));
  }
  polyak_updates_ = 0;
  epochs_trained_ = 0;
}

void SGD::train() {
  if (!program_) throw ValueError("sgd: setup has not run");
  const bool polyak_active = rule_.kind == LearningRule::Kind::kPolyak &&
                             epochs_trained_ >= rule_.polyak_start_epoch;
  IterationScheme scheme{scheme_, batch_size_, num_batches_};
  BatchIterator it(*data_, scheme, &rng_);
  const auto& params = program_->params();
  while (auto batch = it.next()) {
    auto pb = program_->prepare(batch->x, batch->y ? &*batch->y : nullptr);
    std::vector<Tensor> grads = program_->gradients(pb);
    for (std::size_t i = 0; i < params.size(); ++i)
      if (!grads[i].all_finite())
        throw EvalError("non-finite gradient for parameter '" + params[i]->name +
                        "' at epoch " + std::to_string(epochs_trained_) +
                        "; aborting epoch");
    for (std::size_t i = 0; i < params.size(); ++i) {
      Tensor& theta = params[i]->value;
      const Tensor& g = grads[i];
      if (rule_.kind == LearningRule::Kind::kMomentum) {
        Tensor& v = velocity_[i];
        for (std::size_t k = 0; k < theta.size(); ++k) {
          v[k] = rule_.momentum * v[k] - learning_rate_ * g[k];
          theta[k] += v[k];
        }
      } else {
        for (std::size_t k = 0; k < theta.size(); ++k)
          theta[k] -= learning_rate_ * g[k];
      }
    }
    model_->censor_updates();
    if (polyak_active) {
      ++polyak_updates_;
      const double t = static_cast<double>(polyak_updates_);
      for (std::size_t i = 0; i < params.size(); ++i) {
        Tensor& avg = polyak_avg_[i];
        const Tensor& theta = params[i]->value;
        for (std::size_t k = 0; k < avg.size(); ++k)
          avg[k] += (theta[k] - avg[k]) / t;
      }
    }
    if (observer_) observer_();
  }
  ++epochs_trained_;
}

void SGD::finish() {
  final_iterate_.clear();
  for (Param* p : program_->params()) final_iterate_.push_back(p->value);
  if (rule_.kind == LearningRule::Kind::kPolyak && rule_.polyak_use_averaged &&
      polyak_updates_ > 0) {
    const auto& params = program_->params();
    for (std::size_t i = 0; i < params.size(); ++i)
      params[i]->value = polyak_avg_[i];
  }
}

std::vector<std::pair<std::string, Tensor>> SGD::extra_checkpoint_tensors() {
  std::vector<std::pair<std::string, Tensor>> out;
  if (rule_.kind == LearningRule::Kind::kPolyak && polyak_updates_ > 0) {
    const auto& params = program_->params();
    for (std::size_t i = 0; i < params.size(); ++i) {
      out.push_back({"polyak__" + params[i]->name, polyak_avg_[i]});
      if (!final_iterate_.empty())
        out.push_back({"iterate__" + params[i]->name, final_iterate_[i]});
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// BGD

BGD::BGD(std::shared_ptr<Cost> cost, long long batch_size, long long accumulate,
         long long updates_per_batch, Mode mode, LineSearchKind ls,
         std::shared_ptr<TerminationCriterion> termination, std::uint64_t seed)
    : cost_(std::move(cost)),
      batch_size_(batch_size),
      accumulate_(accumulate),
      updates_per_batch_(updates_per_batch),
      mode_(mode),
      ls_(ls),
      rng_(seed) {
  if (!cost_) throw ValueError("bgd needs a cost");
  if (batch_size < 1) throw ValueError("bgd batch_size must be >= 1");
  if (accumulate < 1) throw ValueError("bgd accumulate must be >= 1");
  if (updates_per_batch < 1) throw ValueError("bgd updates_per_batch must be >= 1");
  if (!termination) throw ValueError("bgd needs a termination criterion");
  termination_ = std::move(termination);
}

void BGD::setup(std::shared_ptr<Model> model, std::shared_ptr<DenseDesignMatrix> train) {
  model_ = std::move(model);
  data_ = std::move(train);
  program_ = std::make_unique<GradientProgram>(*model_, *cost_, data_->target_dim());
  if (!program_->has_value())
    throw ValueError("bgd needs a cost with a computable value for line searches; '" +
                     cost_->name() + "' has none");
  ls_failures_ = 0;
}

void BGD::train() {
  if (!program_) throw ValueError("bgd: setup has not run");
  const auto& params = program_->params();
  std::size_t total_dim = 0;
  for (Param* p : params) total_dim += p->value.size();

  auto flatten = [&](const std::vector<Tensor>& ts) {
    std::vector<double> flat;
    flat.reserve(total_dim);
    for (const Tensor& t : ts) flat.insert(flat.end(), t.data().begin(), t.data().end());
    return flat;
  };
  auto dot = [](const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
  };

  auto process_macro = [&](std::vector<GradientProgram::PreparedBatch>& macro) {
    long long n_total = 0;
    for (const auto& pb : macro) n_total += pb.n;

    auto mean_gradient = [&]() {
      std::vector<Tensor> acc;
      for (Param* p : params) acc.push_back(Tensor::zeros(p->value.shape()));
      for (const auto& pb : macro) {
        std::vector<Tensor> g = program_->gradients(pb);
        const double w = static_cast<double>(pb.n) / static_cast<double>(n_total);
        for (std::size_t i = 0; i < acc.size(); ++i)
          for (std::size_t k = 0; k < acc[i].size(); ++k) acc[i][k] += w * g[i][k];
      }
      return acc;
    };
    auto mean_value = [&]() {
      double acc = 0.0;
      for (const auto& pb : macro) {
        auto v = program_->value(pb);
        acc += static_cast<double>(pb.n) * *v;
      }
      return acc / static_cast<double>(n_total);
    };

    std::vector<double> prev_g, prev_d;
    long long iters_since_restart = 0;
    for (long long update = 0; update < updates_per_batch_; ++update) {
      std::vector<Tensor> grads = mean_gradient();
      for (std::size_t i = 0; i < params.size(); ++i)
        if (!grads[i].all_finite())
          throw EvalError("non-finite gradient for parameter '" + params[i]->name +
                          "'; aborting epoch");
      std::vector<double> g = flatten(grads);
      const double gg = dot(g, g);
      if (gg == 0.0) break;  // stationary on this batch

      std::vector<double> d(g.size());
      bool restart = mode_ == Mode::kSteepestDescent || prev_g.empty() ||
                     iters_since_restart >= static_cast<long long>(total_dim);
      if (restart) iters_since_restart = 0;
      if (!restart) {
        // Polak-Ribiere with the standard non-negativity clamp.
        double num = 0.0;
        for (std::size_t i = 0; i < g.size(); ++i) num += g[i] * (g[i] - prev_g[i]);
        const double beta = std::max(0.0, num / dot(prev_g, prev_g));
        for (std::size_t i = 0; i < g.size(); ++i) d[i] = -g[i] + beta * prev_d[i];
        if (dot(g, d) >= 0.0) restart = true;  // not a descent direction
      }
      if (restart)
        for (std::size_t i = 0; i < g.size(); ++i) d[i] = -g[i];

      const double slope0 = dot(g, d);
      const double f0 = mean_value();

      std::vector<Tensor> theta0;
      theta0.reserve(params.size());
      for (Param* p : params) theta0.push_back(p->value);
      auto set_trial = [&](double t) {
        std::size_t off = 0;
        for (std::size_t i = 0; i < params.size(); ++i) {
          Tensor& v = params[i]->value;
          for (std::size_t k = 0; k < v.size(); ++k) v[k] = theta0[i][k] + t * d[off + k];
          off += v.size();
        }
      };
      auto f = [&](double t) {
        set_trial(t);
        return mean_value();
      };
      auto slope_at = [&](double t) {
        set_trial(t);
        std::vector<Tensor> gt = mean_gradient();
        double s = 0.0;
        std::size_t off = 0;
        for (const Tensor& tg : gt) {
          for (std::size_t k = 0; k < tg.size(); ++k) s += tg[k] * d[off + k];
          off += tg.size();
        }
        return s;
      };

      LineSearchResult ls = ls_ == LineSearchKind::kBacktracking
                                ? line_search(f, f0, slope0)
                                : detail_bracketing_slope_search(f, slope_at, f0, slope0);
      if (!ls.success) {
        ++ls_failures_;
        set_trial(0.0);  // zero step
      } else {
        set_trial(ls.step);
      }
      model_->censor_updates();
      if (observer_) observer_();
      prev_g = std::move(g);
      prev_d = std::move(d);
      ++iters_since_restart;
    }
  };

  BatchIterator it(*data_, IterationScheme{SchemeKind::kSequential, batch_size_, 0},
                   nullptr);
  std::vector<GradientProgram::PreparedBatch> macro;
  while (auto batch = it.next()) {
    macro.push_back(program_->prepare(batch->x, batch->y ? &*batch->y : nullptr));
    if (static_cast<long long>(macro.size()) == accumulate_) {
      process_macro(macro);
      macro.clear();
    }
  }
  if (!macro.empty()) process_macro(macro);
}

std::vector<std::pair<std::string, std::function<double()>>> BGD::callback_channels() {
  return {{"ls_failures", [this]() { return static_cast<double>(ls_failures_); }}};
}

// ---------------------------------------------------------------------------
// DefaultTrainingAlgorithm

DefaultTrainingAlgorithm::DefaultTrainingAlgorithm(
    long long batch_size, std::shared_ptr<TerminationCriterion> termination)
    : batch_size_(batch_size) {
  if (batch_size < 1) throw ValueError("batch_size must be >= 1");
  if (!termination) throw ValueError("default algorithm needs a termination criterion");
  termination_ = std::move(termination);
}

void DefaultTrainingAlgorithm::setup(std::shared_ptr<Model> model,
                                     std::shared_ptr<DenseDesignMatrix> train) {
  if (!model->supports_train_batch())
    throw CapabilityError("model '" + model->kind() +
                          "' has no train_batch rule; the default training "
                          "algorithm cannot drive it");
  model_ = std::move(model);
  data_ = std::move(train);
}

void DefaultTrainingAlgorithm::train() {
  if (!model_) throw ValueError("default algorithm: setup has not run");
  BatchIterator it(*data_, IterationScheme{SchemeKind::kSequential, batch_size_, 0},
                   nullptr);
  while (auto batch = it.next()) model_->train_batch(batch->x);
}

// ---------------------------------------------------------------------------
// TrainHarness

TrainHarness::TrainHarness(
    std::shared_ptr<DenseDesignMatrix> train, std::shared_ptr<Model> model,
    std::shared_ptr<TrainingAlgorithm> algorithm,
    std::vector<std::pair<std::string, std::shared_ptr<DenseDesignMatrix>>>
        monitoring_datasets,
    Options options, std::uint64_t global_seed)
    : train_(std::move(train)),
      model_(std::move(model)),
      algorithm_(std::move(algorithm)),
      monitoring_(std::move(monitoring_datasets)),
      options_(std::move(options)),
      global_seed_(global_seed) {
  if (!train_) throw ValueError("harness needs a training dataset");
  if (!model_) throw ValueError("harness needs a model");
  if (!algorithm_) throw ValueError("harness needs a training algorithm");
}

void TrainHarness::build_monitor(Monitor& monitor) {
  Cost* cost = algorithm_->cost();
  for (auto& [tag, ds] : monitoring_) {
    if (!ds) throw ValueError("monitoring dataset '" + tag + "' is null");
    if (!cost) continue;  // nothing to measure without a cost
    Monitor::DatasetProgram p;
    p.tag = tag;
    p.data = ds;
    p.graph = std::make_unique<Graph>();
    p.ctx = std::make_unique<ExprContext>(*p.graph);
    p.input_space = model_->input_space();
    p.x = p.graph->variable("X", batch_shape(p.input_space, kWild));
    if (cost->supervised()) {
      if (!ds->has_targets())
        throw ValueError("monitoring dataset '" + tag +
                         "' has no targets but cost '" + cost->name() +
                         "' is supervised");
      p.y = p.graph->variable("y", Shape{kWild, ds->target_dim()});
    }
    p.batch_size = options_.monitor_batch_size;
    auto channels = cost->monitoring_channels(*model_, *p.ctx, p.x, p.y);
    for (auto& [name, node] : channels)
      p.outputs.push_back({tag + "_" + name, node});
    if (!p.outputs.empty()) monitor.add_program(std::move(p));
  }
  for (auto& [name, fn] : algorithm_->callback_channels())
    monitor.add_callback_channel(name, fn);
}

long long TrainHarness::run() {
  algorithm_->setup(model_, train_);
  build_monitor(monitor_);
  if (TerminationCriterion* t = algorithm_->termination()) t->validate(monitor_);

  monitor_.measure(0);
  long long epochs = 0;
  while (algorithm_->continue_learning(monitor_, epochs)) {
    algorithm_->train();
    ++epochs;
    monitor_.measure(epochs);
    if (!options_.save_path.empty() && options_.save_freq > 0 &&
        epochs % options_.save_freq == 0) {
      char name[32];
      std::snprintf(name, sizeof name, "epoch_%04lld", epochs);
      save_checkpoint(options_.save_path + "/" + name, *model_,
                      algorithm_->extra_checkpoint_tensors(), global_seed_, true);
    }
  }
  algorithm_->finish();
  ran_ = true;
  return epochs;
}

void TrainHarness::save_final(const std::string& dir, bool force) {
  std::vector<std::pair<std::string, Tensor>> extra =
      algorithm_->extra_checkpoint_tensors();
  if (Cost* cost = algorithm_->cost())
    for (auto& [name, tensor] : cost->state()) extra.push_back({name, *tensor});
  save_checkpoint(dir, *model_, extra, global_seed_, force);
}

}  // namespace modlearn
