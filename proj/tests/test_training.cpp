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

#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "modlearn/checkpoint.hpp"
#include "modlearn/training.hpp"
#include "testutil.hpp"

using namespace modlearn;

namespace {

// One-parameter model for hand-checkable update arithmetic.
class ScalarModel : public Model {
 public:
  explicit ScalarModel(double init) : theta_{"theta", Tensor::vector({init})} {}
  std::string kind() const override { return "scalar"; }
  const Space& input_space() const override { return space_; }
  std::vector<Param*> params() override { return {&theta_}; }
  double value() const { return theta_.value[0]; }

 private:
  Space space_ = VectorSpace{1};
  Param theta_;
};

// Cost with constant gradient g (value = g * theta, ignoring the data).
class LinearCost : public Cost {
 public:
  explicit LinearCost(double slope) : slope_(slope) {}
  std::string name() const override { return "linear_test"; }
  std::optional<NodeRef> build_value(Model& m, ExprContext& ctx, NodeRef,
                                     std::optional<NodeRef>) override {
    Graph& g = ctx.graph();
    return g.mul(g.scalar_constant(slope_), g.sum_all(ctx.node_for(*m.params()[0])));
  }

 private:
  double slope_;
};

std::shared_ptr<DenseDesignMatrix> dummy_data(long long n = 4) {
  Rng rng(1);
  return std::make_shared<DenseDesignMatrix>(test::random_tensor(Shape{n, 1}, rng));
}

// Quadratic objective 0.5 theta A theta' - b theta with a symmetric
// positive definite A; theta is a [1, n] parameter row.
class QuadraticModel : public Model {
 public:
  explicit QuadraticModel(long long n) : theta_{"theta", Tensor(Shape{1, n})} {}
  std::string kind() const override { return "quadratic"; }
  const Space& input_space() const override { return space_; }
  std::vector<Param*> params() override { return {&theta_}; }
  Param& theta() { return theta_; }

 private:
  Space space_ = VectorSpace{1};
  Param theta_;
};

class QuadraticCost : public Cost {
 public:
  QuadraticCost(Tensor a, Tensor b) : a_(std::move(a)), b_(std::move(b)) {}
  std::string name() const override { return "quadratic_test"; }
  std::optional<NodeRef> build_value(Model& m, ExprContext& ctx, NodeRef,
                                     std::optional<NodeRef>) override {
    Graph& g = ctx.graph();
    NodeRef theta = ctx.node_for(*m.params()[0]);
    NodeRef quad = g.mul(g.scalar_constant(0.5),
                         g.sum_all(g.mul(g.matmul(theta, g.constant(a_)), theta)));
    NodeRef lin = g.sum_all(g.mul(g.constant(b_), theta));
    return g.sub(quad, lin);
  }
  const Tensor& a() const { return a_; }
  const Tensor& b() const { return b_; }

 private:
  Tensor a_, b_;
};

}  // namespace

TEST_CASE("plain sgd update: theta=1, eta=0.1, g=2 -> 0.8") {
  auto model = std::make_shared<ScalarModel>(1.0);
  auto cost = std::make_shared<LinearCost>(2.0);
  SGD sgd(cost, 0.1, 4, SchemeKind::kSequential, std::make_shared<EpochCounter>(1), 0);
  sgd.setup(model, dummy_data());
  sgd.train();  // one batch of 4 rows -> one update
  CHECK(model->value() == doctest::Approx(0.8).epsilon(1e-15));
}

TEST_CASE("zero momentum is trajectory-identical to plain sgd") {
  Rng rng(2);
  Tensor x = test::random_tensor(Shape{12, 3}, rng);
  Tensor y(Shape{12, 2});
  for (std::size_t i = 0; i < 12; ++i) y.at(i, rng.uniform_int(2)) = 1.0;

  auto run = [&](LearningRule rule) {
    auto data = std::make_shared<DenseDesignMatrix>(x, y);
    auto model = std::make_shared<MLP>(
        Space{VectorSpace{3}},
        std::vector<LayerSpec>{
            LayerSpec{.name = "h", .activation = Activation::kTanh, .dim = 4},
            LayerSpec{.name = "o", .activation = Activation::kSoftmax, .dim = 2}},
        Rng(77));
    SGD sgd(std::make_shared<NLLSoftmax>(), 0.1, 4, SchemeKind::kShuffledSequential,
            std::make_shared<EpochCounter>(3), 5, rule);
    sgd.setup(model, data);
    while (sgd.epochs_trained() < 3) sgd.train();
    std::vector<double> flat;
    for (Param* p : model->params())
      flat.insert(flat.end(), p->value.data().begin(), p->value.data().end());
    return flat;
  };
  CHECK(run(LearningRule::none()) == run(LearningRule::with_momentum(0.0)));
}

TEST_CASE("momentum accumulates velocity") {
  auto model = std::make_shared<ScalarModel>(0.0);
  auto cost = std::make_shared<LinearCost>(1.0);  // g = 1 always
  SGD sgd(cost, 0.1, 4, SchemeKind::kSequential, std::make_shared<EpochCounter>(3), 0,
          LearningRule::with_momentum(0.5));
  sgd.setup(model, dummy_data());
  // v1 = -0.1, theta = -0.1; v2 = -0.15, theta = -0.25; v3 = -0.175, theta = -0.425
  sgd.train();
  CHECK(model->value() == doctest::Approx(-0.1).epsilon(1e-15));
  sgd.train();
  CHECK(model->value() == doctest::Approx(-0.25).epsilon(1e-15));
  sgd.train();
  CHECK(model->value() == doctest::Approx(-0.425).epsilon(1e-15));
}

TEST_CASE("polyak averaging") {
  // constant parameters: the average equals the parameter
  {
    auto model = std::make_shared<ScalarModel>(1.5);
    auto cost = std::make_shared<LinearCost>(0.0);  // zero gradient
    SGD sgd(cost, 0.1, 4, SchemeKind::kSequential, std::make_shared<EpochCounter>(5), 0,
            LearningRule::polyak(0));
    sgd.setup(model, dummy_data());
    for (int e = 0; e < 5; ++e) sgd.train();
    sgd.finish();
    CHECK(model->value() == doctest::Approx(1.5).epsilon(1e-15));
    CHECK(sgd.polyak_averages()[0][0] == doctest::Approx(1.5).epsilon(1e-15));
  }
  // constant gradient: theta_t = -0.1 t, average of t=1..5 = -0.3
  {
    auto model = std::make_shared<ScalarModel>(0.0);
    auto cost = std::make_shared<LinearCost>(1.0);
    SGD sgd(cost, 0.1, 4, SchemeKind::kSequential, std::make_shared<EpochCounter>(5), 0,
            LearningRule::polyak(0, /*use_averaged=*/true));
    sgd.setup(model, dummy_data());
    for (int e = 0; e < 5; ++e) sgd.train();
    CHECK(model->value() == doctest::Approx(-0.5).epsilon(1e-12));
    sgd.finish();  // substitutes the averaged parameters
    CHECK(model->value() == doctest::Approx(-0.3).epsilon(1e-12));
    auto extra = sgd.extra_checkpoint_tensors();
    REQUIRE(extra.size() == 2);
    CHECK(extra[0].first == "polyak__theta");
    CHECK(extra[1].first == "iterate__theta");
    CHECK(extra[1].second[0] == doctest::Approx(-0.5).epsilon(1e-12));
  }
  // start epoch delays activation: only epochs 3, 4, 5 contribute
  {
    auto model = std::make_shared<ScalarModel>(0.0);
    auto cost = std::make_shared<LinearCost>(1.0);
    SGD sgd(cost, 0.1, 4, SchemeKind::kSequential, std::make_shared<EpochCounter>(5), 0,
            LearningRule::polyak(2));
    sgd.setup(model, dummy_data());
    for (int e = 0; e < 5; ++e) sgd.train();
    sgd.finish();
    // iterates after updates 3,4,5: -0.3, -0.4, -0.5 -> mean -0.4
    CHECK(model->value() == doctest::Approx(-0.4).epsilon(1e-12));
  }
}

namespace {

// Cost whose gradient blows up to produce a NaN.
class NanCost : public Cost {
 public:
  std::string name() const override { return "nan_test"; }
  std::optional<NodeRef> build_value(Model& m, ExprContext& ctx, NodeRef,
                                     std::optional<NodeRef>) override {
    Graph& g = ctx.graph();
    // sqrt of a negative parameter value -> NaN forward and backward
    return g.sum_all(g.sqrt(ctx.node_for(*m.params()[0])));
  }
};

}  // namespace

TEST_CASE("non-finite gradients abort the epoch naming the parameter") {
  auto model = std::make_shared<ScalarModel>(-1.0);
  SGD sgd(std::make_shared<NanCost>(), 0.1, 4, SchemeKind::kSequential,
          std::make_shared<EpochCounter>(1), 0);
  sgd.setup(model, dummy_data());
  CHECK_THROWS_WITH_AS(sgd.train(), doctest::Contains("theta"), EvalError);
}

TEST_CASE("line search: backtracking") {
  // f(t) = (t-1)^2: Armijo holds at the full step
  auto f = [](double t) { return (t - 1.0) * (t - 1.0); };
  LineSearchResult r = line_search(f, f(0.0), -2.0);
  CHECK(r.success);
  CHECK(r.step == 1.0);

  // ascending objective: precondition failure
  CHECK_THROWS_AS(line_search([](double t) { return t; }, 0.0, 1.0), ValueError);

  // quadratics with random curvature: accepted step satisfies Armijo
  Rng rng(3);
  for (int rep = 0; rep < 50; ++rep) {
    const double a = rng.uniform(0.5, 50.0);
    const double slope0 = -rng.uniform(0.1, 10.0);
    auto q = [&](double t) { return 0.5 * a * t * t + slope0 * t; };
    LineSearchResult s = line_search(q, 0.0, slope0);
    REQUIRE(s.success);
    CHECK(q(s.step) <= 0.0 + 1e-4 * s.step * slope0);
  }
}

TEST_CASE("line search: bracketing also satisfies Armijo and nails quadratics") {
  Rng rng(4);
  for (int rep = 0; rep < 50; ++rep) {
    const double a = rng.uniform(0.5, 50.0);
    const double slope0 = -rng.uniform(0.1, 10.0);
    auto q = [&](double t) { return 0.5 * a * t * t + slope0 * t; };
    LineSearchResult s = bracketing_line_search(q, 0.0, slope0);
    REQUIRE(s.success);
    CHECK(q(s.step) <= 1e-4 * s.step * slope0);
    // exact minimizer of the quadratic
    CHECK(s.step == doctest::Approx(-slope0 / a).epsilon(1e-8));
  }
}

TEST_CASE("bgd accumulated gradient equals the full-batch gradient") {
  Rng rng(5);
  Tensor x = test::random_tensor(Shape{24, 3}, rng);
  Tensor y(Shape{24, 2});
  for (std::size_t i = 0; i < 24; ++i) y.at(i, rng.uniform_int(2)) = 1.0;
  auto model = std::make_shared<MLP>(
      Space{VectorSpace{3}},
      std::vector<LayerSpec>{
          LayerSpec{.name = "h", .activation = Activation::kTanh, .dim = 5},
          LayerSpec{.name = "o", .activation = Activation::kSoftmax, .dim = 2}},
      Rng(6));
  NLLSoftmax cost;
  GradientProgram program(*model, cost, 2);

  // full batch
  auto full = program.prepare(x, &y);
  std::vector<Tensor> full_g = program.gradients(full);

  // partition into 4 minibatches of 6, weighted mean
  std::vector<Tensor> acc;
  for (Param* p : program.params()) acc.push_back(Tensor::zeros(p->value.shape()));
  for (int part = 0; part < 4; ++part) {
    std::vector<std::size_t> idx;
    for (int i = 0; i < 6; ++i) idx.push_back(static_cast<std::size_t>(part * 6 + i));
    Tensor xb = x.gather_rows(idx);
    Tensor yb = y.gather_rows(idx);
    auto pb = program.prepare(xb, &yb);
    std::vector<Tensor> g = program.gradients(pb);
    for (std::size_t i = 0; i < g.size(); ++i)
      for (std::size_t k = 0; k < g[i].size(); ++k) acc[i][k] += g[i][k] * (6.0 / 24.0);
  }
  for (std::size_t i = 0; i < acc.size(); ++i)
    for (std::size_t k = 0; k < acc[i].size(); ++k)
      CHECK(std::fabs(acc[i][k] - full_g[i][k]) < 1e-10);
}

TEST_CASE("bgd conjugate gradient solves an SPD quadratic in n iterations") {
  Rng rng(7);
  const long long n = 5;
  // A = M M^T + I (symmetric positive definite), b random
  Tensor m = test::random_tensor(Shape{n, n}, rng);
  Tensor a(Shape{n, n});
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t j = 0; j < 5; ++j) {
      double acc = i == j ? 1.0 : 0.0;
      for (std::size_t k = 0; k < 5; ++k) acc += m.at(i, k) * m.at(j, k);
      a.at(i, j) = acc;
    }
  Tensor b = test::random_tensor(Shape{1, n}, rng);

  auto model = std::make_shared<QuadraticModel>(n);
  auto cost = std::make_shared<QuadraticCost>(a, b);
  BGD bgd(cost, 1, 1, 5, BGD::Mode::kConjugateGradient, BGD::LineSearchKind::kBracketing,
          std::make_shared<EpochCounter>(1), 0);
  bgd.setup(model, dummy_data(1));

  // monotone decrease of f across the 5 updates
  auto f_of = [&](const Tensor& theta) {
    double quad = 0.0, lin = 0.0;
    for (std::size_t i = 0; i < 5; ++i) {
      lin += b.at(0, i) * theta.at(0, i);
      for (std::size_t j = 0; j < 5; ++j)
        quad += 0.5 * theta.at(0, i) * a.at(i, j) * theta.at(0, j);
    }
    return quad - lin;
  };
  std::vector<double> f_trace{f_of(model->theta().value)};
  bgd.set_update_observer([&] { f_trace.push_back(f_of(model->theta().value)); });
  bgd.train();
  REQUIRE(f_trace.size() == 6);
  for (std::size_t i = 0; i + 1 < f_trace.size(); ++i) CHECK(f_trace[i + 1] <= f_trace[i]);

  // gradient norm at the solution
  const Tensor& theta = model->theta().value;
  double grad_norm_sq = 0.0;
  for (std::size_t i = 0; i < 5; ++i) {
    double gi = -b.at(0, i);
    for (std::size_t j = 0; j < 5; ++j) gi += a.at(i, j) * theta.at(0, j);
    grad_norm_sq += gi * gi;
  }
  CHECK(std::sqrt(grad_norm_sq) < 1e-8);
  CHECK(bgd.line_search_failures() == 0);

  // direct-solve oracle: Gaussian elimination on A theta* = b
  Tensor aug = a;
  Tensor rhs(Shape{n});
  for (std::size_t i = 0; i < 5; ++i) rhs[i] = b.at(0, i);
  for (std::size_t col = 0; col < 5; ++col) {
    std::size_t pivot = col;
    for (std::size_t r = col + 1; r < 5; ++r)
      if (std::fabs(aug.at(r, col)) > std::fabs(aug.at(pivot, col))) pivot = r;
    for (std::size_t c = 0; c < 5; ++c) std::swap(aug.at(col, c), aug.at(pivot, c));
    std::swap(rhs[col], rhs[pivot]);
    for (std::size_t r = 0; r < 5; ++r) {
      if (r == col) continue;
      const double factor = aug.at(r, col) / aug.at(col, col);
      for (std::size_t c = 0; c < 5; ++c) aug.at(r, c) -= factor * aug.at(col, c);
      rhs[r] -= factor * rhs[col];
    }
  }
  for (std::size_t i = 0; i < 5; ++i)
    CHECK(theta.at(0, i) == doctest::Approx(rhs[i] / aug.at(i, i)).epsilon(1e-7));
}

TEST_CASE("bgd refuses costs without a value") {
  auto model = std::make_shared<RBM>(4, 3, Rng(8));
  auto cost = std::make_shared<PersistentCD>(4, 1, 9);
  BGD bgd(cost, 4, 1, 1, BGD::Mode::kSteepestDescent, BGD::LineSearchKind::kBacktracking,
          std::make_shared<EpochCounter>(1), 0);
  Rng rng(10);
  Tensor x(Shape{8, 4});
  for (double& v : x.data()) v = rng.bernoulli(0.5) ? 1.0 : 0.0;
  auto data = std::make_shared<DenseDesignMatrix>(x);
  CHECK_THROWS_WITH_AS(bgd.setup(model, data), doctest::Contains("value"), ValueError);
}

TEST_CASE("bgd steepest descent decreases a real training objective") {
  Rng rng(11);
  Tensor x = test::random_tensor(Shape{20, 3}, rng);
  Tensor y(Shape{20, 2});
  for (std::size_t i = 0; i < 20; ++i) y.at(i, rng.uniform_int(2)) = 1.0;
  auto data = std::make_shared<DenseDesignMatrix>(x, y);
  auto model = std::make_shared<MLP>(
      Space{VectorSpace{3}},
      std::vector<LayerSpec>{
          LayerSpec{.name = "h", .activation = Activation::kTanh, .dim = 4},
          LayerSpec{.name = "o", .activation = Activation::kSoftmax, .dim = 2}},
      Rng(12));
  auto cost = std::make_shared<NLLSoftmax>();
  BGD bgd(cost, 10, 2, 3, BGD::Mode::kSteepestDescent, BGD::LineSearchKind::kBacktracking,
          std::make_shared<EpochCounter>(4), 0);
  bgd.setup(model, data);

  GradientProgram probe(*model, *cost, 2);
  auto full = probe.prepare(x, &y);
  const double before = *probe.value(full);
  for (int e = 0; e < 4; ++e) bgd.train();
  const double after = *probe.value(full);
  CHECK(after < before);
}

namespace {

class CountingModel : public Model {
 public:
  std::string kind() const override { return "counting"; }
  const Space& input_space() const override { return space_; }
  std::vector<Param*> params() override { return {&p_}; }
  bool supports_train_batch() const override { return true; }
  void train_batch(const Tensor& x) override {
    ++calls;
    rows += x.extent(0);
  }
  int calls = 0;
  long long rows = 0;

 private:
  Space space_ = VectorSpace{2};
  Param p_{"p", Tensor::vector({0.0})};
};

}  // namespace

TEST_CASE("default training algorithm serves minibatches to train_batch") {
  auto model = std::make_shared<CountingModel>();
  Rng rng(13);
  auto data = std::make_shared<DenseDesignMatrix>(test::random_tensor(Shape{10, 2}, rng));
  DefaultTrainingAlgorithm alg(2, std::make_shared<EpochCounter>(3));
  alg.setup(model, data);
  for (int e = 0; e < 3; ++e) alg.train();
  CHECK(model->calls == 15);  // 5 batches per epoch, 3 epochs
  CHECK(model->rows == 30);

  // models without the capability are rejected at setup
  auto mlp = std::make_shared<MLP>(
      Space{VectorSpace{2}},
      std::vector<LayerSpec>{LayerSpec{.name = "h", .dim = 2}}, Rng(14));
  DefaultTrainingAlgorithm alg2(2, std::make_shared<EpochCounter>(1));
  CHECK_THROWS_AS(alg2.setup(mlp, data), CapabilityError);

  // the RBM's CD-1 rule runs and moves parameters
  auto rbm = std::make_shared<RBM>(2, 3, Rng(15));
  Tensor before = rbm->weights().value;
  Tensor bits(Shape{6, 2});
  for (double& v : bits.data()) v = rng.bernoulli(0.5) ? 1.0 : 0.0;
  auto bit_data = std::make_shared<DenseDesignMatrix>(bits);
  DefaultTrainingAlgorithm alg3(3, std::make_shared<EpochCounter>(1));
  alg3.setup(rbm, bit_data);
  alg3.train();
  CHECK(rbm->weights().value.data() != before.data());
}

TEST_CASE("harness: epoch counting, monitor rows, periodic checkpoints") {
  test::TempDir tmp;
  Rng rng(16);
  Tensor x = test::random_tensor(Shape{12, 3}, rng);
  Tensor y(Shape{12, 2});
  for (std::size_t i = 0; i < 12; ++i) y.at(i, rng.uniform_int(2)) = 1.0;
  auto data = std::make_shared<DenseDesignMatrix>(x, y);
  auto model = std::make_shared<MLP>(
      Space{VectorSpace{3}},
      std::vector<LayerSpec>{
          LayerSpec{.name = "h", .activation = Activation::kTanh, .dim = 4},
          LayerSpec{.name = "o", .activation = Activation::kSoftmax, .dim = 2}},
      Rng(17));
  auto alg = std::make_shared<SGD>(std::make_shared<NLLSoftmax>(), 0.1, 4,
                                   SchemeKind::kSequential,
                                   std::make_shared<EpochCounter>(3), 18);
  TrainHarness::Options opts;
  opts.save_path = tmp.file("ckpt");
  opts.save_freq = 2;
  TrainHarness harness(data, model, alg,
                       {{"train", data}}, opts, 99);
  const long long epochs = harness.run();
  CHECK(epochs == 3);
  CHECK(harness.monitor().num_measurements() == 4);  // epoch 0 baseline + 3
  CHECK(harness.monitor().has_channel("train_objective"));
  CHECK(harness.monitor().has_channel("train_nll"));
  CHECK(harness.monitor().has_channel("train_misclass"));
  CHECK(std::filesystem::exists(tmp.file("ckpt/epoch_0002/manifest.json")));
  CHECK(!std::filesystem::exists(tmp.file("ckpt/epoch_0003")));

  harness.save_final(tmp.file("final"), false);
  CheckpointSummary summary = read_checkpoint_summary(tmp.file("final"));
  CHECK(summary.kind == "mlp");
  CHECK(summary.global_seed == 99);
  CHECK(summary.params.size() == 4);
  CHECK_THROWS_WITH_AS(harness.save_final(tmp.file("final"), false),
                       doctest::Contains("--force"), IoError);
  CHECK_NOTHROW(harness.save_final(tmp.file("final"), true));
}

TEST_CASE("one sgd epoch with a fixed seed is bitwise reproducible") {
  auto run_once = [&]() {
    Rng rng(19);
    Tensor x = test::random_tensor(Shape{10, 3}, rng);
    Tensor y(Shape{10, 2});
    for (std::size_t i = 0; i < 10; ++i) y.at(i, rng.uniform_int(2)) = 1.0;
    auto data = std::make_shared<DenseDesignMatrix>(x, y);
    auto model = std::make_shared<MLP>(
        Space{VectorSpace{3}},
        std::vector<LayerSpec>{
            LayerSpec{.name = "h", .activation = Activation::kTanh, .dim = 4},
            LayerSpec{.name = "o", .activation = Activation::kSoftmax, .dim = 2}},
        Rng(20));
    SGD sgd(std::make_shared<NLLSoftmax>(), 0.05, 3, SchemeKind::kShuffledSequential,
            std::make_shared<EpochCounter>(1), 21);
    sgd.setup(model, data);
    sgd.train();
    std::vector<double> flat;
    for (Param* p : model->params())
      flat.insert(flat.end(), p->value.data().begin(), p->value.data().end());
    return flat;
  };
  CHECK(run_once() == run_once());
}

TEST_CASE("constraints hold after every update") {
  Rng rng(22);
  Tensor x = test::random_tensor(Shape{16, 3}, rng, -2.0, 2.0);
  Tensor y(Shape{16, 2});
  for (std::size_t i = 0; i < 16; ++i) y.at(i, rng.uniform_int(2)) = 1.0;
  auto data = std::make_shared<DenseDesignMatrix>(x, y);
  auto model = std::make_shared<MLP>(
      Space{VectorSpace{3}},
      std::vector<LayerSpec>{
          LayerSpec{.name = "h", .activation = Activation::kTanh, .max_norm = 0.5, .dim = 6},
          LayerSpec{.name = "o", .activation = Activation::kSoftmax, .max_norm = 0.8, .dim = 2}},
      Rng(23));
  model->find_param("h_b")->non_negative = true;

  SGD sgd(std::make_shared<NLLSoftmax>(), 0.5, 4, SchemeKind::kShuffledSequential,
          std::make_shared<EpochCounter>(5), 24);
  sgd.setup(model, data);
  int checks = 0;
  sgd.set_update_observer([&] {
    ++checks;
    for (const char* name : {"h_W", "o_W"}) {
      Param* p = model->find_param(name);
      const double limit = p->max_norm->limit;
      const std::size_t rows = static_cast<std::size_t>(p->value.extent(0));
      const std::size_t cols = static_cast<std::size_t>(p->value.extent(1));
      for (std::size_t j = 0; j < cols; ++j) {
        double sq = 0.0;
        for (std::size_t i = 0; i < rows; ++i) sq += p->value.at(i, j) * p->value.at(i, j);
        CHECK(std::sqrt(sq) <= limit + 1e-12);
      }
    }
    for (double v : model->find_param("h_b")->value.data()) CHECK(v >= 0.0);
  });
  for (int e = 0; e < 5; ++e) sgd.train();
  CHECK(checks == 5 * 4);  // 4 batches per epoch
}
