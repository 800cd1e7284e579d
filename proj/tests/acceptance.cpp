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

// End-to-end acceptance suite. Each criterion prints one PASS/FAIL line.

#include <doctest.h>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "modlearn/checkpoint.hpp"
#include "modlearn/instantiate.hpp"
#include "modlearn/npy.hpp"
#include "testutil.hpp"

using namespace modlearn;
namespace fs = std::filesystem;

namespace {

struct Reporter {
  int num;
  const char* desc;
  bool ok = true;
  double seconds = -1.0;
  ~Reporter() {
    if (seconds >= 0.0)
      std::printf("[criterion %02d] %s - %s (%.1fs)\n", num, ok ? "PASS" : "FAIL", desc,
                  seconds);
    else
      std::printf("[criterion %02d] %s - %s\n", num, ok ? "PASS" : "FAIL", desc);
    std::fflush(stdout);
  }
};

#define EXPECT(reporter, cond)  \
  do {                          \
    const bool c__ = (cond);    \
    (reporter).ok &= c__;       \
    CHECK(c__);                 \
  } while (0)

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string config_path(const std::string& name) {
  return std::string(MODLEARN_SOURCE_DIR) + "/configs/" + name;
}

std::shared_ptr<TrainHarness> load_config(const std::string& name,
                                          std::uint64_t seed,
                                          const std::vector<std::pair<std::string, std::string>>&
                                              overrides = {}) {
  auto root = config::parse_file(config_path(name));
  for (const auto& [path, value] : overrides) config::apply_override(root, path, value);
  auto harness = instantiate_harness(root, Registry::standard(), seed,
                                     std::string(MODLEARN_SOURCE_DIR) + "/configs");
  auto diags = validate_harness(*harness);
  REQUIRE(diags.empty());
  return harness;
}

std::vector<double> flat_params(Model& m) {
  std::vector<double> out;
  for (Param* p : m.params())
    out.insert(out.end(), p->value.data().begin(), p->value.data().end());
  return out;
}

// Finite-difference check of a cost's combined symbolic gradient sources.
double cost_fd_error(Cost& cost, Model& model, const Tensor& x_rows, const Tensor* y) {
  Graph g;
  ExprContext ctx(g);
  NodeRef x = g.variable("X", batch_shape(model.input_space(), kWild));
  std::optional<NodeRef> yn;
  if (cost.supervised()) yn = g.variable("y", Shape{kWild, y->extent(1)});
  CostExpr expr = cost.build(model, ctx, x, yn);
  REQUIRE(expr.value);

  Bindings b;
  b.set(x, format_as(Batch{x_rows, VectorSpace{x_rows.extent(1)}}, model.input_space())
               .tensor);
  if (yn) b.set(*yn, *y);
  cost.bind_batch(b, x_rows.extent(0));
  ctx.bind(b);

  double worst = 0.0;
  const double h = 1e-5;
  for (auto& [param, terms] : expr.symbolic) {
    auto node = ctx.node_of(*param);
    REQUIRE(node);
    Tensor combined = Tensor::zeros(param->value.shape());
    for (auto& [coeff, term] : terms) {
      Tensor t = g.eval_one(term, b);
      for (std::size_t i = 0; i < t.size(); ++i) combined[i] += coeff * t[i];
    }
    for (std::size_t k = 0; k < param->value.size(); ++k) {
      Tensor vp = param->value, vm = param->value;
      vp[k] += h;
      vm[k] -= h;
      Bindings bp = b, bm = b;
      bp.set(*node, vp);
      bm.set(*node, vm);
      const double fd =
          (g.eval_one(*expr.value, bp)[0] - g.eval_one(*expr.value, bm)[0]) / (2 * h);
      worst = std::max(worst, std::fabs(combined[k] - fd) /
                                  std::max({1.0, std::fabs(fd), std::fabs(combined[k])}));
    }
  }
  return worst;
}

}  // namespace

TEST_CASE("criterion 1: gradient suite") {
  Reporter r{1, "autodiff matches central finite differences (>=100 cases, <60s)"};
  const auto start = Clock::now();
  int cases = 0;

  // random expression graphs
  Rng rng(20240001);
  for (int rep = 0; rep < 110; ++rep) {
    test::RandomExpr e = test::make_random_expr(rng);
    EXPECT(r, test::grad_check(*e.g, e.loss, e.vars, e.bindings, e.values) < 1e-6);
    ++cases;
  }

  // every layer/cost combination in scope
  Rng drng(20240002);
  Tensor x = test::random_tensor(Shape{5, 3}, drng, 0.1, 1.0);
  Tensor y_class(Shape{5, 2});
  for (std::size_t i = 0; i < 5; ++i) y_class.at(i, drng.uniform_int(2)) = 1.0;
  Tensor y_reg = test::random_tensor(Shape{5, 2}, drng);

  for (Activation hidden : {Activation::kLinear, Activation::kSigmoid,
                            Activation::kTanh, Activation::kRelu}) {
    struct Head {
      Activation act;
      bool classify;
    };
    for (Head head : {Head{Activation::kSoftmax, true}, Head{Activation::kLinear, false},
                      Head{Activation::kSigmoid, false}}) {
      for (int reg = 0; reg < 3; ++reg) {
        MLP mlp(VectorSpace{3},
                {LayerSpec{.name = "h", .activation = hidden, .dim = 4},
                 LayerSpec{.name = "o", .activation = head.act, .dim = 2}},
                Rng(static_cast<std::uint64_t>(cases)));
        std::shared_ptr<MlpCost> base;
        if (head.classify)
          base = std::make_shared<NLLSoftmax>();
        else
          base = std::make_shared<GaussianMSE>();
        std::shared_ptr<Cost> cost = base;
        if (reg == 1)
          cost = std::make_shared<SumOfCosts>(
              std::vector<std::pair<double, std::shared_ptr<Cost>>>{
                  {1.0, base},
                  {0.05, std::make_shared<WeightDecay>(std::vector<double>{1.0})}});
        else if (reg == 2)
          cost = std::make_shared<DropoutCost>(base, 0.8, std::vector<double>{},
                                               -1.0, std::vector<double>{}, 99);
        const Tensor* y = head.classify ? &y_class : &y_reg;
        EXPECT(r, cost_fd_error(*cost, mlp, x, y) < 1e-6);
        ++cases;
      }
    }
  }

  EXPECT(r, cases >= 100);
  r.seconds = seconds_since(start);
  EXPECT(r, r.seconds < 60.0);
}

TEST_CASE("criterion 2: linear-operator oracle") {
  Reporter r{2, "conv lmul/lmul_T agree with as_dense within 1e-12 / adjoint 1e-10"};
  Rng rng(20240003);
  auto inner = [](const Tensor& a, const Tensor& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a.data()[i] * b.data()[i];
    return s;
  };
  int cases = 0;
  while (cases < 22) {
    const long long c = 1 + static_cast<long long>(rng.uniform_int(3));
    const long long o = 1 + static_cast<long long>(rng.uniform_int(3));
    const long long h = 3 + static_cast<long long>(rng.uniform_int(5));
    const long long w = 3 + static_cast<long long>(rng.uniform_int(5));
    const long long kh = 1 + static_cast<long long>(rng.uniform_int(4));
    const long long kw = 1 + static_cast<long long>(rng.uniform_int(4));
    const long long stride = 1 + static_cast<long long>(rng.uniform_int(3));
    const long long pad = static_cast<long long>(rng.uniform_int(3));
    if (h + 2 * pad - kh < 0 || w + 2 * pad - kw < 0) continue;
    ++cases;
    Conv2DSpace in{h, w, c, AxisOrder::bc01()};
    Conv2DTransform t(test::random_tensor(Shape{o, c, kh, kw}, rng), in, stride, pad);
    Tensor m = t.as_dense();
    const long long in_el = num_elements(Space{in});
    const long long out_el = num_elements(t.output_space());

    Tensor rows = test::random_tensor(Shape{2, in_el}, rng);
    Tensor got =
        format_as(lmul_eval(t, Batch{rows, VectorSpace{in_el}}), VectorSpace{out_el})
            .tensor;
    double worst = 0.0;
    for (std::size_t i = 0; i < 2; ++i)
      for (long long j = 0; j < out_el; ++j) {
        double want = 0.0;
        for (long long k = 0; k < in_el; ++k)
          want += rows.at(i, static_cast<std::size_t>(k)) *
                  m.at(static_cast<std::size_t>(k), static_cast<std::size_t>(j));
        worst = std::max(worst, std::fabs(got.at(i, static_cast<std::size_t>(j)) - want));
      }
    EXPECT(r, worst < 1e-12);

    Tensor yr = test::random_tensor(Shape{2, out_el}, rng);
    Tensor got_t =
        format_as(lmul_T_eval(t, Batch{yr, VectorSpace{out_el}}), VectorSpace{in_el})
            .tensor;
    double worst_t = 0.0;
    for (std::size_t i = 0; i < 2; ++i)
      for (long long j = 0; j < in_el; ++j) {
        double want = 0.0;
        for (long long k = 0; k < out_el; ++k)
          want += yr.at(i, static_cast<std::size_t>(k)) *
                  m.at(static_cast<std::size_t>(j), static_cast<std::size_t>(k));
        worst_t = std::max(worst_t, std::fabs(got_t.at(i, static_cast<std::size_t>(j)) - want));
      }
    EXPECT(r, worst_t < 1e-12);

    Tensor x1 = test::random_tensor(Shape{1, in_el}, rng);
    Tensor y1 = test::random_tensor(Shape{1, out_el}, rng);
    const double lhs = inner(
        format_as(lmul_eval(t, Batch{x1, VectorSpace{in_el}}), VectorSpace{out_el}).tensor,
        y1);
    const double rhs = inner(
        x1,
        format_as(lmul_T_eval(t, Batch{y1, VectorSpace{out_el}}), VectorSpace{in_el}).tensor);
    EXPECT(r, std::fabs(lhs - rhs) < 1e-10);
  }
}

namespace {

double enumerated_free_energy(RBM& rbm, const std::vector<double>& v) {
  const long long nh = rbm.nhid(), nv = rbm.nvis();
  double acc = 0.0;
  for (long long mask = 0; mask < (1ll << nh); ++mask) {
    double energy = 0.0;
    for (long long i = 0; i < nv; ++i)
      energy -= rbm.visible_bias().value[static_cast<std::size_t>(i)] *
                v[static_cast<std::size_t>(i)];
    for (long long j = 0; j < nh; ++j) {
      if (!((mask >> j) & 1)) continue;
      energy -= rbm.hidden_bias().value[static_cast<std::size_t>(j)];
      for (long long i = 0; i < nv; ++i)
        energy -= v[static_cast<std::size_t>(i)] *
                  rbm.weights().value.at(static_cast<std::size_t>(i),
                                         static_cast<std::size_t>(j));
    }
    acc += std::exp(-energy);
  }
  return -std::log(acc);
}

}  // namespace

TEST_CASE("criterion 3: rbm exactness and pcd direction") {
  Reporter r{3, "free energy exact to 1e-10; PCD cosine with exact gradient > 0.9"};
  const auto start = Clock::now();

  Rng rng(20240004);
  for (long long nv = 1; nv <= 6; ++nv)
    for (long long nh = 1; nh <= 5; ++nh) {
      RBM rbm(nv, nh, Rng(static_cast<std::uint64_t>(nv * 31 + nh)));
      for (double& x : rbm.visible_bias().value.data()) x = rng.uniform(-1.5, 1.5);
      for (double& x : rbm.hidden_bias().value.data()) x = rng.uniform(-1.5, 1.5);
      for (int rep = 0; rep < 3; ++rep) {
        std::vector<double> v(static_cast<std::size_t>(nv));
        for (double& x : v) x = rng.bernoulli(0.5) ? 1.0 : 0.0;
        Graph g;
        ExprContext ctx(g);
        NodeRef vn = g.variable("v", Shape{kWild, nv});
        NodeRef f = rbm.free_energy(ctx, vn);
        Tensor vt(Shape{1, nv});
        for (std::size_t i = 0; i < v.size(); ++i) vt.at(0, i) = v[i];
        Bindings b;
        b.set(vn, vt);
        ctx.bind(b);
        EXPECT(r, std::fabs(g.eval_one(f, b)[0] - enumerated_free_energy(rbm, v)) < 1e-10);
      }
    }

  // PCD average update direction vs exact negative log-likelihood gradient
  RBM rbm(4, 3, Rng(20240005));
  Rng drng(20240006);
  Tensor data(Shape{12, 4});
  for (double& v : data.data()) v = drng.bernoulli(0.35) ? 1.0 : 0.0;

  auto h_probs = [&](const std::vector<double>& v) {
    std::vector<double> h(3);
    for (std::size_t j = 0; j < 3; ++j) {
      double pre = rbm.hidden_bias().value[j];
      for (std::size_t i = 0; i < 4; ++i) pre += v[i] * rbm.weights().value.at(i, j);
      h[j] = 1.0 / (1.0 + std::exp(-pre));
    }
    return h;
  };
  // full enumeration over the 2^4 visible states (hidden summed analytically)
  std::vector<double> exact;
  {
    std::vector<double> probs;
    std::vector<std::vector<double>> vs;
    double z = 0.0;
    for (int mask = 0; mask < 16; ++mask) {
      std::vector<double> v(4);
      for (std::size_t i = 0; i < 4; ++i) v[i] = (mask >> i) & 1 ? 1.0 : 0.0;
      double f = 0.0;
      for (std::size_t i = 0; i < 4; ++i) f -= rbm.visible_bias().value[i] * v[i];
      for (std::size_t j = 0; j < 3; ++j) {
        double pre = rbm.hidden_bias().value[j];
        for (std::size_t i = 0; i < 4; ++i) pre += v[i] * rbm.weights().value.at(i, j);
        f -= std::log1p(std::exp(pre));
      }
      probs.push_back(std::exp(-f));
      z += probs.back();
      vs.push_back(v);
    }
    for (double& p : probs) p /= z;
    std::vector<double> w_pos(12, 0.0), w_neg(12, 0.0), bv_pos(4, 0.0), bv_neg(4, 0.0),
        bh_pos(3, 0.0), bh_neg(3, 0.0);
    for (std::size_t row = 0; row < 12; ++row) {
      std::vector<double> v(4);
      for (std::size_t i = 0; i < 4; ++i) v[i] = data.at(row, i);
      auto h = h_probs(v);
      for (std::size_t i = 0; i < 4; ++i) {
        bv_pos[i] += v[i] / 12.0;
        for (std::size_t j = 0; j < 3; ++j) w_pos[i * 3 + j] += v[i] * h[j] / 12.0;
      }
      for (std::size_t j = 0; j < 3; ++j) bh_pos[j] += h[j] / 12.0;
    }
    for (std::size_t m = 0; m < 16; ++m) {
      auto h = h_probs(vs[m]);
      for (std::size_t i = 0; i < 4; ++i) {
        bv_neg[i] += probs[m] * vs[m][i];
        for (std::size_t j = 0; j < 3; ++j) w_neg[i * 3 + j] += probs[m] * vs[m][i] * h[j];
      }
      for (std::size_t j = 0; j < 3; ++j) bh_neg[j] += probs[m] * h[j];
    }
    for (std::size_t k = 0; k < 12; ++k) exact.push_back(w_neg[k] - w_pos[k]);
    for (std::size_t k = 0; k < 4; ++k) exact.push_back(bv_neg[k] - bv_pos[k]);
    for (std::size_t k = 0; k < 3; ++k) exact.push_back(bh_neg[k] - bh_pos[k]);
  }

  PersistentCD pcd(100, 1, 20240007);
  Graph g;
  ExprContext ctx(g);
  NodeRef x = g.variable("X", Shape{kWild, 4});
  CostExpr expr = pcd.build(rbm, ctx, x, std::nullopt);
  std::vector<double> avg(19, 0.0);
  const int updates = 2000;
  for (int u = 0; u < updates; ++u) {
    auto grads = expr.sampled[0].second(data, nullptr);
    std::size_t off = 0;
    for (auto& [param, tensor] : grads) {
      for (std::size_t k = 0; k < tensor.size(); ++k) avg[off + k] += tensor[k] / updates;
      off += tensor.size();
    }
  }
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t k = 0; k < avg.size(); ++k) {
    dot += avg[k] * exact[k];
    na += avg[k] * avg[k];
    nb += exact[k] * exact[k];
  }
  EXPECT(r, dot / std::sqrt(na * nb) > 0.9);
  r.seconds = seconds_since(start);
  EXPECT(r, r.seconds < 120.0);
}

TEST_CASE("criterion 4: pcd cost contract in the standard sgd loop") {
  Reporter r{4, "no cost value, yet plain SGD trains on PCD gradients unchanged"};
  auto harness = load_config("rbm_pcd.yaml", 321);

  // the cost value is the no-value marker
  Cost* cost = harness->algorithm().cost();
  REQUIRE(cost != nullptr);
  Graph g;
  ExprContext ctx(g);
  NodeRef x = g.variable("X", Shape{kWild, 6});
  EXPECT(r, !cost->build_value(harness->model(), ctx, x, std::nullopt).has_value());

  // 100 SGD steps: 32 examples / batch 8 = 4 batches per epoch, 25 epochs
  std::vector<double> before = flat_params(harness->model());
  const long long epochs = harness->run();
  EXPECT(r, epochs == 25);
  std::vector<double> after = flat_params(harness->model());
  EXPECT(r, before != after);
  for (double v : after) EXPECT(r, std::isfinite(v));
}

TEST_CASE("criterion 5: bgd equivalence, conjugate gradient, armijo") {
  Reporter r{5, "accumulated == full-batch gradient; CG solves 5x5 SPD; Armijo holds"};

  // gradient accumulation over a partition equals the full-batch gradient
  Rng rng(20240008);
  Tensor x = test::random_tensor(Shape{24, 3}, rng);
  Tensor y(Shape{24, 2});
  for (std::size_t i = 0; i < 24; ++i) y.at(i, rng.uniform_int(2)) = 1.0;
  MLP mlp(VectorSpace{3},
          {LayerSpec{.name = "h", .activation = Activation::kTanh, .dim = 5},
           LayerSpec{.name = "o", .activation = Activation::kSoftmax, .dim = 2}},
          Rng(20240009));
  NLLSoftmax nll;
  GradientProgram program(mlp, nll, 2);
  auto full = program.prepare(x, &y);
  std::vector<Tensor> full_g = program.gradients(full);
  std::vector<Tensor> acc;
  for (Param* p : program.params()) acc.push_back(Tensor::zeros(p->value.shape()));
  for (int part = 0; part < 4; ++part) {
    std::vector<std::size_t> idx;
    for (int i = 0; i < 6; ++i) idx.push_back(static_cast<std::size_t>(part * 6 + i));
    Tensor xb = x.gather_rows(idx);
    Tensor yb = y.gather_rows(idx);
    auto pb = program.prepare(xb, &yb);
    std::vector<Tensor> gb = program.gradients(pb);
    for (std::size_t i = 0; i < gb.size(); ++i)
      for (std::size_t k = 0; k < gb[i].size(); ++k) acc[i][k] += gb[i][k] / 4.0;
  }
  double worst = 0.0;
  for (std::size_t i = 0; i < acc.size(); ++i)
    for (std::size_t k = 0; k < acc[i].size(); ++k)
      worst = std::max(worst, std::fabs(acc[i][k] - full_g[i][k]));
  EXPECT(r, worst < 1e-10);

  // every accepted line-search step satisfies the Armijo inequality
  Rng lsr(20240010);
  for (int rep = 0; rep < 100; ++rep) {
    const double a = lsr.uniform(0.2, 80.0);
    const double slope0 = -lsr.uniform(0.05, 20.0);
    auto q = [&](double t) { return 0.5 * a * t * t + slope0 * t; };
    LineSearchResult back = line_search(q, 0.0, slope0);
    EXPECT(r, back.success);
    EXPECT(r, q(back.step) <= 1e-4 * back.step * slope0);
    LineSearchResult brk = bracketing_line_search(q, 0.0, slope0);
    EXPECT(r, brk.success);
    EXPECT(r, q(brk.step) <= 1e-4 * brk.step * slope0);
  }

  // CG on a 5x5 SPD quadratic reaches ||grad|| < 1e-8 within 5 iterations
  {
    Rng qr(20240011);
    Tensor m = test::random_tensor(Shape{5, 5}, qr);
    Tensor a(Shape{5, 5});
    for (std::size_t i = 0; i < 5; ++i)
      for (std::size_t j = 0; j < 5; ++j) {
        double acc2 = i == j ? 1.0 : 0.0;
        for (std::size_t k = 0; k < 5; ++k) acc2 += m.at(i, k) * m.at(j, k);
        a.at(i, j) = acc2;
      }
    Tensor bvec = test::random_tensor(Shape{1, 5}, qr);

    // test-local quadratic model/cost pair
    class ThetaModel : public Model {
     public:
      std::string kind() const override { return "theta"; }
      const Space& input_space() const override { return space_; }
      std::vector<Param*> params() override { return {&theta_}; }
      Param theta_{"theta", Tensor(Shape{1, 5})};

     private:
      Space space_ = VectorSpace{1};
    };
    class QuadCost : public Cost {
     public:
      QuadCost(Tensor a, Tensor b) : a_(std::move(a)), b_(std::move(b)) {}
      std::string name() const override { return "quad"; }
      std::optional<NodeRef> build_value(Model& m, ExprContext& ctx, NodeRef,
                                         std::optional<NodeRef>) override {
        Graph& g = ctx.graph();
        NodeRef theta = ctx.node_for(*m.params()[0]);
        NodeRef quad = g.mul(g.scalar_constant(0.5),
                             g.sum_all(g.mul(g.matmul(theta, g.constant(a_)), theta)));
        return g.sub(quad, g.sum_all(g.mul(g.constant(b_), theta)));
      }
      Tensor a_, b_;
    };

    auto model = std::make_shared<ThetaModel>();
    auto cost = std::make_shared<QuadCost>(a, bvec);
    BGD bgd(cost, 1, 1, 5, BGD::Mode::kConjugateGradient,
            BGD::LineSearchKind::kBracketing, std::make_shared<EpochCounter>(1), 0);
    Rng dr(1);
    auto dummy = std::make_shared<DenseDesignMatrix>(test::random_tensor(Shape{1, 1}, dr));
    bgd.setup(model, dummy);

    auto f_of = [&](const Tensor& theta) {
      double quad = 0.0, lin = 0.0;
      for (std::size_t i = 0; i < 5; ++i) {
        lin += bvec.at(0, i) * theta.at(0, i);
        for (std::size_t j = 0; j < 5; ++j)
          quad += 0.5 * theta.at(0, i) * a.at(i, j) * theta.at(0, j);
      }
      return quad - lin;
    };
    std::vector<double> trace{f_of(model->theta_.value)};
    bgd.set_update_observer([&] { trace.push_back(f_of(model->theta_.value)); });
    bgd.train();
    EXPECT(r, trace.size() == 6);  // exactly 5 line-searched updates
    for (std::size_t i = 0; i + 1 < trace.size(); ++i) EXPECT(r, trace[i + 1] <= trace[i]);
    double grad_sq = 0.0;
    for (std::size_t i = 0; i < 5; ++i) {
      double gi = -bvec.at(0, i);
      for (std::size_t j = 0; j < 5; ++j) gi += a.at(i, j) * model->theta_.value.at(0, j);
      grad_sq += gi * gi;
    }
    EXPECT(r, std::sqrt(grad_sq) < 1e-8);
    EXPECT(r, bgd.line_search_failures() == 0);
  }
}

TEST_CASE("criterion 6: whitening") {
  Reporter r{6, "ZCA covariance within 1e-6 of identity; PCA(k=d) reconstructs to 1e-8"};
  Rng rng(20240012);
  // correlated synthetic 200x8 data
  Tensor z = test::random_tensor(Shape{200, 8}, rng);
  Tensor mix = test::random_tensor(Shape{8, 8}, rng);
  Tensor x(Shape{200, 8});
  for (std::size_t i = 0; i < 200; ++i)
    for (std::size_t j = 0; j < 8; ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k < 8; ++k) acc += z.at(i, k) * mix.at(k, j);
      x.at(i, j) = acc;
    }

  {
    DenseDesignMatrix ds(x);
    ZCA zca(1e-8);
    zca.fit_apply(ds, true);
    const Tensor& w = ds.design_matrix();
    double mean[8] = {0};
    for (std::size_t i = 0; i < 200; ++i)
      for (std::size_t j = 0; j < 8; ++j) mean[j] += w.at(i, j) / 200.0;
    double worst = 0.0;
    for (std::size_t p = 0; p < 8; ++p)
      for (std::size_t q = 0; q < 8; ++q) {
        double c = 0.0;
        for (std::size_t i = 0; i < 200; ++i)
          c += (w.at(i, p) - mean[p]) * (w.at(i, q) - mean[q]);
        c /= 200.0;
        worst = std::max(worst, std::fabs(c - (p == q ? 1.0 : 0.0)));
      }
    EXPECT(r, worst < 1e-6);
  }
  {
    DenseDesignMatrix ds(x);
    PCA pca(8);
    pca.fit_apply(ds, true);
    const Tensor& proj = ds.design_matrix();
    const Tensor& v = pca.components();
    const Tensor& mean = pca.mean();
    double worst = 0.0;
    for (std::size_t i = 0; i < 200; ++i)
      for (std::size_t j = 0; j < 8; ++j) {
        double rec = mean[j];
        for (std::size_t k = 0; k < 8; ++k) rec += proj.at(i, k) * v.at(j, k);
        worst = std::max(worst, std::fabs(rec - x.at(i, j)));
      }
    EXPECT(r, worst < 1e-8);
  }
}

TEST_CASE("criterion 7: end-to-end learning, bit-reproducible") {
  Reporter r{7, "XOR 4/4; two-Gaussians >= 95% held out; reruns byte-identical"};
  const auto start = Clock::now();

  // XOR via the shipped config, in process
  {
    auto harness = load_config("xor.yaml", 7);
    const long long epochs = harness->run();
    EXPECT(r, epochs <= 5000);
    MLP* mlp = dynamic_cast<MLP*>(&harness->model());
    REQUIRE(mlp);
    Tensor out = mlp->fprop_eval(Tensor::matrix({{0, 0}, {0, 1}, {1, 0}, {1, 1}}));
    const double want[4] = {0, 1, 1, 0};
    for (std::size_t i = 0; i < 4; ++i)
      EXPECT(r, (out.at(i, 0) > 0.5) == (want[i] > 0.5));
  }

  // two-Gaussians classifier reaches 95% held-out accuracy
  {
    auto harness = load_config("gaussians.yaml", 42);
    harness->run();
    const Channel& misclass = harness->monitor().channel("valid_term0_misclass");
    EXPECT(r, misclass.values.back().second <= 0.05);
  }

  // bit-reproducibility through the CLI, twice per config
  for (const char* cfg : {"xor.yaml", "gaussians.yaml"}) {
    test::TempDir a, b;
    const std::string base = std::string(MODLEARN_CLI_PATH) + " train " +
                             config_path(cfg) + " --seed 7 -o ";
    REQUIRE(std::system((base + a.path() + " >/dev/null 2>&1").c_str()) == 0);
    REQUIRE(std::system((base + b.path() + " >/dev/null 2>&1").c_str()) == 0);
    for (const auto& entry : fs::directory_iterator(a.file("model"))) {
      const std::string name = entry.path().filename().string();
      CAPTURE(name);
      EXPECT(r, test::files_identical(a.file("model/" + name), b.file("model/" + name)));
    }
    EXPECT(r, test::files_identical(a.file("monitor.csv"), b.file("monitor.csv")));
    EXPECT(r, test::files_identical(a.file("monitor.jsonl"), b.file("monitor.jsonl")));
  }

  r.seconds = seconds_since(start);
  EXPECT(r, r.seconds < 120.0);
}

TEST_CASE("criterion 8: early stopping") {
  Reporter r{8, "MonitorBased halts after epoch 3 on the scripted channel; EpochCounter exact"};

  // scripted channel 1.0, 0.9, 0.95, 0.96 with patience 2, tau 0
  Monitor monitor;
  double value = 0.0;
  monitor.add_callback_channel("loss", [&] { return value; });
  MonitorBased crit("loss", 2, 0.0);
  const double sequence[4] = {1.0, 0.9, 0.95, 0.96};
  std::vector<bool> decisions;
  for (long long e = 0; e < 4; ++e) {
    value = sequence[e];
    monitor.measure(e);
    decisions.push_back(crit.should_continue(monitor, e));
  }
  EXPECT(r, decisions[0]);
  EXPECT(r, decisions[1]);
  EXPECT(r, decisions[2]);
  EXPECT(r, !decisions[3]);  // halted after epoch 3's measurement

  // EpochCounter(k): exactly k epochs and k+1 monitor rows
  for (long long k : {1, 3, 5}) {
    auto harness = load_config("xor.yaml", 1,
                               {{"algorithm.termination.max", std::to_string(k)}});
    EXPECT(r, harness->run() == k);
    EXPECT(r, harness->monitor().num_measurements() == static_cast<std::size_t>(k + 1));
  }
}

TEST_CASE("criterion 9: constraints hold after every update") {
  Reporter r{9, "max-norm rows within limit+1e-12; non-negatives clamped; idempotent"};
  Rng rng(20240013);
  Tensor x = test::random_tensor(Shape{16, 3}, rng, -2.0, 2.0);
  Tensor y(Shape{16, 2});
  for (std::size_t i = 0; i < 16; ++i) y.at(i, rng.uniform_int(2)) = 1.0;
  auto data = std::make_shared<DenseDesignMatrix>(x, y);
  auto model = std::make_shared<MLP>(
      Space{VectorSpace{3}},
      std::vector<LayerSpec>{
          LayerSpec{.name = "h", .activation = Activation::kTanh, .max_norm = 0.4, .dim = 6},
          LayerSpec{.name = "o", .activation = Activation::kSoftmax, .max_norm = 0.7, .dim = 2}},
      Rng(20240014));
  model->find_param("h_b")->non_negative = true;

  auto sgd = std::make_shared<SGD>(std::make_shared<NLLSoftmax>(), 0.7, 4,
                                   SchemeKind::kShuffledSequential,
                                   std::make_shared<EpochCounter>(6), 20240015);
  sgd->setup(model, data);
  int updates = 0;
  bool all_ok = true;
  sgd->set_update_observer([&] {
    ++updates;
    for (const char* name : {"h_W", "o_W"}) {
      Param* p = model->find_param(name);
      const double limit = p->max_norm->limit;
      for (long long j = 0; j < p->value.extent(1); ++j) {
        double sq = 0.0;
        for (long long i = 0; i < p->value.extent(0); ++i)
          sq += p->value.at(static_cast<std::size_t>(i), static_cast<std::size_t>(j)) *
                p->value.at(static_cast<std::size_t>(i), static_cast<std::size_t>(j));
        if (std::sqrt(sq) > limit + 1e-12) all_ok = false;
      }
    }
    for (double v : model->find_param("h_b")->value.data())
      if (v < 0.0) all_ok = false;
  });
  for (int e = 0; e < 6; ++e) sgd->train();
  EXPECT(r, updates == 24);
  EXPECT(r, all_ok);

  // projection idempotence, bitwise
  for (Param* p : model->params()) {
    censor_param(*p);
    Tensor once = p->value;
    censor_param(*p);
    EXPECT(r, p->value.data() == once.data());
  }
}

TEST_CASE("criterion 10: the experiment dsl end to end") {
  Reporter r{10, "configs run; 20 malformed fixtures classified; aliases share; dropout p=1 bitwise"};

  // every shipped reference config parses, instantiates, validates, runs
  for (const char* cfg : {"xor.yaml", "gaussians.yaml", "rbm_pcd.yaml"}) {
    CAPTURE(cfg);
    auto harness = load_config(cfg, 5, {{"algorithm.termination", "!obj:term.epochs {max: 2}"}});
    EXPECT(r, harness->run() == 2);
  }

  // 20 malformed fixtures each produce the advertised error class with position
  const std::string dir = std::string(MODLEARN_SOURCE_DIR) + "/tests/fixtures/malformed";
  int fixture_count = 0;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const std::string name = entry.path().filename().string();
    if (name.find(".yaml") == std::string::npos) continue;
    ++fixture_count;
    // expected class: between "NN_" and "__"
    const std::size_t us = name.find('_');
    const std::size_t sep = name.find("__");
    REQUIRE(us != std::string::npos);
    REQUIRE(sep != std::string::npos);
    const std::string expected = name.substr(us + 1, sep - us - 1);
    CAPTURE(name);
    bool matched = false;
    int line = 0;
    try {
      auto root = config::parse_file(entry.path().string());
      instantiate_harness(root, Registry::standard(), 0, dir);
    } catch (const ConfigError& e) {
      for (const Diag& d : e.diags())
        if (std::string(diag_code_name(d.code)) == expected) {
          matched = true;
          line = d.line;
        }
    }
    EXPECT(r, matched);
    EXPECT(r, line >= 1);
  }
  EXPECT(r, fixture_count == 20);

  // anchor/alias sharing is object identity
  {
    auto harness = load_config("xor.yaml", 3);
    EXPECT(r, harness->monitoring_datasets()[0].second.get() ==
                  harness->training_data().get());
  }

  // dropout include-prob 1 is bitwise identical to the no-dropout run
  {
    auto run_fixture = [&](const std::string& name) {
      auto root = config::parse_file(std::string(MODLEARN_SOURCE_DIR) + "/tests/fixtures/" + name);
      auto harness = instantiate_harness(root, Registry::standard(), 17, "");
      REQUIRE(validate_harness(*harness).empty());
      harness->run();
      return flat_params(harness->model());
    };
    std::vector<double> base = run_fixture("dropout_base.yaml");
    std::vector<double> unit = run_fixture("dropout_p1.yaml");
    std::vector<double> half = run_fixture("dropout_half.yaml");
    EXPECT(r, base == unit);  // bitwise
    EXPECT(r, base != half);  // real dropout changes training
  }
}
