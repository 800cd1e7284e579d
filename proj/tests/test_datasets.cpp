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
#include <fstream>
#include <set>

#include "modlearn/datasets.hpp"
#include "modlearn/npy.hpp"
#include "testutil.hpp"

using namespace modlearn;

namespace {

DenseDesignMatrix make_ds(long long n, long long d, Rng& rng) {
  return DenseDesignMatrix(test::random_tensor(Shape{n, d}, rng));
}

}  // namespace

TEST_CASE("sequential iteration: contiguous blocks, short last batch") {
  Rng rng(1);
  DenseDesignMatrix ds = make_ds(5, 2, rng);
  BatchIterator it(ds, IterationScheme{SchemeKind::kSequential, 2, 0}, nullptr);
  std::vector<std::vector<std::size_t>> batches;
  while (auto b = it.next()) batches.push_back(b->indices);
  REQUIRE(batches.size() == 3);
  CHECK(batches[0] == std::vector<std::size_t>{0, 1});
  CHECK(batches[1] == std::vector<std::size_t>{2, 3});
  CHECK(batches[2] == std::vector<std::size_t>{4});
}

TEST_CASE("shuffled-sequential: one seeded permutation per pass") {
  Rng rng(2);
  DenseDesignMatrix ds = make_ds(4, 2, rng);
  Rng it_rng(33);
  BatchIterator it(ds, IterationScheme{SchemeKind::kShuffledSequential, 4, 0}, &it_rng);
  auto b = it.next();
  REQUIRE(b);
  std::set<std::size_t> seen(b->indices.begin(), b->indices.end());
  CHECK(seen == std::set<std::size_t>{0, 1, 2, 3});
  CHECK(!it.next());

  // same seed, same order
  Rng r1(7), r2(7);
  BatchIterator i1(ds, IterationScheme{SchemeKind::kShuffledSequential, 2, 0}, &r1);
  BatchIterator i2(ds, IterationScheme{SchemeKind::kShuffledSequential, 2, 0}, &r2);
  while (true) {
    auto a = i1.next();
    auto c = i2.next();
    CHECK(bool(a) == bool(c));
    if (!a) break;
    CHECK(a->indices == c->indices);
  }
}

TEST_CASE("sequential passes visit every index exactly once") {
  Rng rng(3);
  DenseDesignMatrix ds = make_ds(11, 3, rng);
  for (SchemeKind kind : {SchemeKind::kSequential, SchemeKind::kShuffledSequential}) {
    Rng it_rng(5);
    BatchIterator it(ds, IterationScheme{kind, 3, 0}, &it_rng);
    std::vector<int> counts(11, 0);
    while (auto b = it.next())
      for (std::size_t i : b->indices) counts[i]++;
    for (int c : counts) CHECK(c == 1);
  }
}

TEST_CASE("random-uniform: exact batch count, indices in range, replacement") {
  Rng rng(4);
  DenseDesignMatrix ds = make_ds(3, 2, rng);
  Rng it_rng(17);
  BatchIterator it(ds, IterationScheme{SchemeKind::kRandomUniform, 2, 7}, &it_rng);
  int batches = 0;
  while (auto b = it.next()) {
    ++batches;
    CHECK(b->indices.size() == 2);
    for (std::size_t i : b->indices) CHECK(i < 3);
  }
  CHECK(batches == 7);

  CHECK_THROWS_AS(
      BatchIterator(ds, IterationScheme{SchemeKind::kRandomUniform, 5, 2}, &it_rng),
      ValueError);
}

TEST_CASE("iterating an empty dataset fails") {
  DenseDesignMatrix empty(Tensor(Shape{0, 3}));
  CHECK_THROWS_AS(BatchIterator(empty, IterationScheme{SchemeKind::kSequential, 1, 0},
                                nullptr),
                  ValueError);
}

TEST_CASE("batches carry targets and validate against the feature space") {
  Rng rng(5);
  Tensor x = test::random_tensor(Shape{6, 4}, rng);
  Tensor y = test::random_tensor(Shape{6, 2}, rng);
  DenseDesignMatrix ds(x, y);
  BatchIterator it(ds, IterationScheme{SchemeKind::kSequential, 4, 0}, nullptr);
  while (auto b = it.next()) {
    CHECK_NOTHROW(validate(ds.feature_space(), b->x));
    REQUIRE(b->y);
    CHECK(b->y->extent(0) == b->x.extent(0));
    for (std::size_t r = 0; r < b->indices.size(); ++r)
      CHECK(b->x.at(r, 0) == x.at(b->indices[r], 0));
  }
}

TEST_CASE("topological and design views are mutually inverse") {
  Rng rng(6);
  Tensor x = test::random_tensor(Shape{10, 4}, rng);
  DenseDesignMatrix ds(x, std::nullopt, Conv2DSpace{2, 2, 1, AxisOrder::b01c()});
  Tensor topo = ds.get_topological_view();
  CHECK(topo.shape() == Shape{10, 2, 2, 1});
  Tensor back = format_as(Batch{topo, Space{*ds.view()}}, VectorSpace{4}).tensor;
  CHECK(back.data() == x.data());

  DenseDesignMatrix no_view(x);
  CHECK_THROWS_AS(no_view.get_topological_view(), ValueError);
}

TEST_CASE("standardize: two-point example and refit idempotence") {
  Tensor x = Tensor::matrix({{0}, {2}});
  DenseDesignMatrix ds(x);
  Standardize s;
  s.fit_apply(ds, true);
  CHECK(ds.design_matrix().at(0, 0) == doctest::Approx(-1.0).epsilon(1e-12));
  CHECK(ds.design_matrix().at(1, 0) == doctest::Approx(1.0).epsilon(1e-12));

  // standardizing already-standardized data changes nothing
  Rng rng(7);
  DenseDesignMatrix big(test::random_tensor(Shape{50, 6}, rng));
  Standardize s1;
  s1.fit_apply(big, true);
  Tensor once = big.design_matrix();
  Standardize s2;
  s2.fit_apply(big, true);
  for (std::size_t i = 0; i < once.size(); ++i)
    CHECK(std::fabs(big.design_matrix().data()[i] - once.data()[i]) < 1e-10);

  Standardize unfitted;
  CHECK_THROWS_WITH_AS(unfitted.fit_apply(big, false), doctest::Contains("unfitted"),
                       ValueError);
}

TEST_CASE("standardize reuses fitted state on new data") {
  Rng rng(8);
  Tensor train = test::random_tensor(Shape{40, 3}, rng, 2.0, 6.0);
  DenseDesignMatrix tr(train);
  Standardize s;
  s.fit_apply(tr, true);
  // applying to a copy of the raw data with can_fit=false gives the same result
  DenseDesignMatrix te(train);
  s.fit_apply(te, false);
  CHECK(te.design_matrix().data() == tr.design_matrix().data());
}

TEST_CASE("gcn rows: zero mean, requested norm") {
  Rng rng(9);
  DenseDesignMatrix ds(test::random_tensor(Shape{20, 8}, rng, -3.0, 5.0));
  GlobalContrastNormalize gcn(2.5);
  gcn.fit_apply(ds, true);
  const Tensor& x = ds.design_matrix();
  for (std::size_t i = 0; i < 20; ++i) {
    double mean = 0.0, sq = 0.0;
    for (std::size_t j = 0; j < 8; ++j) mean += x.at(i, j);
    mean /= 8.0;
    CHECK(std::fabs(mean) < 1e-12);
    for (std::size_t j = 0; j < 8; ++j) sq += x.at(i, j) * x.at(i, j);
    CHECK(std::fabs(std::sqrt(sq) - 2.5) < 1e-10);
  }
}

TEST_CASE("pca: projection onto principal components, full-rank reconstruction") {
  Rng rng(10);
  Tensor x = test::random_tensor(Shape{60, 5}, rng);
  DenseDesignMatrix ds(x);
  PCA pca(5);
  pca.fit_apply(ds, true);
  const Tensor& proj = ds.design_matrix();
  CHECK(proj.shape() == Shape{60, 5});

  // reconstruct: proj * V^T + mean == original (V orthonormal, k = d)
  const Tensor& v = pca.components();
  const Tensor& mean = pca.mean();
  double worst = 0.0;
  for (std::size_t i = 0; i < 60; ++i)
    for (std::size_t j = 0; j < 5; ++j) {
      double rec = mean[j];
      for (std::size_t k = 0; k < 5; ++k) rec += proj.at(i, k) * v.at(j, k);
      worst = std::max(worst, std::fabs(rec - x.at(i, j)));
    }
  CHECK(worst < 1e-8);

  CHECK_THROWS_AS(PCA(9).fit_apply(ds, true), ValueError);
}

TEST_CASE("zca whitening drives the covariance to identity") {
  Rng rng(11);
  // correlated data: x = z * A
  Tensor z = test::random_tensor(Shape{200, 8}, rng);
  Tensor a = test::random_tensor(Shape{8, 8}, rng);
  Tensor x(Shape{200, 8});
  for (std::size_t i = 0; i < 200; ++i)
    for (std::size_t j = 0; j < 8; ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k < 8; ++k) acc += z.at(i, k) * a.at(k, j);
      x.at(i, j) = acc;
    }
  DenseDesignMatrix ds(x);
  ZCA zca(1e-8);
  zca.fit_apply(ds, true);
  const Tensor& w = ds.design_matrix();
  CHECK(w.shape() == Shape{200, 8});

  // independent covariance computation (population convention)
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
  CHECK(worst < 1e-6);
}

TEST_CASE("preprocessor state round-trips through npy") {
  Rng rng(12);
  DenseDesignMatrix ds(test::random_tensor(Shape{30, 4}, rng));
  ZCA zca(1e-6);
  zca.fit_apply(ds, true);

  test::TempDir tmp;
  for (auto& [name, tensor] : zca.state()) save_npy(tmp.file(name + ".npy"), tensor);
  ZCA restored(1e-6);
  std::vector<std::pair<std::string, Tensor>> loaded;
  for (auto& [name, tensor] : zca.state())
    loaded.push_back({name, load_npy(tmp.file(name + ".npy"))});
  restored.set_state(loaded);
  CHECK(restored.whitening_matrix().data() == zca.whitening_matrix().data());
}

TEST_CASE("csv loading") {
  test::TempDir tmp;
  {
    std::ofstream f(tmp.file("plain.csv"));
    f << "1,2\n3,4\n";
  }
  DenseDesignMatrix ds = load_csv(tmp.file("plain.csv"));
  CHECK(ds.num_examples() == 2);
  CHECK(ds.design_matrix().at(0, 1) == 2.0);
  CHECK(ds.design_matrix().at(1, 0) == 3.0);
  CHECK(!ds.has_targets());

  {
    std::ofstream f(tmp.file("header.csv"));
    f << "a,b,label\r\n0.5,1.5,0\n2.5,3.5,2\n-1,0,1\n";
  }
  DenseDesignMatrix labeled = load_csv(tmp.file("header.csv"), 2);
  CHECK(labeled.num_examples() == 3);
  CHECK(labeled.dim() == 2);
  REQUIRE(labeled.has_targets());
  CHECK(labeled.target_dim() == 3);  // labels {0,1,2} -> one-hot width 3
  CHECK(labeled.targets()->at(0, 0) == 1.0);
  CHECK(labeled.targets()->at(1, 2) == 1.0);
  CHECK(labeled.targets()->at(2, 1) == 1.0);

  {
    std::ofstream f(tmp.file("bad.csv"));
    f << "1,2\n3,oops\n";
  }
  CHECK_THROWS_WITH_AS(load_csv(tmp.file("bad.csv")),
                       doctest::Contains("non-numeric"), IoError);
  {
    std::ofstream f(tmp.file("ragged.csv"));
    f << "1,2\n3\n";
  }
  CHECK_THROWS_AS(load_csv(tmp.file("ragged.csv")), IoError);
  CHECK_THROWS_AS(load_csv(tmp.file("missing.csv")), IoError);
}

TEST_CASE("one_hot") {
  Tensor y = one_hot({0, 2, 1});
  CHECK(y.shape() == Shape{3, 3});
  CHECK(y.at(1, 2) == 1.0);
  CHECK(y.at(1, 0) == 0.0);
  CHECK_THROWS_AS(one_hot({-1}), ValueError);
}
