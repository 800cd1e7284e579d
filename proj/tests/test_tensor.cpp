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

#include "modlearn/eig.hpp"
#include "modlearn/npy.hpp"
#include "modlearn/rng.hpp"
#include "modlearn/tensor.hpp"
#include "testutil.hpp"

using namespace modlearn;

TEST_CASE("tensor shape and data invariants") {
  Tensor t(Shape{2, 3});
  CHECK(t.size() == 6);
  CHECK(t.rank() == 2);
  t.at(1, 2) = 5.0;
  CHECK(t.data()[5] == 5.0);

  CHECK(Tensor::scalar(3.5).rank() == 0);
  CHECK(Tensor::scalar(3.5).size() == 1);

  CHECK_THROWS_AS(Tensor(Shape{2, 2}, std::vector<double>(3)), ShapeError);
  CHECK_THROWS_AS(Tensor(Shape{-1, 2}), ShapeError);

  Tensor empty(Shape{0, 4});
  CHECK(empty.size() == 0);
}

TEST_CASE("tensor reshape and permute") {
  Tensor t = Tensor::matrix({{1, 2, 3}, {4, 5, 6}});
  Tensor r = t.reshaped(Shape{3, 2});
  CHECK(r.at(0, 1) == 2.0);
  CHECK(r.at(2, 1) == 6.0);
  CHECK_THROWS_AS(t.reshaped(Shape{4, 2}), ShapeError);

  Tensor p = t.permuted({1, 0});
  CHECK(p.shape() == Shape{3, 2});
  CHECK(p.at(0, 0) == 1.0);
  CHECK(p.at(0, 1) == 4.0);
  CHECK(p.at(2, 1) == 6.0);

  // rank-4 permute round trip
  Rng rng(1);
  Tensor x = test::random_tensor(Shape{2, 3, 4, 5}, rng);
  Tensor y = x.permuted({3, 1, 0, 2}).permuted({2, 1, 3, 0});
  CHECK(y.shape() == x.shape());
  CHECK(y.data() == x.data());
}

TEST_CASE("gather rows") {
  Tensor t = Tensor::matrix({{1, 2}, {3, 4}, {5, 6}});
  Tensor g = t.gather_rows({2, 0, 2});
  CHECK(g.extent(0) == 3);
  CHECK(g.at(0, 0) == 5.0);
  CHECK(g.at(1, 1) == 2.0);
  CHECK(g.at(2, 1) == 6.0);
}

TEST_CASE("rng determinism and distributions") {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());

  Rng r(7);
  for (int i = 0; i < 1000; ++i) {
    const double u = r.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
  }
  auto perm = r.permutation(50);
  std::vector<bool> seen(50, false);
  for (std::size_t i : perm) {
    CHECK(!seen[i]);
    seen[i] = true;
  }

  // Box-Muller sanity: mean near 0, variance near 1
  Rng n(3);
  double sum = 0.0, sq = 0.0;
  const int num = 20000;
  for (int i = 0; i < num; ++i) {
    const double z = n.normal();
    sum += z;
    sq += z * z;
  }
  CHECK(std::fabs(sum / num) < 0.03);
  CHECK(std::fabs(sq / num - 1.0) < 0.05);
}

TEST_CASE("seed splitting separates components deterministically") {
  CHECK(split_seed(1, "model") == split_seed(1, "model"));
  CHECK(split_seed(1, "model") != split_seed(1, "dataset"));
  CHECK(split_seed(1, "model") != split_seed(2, "model"));
  CHECK(split_seed(1, std::uint64_t{5}) == split_seed(1, std::uint64_t{5}));
  CHECK(split_seed(1, std::uint64_t{5}) != split_seed(1, std::uint64_t{6}));
}

TEST_CASE("jacobi eigendecomposition hits the accuracy target on 64x64") {
  Rng rng(11);
  const std::size_t n = 64;
  Tensor a(Shape{64, 64});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j <= i; ++j) {
      const double v = rng.uniform(-1.0, 1.0);
      a.at(i, j) = v;
      a.at(j, i) = v;
    }
  Tensor values, vectors;
  symmetric_eig(a, values, vectors);

  for (std::size_t i = 0; i + 1 < n; ++i) CHECK(values[i] <= values[i + 1]);

  // A V = V diag(values)
  double worst = 0.0;
  for (std::size_t col = 0; col < n; ++col)
    for (std::size_t i = 0; i < n; ++i) {
      double av = 0.0;
      for (std::size_t k = 0; k < n; ++k) av += a.at(i, k) * vectors.at(k, col);
      worst = std::max(worst, std::fabs(av - values[col] * vectors.at(i, col)));
    }
  CHECK(worst < 1e-10);

  // V^T V = I
  double worst_ortho = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      double dot = 0.0;
      for (std::size_t k = 0; k < n; ++k) dot += vectors.at(k, i) * vectors.at(k, j);
      worst_ortho = std::max(worst_ortho, std::fabs(dot - (i == j ? 1.0 : 0.0)));
    }
  CHECK(worst_ortho < 1e-12);
}

TEST_CASE("npy round trip is bit exact") {
  test::TempDir tmp;
  Rng rng(5);
  for (Shape shape : {Shape{7}, Shape{3, 4}, Shape{2, 3, 2, 2}}) {
    Tensor t = test::random_tensor(shape, rng, -100.0, 100.0);
    const std::string path = tmp.file("t.npy");
    save_npy(path, t);
    Tensor back = load_npy(path);
    CHECK(back.shape() == t.shape());
    CHECK(back.data() == t.data());  // bitwise
  }
}

TEST_CASE("npy rejects foreign files with a description") {
  test::TempDir tmp;
  {
    std::ofstream f(tmp.file("junk.npy"), std::ios::binary);
    f << "not numpy at all";
  }
  CHECK_THROWS_WITH_AS(load_npy(tmp.file("junk.npy")),
                       doctest::Contains("bad magic"), IoError);

  // forge a float32 header
  {
    std::ofstream f(tmp.file("f32.npy"), std::ios::binary);
    std::string header = "{'descr': '<f4', 'fortran_order': False, 'shape': (2,), }";
    header.resize(70 - 10 - 1, ' ');
    header += "\n";
    f << "\x93NUMPY" << '\x01' << '\x00';
    f.put(static_cast<char>(header.size() & 0xff));
    f.put(static_cast<char>(header.size() >> 8));
    f << header;
    for (int i = 0; i < 16; ++i) f.put('\0');
  }
  CHECK_THROWS_WITH_AS(load_npy(tmp.file("f32.npy")),
                       doctest::Contains("unsupported dtype"), IoError);

  CHECK_THROWS_AS(load_npy(tmp.file("missing.npy")), IoError);
}
