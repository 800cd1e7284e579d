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

#include "modlearn/eig.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

namespace modlearn {

void symmetric_eig(const Tensor& a, Tensor& values, Tensor& vectors) {
  if (a.rank() != 2 || a.extent(0) != a.extent(1))
    throw ShapeError("symmetric_eig wants a square matrix, got " +
                     shape_to_string(a.shape()));
  const std::size_t n = static_cast<std::size_t>(a.extent(0));
  Tensor m = a;
  Tensor v = Tensor::eye(n);

  auto off_diag_sq = [&]() {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) s += m.at(i, j) * m.at(i, j);
    return s;
  };

  double norm_sq = 0.0;
  for (double x : a.data()) norm_sq += x * x;
  const double tol = 1e-30 * std::max(norm_sq, 1e-300);

  const int max_sweeps = 64;
  for (int sweep = 0; sweep < max_sweeps && off_diag_sq() > tol; ++sweep) {
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = m.at(p, q);
        if (apq == 0.0) continue;
        const double app = m.at(p, p);
        const double aqq = m.at(q, q);
        const double theta = (aqq - app) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                         (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double mkp = m.at(k, p);
          const double mkq = m.at(k, q);
          m.at(k, p) = c * mkp - s * mkq;
          m.at(k, q) = s * mkp + c * mkq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double mpk = m.at(p, k);
          const double mqk = m.at(q, k);
          m.at(p, k) = c * mpk - s * mqk;
          m.at(q, k) = s * mpk + c * mqk;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v.at(k, p);
          const double vkq = v.at(k, q);
          v.at(k, p) = c * vkp - s * vkq;
          v.at(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t i, std::size_t j) { return m.at(i, i) < m.at(j, j); });

  values = Tensor(Shape{static_cast<long long>(n)});
  vectors = Tensor(Shape{static_cast<long long>(n), static_cast<long long>(n)});
  for (std::size_t col = 0; col < n; ++col) {
    const std::size_t src = order[col];
    values[col] = m.at(src, src);
    std::size_t arg = 0;
    double best = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      const double mag = std::fabs(v.at(k, src));
      if (mag > best) {
        best = mag;
        arg = k;
      }
    }
    const double sign = v.at(arg, src) < 0.0 ? -1.0 : 1.0;
    for (std::size_t k = 0; k < n; ++k) vectors.at(k, col) = sign * v.at(k, src);
  }
}

}  // namespace modlearn
