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

#include "modlearn/spaces.hpp"

#include <algorithm>

namespace modlearn {

AxisOrder::AxisOrder(std::array<Axis, 4> axes) : axes_(axes) {
  for (Axis want : {Axis::kBatch, Axis::kChannel, Axis::kRow, Axis::kCol}) {
    if (std::count(axes_.begin(), axes_.end(), want) != 1)
      throw ValueError("axis order must contain each of b, c, 0, 1 exactly once");
  }
}

AxisOrder AxisOrder::parse(const std::string& s) {
  if (s.size() != 4) throw ValueError("axis order '" + s + "' must have 4 labels");
  std::array<Axis, 4> axes{};
  for (std::size_t i = 0; i < 4; ++i) {
    switch (s[i]) {
      case 'b': axes[i] = Axis::kBatch; break;
      case 'c': axes[i] = Axis::kChannel; break;
      case '0': axes[i] = Axis::kRow; break;
      case '1': axes[i] = Axis::kCol; break;
      default: throw ValueError("axis order '" + s + "': unknown label");
    }
  }
  return AxisOrder(axes);
}

std::size_t AxisOrder::index_of(Axis a) const {
  for (std::size_t i = 0; i < 4; ++i)
    if (axes_[i] == a) return i;
  throw ValueError("axis not present");
}

std::string AxisOrder::to_string() const {
  std::string s;
  for (Axis a : axes_) s.push_back(static_cast<char>(a));
  return s;
}

long long num_elements(const Space& s) {
  return std::visit(
      [](const auto& sp) -> long long {
        using T = std::decay_t<decltype(sp)>;
        if constexpr (std::is_same_v<T, VectorSpace>)
          return sp.dim;
        else
          return sp.rows * sp.cols * sp.channels;
      },
      s);
}

std::string space_to_string(const Space& s) {
  return std::visit(
      [](const auto& sp) -> std::string {
        using T = std::decay_t<decltype(sp)>;
        if constexpr (std::is_same_v<T, VectorSpace>)
          return "VectorSpace(" + std::to_string(sp.dim) + ")";
        else
          return "Conv2DSpace(" + std::to_string(sp.rows) + "x" +
                 std::to_string(sp.cols) + "x" + std::to_string(sp.channels) +
                 ", " + sp.axes.to_string() + ")";
      },
      s);
}

bool space_equal(const Space& a, const Space& b) { return a == b; }

Shape batch_shape(const Space& s, long long batch) {
  return std::visit(
      [&](const auto& sp) -> Shape {
        using T = std::decay_t<decltype(sp)>;
        if constexpr (std::is_same_v<T, VectorSpace>) {
          return Shape{batch, sp.dim};
        } else {
          Shape out(4);
          for (std::size_t i = 0; i < 4; ++i) {
            switch (sp.axes[i]) {
              case Axis::kBatch: out[i] = batch; break;
              case Axis::kChannel: out[i] = sp.channels; break;
              case Axis::kRow: out[i] = sp.rows; break;
              case Axis::kCol: out[i] = sp.cols; break;
            }
          }
          return out;
        }
      },
      s);
}

std::size_t batch_axis(const Space& s) {
  if (std::holds_alternative<VectorSpace>(s)) return 0;
  return std::get<Conv2DSpace>(s).axes.index_of(Axis::kBatch);
}

void validate(const Space& s, const Tensor& t) {
  const Shape expect = batch_shape(s, kWild);
  const Shape& got = t.shape();
  bool ok = expect.size() == got.size();
  if (ok) {
    for (std::size_t i = 0; i < expect.size(); ++i)
      if (expect[i] != kWild && expect[i] != got[i]) ok = false;
  }
  if (!ok)
    throw ShapeError("tensor " + shape_to_string(got) + " does not fit " +
                     space_to_string(s) + " (expected " + shape_to_string(expect) +
                     ")");
}

long long batch_size_of(const Space& s, const Tensor& t) {
  validate(s, t);
  return t.shape()[batch_axis(s)];
}

namespace {

// Permutation taking a tensor in `from` axis order to `to` axis order.
std::vector<std::size_t> axis_perm(const AxisOrder& from, const AxisOrder& to) {
  std::vector<std::size_t> perm(4);
  for (std::size_t i = 0; i < 4; ++i) perm[i] = from.index_of(to[i]);
  return perm;
}

// Design-matrix rows in canonical (channel, row, column) order.
Tensor to_rows(const Batch& b) {
  if (std::holds_alternative<VectorSpace>(b.space)) return b.tensor;
  const auto& cs = std::get<Conv2DSpace>(b.space);
  Tensor canon = b.tensor.permuted(axis_perm(cs.axes, AxisOrder::bc01()));
  const long long n = canon.extent(0);
  return canon.reshaped(Shape{n, cs.channels * cs.rows * cs.cols});
}

Batch from_rows(Tensor rows, const Space& target) {
  if (std::holds_alternative<VectorSpace>(target))
    return Batch{std::move(rows), target};
  const auto& cs = std::get<Conv2DSpace>(target);
  const long long n = rows.extent(0);
  Tensor canon = rows.reshaped(Shape{n, cs.channels, cs.rows, cs.cols});
  return Batch{canon.permuted(axis_perm(AxisOrder::bc01(), cs.axes)), target};
}

}  // namespace

Batch format_as(const Batch& b, const Space& target) {
  validate(b.space, b.tensor);
  if (space_equal(b.space, target)) return b;
  if (num_elements(b.space) != num_elements(target))
    throw ShapeError("cannot format " + space_to_string(b.space) + " as " +
                     space_to_string(target) + ": element counts differ (" +
                     std::to_string(num_elements(b.space)) + " vs " +
                     std::to_string(num_elements(target)) + ")");
  return from_rows(to_rows(b), target);
}

NodeRef sym_format_as(Graph& g, NodeRef x, const Space& from, const Space& to) {
  if (space_equal(from, to)) return x;
  if (num_elements(from) != num_elements(to))
    throw ShapeError("cannot format " + space_to_string(from) + " as " +
                     space_to_string(to) + ": element counts differ");

  NodeRef rows = x;
  if (const auto* cs = std::get_if<Conv2DSpace>(&from)) {
    std::vector<std::size_t> perm = axis_perm(cs->axes, AxisOrder::bc01());
    std::vector<long long> perm_ll(perm.begin(), perm.end());
    NodeRef canon = g.transpose(x, perm_ll);
    rows = g.reshape(canon, Shape{kWild, cs->channels * cs->rows * cs->cols});
  }
  if (const auto* cs = std::get_if<Conv2DSpace>(&to)) {
    NodeRef canon = g.reshape(rows, Shape{kWild, cs->channels, cs->rows, cs->cols});
    std::vector<std::size_t> perm = axis_perm(AxisOrder::bc01(), cs->axes);
    std::vector<long long> perm_ll(perm.begin(), perm.end());
    return g.transpose(canon, perm_ll);
  }
  return rows;
}

}  // namespace modlearn
