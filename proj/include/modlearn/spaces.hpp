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

#include <array>
#include <string>
#include <variant>

#include "modlearn/graph.hpp"
#include "modlearn/tensor.hpp"

namespace modlearn {

/// One of the four batch-tensor axes: batch, channel, row, column.
enum class Axis : char { kBatch = 'b', kChannel = 'c', kRow = '0', kCol = '1' };

/// Permutation of the four axis labels, e.g. bc01 or c01b.
class AxisOrder {
 public:
  AxisOrder() : axes_{Axis::kBatch, Axis::kChannel, Axis::kRow, Axis::kCol} {}
  explicit AxisOrder(std::array<Axis, 4> axes);

  /// Parses a four-letter string over {b, c, 0, 1}.
  static AxisOrder parse(const std::string& s);
  static AxisOrder bc01() { return AxisOrder(); }
  static AxisOrder b01c() {
    return AxisOrder({Axis::kBatch, Axis::kRow, Axis::kCol, Axis::kChannel});
  }
  static AxisOrder c01b() {
    return AxisOrder({Axis::kChannel, Axis::kRow, Axis::kCol, Axis::kBatch});
  }

  Axis operator[](std::size_t i) const { return axes_[i]; }
  std::size_t index_of(Axis a) const;
  std::string to_string() const;
  bool operator==(const AxisOrder& o) const { return axes_ == o.axes_; }

 private:
  std::array<Axis, 4> axes_;
};

struct VectorSpace {
  long long dim = 1;

  bool operator==(const VectorSpace& o) const { return dim == o.dim; }
};

struct Conv2DSpace {
  long long rows = 1;
  long long cols = 1;
  long long channels = 1;
  AxisOrder axes;

  bool operator==(const Conv2DSpace& o) const {
    return rows == o.rows && cols == o.cols && channels == o.channels &&
           axes == o.axes;
  }
};

using Space = std::variant<VectorSpace, Conv2DSpace>;

long long num_elements(const Space& s);
std::string space_to_string(const Space& s);
bool space_equal(const Space& a, const Space& b);

/// Static shape of a batch in this space, batch extent given explicitly
/// (kWild for symbolic batches).
Shape batch_shape(const Space& s, long long batch = kWild);
/// Position of the batch axis in batch_shape.
std::size_t batch_axis(const Space& s);

/// Throws ShapeError unless the tensor is laid out per the space with some
/// batch size n >= 0.
void validate(const Space& s, const Tensor& t);
long long batch_size_of(const Space& s, const Tensor& t);

/// A tensor together with the space describing its layout.
struct Batch {
  Tensor tensor;
  Space space;
};

/// Reformats a batch into the target space without changing per-example
/// values. Conv2D -> Vector flattening uses the canonical (channel, row,
/// column) row-major order regardless of the source axis order; identical
/// spaces return the batch unchanged.
Batch format_as(const Batch& b, const Space& target);

/// Symbolic counterpart of format_as: appends reshape/transpose nodes.
NodeRef sym_format_as(Graph& g, NodeRef x, const Space& from, const Space& to);

}  // namespace modlearn
