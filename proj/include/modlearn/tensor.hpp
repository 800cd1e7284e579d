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

#include <cstddef>
#include <initializer_list>
#include <string>
#include <vector>

#include "modlearn/error.hpp"

namespace modlearn {

/// Static shapes use -1 for the batch wildcard; concrete tensor shapes are
/// always non-negative.
using Shape = std::vector<long long>;
inline constexpr long long kWild = -1;

std::string shape_to_string(const Shape& s);
bool shape_is_concrete(const Shape& s);
/// Number of elements; wildcard extents are an error.
std::size_t shape_numel(const Shape& s);

/// Dense n-dimensional array of doubles, row-major.
class Tensor {
 public:
  /// Rank-0 scalar holding 0.
  Tensor() : shape_{}, data_(1, 0.0) {}

  explicit Tensor(Shape shape)
      : shape_(std::move(shape)), data_(shape_numel(shape_), 0.0) {}

  Tensor(Shape shape, std::vector<double> data);

  static Tensor scalar(double v);
  static Tensor zeros(Shape shape) { return Tensor(std::move(shape)); }
  static Tensor full(Shape shape, double v);
  static Tensor eye(std::size_t n);
  /// 2-D tensor from nested initializer lists (test and builder convenience).
  static Tensor matrix(std::initializer_list<std::initializer_list<double>> rows);
  static Tensor vector(std::initializer_list<double> v);
  static Tensor vector(std::vector<double> v);

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return data_.size(); }
  long long extent(std::size_t axis) const { return shape_[axis]; }

  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  double& at(std::size_t i, std::size_t j) {
    return data_[i * static_cast<std::size_t>(shape_[1]) + j];
  }
  double at(std::size_t i, std::size_t j) const {
    return data_[i * static_cast<std::size_t>(shape_[1]) + j];
  }
  double& at4(std::size_t a, std::size_t b, std::size_t c, std::size_t d) {
    const auto s1 = static_cast<std::size_t>(shape_[1]);
    const auto s2 = static_cast<std::size_t>(shape_[2]);
    const auto s3 = static_cast<std::size_t>(shape_[3]);
    return data_[((a * s1 + b) * s2 + c) * s3 + d];
  }
  double at4(std::size_t a, std::size_t b, std::size_t c, std::size_t d) const {
    return const_cast<Tensor*>(this)->at4(a, b, c, d);
  }

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
  bool all_finite() const;

  /// Returns a copy with the given shape; element count must match.
  Tensor reshaped(Shape shape) const;
  /// Permutes axes; perm[i] names the source axis placed at position i.
  Tensor permuted(const std::vector<std::size_t>& perm) const;
  /// Rows of a 2-D tensor gathered by index (with repetition allowed).
  Tensor gather_rows(const std::vector<std::size_t>& idx) const;

  double max_abs() const;

 private:
  Shape shape_;
  std::vector<double> data_;
};

/// Row-major strides for a concrete shape.
std::vector<std::size_t> row_major_strides(const Shape& s);

}  // namespace modlearn
