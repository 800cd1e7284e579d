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

#include "modlearn/tensor.hpp"

#include <cmath>
#include <sstream>

namespace modlearn {

std::string shape_to_string(const Shape& s) {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) os << ", ";
    if (s[i] == kWild)
      os << "*";
    else
      os << s[i];
  }
  os << "]";
  return os.str();
}

bool shape_is_concrete(const Shape& s) {
  for (long long e : s)
    if (e < 0) return false;
  return true;
}

std::size_t shape_numel(const Shape& s) {
  std::size_t n = 1;
  for (long long e : s) {
    if (e < 0) throw ShapeError("shape " + shape_to_string(s) + " is not concrete");
    n *= static_cast<std::size_t>(e);
  }
  return n;
}

Tensor::Tensor(Shape shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (shape_numel(shape_) != data_.size())
    throw ShapeError("tensor data length " + std::to_string(data_.size()) +
                     " does not match shape " + shape_to_string(shape_));
}

Tensor Tensor::scalar(double v) {
  Tensor t;
  t.data_[0] = v;
  return t;
}

Tensor Tensor::full(Shape shape, double v) {
  Tensor t(std::move(shape));
  for (double& x : t.data_) x = v;
  return t;
}

Tensor Tensor::eye(std::size_t n) {
  Tensor t(Shape{static_cast<long long>(n), static_cast<long long>(n)});
  for (std::size_t i = 0; i < n; ++i) t.at(i, i) = 1.0;
  return t;
}

Tensor Tensor::matrix(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t n = rows.size();
  const std::size_t m = n ? rows.begin()->size() : 0;
  Tensor t(Shape{static_cast<long long>(n), static_cast<long long>(m)});
  std::size_t i = 0;
  for (const auto& row : rows) {
    if (row.size() != m) throw ShapeError("ragged matrix initializer");
    std::size_t j = 0;
    for (double v : row) t.at(i, j++) = v;
    ++i;
  }
  return t;
}

Tensor Tensor::vector(std::initializer_list<double> v) {
  return Tensor(Shape{static_cast<long long>(v.size())}, std::vector<double>(v));
}

Tensor Tensor::vector(std::vector<double> v) {
  const long long n = static_cast<long long>(v.size());
  return Tensor(Shape{n}, std::move(v));
}

bool Tensor::all_finite() const {
  for (double v : data_)
    if (!std::isfinite(v)) return false;
  return true;
}

Tensor Tensor::reshaped(Shape shape) const {
  if (shape_numel(shape) != data_.size())
    throw ShapeError("cannot reshape " + shape_to_string(shape_) + " to " +
                     shape_to_string(shape));
  return Tensor(std::move(shape), data_);
}

std::vector<std::size_t> row_major_strides(const Shape& s) {
  std::vector<std::size_t> strides(s.size(), 1);
  for (std::size_t i = s.size(); i-- > 1;)
    strides[i - 1] = strides[i] * static_cast<std::size_t>(s[i]);
  return strides;
}

Tensor Tensor::permuted(const std::vector<std::size_t>& perm) const {
  if (perm.size() != rank()) throw ShapeError("permutation rank mismatch");
  Shape out_shape(rank());
  for (std::size_t i = 0; i < rank(); ++i) out_shape[i] = shape_[perm[i]];
  Tensor out(out_shape);
  if (data_.empty()) return out;
  const auto in_strides = row_major_strides(shape_);
  const auto out_strides = row_major_strides(out_shape);
  const std::size_t n = data_.size();
  std::vector<std::size_t> idx(rank(), 0);
  for (std::size_t lin = 0; lin < n; ++lin) {
    // idx holds the multi-index in the output layout
    std::size_t src = 0;
    for (std::size_t a = 0; a < rank(); ++a) src += idx[a] * in_strides[perm[a]];
    out.data_[lin] = data_[src];
    for (std::size_t a = rank(); a-- > 0;) {
      if (++idx[a] < static_cast<std::size_t>(out_shape[a])) break;
      idx[a] = 0;
    }
  }
  return out;
}

Tensor Tensor::gather_rows(const std::vector<std::size_t>& idx) const {
  if (rank() != 2) throw ShapeError("gather_rows requires a 2-D tensor");
  const std::size_t d = static_cast<std::size_t>(shape_[1]);
  Tensor out(Shape{static_cast<long long>(idx.size()), shape_[1]});
  for (std::size_t i = 0; i < idx.size(); ++i)
    for (std::size_t j = 0; j < d; ++j) out.at(i, j) = at(idx[i], j);
  return out;
}

double Tensor::max_abs() const {
  double m = 0.0;
  for (double v : data_) m = std::max(m, std::fabs(v));
  return m;
}

}  // namespace modlearn
