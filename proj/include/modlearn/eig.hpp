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

#include "modlearn/tensor.hpp"

namespace modlearn {

/// Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
///
/// Returns eigenvalues ascending in `values` [n] and orthonormal eigenvectors
/// as the columns of `vectors` [n, n], so A == V diag(values) V^T. Each
/// eigenvector is sign-fixed so its largest-magnitude entry is positive,
/// which keeps downstream results reproducible.
void symmetric_eig(const Tensor& a, Tensor& values, Tensor& vectors);

}  // namespace modlearn
