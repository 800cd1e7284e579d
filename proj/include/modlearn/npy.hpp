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

#include <string>

#include "modlearn/tensor.hpp"

namespace modlearn {

/// Writes a tensor as an NPY v1.0 file (little-endian f8, C order).
void save_npy(const std::string& path, const Tensor& t);

/// Reads an NPY v1.0 file. Only little-endian f8 in C order is accepted;
/// anything else raises IoError with a description of the offending field.
Tensor load_npy(const std::string& path);

}  // namespace modlearn
