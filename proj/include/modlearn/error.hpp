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

#include <stdexcept>
#include <string>

namespace modlearn {

/// Base class for all modlearn errors.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Static or runtime shape incompatibility (graph construction, space checks).
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Failure while evaluating a graph (unbound variable, binding mismatch,
/// non-finite values where forbidden).
class EvalError : public Error {
 public:
  using Error::Error;
};

/// Violated precondition on a value-level argument.
class ValueError : public Error {
 public:
  using Error::Error;
};

/// An optional capability (train_batch / train_all) is not implemented
/// by the model at hand.
class CapabilityError : public Error {
 public:
  using Error::Error;
};

/// File I/O and on-disk format problems.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace modlearn
