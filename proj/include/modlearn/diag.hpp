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
#include <vector>

#include "modlearn/error.hpp"

namespace modlearn {

enum class DiagCode {
  kSyntax,
  kUndefinedAlias,
  kDuplicateKey,
  kUnknownType,
  kUnknownParam,
  kMissingParam,
  kTypeMismatch,
  kValidation,
  kBadOverride,
  kIo,
};

const char* diag_code_name(DiagCode c);

/// One configuration problem, carrying the source position and (after
/// instantiation starts) the object path, e.g. "harness.algorithm.cost".
struct Diag {
  DiagCode code = DiagCode::kSyntax;
  int line = 0;  // 1-based; 0 when not applicable
  int col = 0;
  std::string path;
  std::string message;

  std::string to_string() const;
};

/// Carries the full batch of collected diagnostics.
class ConfigError : public Error {
 public:
  explicit ConfigError(std::vector<Diag> diags);
  const std::vector<Diag>& diags() const { return diags_; }

 private:
  static std::string join(const std::vector<Diag>& diags);
  std::vector<Diag> diags_;
};

}  // namespace modlearn
