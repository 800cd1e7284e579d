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

#include <any>
#include <cstdint>
#include <functional>
#include <unordered_map>

#include "modlearn/config.hpp"
#include "modlearn/training.hpp"

namespace modlearn {

using AnyList = std::vector<std::any>;
using AnyMap = std::vector<std::pair<std::string, std::any>>;

class Args;

/// Closed map from `!obj:` type names to constructors. Configs can only
/// instantiate registered types; third-party code extends the registry
/// through add().
class Registry {
 public:
  using Builder = std::function<std::any(Args&)>;

  void add(const std::string& name, Builder b);
  const Builder* find(const std::string& name) const;
  std::vector<std::string> names() const;

  /// All built-in framework types.
  static const Registry& standard();

 private:
  std::unordered_map<std::string, Builder> builders_;
};

struct InstContext {
  std::uint64_t global_seed = 0;
  std::string config_dir;  // base directory for relative paths in the config
  std::vector<Diag> diags;
  std::unordered_map<const config::Node*, std::any> memo;
};

/// Typed access to one `!obj:` payload during construction. Getters record
/// diagnostics (missing parameter, type mismatch) instead of throwing, so
/// every problem in a config is reported in one pass; a constructor whose
/// Args collected errors produces no object.
class Args {
 public:
  struct Entry {
    std::string key;
    std::any value;
    int line = 0, col = 0;
    bool consumed = false;
  };

  Args(const config::Node& node, std::vector<Entry> entries, InstContext& ctx,
       std::string path);

  const std::string& path() const { return path_; }
  InstContext& ctx() { return *ctx_; }
  bool has(const std::string& key) const;
  std::size_t errors_before() const { return errors_at_start_; }
  bool failed() const { return ctx_->diags.size() > errors_at_start_; }

  void error(DiagCode code, const std::string& message);
  void error_at(const std::string& key, DiagCode code, const std::string& message);

  // Scalars. The one-argument forms mark the parameter required.
  long long get_int(const std::string& key);
  long long get_int(const std::string& key, long long fallback);
  double get_double(const std::string& key);  // accepts int
  double get_double(const std::string& key, double fallback);
  bool get_bool(const std::string& key, bool fallback);
  std::string get_string(const std::string& key);
  std::string get_string(const std::string& key, const std::string& fallback);

  std::vector<double> get_double_list(const std::string& key);
  std::any raw(const std::string& key);  // consumes; empty any when absent

  /// Tensor from an `!npy:` value or nested numeric lists (1-D or 2-D).
  Tensor get_tensor(const std::string& key);

  // Framework objects.
  std::shared_ptr<Model> get_model(const std::string& key);
  std::shared_ptr<Cost> get_cost(const std::string& key);
  std::shared_ptr<MlpCost> get_mlp_cost(const std::string& key);
  std::shared_ptr<DenseDesignMatrix> get_dataset(const std::string& key);
  std::shared_ptr<TrainingAlgorithm> get_algorithm(const std::string& key);
  std::shared_ptr<TerminationCriterion> get_criterion(const std::string& key);
  std::shared_ptr<LearningRule> get_rule(const std::string& key);  // optional
  Space get_space(const std::string& key);
  std::vector<LayerSpec> get_layer_specs(const std::string& key);
  std::vector<std::shared_ptr<Preprocessor>> get_preprocessors(const std::string& key);
  std::vector<std::pair<std::string, std::shared_ptr<DenseDesignMatrix>>>
  get_dataset_map(const std::string& key);
  std::vector<std::pair<double, std::shared_ptr<Cost>>> get_cost_terms(
      const std::string& key);

  /// Deterministic per-component seed: an explicit integer `seed` parameter
  /// when present, otherwise the object path, mixed with the global seed.
  std::uint64_t seed();

  /// Resolves a path parameter relative to the config file's directory.
  std::string resolve_path(const std::string& p) const;

  /// Reports unconsumed keys as unknown parameters.
  void finish();

 private:
  const Entry* find_entry(const std::string& key) const;
  Entry* consume(const std::string& key);

  const config::Node* node_;
  std::vector<Entry> entries_;
  InstContext* ctx_;
  std::string path_;
  std::size_t errors_at_start_;
};

/// Recursive instantiation of a parsed node against a registry. Aliased
/// nodes construct once and share object identity.
std::any instantiate_node(const config::NodePtr& node, const Registry& registry,
                          InstContext& ctx, const std::string& path);

/// Instantiates a whole experiment: the top-level node must be
/// !obj:train.harness. Collects all diagnostics and throws ConfigError if
/// any were recorded.
std::shared_ptr<TrainHarness> instantiate_harness(const config::NodePtr& root,
                                                  const Registry& registry,
                                                  std::uint64_t global_seed,
                                                  const std::string& config_dir);

/// Cross-object checks on an instantiated experiment (space chaining,
/// cost/dataset compatibility, termination channels, batch sizes). Returns
/// the violations; empty means valid.
std::vector<Diag> validate_harness(TrainHarness& harness);

}  // namespace modlearn
