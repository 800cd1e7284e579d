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

#include "modlearn/instantiate.hpp"

#include <filesystem>

#include "modlearn/npy.hpp"

namespace modlearn {

using config::Node;
using config::NodeKind;
using config::NodePtr;
using config::ScalarType;

void Registry::add(const std::string& name, Builder b) {
  if (!builders_.emplace(name, std::move(b)).second)
    throw ValueError("type '" + name + "' registered twice");
}

const Registry::Builder* Registry::find(const std::string& name) const {
  auto it = builders_.find(name);
  return it == builders_.end() ? nullptr : &it->second;
}

std::vector<std::string> Registry::names() const {
  std::vector<std::string> out;
  out.reserve(builders_.size());
  for (const auto& [name, b] : builders_) out.push_back(name);
  return out;
}

// ---------------------------------------------------------------------------
// Args

Args::Args(const Node& node, std::vector<Entry> entries, InstContext& ctx,
           std::string path)
    : node_(&node),
      entries_(std::move(entries)),
      ctx_(&ctx),
      path_(std::move(path)),
      errors_at_start_(ctx.diags.size()) {}

const Args::Entry* Args::find_entry(const std::string& key) const {
  for (const Entry& e : entries_)
    if (e.key == key) return &e;
  return nullptr;
}

Args::Entry* Args::consume(const std::string& key) {
  for (Entry& e : entries_)
    if (e.key == key) {
      e.consumed = true;
      return &e;
    }
  return nullptr;
}

bool Args::has(const std::string& key) const { return find_entry(key) != nullptr; }

void Args::error(DiagCode code, const std::string& message) {
  ctx_->diags.push_back(Diag{code, node_->line, node_->col, path_, message});
}

void Args::error_at(const std::string& key, DiagCode code,
                    const std::string& message) {
  const Entry* e = find_entry(key);
  ctx_->diags.push_back(Diag{code, e ? e->line : node_->line, e ? e->col : node_->col,
                             path_ + "." + key, message});
}

namespace {

std::string any_type_name(const std::any& a) {
  if (!a.has_value() || a.type() == typeid(std::monostate)) return "null";
  if (a.type() == typeid(bool)) return "bool";
  if (a.type() == typeid(long long)) return "int";
  if (a.type() == typeid(double)) return "float";
  if (a.type() == typeid(std::string)) return "string";
  if (a.type() == typeid(AnyList)) return "list";
  if (a.type() == typeid(AnyMap)) return "mapping";
  if (a.type() == typeid(Tensor)) return "tensor";
  return "object";
}

}  // namespace

long long Args::get_int(const std::string& key) {
  Entry* e = consume(key);
  if (!e) {
    error(DiagCode::kMissingParam, "missing required parameter '" + key + "'");
    return 0;
  }
  if (auto* v = std::any_cast<long long>(&e->value)) return *v;
  error_at(key, DiagCode::kTypeMismatch,
           "expected an integer, got " + any_type_name(e->value));
  return 0;
}

long long Args::get_int(const std::string& key, long long fallback) {
  if (!has(key)) return fallback;
  return get_int(key);
}

double Args::get_double(const std::string& key) {
  Entry* e = consume(key);
  if (!e) {
    error(DiagCode::kMissingParam, "missing required parameter '" + key + "'");
    return 0.0;
  }
  if (auto* v = std::any_cast<double>(&e->value)) return *v;
  if (auto* v = std::any_cast<long long>(&e->value)) return static_cast<double>(*v);
  error_at(key, DiagCode::kTypeMismatch,
           "expected a number, got " + any_type_name(e->value));
  return 0.0;
}

double Args::get_double(const std::string& key, double fallback) {
  if (!has(key)) return fallback;
  return get_double(key);
}

bool Args::get_bool(const std::string& key, bool fallback) {
  if (!has(key)) return fallback;
  Entry* e = consume(key);
  if (auto* v = std::any_cast<bool>(&e->value)) return *v;
  error_at(key, DiagCode::kTypeMismatch,
           "expected a boolean, got " + any_type_name(e->value));
  return fallback;
}

std::string Args::get_string(const std::string& key) {
  Entry* e = consume(key);
  if (!e) {
    error(DiagCode::kMissingParam, "missing required parameter '" + key + "'");
    return "";
  }
  if (auto* v = std::any_cast<std::string>(&e->value)) return *v;
  error_at(key, DiagCode::kTypeMismatch,
           "expected a string, got " + any_type_name(e->value));
  return "";
}

std::string Args::get_string(const std::string& key, const std::string& fallback) {
  if (!has(key)) return fallback;
  return get_string(key);
}

std::vector<double> Args::get_double_list(const std::string& key) {
  Entry* e = consume(key);
  if (!e) {
    error(DiagCode::kMissingParam, "missing required parameter '" + key + "'");
    return {};
  }
  auto* list = std::any_cast<AnyList>(&e->value);
  if (!list) {
    error_at(key, DiagCode::kTypeMismatch,
             "expected a list of numbers, got " + any_type_name(e->value));
    return {};
  }
  std::vector<double> out;
  out.reserve(list->size());
  for (const std::any& item : *list) {
    if (auto* v = std::any_cast<double>(&item))
      out.push_back(*v);
    else if (auto* w = std::any_cast<long long>(&item))
      out.push_back(static_cast<double>(*w));
    else {
      error_at(key, DiagCode::kTypeMismatch, "list elements must be numbers");
      return {};
    }
  }
  return out;
}

std::any Args::raw(const std::string& key) {
  Entry* e = consume(key);
  return e ? e->value : std::any();
}

Tensor Args::get_tensor(const std::string& key) {
  Entry* e = consume(key);
  if (!e) {
    error(DiagCode::kMissingParam, "missing required parameter '" + key + "'");
    return Tensor(Shape{0});
  }
  if (auto* t = std::any_cast<Tensor>(&e->value)) return *t;
  auto* list = std::any_cast<AnyList>(&e->value);
  if (!list) {
    error_at(key, DiagCode::kTypeMismatch,
             "expected a tensor (!npy: or nested number lists), got " +
                 any_type_name(e->value));
    return Tensor(Shape{0});
  }
  auto as_number = [](const std::any& a, double& out) {
    if (auto* v = std::any_cast<double>(&a)) {
      out = *v;
      return true;
    }
    if (auto* v = std::any_cast<long long>(&a)) {
      out = static_cast<double>(*v);
      return true;
    }
    return false;
  };
  if (list->empty()) return Tensor(Shape{0});
  double first;
  if (as_number((*list)[0], first)) {
    Tensor t(Shape{static_cast<long long>(list->size())});
    for (std::size_t i = 0; i < list->size(); ++i)
      if (!as_number((*list)[i], t[i])) {
        error_at(key, DiagCode::kTypeMismatch, "expected a flat list of numbers");
        return Tensor(Shape{0});
      }
    return t;
  }
  // 2-D: list of rows
  std::vector<std::vector<double>> rows;
  for (const std::any& row_any : *list) {
    auto* row = std::any_cast<AnyList>(&row_any);
    if (!row) {
      error_at(key, DiagCode::kTypeMismatch, "expected nested lists of numbers");
      return Tensor(Shape{0});
    }
    std::vector<double> r(row->size());
    for (std::size_t j = 0; j < row->size(); ++j)
      if (!as_number((*row)[j], r[j])) {
        error_at(key, DiagCode::kTypeMismatch, "matrix entries must be numbers");
        return Tensor(Shape{0});
      }
    if (!rows.empty() && r.size() != rows[0].size()) {
      error_at(key, DiagCode::kTypeMismatch, "ragged rows in matrix literal");
      return Tensor(Shape{0});
    }
    rows.push_back(std::move(r));
  }
  Tensor t(Shape{static_cast<long long>(rows.size()),
                 static_cast<long long>(rows[0].size())});
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows[i].size(); ++j) t.at(i, j) = rows[i][j];
  return t;
}

namespace {

template <class T>
std::shared_ptr<T> object_from_any(const std::any& a) {
  if (auto* p = std::any_cast<std::shared_ptr<T>>(&a)) return *p;
  return nullptr;
}

}  // namespace

#define MODLEARN_OBJECT_GETTER(METHOD, TYPE, WHAT)                              \
  std::shared_ptr<TYPE> Args::METHOD(const std::string& key) {                  \
    Entry* e = consume(key);                                                    \
    if (!e) {                                                                   \
      error(DiagCode::kMissingParam, "missing required parameter '" + key + "'"); \
      return nullptr;                                                           \
    }                                                                           \
    if (!e->value.has_value() || e->value.type() == typeid(std::monostate))     \
      return nullptr; /* child already failed and reported */                   \
    if (auto p = object_from_any<TYPE>(e->value)) return p;                     \
    error_at(key, DiagCode::kTypeMismatch,                                      \
             std::string("expected ") + WHAT + ", got " + any_type_name(e->value)); \
    return nullptr;                                                             \
  }

MODLEARN_OBJECT_GETTER(get_model, Model, "a model")
MODLEARN_OBJECT_GETTER(get_cost, Cost, "a cost")
MODLEARN_OBJECT_GETTER(get_dataset, DenseDesignMatrix, "a dataset")
MODLEARN_OBJECT_GETTER(get_algorithm, TrainingAlgorithm, "a training algorithm")
MODLEARN_OBJECT_GETTER(get_criterion, TerminationCriterion, "a termination criterion")
#undef MODLEARN_OBJECT_GETTER

std::shared_ptr<MlpCost> Args::get_mlp_cost(const std::string& key) {
  const Entry* e = find_entry(key);
  std::shared_ptr<Cost> base = get_cost(key);
  if (!base) return nullptr;
  auto mlp_cost = std::dynamic_pointer_cast<MlpCost>(base);
  if (!mlp_cost && e)
    error_at(key, DiagCode::kTypeMismatch,
             "expected a supervised MLP cost (nll/mse), got '" + base->name() + "'");
  return mlp_cost;
}

std::shared_ptr<LearningRule> Args::get_rule(const std::string& key) {
  Entry* e = consume(key);
  if (!e) return nullptr;
  if (!e->value.has_value() || e->value.type() == typeid(std::monostate))
    return nullptr;
  if (auto p = object_from_any<LearningRule>(e->value)) return p;
  error_at(key, DiagCode::kTypeMismatch,
           "expected a learning rule, got " + any_type_name(e->value));
  return nullptr;
}

Space Args::get_space(const std::string& key) {
  Entry* e = consume(key);
  if (!e) {
    error(DiagCode::kMissingParam, "missing required parameter '" + key + "'");
    return VectorSpace{1};
  }
  if (auto p = object_from_any<Space>(e->value)) return *p;
  error_at(key, DiagCode::kTypeMismatch,
           "expected a space, got " + any_type_name(e->value));
  return VectorSpace{1};
}

std::vector<LayerSpec> Args::get_layer_specs(const std::string& key) {
  Entry* e = consume(key);
  std::vector<LayerSpec> out;
  if (!e) {
    error(DiagCode::kMissingParam, "missing required parameter '" + key + "'");
    return out;
  }
  auto* list = std::any_cast<AnyList>(&e->value);
  if (!list) {
    error_at(key, DiagCode::kTypeMismatch,
             "expected a list of layers, got " + any_type_name(e->value));
    return out;
  }
  for (const std::any& item : *list) {
    if (!item.has_value() || item.type() == typeid(std::monostate)) continue;
    if (auto p = object_from_any<LayerSpec>(item)) {
      out.push_back(*p);
    } else {
      error_at(key, DiagCode::kTypeMismatch, "layers must be layer objects");
      return {};
    }
  }
  return out;
}

std::vector<std::shared_ptr<Preprocessor>> Args::get_preprocessors(
    const std::string& key) {
  Entry* e = consume(key);
  std::vector<std::shared_ptr<Preprocessor>> out;
  if (!e) return out;
  auto* list = std::any_cast<AnyList>(&e->value);
  if (!list) {
    error_at(key, DiagCode::kTypeMismatch,
             "expected a list of preprocessors, got " + any_type_name(e->value));
    return out;
  }
  for (const std::any& item : *list) {
    if (!item.has_value() || item.type() == typeid(std::monostate)) continue;
    if (auto p = object_from_any<Preprocessor>(item)) {
      out.push_back(p);
    } else {
      error_at(key, DiagCode::kTypeMismatch, "entries must be preprocessors");
      return {};
    }
  }
  return out;
}

std::vector<std::pair<std::string, std::shared_ptr<DenseDesignMatrix>>>
Args::get_dataset_map(const std::string& key) {
  Entry* e = consume(key);
  std::vector<std::pair<std::string, std::shared_ptr<DenseDesignMatrix>>> out;
  if (!e) return out;
  auto* map = std::any_cast<AnyMap>(&e->value);
  if (!map) {
    error_at(key, DiagCode::kTypeMismatch,
             "expected a mapping of name -> dataset, got " + any_type_name(e->value));
    return out;
  }
  for (const auto& [tag, value] : *map) {
    if (!value.has_value() || value.type() == typeid(std::monostate)) continue;
    if (auto p = object_from_any<DenseDesignMatrix>(value)) {
      out.push_back({tag, p});
    } else {
      error_at(key, DiagCode::kTypeMismatch,
               "monitoring entry '" + tag + "' is not a dataset");
    }
  }
  return out;
}

std::vector<std::pair<double, std::shared_ptr<Cost>>> Args::get_cost_terms(
    const std::string& key) {
  Entry* e = consume(key);
  std::vector<std::pair<double, std::shared_ptr<Cost>>> out;
  if (!e) {
    error(DiagCode::kMissingParam, "missing required parameter '" + key + "'");
    return out;
  }
  auto* list = std::any_cast<AnyList>(&e->value);
  if (!list) {
    error_at(key, DiagCode::kTypeMismatch,
             "expected a list of [coefficient, cost] pairs");
    return out;
  }
  for (const std::any& item : *list) {
    auto* pair = std::any_cast<AnyList>(&item);
    if (!pair || pair->size() != 2) {
      error_at(key, DiagCode::kTypeMismatch, "each term must be [coefficient, cost]");
      return {};
    }
    double coeff = 0.0;
    if (auto* v = std::any_cast<double>(&(*pair)[0]))
      coeff = *v;
    else if (auto* w = std::any_cast<long long>(&(*pair)[0]))
      coeff = static_cast<double>(*w);
    else {
      error_at(key, DiagCode::kTypeMismatch, "term coefficient must be a number");
      return {};
    }
    if (!(*pair)[1].has_value() || (*pair)[1].type() == typeid(std::monostate))
      continue;
    auto cost = object_from_any<Cost>((*pair)[1]);
    if (!cost) {
      error_at(key, DiagCode::kTypeMismatch, "term payload must be a cost");
      return {};
    }
    out.push_back({coeff, cost});
  }
  return out;
}

std::uint64_t Args::seed() {
  if (has("seed"))
    return split_seed(ctx_->global_seed, static_cast<std::uint64_t>(get_int("seed")));
  return split_seed(ctx_->global_seed, path_);
}

std::string Args::resolve_path(const std::string& p) const {
  namespace fs = std::filesystem;
  if (p.empty() || fs::path(p).is_absolute() || ctx_->config_dir.empty()) return p;
  return (fs::path(ctx_->config_dir) / p).string();
}

void Args::finish() {
  for (const Entry& e : entries_)
    if (!e.consumed)
      ctx_->diags.push_back(Diag{DiagCode::kUnknownParam, e.line, e.col,
                                 path_ + "." + e.key,
                                 "unknown parameter '" + e.key + "'"});
}

// ---------------------------------------------------------------------------
// Instantiation

std::any instantiate_node(const NodePtr& node, const Registry& registry,
                          InstContext& ctx, const std::string& path) {
  auto memo = ctx.memo.find(node.get());
  if (memo != ctx.memo.end()) return memo->second;

  std::any result;
  switch (node->kind) {
    case NodeKind::kScalar:
      switch (node->stype) {
        case ScalarType::kNull: result = std::monostate{}; break;
        case ScalarType::kBool: result = node->bval; break;
        case ScalarType::kInt: result = node->ival; break;
        case ScalarType::kFloat: result = node->fval; break;
        case ScalarType::kString: result = node->sval; break;
      }
      break;
    case NodeKind::kSequence: {
      AnyList list;
      list.reserve(node->items.size());
      for (std::size_t i = 0; i < node->items.size(); ++i)
        list.push_back(instantiate_node(node->items[i], registry, ctx,
                                        path + "[" + std::to_string(i) + "]"));
      result = std::move(list);
      break;
    }
    case NodeKind::kMapping: {
      AnyMap map;
      map.reserve(node->entries.size());
      for (const config::MapEntry& e : node->entries)
        map.push_back(
            {e.key, instantiate_node(e.value, registry, ctx, path + "." + e.key)});
      result = std::move(map);
      break;
    }
    case NodeKind::kTagged: {
      if (node->tag.rfind("npy:", 0) == 0) {
        const std::string rel = node->tag.substr(4);
        namespace fs = std::filesystem;
        const std::string full =
            (fs::path(rel).is_absolute() || ctx.config_dir.empty())
                ? rel
                : (fs::path(ctx.config_dir) / rel).string();
        try {
          result = load_npy(full);
        } catch (const Error& e) {
          ctx.diags.push_back(
              Diag{DiagCode::kIo, node->line, node->col, path, e.what()});
          result = std::monostate{};
        }
        break;
      }
      const std::string type_name = node->tag.substr(4);
      const Registry::Builder* builder = registry.find(type_name);
      if (!builder) {
        ctx.diags.push_back(Diag{DiagCode::kUnknownType, node->line, node->col, path,
                                 "unknown type '" + type_name + "'"});
        result = std::monostate{};
        break;
      }
      std::vector<Args::Entry> entries;
      if (node->payload) {
        for (const config::MapEntry& e : node->payload->entries)
          entries.push_back(Args::Entry{
              e.key, instantiate_node(e.value, registry, ctx, path + "." + e.key),
              e.key_line, e.key_col, false});
      }
      Args args(*node, std::move(entries), ctx, path);
      try {
        result = (*builder)(args);
      } catch (const Error& e) {
        // Parameter problems are already recorded; only surface construction
        // failures that happened with clean arguments.
        if (!args.failed())
          ctx.diags.push_back(
              Diag{DiagCode::kValidation, node->line, node->col, path, e.what()});
        result = std::monostate{};
      }
      args.finish();
      if (args.failed()) result = std::monostate{};
      break;
    }
  }
  ctx.memo[node.get()] = result;
  return result;
}

std::shared_ptr<TrainHarness> instantiate_harness(const NodePtr& root,
                                                  const Registry& registry,
                                                  std::uint64_t global_seed,
                                                  const std::string& config_dir) {
  InstContext ctx;
  ctx.global_seed = global_seed;
  ctx.config_dir = config_dir;
  if (root->kind != NodeKind::kTagged || root->tag != "obj:train.harness") {
    ctx.diags.push_back(Diag{DiagCode::kValidation, root->line, root->col, "harness",
                             "the top-level node must be !obj:train.harness"});
    throw ConfigError(std::move(ctx.diags));
  }
  std::any result = instantiate_node(root, registry, ctx, "harness");
  if (!ctx.diags.empty()) throw ConfigError(std::move(ctx.diags));
  auto* harness = std::any_cast<std::shared_ptr<TrainHarness>>(&result);
  if (!harness || !*harness)
    throw ConfigError({Diag{DiagCode::kValidation, root->line, root->col, "harness",
                            "failed to construct the harness"}});
  return *harness;
}

// ---------------------------------------------------------------------------
// Cross-object validation

std::vector<Diag> validate_harness(TrainHarness& h) {
  std::vector<Diag> diags;
  auto add = [&](const std::string& path, const std::string& msg) {
    diags.push_back(Diag{DiagCode::kValidation, 0, 0, path, msg});
  };

  DenseDesignMatrix& train = *h.training_data();
  Model& model = h.model();
  if (num_elements(model.input_space()) != train.dim())
    add("harness.model",
        "model input space " + space_to_string(model.input_space()) + " wants " +
            std::to_string(num_elements(model.input_space())) +
            " features but the dataset has " + std::to_string(train.dim()));

  Cost* cost = h.algorithm().cost();
  if (cost && cost->supervised()) {
    if (!train.has_targets()) {
      add("harness.dataset",
          "cost '" + cost->name() + "' is supervised but the dataset has no targets");
    } else if (auto out = model.output_space()) {
      if (const auto* v = std::get_if<VectorSpace>(&*out))
        if (v->dim != train.target_dim())
          add("harness.model", "model output dim " + std::to_string(v->dim) +
                                   " does not match target dim " +
                                   std::to_string(train.target_dim()));
    }
    for (const auto& [tag, ds] : h.monitoring_datasets())
      if (!ds->has_targets())
        add("harness.monitoring." + tag,
            "monitoring dataset has no targets but cost '" + cost->name() +
                "' is supervised");
  }
  for (const auto& [tag, ds] : h.monitoring_datasets())
    if (ds->dim() != train.dim())
      add("harness.monitoring." + tag,
          "feature dim " + std::to_string(ds->dim()) + " differs from training dim " +
              std::to_string(train.dim()));

  if (auto* sgd = dynamic_cast<SGD*>(&h.algorithm())) {
    if (sgd->scheme() == SchemeKind::kRandomUniform) {
      if (sgd->batch_size() > train.num_examples())
        add("harness.algorithm", "random-uniform batch_size " +
                                     std::to_string(sgd->batch_size()) +
                                     " exceeds dataset size " +
                                     std::to_string(train.num_examples()));
      if (sgd->num_batches() < 1)
        add("harness.algorithm", "random-uniform iteration needs num_batches >= 1");
    }
  }

  if (diags.empty()) {
    // Dry build: constructs the training graph and the monitor channels,
    // which exercises cost/model compatibility and channel references.
    try {
      Monitor preview;
      h.algorithm().setup(h.model_ptr(), h.training_data());
      h.build_monitor(preview);
      if (TerminationCriterion* t = h.algorithm().termination()) t->validate(preview);
    } catch (const Error& e) {
      add("harness", e.what());
    }
  }
  return diags;
}

}  // namespace modlearn
