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

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "modlearn/rng.hpp"
#include "modlearn/spaces.hpp"
#include "modlearn/tensor.hpp"

namespace modlearn {

/// In-memory dataset stored as a design matrix: one example per row,
/// features flattened in the canonical (channel, row, column) order. An
/// optional Conv2DSpace records the topological layout of each row.
class DenseDesignMatrix {
 public:
  DenseDesignMatrix() = default;
  DenseDesignMatrix(Tensor x, std::optional<Tensor> y = std::nullopt,
                    std::optional<Conv2DSpace> view = std::nullopt,
                    std::string name = "dataset");

  long long num_examples() const { return x_.extent(0); }
  long long dim() const { return x_.extent(1); }
  bool has_targets() const { return y_.has_value(); }
  long long target_dim() const { return y_ ? y_->extent(1) : 0; }

  const Tensor& design_matrix() const { return x_; }
  Tensor& mutable_design_matrix() { return x_; }
  const Tensor* targets() const { return y_ ? &*y_ : nullptr; }
  const std::optional<Conv2DSpace>& view() const { return view_; }
  const std::string& name() const { return name_; }

  Space feature_space() const { return VectorSpace{dim()}; }
  Space target_space() const { return VectorSpace{target_dim()}; }

  /// The design matrix reshaped into the topological view space.
  /// Requires a view space; the two presentations are mutually inverse.
  Tensor get_topological_view() const;
  const Tensor& get_design_matrix() const { return x_; }

 private:
  Tensor x_{Shape{0, 0}};
  std::optional<Tensor> y_;
  std::optional<Conv2DSpace> view_;
  std::string name_ = "dataset";
};

enum class SchemeKind { kSequential, kShuffledSequential, kRandomUniform };

SchemeKind scheme_from_string(const std::string& s);
std::string scheme_to_string(SchemeKind k);

/// How to walk a dataset: contiguous blocks, a fresh seeded permutation per
/// pass, or uniform sampling with replacement for a fixed number of batches.
struct IterationScheme {
  SchemeKind kind = SchemeKind::kShuffledSequential;
  long long batch_size = 1;
  long long num_batches = 0;  // random-uniform only
};

struct MiniBatch {
  Tensor x;
  std::optional<Tensor> y;
  std::vector<std::size_t> indices;
};

/// Single-consumer batch stream over one pass (sequential variants) or
/// num_batches draws (random-uniform). Several independent iterators over
/// the same dataset may run concurrently.
class BatchIterator {
 public:
  BatchIterator(const DenseDesignMatrix& ds, const IterationScheme& scheme, Rng* rng);

  std::optional<MiniBatch> next();

 private:
  const DenseDesignMatrix& ds_;
  IterationScheme scheme_;
  Rng* rng_;
  std::vector<std::size_t> order_;
  std::size_t cursor_ = 0;
  long long batches_emitted_ = 0;
};

/// Fit-then-apply data transformation. `can_fit` must be set on the first
/// use (training data); afterwards the fitted state is reused so test data
/// goes through the same transformation.
class Preprocessor {
 public:
  virtual ~Preprocessor() = default;
  virtual std::string name() const = 0;
  virtual bool fitted() const = 0;
  virtual void fit_apply(DenseDesignMatrix& ds, bool can_fit) = 0;
  /// Fitted tensors, for serialization.
  virtual std::vector<std::pair<std::string, Tensor>> state() const { return {}; }
  virtual void set_state(const std::vector<std::pair<std::string, Tensor>>& s) {}
};

/// Per-column zero mean, unit variance (population convention, divisor n).
/// Columns with std below eps are centered but not scaled.
class Standardize : public Preprocessor {
 public:
  explicit Standardize(double eps = 1e-8) : eps_(eps) {}
  std::string name() const override { return "standardize"; }
  bool fitted() const override { return fitted_; }
  void fit_apply(DenseDesignMatrix& ds, bool can_fit) override;
  std::vector<std::pair<std::string, Tensor>> state() const override;
  void set_state(const std::vector<std::pair<std::string, Tensor>>& s) override;

 private:
  double eps_;
  bool fitted_ = false;
  Tensor mean_, std_;
};

/// Per-row: subtract the row mean, then scale the row to the given norm.
/// Rows with norm below eps are centered but left unscaled. Stateless.
class GlobalContrastNormalize : public Preprocessor {
 public:
  explicit GlobalContrastNormalize(double scale = 1.0, double eps = 1e-8)
      : scale_(scale), eps_(eps) {}
  std::string name() const override { return "gcn"; }
  bool fitted() const override { return true; }
  void fit_apply(DenseDesignMatrix& ds, bool can_fit) override;

 private:
  double scale_, eps_;
};

/// Projection onto the top-k principal components of the fitting set.
class PCA : public Preprocessor {
 public:
  explicit PCA(long long num_components) : k_(num_components) {}
  std::string name() const override { return "pca"; }
  bool fitted() const override { return fitted_; }
  void fit_apply(DenseDesignMatrix& ds, bool can_fit) override;
  std::vector<std::pair<std::string, Tensor>> state() const override;
  void set_state(const std::vector<std::pair<std::string, Tensor>>& s) override;

  const Tensor& components() const { return components_; }  // [d, k]
  const Tensor& mean() const { return mean_; }

 private:
  long long k_;
  bool fitted_ = false;
  Tensor mean_, components_;
};

/// ZCA whitening: x -> (x - mean) V (L + eps I)^(-1/2) V^T, dimension
/// preserving.
class ZCA : public Preprocessor {
 public:
  explicit ZCA(double eps = 1e-8) : eps_(eps) {}
  std::string name() const override { return "zca"; }
  bool fitted() const override { return fitted_; }
  void fit_apply(DenseDesignMatrix& ds, bool can_fit) override;
  std::vector<std::pair<std::string, Tensor>> state() const override;
  void set_state(const std::vector<std::pair<std::string, Tensor>>& s) override;

  const Tensor& whitening_matrix() const { return whitening_; }  // [d, d]

 private:
  double eps_;
  bool fitted_ = false;
  Tensor mean_, whitening_;
};

/// Loads a numeric CSV (RFC-4180 subset). A header row is detected when the
/// first line has any cell that does not parse as a number. If
/// label_column is given, that column is removed from the features and
/// one-hot encoded into targets (labels must be integers 0..K-1).
DenseDesignMatrix load_csv(const std::string& path,
                           std::optional<long long> label_column = std::nullopt);

/// One-hot encodes non-negative integer labels; width = max label + 1.
Tensor one_hot(const std::vector<long long>& labels);

}  // namespace modlearn
