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

#include "modlearn/datasets.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "modlearn/eig.hpp"

namespace modlearn {

DenseDesignMatrix::DenseDesignMatrix(Tensor x, std::optional<Tensor> y,
                                     std::optional<Conv2DSpace> view,
                                     std::string name)
    : x_(std::move(x)), y_(std::move(y)), view_(view), name_(std::move(name)) {
  if (x_.rank() != 2)
    throw ShapeError("design matrix must be 2-D, got " + shape_to_string(x_.shape()));
  if (view_ && num_elements(Space{*view_}) != dim())
    throw ShapeError("topological view " + space_to_string(Space{*view_}) +
                     " does not match feature dim " + std::to_string(dim()));
  if (y_) {
    if (y_->rank() != 2)
      throw ShapeError("targets must be 2-D, got " + shape_to_string(y_->shape()));
    if (y_->extent(0) != x_.extent(0))
      throw ShapeError("targets have " + std::to_string(y_->extent(0)) +
                       " rows but data has " + std::to_string(x_.extent(0)));
  }
}

Tensor DenseDesignMatrix::get_topological_view() const {
  if (!view_)
    throw ValueError("dataset '" + name_ + "' has no topological view space");
  Batch rows{x_, VectorSpace{dim()}};
  return format_as(rows, Space{*view_}).tensor;
}

SchemeKind scheme_from_string(const std::string& s) {
  if (s == "sequential") return SchemeKind::kSequential;
  if (s == "shuffled-sequential" || s == "shuffled_sequential")
    return SchemeKind::kShuffledSequential;
  if (s == "random-uniform" || s == "random_uniform") return SchemeKind::kRandomUniform;
  throw ValueError("unknown iteration scheme '" + s + "'");
}

std::string scheme_to_string(SchemeKind k) {
  switch (k) {
    case SchemeKind::kSequential: return "sequential";
    case SchemeKind::kShuffledSequential: return "shuffled-sequential";
    case SchemeKind::kRandomUniform: return "random-uniform";
  }
  return "?";
}

BatchIterator::BatchIterator(const DenseDesignMatrix& ds,
                             const IterationScheme& scheme, Rng* rng)
    : ds_(ds), scheme_(scheme), rng_(rng) {
  const long long n = ds.num_examples();
  if (n == 0) throw ValueError("cannot iterate over an empty dataset");
  if (scheme_.batch_size < 1) throw ValueError("batch_size must be >= 1");
  switch (scheme_.kind) {
    case SchemeKind::kSequential:
      order_.resize(static_cast<std::size_t>(n));
      for (std::size_t i = 0; i < order_.size(); ++i) order_[i] = i;
      break;
    case SchemeKind::kShuffledSequential:
      if (!rng_) throw ValueError("shuffled iteration needs an rng");
      order_ = rng_->permutation(static_cast<std::size_t>(n));
      break;
    case SchemeKind::kRandomUniform:
      if (!rng_) throw ValueError("random-uniform iteration needs an rng");
      if (scheme_.batch_size > n)
        throw ValueError("random-uniform batch_size " +
                         std::to_string(scheme_.batch_size) + " exceeds dataset size " +
                         std::to_string(n));
      if (scheme_.num_batches < 1)
        throw ValueError("random-uniform needs num_batches >= 1");
      break;
  }
}

std::optional<MiniBatch> BatchIterator::next() {
  std::vector<std::size_t> idx;
  if (scheme_.kind == SchemeKind::kRandomUniform) {
    if (batches_emitted_ >= scheme_.num_batches) return std::nullopt;
    ++batches_emitted_;
    idx.resize(static_cast<std::size_t>(scheme_.batch_size));
    const std::uint64_t n = static_cast<std::uint64_t>(ds_.num_examples());
    for (auto& i : idx) i = static_cast<std::size_t>(rng_->uniform_int(n));
  } else {
    if (cursor_ >= order_.size()) return std::nullopt;
    const std::size_t take = std::min(static_cast<std::size_t>(scheme_.batch_size),
                                      order_.size() - cursor_);
    idx.assign(order_.begin() + static_cast<std::ptrdiff_t>(cursor_),
               order_.begin() + static_cast<std::ptrdiff_t>(cursor_ + take));
    cursor_ += take;
  }
  MiniBatch b;
  b.x = ds_.design_matrix().gather_rows(idx);
  if (ds_.targets()) b.y = ds_.targets()->gather_rows(idx);
  b.indices = std::move(idx);
  return b;
}

// ---------------------------------------------------------------------------
// Preprocessors

namespace {

void require_can_fit(bool fitted, bool can_fit, const std::string& name) {
  if (!fitted && !can_fit)
    throw ValueError("preprocessor '" + name +
                     "' is unfitted and can_fit is false; fit on training data first");
}

Tensor column_means(const Tensor& x) {
  const std::size_t n = static_cast<std::size_t>(x.extent(0));
  const std::size_t d = static_cast<std::size_t>(x.extent(1));
  Tensor mean(Shape{static_cast<long long>(d)});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) mean[j] += x.at(i, j);
  for (std::size_t j = 0; j < d; ++j) mean[j] /= static_cast<double>(n);
  return mean;
}

// Covariance of centered data, population convention (divisor n).
Tensor covariance(const Tensor& x, const Tensor& mean) {
  const std::size_t n = static_cast<std::size_t>(x.extent(0));
  const std::size_t d = static_cast<std::size_t>(x.extent(1));
  Tensor c(Shape{static_cast<long long>(d), static_cast<long long>(d)});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t a = 0; a < d; ++a) {
      const double xa = x.at(i, a) - mean[a];
      if (xa == 0.0) continue;
      for (std::size_t b = 0; b < d; ++b)
        c.at(a, b) += xa * (x.at(i, b) - mean[b]);
    }
  for (double& v : c.data()) v /= static_cast<double>(n);
  return c;
}

Tensor matmul_plain(const Tensor& a, const Tensor& b) {
  const std::size_t n = static_cast<std::size_t>(a.extent(0));
  const std::size_t k = static_cast<std::size_t>(a.extent(1));
  const std::size_t m = static_cast<std::size_t>(b.extent(1));
  Tensor out(Shape{a.extent(0), b.extent(1)});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t kk = 0; kk < k; ++kk) {
      const double aik = a.at(i, kk);
      if (aik == 0.0) continue;
      for (std::size_t j = 0; j < m; ++j) out.at(i, j) += aik * b.at(kk, j);
    }
  return out;
}

Tensor find_state(const std::vector<std::pair<std::string, Tensor>>& s,
                  const std::string& key) {
  for (const auto& [k, v] : s)
    if (k == key) return v;
  throw ValueError("preprocessor state missing '" + key + "'");
}

}  // namespace

void Standardize::fit_apply(DenseDesignMatrix& ds, bool can_fit) {
  Tensor& x = ds.mutable_design_matrix();
  require_can_fit(fitted_, can_fit, name());
  const std::size_t n = static_cast<std::size_t>(x.extent(0));
  const std::size_t d = static_cast<std::size_t>(x.extent(1));
  if (!fitted_) {
    mean_ = column_means(x);
    std_ = Tensor(Shape{static_cast<long long>(d)});
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < d; ++j) {
        const double c = x.at(i, j) - mean_[j];
        std_[j] += c * c;
      }
    for (std::size_t j = 0; j < d; ++j)
      std_[j] = std::sqrt(std_[j] / static_cast<double>(n));
    fitted_ = true;
  }
  if (static_cast<std::size_t>(mean_.size()) != d)
    throw ShapeError("standardize fitted on dim " + std::to_string(mean_.size()) +
                     ", applied to dim " + std::to_string(d));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) {
      double v = x.at(i, j) - mean_[j];
      if (std_[j] >= eps_) v /= std_[j];
      x.at(i, j) = v;
    }
}

std::vector<std::pair<std::string, Tensor>> Standardize::state() const {
  return {{"mean", mean_}, {"std", std_}};
}

void Standardize::set_state(const std::vector<std::pair<std::string, Tensor>>& s) {
  mean_ = find_state(s, "mean");
  std_ = find_state(s, "std");
  fitted_ = true;
}

void GlobalContrastNormalize::fit_apply(DenseDesignMatrix& ds, bool) {
  Tensor& x = ds.mutable_design_matrix();
  const std::size_t n = static_cast<std::size_t>(x.extent(0));
  const std::size_t d = static_cast<std::size_t>(x.extent(1));
  for (std::size_t i = 0; i < n; ++i) {
    double mean = 0.0;
    for (std::size_t j = 0; j < d; ++j) mean += x.at(i, j);
    mean /= static_cast<double>(d);
    double sq = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      x.at(i, j) -= mean;
      sq += x.at(i, j) * x.at(i, j);
    }
    const double norm = std::sqrt(sq);
    if (norm >= eps_) {
      const double s = scale_ / norm;
      for (std::size_t j = 0; j < d; ++j) x.at(i, j) *= s;
    }
  }
}

void PCA::fit_apply(DenseDesignMatrix& ds, bool can_fit) {
  require_can_fit(fitted_, can_fit, name());
  Tensor& x = ds.mutable_design_matrix();
  const std::size_t n = static_cast<std::size_t>(x.extent(0));
  const std::size_t d = static_cast<std::size_t>(x.extent(1));
  if (!fitted_) {
    if (k_ < 1 || k_ > static_cast<long long>(d))
      throw ValueError("pca: num_components " + std::to_string(k_) +
                       " out of range for dim " + std::to_string(d));
    mean_ = column_means(x);
    Tensor values, vectors;
    symmetric_eig(covariance(x, mean_), values, vectors);
    // top-k columns, descending eigenvalue
    components_ = Tensor(Shape{static_cast<long long>(d), k_});
    for (long long c = 0; c < k_; ++c) {
      const std::size_t src = d - 1 - static_cast<std::size_t>(c);
      for (std::size_t r = 0; r < d; ++r)
        components_.at(r, static_cast<std::size_t>(c)) = vectors.at(r, src);
    }
    fitted_ = true;
  }
  if (static_cast<std::size_t>(components_.extent(0)) != d)
    throw ShapeError("pca fitted on dim " + std::to_string(components_.extent(0)) +
                     ", applied to dim " + std::to_string(d));
  Tensor centered = x;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) centered.at(i, j) -= mean_[j];
  Tensor projected = matmul_plain(centered, components_);
  ds = DenseDesignMatrix(std::move(projected),
                         ds.targets() ? std::optional<Tensor>(*ds.targets())
                                      : std::nullopt,
                         std::nullopt, ds.name());
}

std::vector<std::pair<std::string, Tensor>> PCA::state() const {
  return {{"mean", mean_}, {"components", components_}};
}

void PCA::set_state(const std::vector<std::pair<std::string, Tensor>>& s) {
  mean_ = find_state(s, "mean");
  components_ = find_state(s, "components");
  k_ = components_.extent(1);
  fitted_ = true;
}

void ZCA::fit_apply(DenseDesignMatrix& ds, bool can_fit) {
  require_can_fit(fitted_, can_fit, name());
  Tensor& x = ds.mutable_design_matrix();
  const std::size_t n = static_cast<std::size_t>(x.extent(0));
  const std::size_t d = static_cast<std::size_t>(x.extent(1));
  if (!fitted_) {
    mean_ = column_means(x);
    Tensor values, vectors;
    symmetric_eig(covariance(x, mean_), values, vectors);
    // V (L + eps I)^(-1/2) V^T
    Tensor scaled(Shape{static_cast<long long>(d), static_cast<long long>(d)});
    for (std::size_t r = 0; r < d; ++r)
      for (std::size_t c = 0; c < d; ++c)
        scaled.at(r, c) = vectors.at(r, c) / std::sqrt(values[c] + eps_);
    whitening_ = matmul_plain(scaled, vectors.permuted({1, 0}));
    fitted_ = true;
  }
  if (static_cast<std::size_t>(whitening_.extent(0)) != d)
    throw ShapeError("zca fitted on dim " + std::to_string(whitening_.extent(0)) +
                     ", applied to dim " + std::to_string(d));
  Tensor centered = x;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) centered.at(i, j) -= mean_[j];
  x = matmul_plain(centered, whitening_);
}

std::vector<std::pair<std::string, Tensor>> ZCA::state() const {
  return {{"mean", mean_}, {"whitening", whitening_}};
}

void ZCA::set_state(const std::vector<std::pair<std::string, Tensor>>& s) {
  mean_ = find_state(s, "mean");
  whitening_ = find_state(s, "whitening");
  fitted_ = true;
}

// ---------------------------------------------------------------------------
// CSV

namespace {

bool parse_number(const std::string& cell, double& out) {
  if (cell.empty()) return false;
  const char* begin = cell.c_str();
  char* end = nullptr;
  out = std::strtod(begin, &end);
  return end == begin + cell.size();
}

std::vector<std::string> split_csv_line(const std::string& line, std::size_t line_no) {
  std::vector<std::string> cells;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur.push_back(c);
      }
    } else if (c == '"' && cur.empty()) {
      quoted = true;
    } else if (c == ',') {
      cells.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (quoted)
    throw IoError("CSV line " + std::to_string(line_no) + ": unterminated quote");
  cells.push_back(cur);
  for (std::string& c : cells) {
    while (!c.empty() && (c.front() == ' ' || c.front() == '\t')) c.erase(c.begin());
    while (!c.empty() && (c.back() == ' ' || c.back() == '\t' || c.back() == '\r'))
      c.pop_back();
  }
  return cells;
}

}  // namespace

Tensor one_hot(const std::vector<long long>& labels) {
  long long width = 0;
  for (long long l : labels) {
    if (l < 0) throw ValueError("labels must be non-negative integers");
    width = std::max(width, l + 1);
  }
  Tensor y(Shape{static_cast<long long>(labels.size()), width});
  for (std::size_t i = 0; i < labels.size(); ++i)
    y.at(i, static_cast<std::size_t>(labels[i])) = 1.0;
  return y;
}

DenseDesignMatrix load_csv(const std::string& path,
                           std::optional<long long> label_column) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open '" + path + "'");
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t line_no = 0;
  std::size_t width = 0;
  bool first_data_line = true;
  while (std::getline(f, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto cells = split_csv_line(line, line_no);
    std::vector<double> row(cells.size());
    bool all_numeric = true;
    for (std::size_t i = 0; i < cells.size(); ++i)
      if (!parse_number(cells[i], row[i])) {
        all_numeric = false;
        break;
      }
    if (!all_numeric) {
      if (first_data_line) {
        first_data_line = false;  // header row
        continue;
      }
      throw IoError("CSV line " + std::to_string(line_no) + " in '" + path +
                    "': non-numeric cell");
    }
    first_data_line = false;
    if (rows.empty()) {
      width = row.size();
    } else if (row.size() != width) {
      throw IoError("CSV line " + std::to_string(line_no) + " in '" + path +
                    "': expected " + std::to_string(width) + " cells, got " +
                    std::to_string(row.size()));
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw IoError("'" + path + "' contains no data rows");

  const long long n = static_cast<long long>(rows.size());
  if (!label_column) {
    Tensor x(Shape{n, static_cast<long long>(width)});
    for (std::size_t i = 0; i < rows.size(); ++i)
      for (std::size_t j = 0; j < width; ++j) x.at(i, j) = rows[i][j];
    return DenseDesignMatrix(std::move(x), std::nullopt, std::nullopt, path);
  }

  long long lc = *label_column;
  if (lc < 0) lc += static_cast<long long>(width);
  if (lc < 0 || lc >= static_cast<long long>(width))
    throw ValueError("label column " + std::to_string(*label_column) +
                     " out of range for width " + std::to_string(width));
  std::vector<long long> labels(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const double v = rows[i][static_cast<std::size_t>(lc)];
    const double r = std::round(v);
    if (std::fabs(v - r) > 1e-9 || r < 0)
      throw ValueError("CSV '" + path + "' row " + std::to_string(i) +
                       ": label must be a non-negative integer, got " +
                       std::to_string(v));
    labels[i] = static_cast<long long>(r);
  }
  Tensor x(Shape{n, static_cast<long long>(width) - 1});
  for (std::size_t i = 0; i < rows.size(); ++i) {
    std::size_t out_j = 0;
    for (std::size_t j = 0; j < width; ++j) {
      if (static_cast<long long>(j) == lc) continue;
      x.at(i, out_j++) = rows[i][j];
    }
  }
  return DenseDesignMatrix(std::move(x), one_hot(labels), std::nullopt, path);
}

}  // namespace modlearn
