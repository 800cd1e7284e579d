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

#include <functional>
#include <memory>

#include "modlearn/datasets.hpp"
#include "modlearn/params.hpp"

namespace modlearn {

/// Named time series of scalar measurements, one value per measured epoch.
struct Channel {
  std::string name;
  std::string dataset_tag;
  std::vector<std::pair<long long, double>> values;
};

/// Records named scalar channels at every epoch (plus an epoch-0 baseline),
/// for learning curves and early stopping.
///
/// Dataset channels are expressions evaluated over a full pass of their
/// dataset in batches, combined as example-weighted means; training-time
/// stochasticity (dropout masks) is off on this path. Callback channels
/// report algorithm-side scalars. Every channel is measured at every
/// measurement point, so the record stays rectangular.
class Monitor {
 public:
  struct DatasetProgram {
    std::string tag;
    std::shared_ptr<const DenseDesignMatrix> data;
    std::unique_ptr<Graph> graph;
    std::unique_ptr<ExprContext> ctx;
    NodeRef x;
    std::optional<NodeRef> y;
    Space input_space;
    std::vector<std::pair<std::string, NodeRef>> outputs;  // full channel names
    long long batch_size = 128;
  };

  void add_program(DatasetProgram p);
  void add_callback_channel(const std::string& name, std::function<double()> fn);

  /// Evaluates every channel and appends (epoch, value). Epochs must be
  /// strictly increasing. Non-finite values are recorded and flagged on
  /// stderr, not fatal.
  void measure(long long epoch);

  bool has_channel(const std::string& name) const;
  const Channel& channel(const std::string& name) const;
  /// Registration order.
  std::vector<std::string> channel_names() const;
  std::size_t num_measurements() const { return epochs_.size(); }
  const std::vector<long long>& epochs() const { return epochs_; }

  /// One row per measured epoch, one column per channel; numbers serialized
  /// with 17 significant digits so parsing them back is exact.
  void export_csv(const std::string& path) const;
  /// One JSON object per measured epoch.
  void export_jsonl(const std::string& path) const;

 private:
  std::vector<DatasetProgram> programs_;
  std::vector<std::pair<std::string, std::function<double()>>> callbacks_;
  std::vector<Channel> channels_;
  std::vector<long long> epochs_;

  Channel& channel_slot(const std::string& name, const std::string& tag);
};

/// Parsed monitor export, for the table printer and round-trip tests.
struct MonitorTable {
  std::vector<std::string> channels;
  std::vector<long long> epochs;
  std::vector<std::vector<double>> rows;  // rows[i][j] = channel j at epoch i
};

MonitorTable load_monitor_csv(const std::string& path);
MonitorTable load_monitor_jsonl(const std::string& path);

/// Predicate over monitor history deciding whether training continues.
class TerminationCriterion {
 public:
  virtual ~TerminationCriterion() = default;
  virtual bool should_continue(const Monitor& monitor, long long epochs_done) const = 0;
  /// Setup-time check that referenced channels exist.
  virtual void validate(const Monitor& monitor) const {}
  virtual std::string describe() const = 0;
};

class EpochCounter : public TerminationCriterion {
 public:
  explicit EpochCounter(long long max_epochs);
  bool should_continue(const Monitor&, long long epochs_done) const override {
    return epochs_done < max_epochs_;
  }
  std::string describe() const override {
    return "epochs(" + std::to_string(max_epochs_) + ")";
  }

 private:
  long long max_epochs_;
};

/// Patience-based early stopping on a monitor channel (lower is better):
/// stop when the best value among the last N measurements fails to improve
/// on the best earlier value by at least the factor (1 - prop_decrease).
class MonitorBased : public TerminationCriterion {
 public:
  MonitorBased(std::string channel, long long patience, double prop_decrease);
  bool should_continue(const Monitor&, long long epochs_done) const override;
  void validate(const Monitor& monitor) const override;
  std::string describe() const override {
    return "monitor_based(" + channel_ + ")";
  }

 private:
  std::string channel_;
  long long patience_;
  double prop_decrease_;
};

/// Continuation semantics: And continues only while all children continue
/// (stops when any stops); Or continues while any child continues.
class AndCriterion : public TerminationCriterion {
 public:
  explicit AndCriterion(std::vector<std::shared_ptr<TerminationCriterion>> children);
  bool should_continue(const Monitor& m, long long e) const override;
  void validate(const Monitor& m) const override;
  std::string describe() const override { return "and(...)"; }

 private:
  std::vector<std::shared_ptr<TerminationCriterion>> children_;
};

class OrCriterion : public TerminationCriterion {
 public:
  explicit OrCriterion(std::vector<std::shared_ptr<TerminationCriterion>> children);
  bool should_continue(const Monitor& m, long long e) const override;
  void validate(const Monitor& m) const override;
  std::string describe() const override { return "or(...)"; }

 private:
  std::vector<std::shared_ptr<TerminationCriterion>> children_;
};

}  // namespace modlearn
