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

#include "modlearn/monitor.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include <json.hpp>

namespace modlearn {

Channel& Monitor::channel_slot(const std::string& name, const std::string& tag) {
  for (Channel& c : channels_)
    if (c.name == name)
      throw ValueError("duplicate monitor channel '" + name + "'");
  channels_.push_back(Channel{name, tag, {}});
  return channels_.back();
}

void Monitor::add_program(DatasetProgram p) {
  if (!p.data) throw ValueError("monitor program needs a dataset");
  if (p.data->num_examples() == 0)
    throw ValueError("monitoring dataset '" + p.tag + "' is empty");
  for (const auto& [name, node] : p.outputs) channel_slot(name, p.tag);
  programs_.push_back(std::move(p));
}

void Monitor::add_callback_channel(const std::string& name,
                                   std::function<double()> fn) {
  channel_slot(name, "");
  callbacks_.push_back({name, std::move(fn)});
}

void Monitor::measure(long long epoch) {
  if (!epochs_.empty() && epoch <= epochs_.back())
    throw ValueError("monitor epochs must be strictly increasing");
  epochs_.push_back(epoch);

  for (DatasetProgram& p : programs_) {
    const long long n = p.data->num_examples();
    std::vector<double> acc(p.outputs.size(), 0.0);
    IterationScheme scheme{SchemeKind::kSequential, std::min(p.batch_size, n), 0};
    BatchIterator it(*p.data, scheme, nullptr);
    std::vector<NodeRef> outs;
    outs.reserve(p.outputs.size());
    for (auto& [name, node] : p.outputs) outs.push_back(node);
    while (auto batch = it.next()) {
      Bindings b;
      Batch formatted =
          format_as(Batch{batch->x, VectorSpace{batch->x.extent(1)}}, p.input_space);
      b.set(p.x, formatted.tensor);
      if (p.y) {
        if (!batch->y)
          throw ValueError("monitoring dataset '" + p.tag + "' has no targets");
        b.set(*p.y, *batch->y);
      }
      p.ctx->bind(b);
      std::vector<Tensor> vals = p.graph->eval(outs, b);
      const double weight = static_cast<double>(batch->x.extent(0));
      for (std::size_t i = 0; i < vals.size(); ++i) {
        if (vals[i].size() != 1)
          throw ValueError("monitor channel '" + p.outputs[i].first +
                           "' is not a scalar");
        acc[i] += weight * vals[i][0];
      }
    }
    for (std::size_t i = 0; i < p.outputs.size(); ++i) {
      const double value = acc[i] / static_cast<double>(n);
      if (!std::isfinite(value))
        std::cerr << "warning: monitor channel '" << p.outputs[i].first
                  << "' is non-finite at epoch " << epoch << "\n";
      channel(p.outputs[i].first);  // assert existence
      for (Channel& c : channels_)
        if (c.name == p.outputs[i].first) c.values.push_back({epoch, value});
    }
  }
  for (auto& [name, fn] : callbacks_) {
    const double value = fn();
    if (!std::isfinite(value))
      std::cerr << "warning: monitor channel '" << name << "' is non-finite at epoch "
                << epoch << "\n";
    for (Channel& c : channels_)
      if (c.name == name) c.values.push_back({epoch, value});
  }
}

bool Monitor::has_channel(const std::string& name) const {
  for (const Channel& c : channels_)
    if (c.name == name) return true;
  return false;
}

const Channel& Monitor::channel(const std::string& name) const {
  for (const Channel& c : channels_)
    if (c.name == name) return c;
  throw ValueError("unknown monitor channel '" + name + "'");
}

std::vector<std::string> Monitor::channel_names() const {
  std::vector<std::string> out;
  out.reserve(channels_.size());
  for (const Channel& c : channels_) out.push_back(c.name);
  return out;
}

namespace {

std::string format_g17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

void Monitor::export_csv(const std::string& path) const {
  std::ofstream f(path);
  if (!f) throw IoError("cannot open '" + path + "' for writing");
  f << "epoch";
  for (const Channel& c : channels_) f << "," << c.name;
  f << "\n";
  for (std::size_t row = 0; row < epochs_.size(); ++row) {
    f << epochs_[row];
    for (const Channel& c : channels_) f << "," << format_g17(c.values[row].second);
    f << "\n";
  }
  if (!f) throw IoError("write failed for '" + path + "'");
}

void Monitor::export_jsonl(const std::string& path) const {
  std::ofstream f(path);
  if (!f) throw IoError("cannot open '" + path + "' for writing");
  for (std::size_t row = 0; row < epochs_.size(); ++row) {
    nlohmann::json line;
    line["epoch"] = epochs_[row];
    nlohmann::json chans = nlohmann::json::object();
    for (const Channel& c : channels_) chans[c.name] = c.values[row].second;
    line["channels"] = chans;
    f << line.dump() << "\n";
  }
  if (!f) throw IoError("write failed for '" + path + "'");
}

MonitorTable load_monitor_csv(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open '" + path + "'");
  MonitorTable table;
  std::string line;
  if (!std::getline(f, line)) throw IoError("'" + path + "': empty monitor file");
  {
    std::stringstream ss(line);
    std::string cell;
    bool first = true;
    while (std::getline(ss, cell, ',')) {
      if (!cell.empty() && cell.back() == '\r') cell.pop_back();
      if (first) {
        if (cell != "epoch")
          throw IoError("'" + path + "': first column must be 'epoch'");
        first = false;
      } else {
        table.channels.push_back(cell);
      }
    }
  }
  while (std::getline(f, line)) {
    if (line.empty() || line == "\r") continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<double> row;
    bool first = true;
    while (std::getline(ss, cell, ',')) {
      if (!cell.empty() && cell.back() == '\r') cell.pop_back();
      if (first) {
        table.epochs.push_back(std::stoll(cell));
        first = false;
      } else {
        row.push_back(std::strtod(cell.c_str(), nullptr));
      }
    }
    if (row.size() != table.channels.size())
      throw IoError("'" + path + "': ragged monitor row");
    table.rows.push_back(std::move(row));
  }
  return table;
}

MonitorTable load_monitor_jsonl(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open '" + path + "'");
  MonitorTable table;
  std::string line;
  bool first = true;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    nlohmann::json obj;
    try {
      obj = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw IoError("'" + path + "': bad JSONL line: " + e.what());
    }
    if (!obj.contains("epoch") || !obj.contains("channels"))
      throw IoError("'" + path + "': JSONL line missing epoch/channels");
    if (first) {
      for (auto it = obj["channels"].begin(); it != obj["channels"].end(); ++it)
        table.channels.push_back(it.key());
      first = false;
    }
    table.epochs.push_back(obj["epoch"].get<long long>());
    std::vector<double> row;
    row.reserve(table.channels.size());
    for (const std::string& c : table.channels) {
      if (!obj["channels"].contains(c))
        throw IoError("'" + path + "': channel '" + c + "' missing from a line");
      row.push_back(obj["channels"][c].get<double>());
    }
    table.rows.push_back(std::move(row));
  }
  if (first) throw IoError("'" + path + "': empty monitor file");
  return table;
}

// ---------------------------------------------------------------------------
// Termination criteria

EpochCounter::EpochCounter(long long max_epochs) : max_epochs_(max_epochs) {
  if (max_epochs < 0) throw ValueError("epoch counter: max must be >= 0");
}

MonitorBased::MonitorBased(std::string channel, long long patience,
                           double prop_decrease)
    : channel_(std::move(channel)), patience_(patience), prop_decrease_(prop_decrease) {
  if (patience_ < 1) throw ValueError("monitor_based: patience must be >= 1");
  if (prop_decrease_ < 0.0)
    throw ValueError("monitor_based: prop_decrease must be >= 0");
}

void MonitorBased::validate(const Monitor& monitor) const {
  if (!monitor.has_channel(channel_))
    throw ValueError("monitor_based: unknown channel '" + channel_ + "'");
}

bool MonitorBased::should_continue(const Monitor& monitor, long long) const {
  const Channel& c = monitor.channel(channel_);
  const std::size_t n = c.values.size();
  if (n <= static_cast<std::size_t>(patience_)) return true;
  double best_recent = HUGE_VAL, best_earlier = HUGE_VAL;
  const std::size_t split = n - static_cast<std::size_t>(patience_);
  for (std::size_t i = 0; i < n; ++i) {
    const double v = c.values[i].second;
    if (i < split)
      best_earlier = std::min(best_earlier, v);
    else
      best_recent = std::min(best_recent, v);
  }
  const bool stop = best_recent > (1.0 - prop_decrease_) * best_earlier;
  return !stop;
}

AndCriterion::AndCriterion(std::vector<std::shared_ptr<TerminationCriterion>> children)
    : children_(std::move(children)) {
  if (children_.empty()) throw ValueError("and criterion needs children");
}

bool AndCriterion::should_continue(const Monitor& m, long long e) const {
  for (const auto& c : children_)
    if (!c->should_continue(m, e)) return false;
  return true;
}

void AndCriterion::validate(const Monitor& m) const {
  for (const auto& c : children_) c->validate(m);
}

OrCriterion::OrCriterion(std::vector<std::shared_ptr<TerminationCriterion>> children)
    : children_(std::move(children)) {
  if (children_.empty()) throw ValueError("or criterion needs children");
}

bool OrCriterion::should_continue(const Monitor& m, long long e) const {
  for (const auto& c : children_)
    if (c->should_continue(m, e)) return true;
  return false;
}

void OrCriterion::validate(const Monitor& m) const {
  for (const auto& c : children_) c->validate(m);
}

}  // namespace modlearn
