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

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>

#include <CLI11.hpp>

#include "modlearn/checkpoint.hpp"
#include "modlearn/instantiate.hpp"
#include "modlearn/npy.hpp"

namespace fs = std::filesystem;
using namespace modlearn;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfigError = 1;
constexpr int kExitRuntimeError = 2;

void print_diags(const std::vector<Diag>& diags) {
  for (const Diag& d : diags) std::cerr << d.to_string() << "\n";
}

struct SplitOverride {
  std::string path, value;
};

std::vector<SplitOverride> split_overrides(const std::vector<std::string>& raw) {
  std::vector<SplitOverride> out;
  for (const std::string& s : raw) {
    const std::size_t eq = s.find('=');
    if (eq == std::string::npos || eq == 0)
      throw ConfigError({Diag{DiagCode::kBadOverride, 0, 0, s,
                              "overrides must look like dotted.path=value"}});
    out.push_back({s.substr(0, eq), s.substr(eq + 1)});
  }
  return out;
}

/// Parse + overrides + instantiate + cross-object validation.
std::shared_ptr<TrainHarness> load_experiment(const std::string& config_path,
                                              const std::vector<std::string>& overrides,
                                              std::uint64_t seed) {
  config::NodePtr root = config::parse_file(config_path);
  for (const SplitOverride& ov : split_overrides(overrides))
    config::apply_override(root, ov.path, ov.value);
  const std::string dir = fs::path(config_path).parent_path().string();
  auto harness = instantiate_harness(root, Registry::standard(), seed, dir);
  std::vector<Diag> diags = validate_harness(*harness);
  if (!diags.empty()) throw ConfigError(std::move(diags));
  return harness;
}

int cmd_train(const std::string& config_path, const std::vector<std::string>& overrides,
              std::uint64_t seed, const std::string& outdir, bool force) {
  std::shared_ptr<TrainHarness> harness;
  try {
    harness = load_experiment(config_path, overrides, seed);
  } catch (const ConfigError& e) {
    print_diags(e.diags());
    return kExitConfigError;
  } catch (const IoError& e) {
    std::cerr << e.what() << "\n";
    return kExitConfigError;
  } catch (const Error& e) {
    std::cerr << e.what() << "\n";
    return kExitConfigError;
  }

  const fs::path model_dir = fs::path(outdir) / "model";
  try {
    if (fs::exists(model_dir / "manifest.json") && !force)
      throw IoError("final checkpoint already exists at '" + model_dir.string() +
                    "' (use --force to overwrite)");
    const long long epochs = harness->run();
    fs::create_directories(outdir);
    // overwrite permission was checked before training started
    harness->save_final(model_dir.string(), true);
    harness->monitor().export_csv((fs::path(outdir) / "monitor.csv").string());
    harness->monitor().export_jsonl((fs::path(outdir) / "monitor.jsonl").string());
    std::cout << "trained " << epochs << " epochs; outputs in " << outdir << "\n";
  } catch (const std::exception& e) {
    std::cerr << e.what() << "\n";
    return kExitRuntimeError;
  }
  return kExitOk;
}

int cmd_validate(const std::string& config_path,
                 const std::vector<std::string>& overrides, std::uint64_t seed) {
  try {
    load_experiment(config_path, overrides, seed);
  } catch (const ConfigError& e) {
    print_diags(e.diags());
    return kExitConfigError;
  } catch (const Error& e) {
    std::cerr << e.what() << "\n";
    return kExitConfigError;
  }
  std::cout << "OK\n";
  return kExitOk;
}

int cmd_print_monitor(const std::string& path, const std::string& channel) {
  MonitorTable table;
  try {
    if (path.size() > 6 && path.substr(path.size() - 6) == ".jsonl")
      table = load_monitor_jsonl(path);
    else
      table = load_monitor_csv(path);
  } catch (const Error& e) {
    std::cerr << e.what() << "\n";
    return kExitConfigError;
  }

  std::vector<std::size_t> cols;
  if (!channel.empty()) {
    for (std::size_t i = 0; i < table.channels.size(); ++i)
      if (table.channels[i] == channel) cols.push_back(i);
    if (cols.empty()) {
      std::cerr << "unknown channel '" << channel << "'; available:";
      for (const std::string& c : table.channels) std::cerr << " " << c;
      std::cerr << "\n";
      return kExitConfigError;
    }
  } else {
    for (std::size_t i = 0; i < table.channels.size(); ++i) cols.push_back(i);
  }

  std::vector<std::size_t> widths;
  widths.push_back(5);  // epoch
  for (std::size_t c : cols)
    widths.push_back(std::max<std::size_t>(table.channels[c].size(), 12));

  auto pad = [](const std::string& s, std::size_t w) {
    return s.size() >= w ? s : std::string(w - s.size(), ' ') + s;
  };
  std::string header = pad("epoch", widths[0]);
  for (std::size_t i = 0; i < cols.size(); ++i)
    header += "  " + pad(table.channels[cols[i]], widths[i + 1]);
  std::cout << header << "\n";
  for (std::size_t row = 0; row < table.epochs.size(); ++row) {
    std::string line = pad(std::to_string(table.epochs[row]), widths[0]);
    for (std::size_t i = 0; i < cols.size(); ++i) {
      char buf[32];
      std::snprintf(buf, sizeof buf, "%.6g", table.rows[row][cols[i]]);
      line += "  " + pad(buf, widths[i + 1]);
    }
    std::cout << line << "\n";
  }
  return kExitOk;
}

int cmd_show_model(const std::string& dir) {
  CheckpointSummary summary;
  try {
    summary = read_checkpoint_summary(dir);
  } catch (const Error& e) {
    std::cerr << e.what() << "\n";
    return kExitConfigError;
  }
  std::cout << "model kind:   " << summary.kind << "\n";
  std::cout << "global seed:  " << summary.global_seed << "\n";
  for (const std::string& line : summary.description_lines)
    std::cout << line << "\n";
  std::cout << "parameters:\n";
  auto show = [&](const CheckpointParam& p, const char* prefix) -> bool {
    Tensor t;
    try {
      t = load_npy((fs::path(dir) / p.file).string());
    } catch (const Error& e) {
      std::cerr << e.what() << "\n";
      return false;
    }
    if (t.shape() != p.shape) {
      std::cerr << "integrity error: '" << p.file << "' has shape "
                << shape_to_string(t.shape()) << " but the manifest records "
                << shape_to_string(p.shape) << "\n";
      return false;
    }
    double sq = 0.0;
    for (double v : t.data()) sq += v * v;
    std::printf("%s%-16s %-12s l2_norm %.10g\n", prefix, p.name.c_str(),
                shape_to_string(p.shape).c_str(), std::sqrt(sq));
    return true;
  };
  for (const CheckpointParam& p : summary.params)
    if (!show(p, "  ")) return kExitConfigError;
  if (!summary.extra.empty()) {
    std::cout << "extra state:\n";
    for (const CheckpointParam& p : summary.extra)
      if (!show(p, "  ")) return kExitConfigError;
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"modlearn: config-driven training for modular learning experiments"};
  app.require_subcommand(1);

  std::string config_path, outdir = "modlearn_out", monitor_path, model_dir, channel;
  std::vector<std::string> overrides;
  std::uint64_t seed = 0;
  bool force = false;

  CLI::App* train = app.add_subcommand("train", "run an experiment config");
  train->add_option("config", config_path, "experiment .yaml file")->required();
  train->add_option("--seed", seed, "global seed (default 0)");
  train->add_option("-o,--outdir", outdir, "output directory")
      ->envname("MODLEARN_OUTDIR");
  train->add_option("-O,--override", overrides,
                    "config override, dotted.path=value (repeatable)");
  train->add_flag("--force", force, "overwrite an existing final checkpoint");

  CLI::App* validate = app.add_subcommand("validate", "check a config without training");
  validate->add_option("config", config_path)->required();
  validate->add_option("--seed", seed);
  validate->add_option("-O,--override", overrides);

  CLI::App* pm = app.add_subcommand("print-monitor", "tabulate monitor records");
  pm->add_option("path", monitor_path, "monitor.csv or monitor.jsonl")->required();
  pm->add_option("--channel", channel, "show a single channel");

  CLI::App* sm = app.add_subcommand("show-model", "summarize a checkpoint directory");
  sm->add_option("path", model_dir, "checkpoint directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfigError;
  }

  if (train->parsed()) return cmd_train(config_path, overrides, seed, outdir, force);
  if (validate->parsed()) return cmd_validate(config_path, overrides, seed);
  if (pm->parsed()) return cmd_print_monitor(monitor_path, channel);
  if (sm->parsed()) return cmd_show_model(model_dir);
  return kExitConfigError;
}
