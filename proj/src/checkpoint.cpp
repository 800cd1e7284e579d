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

#include "modlearn/checkpoint.hpp"

#include <cctype>
#include <filesystem>
#include <fstream>
#include <set>

#include <json.hpp>

#include "modlearn/npy.hpp"

namespace modlearn {

namespace {

using nlohmann::json;

std::string sanitize(const std::string& name) {
  std::string out;
  for (char c : name)
    out.push_back(std::isalnum(static_cast<unsigned char>(c)) ? c : '_');
  if (out.empty()) out = "param";
  return out;
}

json space_json(const Space& s) {
  json j;
  if (const auto* v = std::get_if<VectorSpace>(&s)) {
    j["kind"] = "vector";
    j["dim"] = v->dim;
  } else {
    const auto& c = std::get<Conv2DSpace>(s);
    j["kind"] = "conv2d";
    j["rows"] = c.rows;
    j["cols"] = c.cols;
    j["channels"] = c.channels;
    j["axes"] = c.axes.to_string();
  }
  return j;
}

json model_json(Model& model) {
  json j;
  j["kind"] = model.kind();
  j["input_space"] = space_json(model.input_space());
  if (auto out = model.output_space()) j["output_space"] = space_json(*out);
  if (auto* mlp = dynamic_cast<MLP*>(&model)) {
    json layers = json::array();
    for (Layer& l : mlp->layers()) {
      json lj;
      lj["name"] = l.name;
      lj["activation"] = activation_to_string(l.activation);
      if (auto* conv = dynamic_cast<Conv2DTransform*>(l.transform.get())) {
        lj["type"] = "conv2d";
        lj["stride"] = conv->stride();
        lj["pad"] = conv->pad();
        lj["kernel_shape"] = conv->kernels().value.shape();
      } else {
        lj["type"] = "dense";
        lj["dim"] = l.bias.value.extent(0);
      }
      Param* w = l.transform->params()[0];
      if (w->max_norm) lj["max_norm"] = w->max_norm->limit;
      layers.push_back(lj);
    }
    j["layers"] = layers;
  } else if (auto* dae = dynamic_cast<DenoisingAutoencoder*>(&model)) {
    j["nvis"] = dae->nvis();
    j["nhid"] = dae->nhid();
    j["corruption"] = dae->corruption();
  } else if (auto* rbm = dynamic_cast<RBM*>(&model)) {
    j["nvis"] = rbm->nvis();
    j["nhid"] = rbm->nhid();
  }
  return j;
}

}  // namespace

void save_checkpoint(const std::string& dir, Model& model,
                     const std::vector<std::pair<std::string, Tensor>>& extra,
                     std::uint64_t global_seed, bool force) {
  namespace fs = std::filesystem;
  const fs::path root(dir);
  const fs::path manifest_path = root / "manifest.json";
  if (fs::exists(manifest_path) && !force)
    throw IoError("checkpoint already exists at '" + manifest_path.string() +
                  "' (use --force to overwrite)");
  std::error_code ec;
  fs::create_directories(root, ec);
  if (ec) throw IoError("cannot create directory '" + dir + "': " + ec.message());

  json manifest;
  manifest["format"] = "modlearn-checkpoint";
  manifest["version"] = 1;
  manifest["model"] = model_json(model);
  manifest["seeds"] = json{{"global", global_seed}};

  std::set<std::string> used_files;
  auto write_tensor = [&](const std::string& name, const Tensor& t) -> json {
    std::string file = sanitize(name) + ".npy";
    int suffix = 1;
    while (!used_files.insert(file).second)
      file = sanitize(name) + "_" + std::to_string(suffix++) + ".npy";
    save_npy((root / file).string(), t);
    json entry;
    entry["name"] = name;
    entry["file"] = file;
    entry["shape"] = t.shape();
    return entry;
  };

  json params = json::array();
  for (Param* p : model.params()) params.push_back(write_tensor(p->name, p->value));
  manifest["params"] = params;
  json extras = json::array();
  for (const auto& [name, tensor] : extra) extras.push_back(write_tensor(name, tensor));
  manifest["extra"] = extras;

  std::ofstream f(manifest_path);
  if (!f) throw IoError("cannot open '" + manifest_path.string() + "' for writing");
  f << manifest.dump(2) << "\n";
  if (!f) throw IoError("write failed for '" + manifest_path.string() + "'");
}

CheckpointSummary read_checkpoint_summary(const std::string& dir) {
  namespace fs = std::filesystem;
  const fs::path manifest_path = fs::path(dir) / "manifest.json";
  std::ifstream f(manifest_path);
  if (!f) throw IoError("cannot open '" + manifest_path.string() + "'");
  json manifest;
  try {
    f >> manifest;
  } catch (const json::exception& e) {
    throw IoError("corrupt manifest '" + manifest_path.string() + "': " + e.what());
  }
  CheckpointSummary out;
  try {
    if (manifest.at("format").get<std::string>() != "modlearn-checkpoint")
      throw IoError("'" + manifest_path.string() + "' is not a modlearn checkpoint");
    const json& model = manifest.at("model");
    out.kind = model.at("kind").get<std::string>();
    out.global_seed = manifest.at("seeds").at("global").get<std::uint64_t>();

    auto space_str = [](const json& j) {
      if (j.at("kind") == "vector")
        return "VectorSpace(" + std::to_string(j.at("dim").get<long long>()) + ")";
      return "Conv2DSpace(" + std::to_string(j.at("rows").get<long long>()) + "x" +
             std::to_string(j.at("cols").get<long long>()) + "x" +
             std::to_string(j.at("channels").get<long long>()) + ", " +
             j.at("axes").get<std::string>() + ")";
    };
    out.description_lines.push_back("input space:  " + space_str(model.at("input_space")));
    if (model.contains("output_space"))
      out.description_lines.push_back("output space: " + space_str(model.at("output_space")));
    if (model.contains("layers")) {
      out.description_lines.push_back("layers:       " +
                                      std::to_string(model.at("layers").size()));
      for (const json& l : model.at("layers")) {
        std::string line = "  " + l.at("name").get<std::string>() + ": " +
                           l.at("type").get<std::string>() + ", " +
                           l.at("activation").get<std::string>();
        if (l.contains("dim")) line += ", dim " + std::to_string(l.at("dim").get<long long>());
        if (l.contains("max_norm"))
          line += ", max_norm " + std::to_string(l.at("max_norm").get<double>());
        out.description_lines.push_back(line);
      }
    }
    if (model.contains("nvis"))
      out.description_lines.push_back("nvis: " + std::to_string(model.at("nvis").get<long long>()) +
                                      ", nhid: " + std::to_string(model.at("nhid").get<long long>()));

    auto read_entries = [&](const char* key, std::vector<CheckpointParam>& dst) {
      if (!manifest.contains(key)) return;
      for (const json& e : manifest.at(key)) {
        CheckpointParam p;
        p.name = e.at("name").get<std::string>();
        p.file = e.at("file").get<std::string>();
        for (const json& v : e.at("shape")) p.shape.push_back(v.get<long long>());
        dst.push_back(std::move(p));
      }
    };
    read_entries("params", out.params);
    read_entries("extra", out.extra);
  } catch (const json::exception& e) {
    throw IoError("corrupt manifest '" + manifest_path.string() + "': " + e.what());
  }
  return out;
}

}  // namespace modlearn
