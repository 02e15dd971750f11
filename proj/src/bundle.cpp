// Copyright 2026 The xaiens Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "xaiens/bundle.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

#include "xaiens/npy.hpp"

namespace xaiens {
namespace {

using json = nlohmann::ordered_json;
namespace fs = std::filesystem;

[[noreturn]] void schema_error(const std::string& pointer, const std::string& message) {
  throw Error(Errc::ManifestSchemaError, pointer + ": " + message);
}

const json& field(const json& obj, const std::string& key, const std::string& pointer) {
  if (!obj.is_object() || !obj.contains(key)) schema_error(pointer + "/" + key, "required field is missing");
  return obj.at(key);
}

std::string as_string(const json& j, const std::string& pointer) {
  if (!j.is_string()) schema_error(pointer, "expected a string");
  return j.get<std::string>();
}

Index as_extent(const json& j, const std::string& pointer) {
  if (!j.is_number_integer() || j.get<long long>() < 1) schema_error(pointer, "expected a positive integer");
  return static_cast<Index>(j.get<long long>());
}

struct Declared {
  Index n = 0;
  Shape shape;
};

/// Reads an array and checks it against an expected shape.
NpyArray read_checked(const fs::path& base, const json& entry, const std::string& pointer,
                      const std::vector<std::size_t>& expected) {
  const fs::path path = base / as_string(entry, pointer);
  NpyArray a = read_npy(path);
  if (a.shape != expected) {
    std::string got, want;
    for (auto d : a.shape) got += std::to_string(d) + ",";
    for (auto d : expected) want += std::to_string(d) + ",";
    schema_error(pointer, path.string() + " has shape (" + got + ") but the manifest declares (" + want + ")");
  }
  return a;
}

std::vector<std::size_t> nchw(const Declared& d) {
  return {static_cast<std::size_t>(d.n), static_cast<std::size_t>(d.shape.channels),
          static_cast<std::size_t>(d.shape.height), static_cast<std::size_t>(d.shape.width)};
}

std::vector<RowMatrixXd> read_stack_list(const fs::path& base, const json& list, const std::string& pointer,
                                         const Declared& d) {
  if (!list.is_array()) schema_error(pointer, "expected a list of paths");
  std::vector<RowMatrixXd> out;
  for (std::size_t k = 0; k < list.size(); ++k) {
    out.push_back(read_checked(base, list[k], pointer + "/" + std::to_string(k), nchw(d)).to_matrix());
  }
  return out;
}

std::vector<long> integral_values(const std::vector<double>& values, const std::string& pointer) {
  std::vector<long> out;
  for (double v : values) {
    if (!std::isfinite(v) || v != std::floor(v) || v < 0) schema_error(pointer, "labels must be non-negative integers");
    out.push_back(static_cast<long>(v));
  }
  return out;
}

}  // namespace

Bundle load_bundle(const fs::path& manifest) {
  std::ifstream in(manifest);
  if (!in) throw Error(Errc::IoFailure, "cannot open manifest " + manifest.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    schema_error("", std::string("invalid JSON: ") + e.what());
  }
  if (!doc.is_object()) schema_error("", "manifest must be a JSON object");
  const fs::path base = manifest.parent_path();

  if (doc.contains("schema_version")) {
    const auto& v = doc["schema_version"];
    if (!v.is_number_integer() || v.get<int>() != kManifestSchemaVersion) {
      schema_error("/schema_version", "unsupported schema version (expected " + std::to_string(kManifestSchemaVersion) + ")");
    }
  }

  Declared d;
  const auto& shape = field(doc, "shape", "");
  d.n = as_extent(field(shape, "N", "/shape"), "/shape/N");
  d.shape.channels = as_extent(field(shape, "C", "/shape"), "/shape/C");
  d.shape.height = as_extent(field(shape, "H", "/shape"), "/shape/H");
  d.shape.width = as_extent(field(shape, "W", "/shape"), "/shape/W");

  Bundle b;
  b.manifest_path = manifest;
  auto& expl = b.explanations;
  expl.shape = d.shape;

  const auto& ids = field(doc, "instance_ids", "");
  if (!ids.is_array() || static_cast<Index>(ids.size()) != d.n) {
    schema_error("/instance_ids", "expected a list of " + std::to_string(d.n) + " ids");
  }
  for (std::size_t i = 0; i < ids.size(); ++i) {
    expl.instance_ids.push_back(as_string(ids[i], "/instance_ids/" + std::to_string(i)));
  }

  const auto& methods = field(doc, "explanations", "");
  if (!methods.is_object() || methods.empty()) schema_error("/explanations", "expected a non-empty object");
  for (const auto& [name, entry] : methods.items()) {
    const std::string pointer = "/explanations/" + name;
    expl.methods.push_back(name);
    expl.data.push_back(read_checked(base, entry, pointer, nchw(d)).to_matrix());
    b.explanation_files.push_back(base / as_string(entry, pointer));
  }

  if (doc.contains("masks")) {
    const NpyArray a = read_checked(base, doc["masks"], "/masks",
                                    {static_cast<std::size_t>(d.n), static_cast<std::size_t>(d.shape.height),
                                     static_cast<std::size_t>(d.shape.width)});
    MaskSet masks;
    masks.height = d.shape.height;
    masks.width = d.shape.width;
    masks.masks = a.to_matrix();
    masks.instance_ids = expl.instance_ids;
    b.masks = std::move(masks);
  }

  if (doc.contains("inputs")) b.inputs = read_checked(base, doc["inputs"], "/inputs", nchw(d)).to_matrix();

  if (doc.contains("labels")) {
    const auto& entry = doc["labels"];
    if (entry.is_array()) {
      if (static_cast<Index>(entry.size()) != d.n) schema_error("/labels", "expected one label per instance");
      std::vector<double> values;
      for (std::size_t i = 0; i < entry.size(); ++i) {
        if (!entry[i].is_number_integer()) schema_error("/labels/" + std::to_string(i), "expected an integer");
        values.push_back(entry[i].get<double>());
      }
      b.labels = integral_values(values, "/labels");
    } else {
      b.labels = integral_values(read_checked(base, entry, "/labels", {static_cast<std::size_t>(d.n)}).to_double(),
                                 "/labels");
    }
  }

  if (doc.contains("perturbed") || doc.contains("alt_models")) {
    PerturbationEvidence ev;
    if (doc.contains("perturbed")) {
      const auto& perturbed = doc["perturbed"];
      if (!perturbed.is_object()) schema_error("/perturbed", "expected an object of method -> paths");
      std::size_t p_count = 0;
      for (const auto& [name, list] : perturbed.items()) {
        auto& m = ev.methods[name];
        m.perturbed = read_stack_list(base, list, "/perturbed/" + name, d);
        if (p_count != 0 && m.perturbed.size() != p_count) {
          schema_error("/perturbed/" + name, "every method needs the same number of perturbations");
        }
        p_count = m.perturbed.size();
      }
      const auto& dist = field(doc, "input_distances", "");
      if (dist.is_array()) {
        if (dist.size() != p_count) schema_error("/input_distances", "expected one row per perturbation");
        ev.input_distances.resize(static_cast<Index>(p_count), d.n);
        for (std::size_t p = 0; p < p_count; ++p) {
          const std::string pointer = "/input_distances/" + std::to_string(p);
          if (!dist[p].is_array() || static_cast<Index>(dist[p].size()) != d.n) {
            schema_error(pointer, "expected " + std::to_string(d.n) + " distances");
          }
          for (Index i = 0; i < d.n; ++i) {
            const auto& v = dist[p][static_cast<std::size_t>(i)];
            if (!v.is_number()) schema_error(pointer + "/" + std::to_string(i), "expected a number");
            ev.input_distances(static_cast<Index>(p), i) = v.get<double>();
          }
        }
      } else {
        ev.input_distances =
            read_checked(base, dist, "/input_distances", {p_count, static_cast<std::size_t>(d.n)}).to_matrix();
      }
    }
    if (doc.contains("alt_models")) {
      const auto& alt = doc["alt_models"];
      if (!alt.is_object()) schema_error("/alt_models", "expected an object of method -> paths");
      for (const auto& [name, list] : alt.items()) {
        ev.methods[name].alt_models = read_stack_list(base, list, "/alt_models/" + name, d);
      }
    }
    for (const auto& [name, m] : ev.methods) {
      if (std::find(expl.methods.begin(), expl.methods.end(), name) == expl.methods.end()) {
        schema_error("/perturbed", "evidence for unknown method '" + name + "'");
      }
    }
    b.evidence = with_baselines(std::move(ev), expl);
  }

  if (doc.contains("oracle")) {
    const auto& o = doc["oracle"];
    if (!o.is_object()) schema_error("/oracle", "expected an object");
    if (o.contains("builtin_weights")) b.oracle.builtin_weights = base / as_string(o["builtin_weights"], "/oracle/builtin_weights");
    if (o.contains("model_command")) b.oracle.model_command = as_string(o["model_command"], "/oracle/model_command");
    if (o.contains("explainer_command")) {
      b.oracle.explainer_command = as_string(o["explainer_command"], "/oracle/explainer_command");
    }
    if (o.contains("timeout")) {
      if (!o["timeout"].is_number() || !(o["timeout"].get<double>() > 0)) schema_error("/oracle/timeout", "expected a positive number");
      b.oracle.timeout_seconds = o["timeout"].get<double>();
    }
    if (o.contains("num_classes")) b.oracle.num_classes = as_extent(o["num_classes"], "/oracle/num_classes");
  }

  require_valid(b.explanations, b.masks ? &*b.masks : nullptr);
  return b;
}

fs::path write_bundle(const fs::path& dir, const Bundle& bundle, const RowMatrixXd* builtin_weights,
                      Index num_classes) {
  fs::create_directories(dir);
  const auto& expl = bundle.explanations;
  const auto n = static_cast<std::size_t>(expl.num_instances());
  const std::vector<std::size_t> shape4{n, static_cast<std::size_t>(expl.shape.channels),
                                        static_cast<std::size_t>(expl.shape.height),
                                        static_cast<std::size_t>(expl.shape.width)};
  json doc;
  doc["schema_version"] = kManifestSchemaVersion;
  doc["shape"] = {{"N", n}, {"C", expl.shape.channels}, {"H", expl.shape.height}, {"W", expl.shape.width}};
  doc["instance_ids"] = expl.instance_ids;
  json methods = json::object();
  for (std::size_t e = 0; e < expl.num_methods(); ++e) {
    const std::string file = "expl_" + std::to_string(e) + ".npy";
    write_npy(dir / file, NpyArray::from_matrix(shape4, expl.data[e]));
    methods[expl.methods[e]] = file;
  }
  doc["explanations"] = methods;
  if (bundle.masks) {
    write_npy(dir / "masks.npy",
              NpyArray::from_matrix({n, static_cast<std::size_t>(expl.shape.height),
                                     static_cast<std::size_t>(expl.shape.width)},
                                    bundle.masks->masks, DType::Bool));
    doc["masks"] = "masks.npy";
  }
  if (bundle.inputs) {
    write_npy(dir / "inputs.npy", NpyArray::from_matrix(shape4, *bundle.inputs));
    doc["inputs"] = "inputs.npy";
  }
  if (bundle.labels) doc["labels"] = *bundle.labels;
  if (bundle.evidence) {
    json perturbed = json::object();
    json alt = json::object();
    for (std::size_t e = 0; e < expl.num_methods(); ++e) {
      const auto it = bundle.evidence->methods.find(expl.methods[e]);
      if (it == bundle.evidence->methods.end()) continue;
      json plist = json::array();
      for (std::size_t p = 0; p < it->second.perturbed.size(); ++p) {
        const std::string file = "pert_" + std::to_string(e) + "_" + std::to_string(p) + ".npy";
        write_npy(dir / file, NpyArray::from_matrix(shape4, it->second.perturbed[p]));
        plist.push_back(file);
      }
      json alist = json::array();
      for (std::size_t m = 0; m < it->second.alt_models.size(); ++m) {
        const std::string file = "alt_" + std::to_string(e) + "_" + std::to_string(m) + ".npy";
        write_npy(dir / file, NpyArray::from_matrix(shape4, it->second.alt_models[m]));
        alist.push_back(file);
      }
      if (!plist.empty()) perturbed[expl.methods[e]] = plist;
      if (!alist.empty()) alt[expl.methods[e]] = alist;
    }
    if (!perturbed.empty()) {
      doc["perturbed"] = perturbed;
      const auto& dist = bundle.evidence->input_distances;
      write_npy(dir / "input_distances.npy",
                NpyArray::from_matrix({static_cast<std::size_t>(dist.rows()), static_cast<std::size_t>(dist.cols())},
                                      dist));
      doc["input_distances"] = "input_distances.npy";
    }
    if (!alt.empty()) doc["alt_models"] = alt;
  }
  if (builtin_weights) {
    write_npy(dir / "weights.npy",
              NpyArray::from_matrix({static_cast<std::size_t>(builtin_weights->rows()),
                                     static_cast<std::size_t>(expl.shape.channels),
                                     static_cast<std::size_t>(expl.shape.height),
                                     static_cast<std::size_t>(expl.shape.width)},
                                    *builtin_weights));
    doc["oracle"] = {{"builtin_weights", "weights.npy"}, {"num_classes", num_classes ? num_classes : builtin_weights->rows()}};
  }
  const fs::path manifest = dir / "manifest.json";
  std::ofstream out(manifest);
  out << doc.dump(2) << "\n";
  if (!out) throw Error(Errc::IoFailure, "cannot write " + manifest.string());
  return manifest;
}

void save_krr_model(const fs::path& dir, const krr::KrrModel<double>& model) {
  fs::create_directories(dir);
  const auto shape2 = [](const auto& m) {
    return std::vector<std::size_t>{static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols())};
  };
  write_npy(dir / "training_inputs.npy", NpyArray::from_matrix(shape2(model.training_inputs), model.training_inputs));
  write_npy(dir / "dual_coefficients.npy",
            NpyArray::from_matrix(shape2(model.dual_coefficients), model.dual_coefficients));
  write_npy(dir / "sample_weights.npy",
            NpyArray::from_matrix({static_cast<std::size_t>(model.sample_weights.size())}, model.sample_weights));
  json meta;
  meta["kernel"] = model.kernel.type == krr::KernelType::Rbf      ? "rbf"
                   : model.kernel.type == krr::KernelType::Linear ? "linear"
                                                                   : "polynomial";
  meta["gamma"] = model.kernel.gamma;
  meta["degree"] = model.kernel.degree;
  meta["coef0"] = model.kernel.coef0;
  meta["ridge"] = model.ridge;
  meta["jitter"] = model.jitter;
  std::ofstream out(dir / "krr_model.json");
  out << meta.dump(2) << "\n";
  if (!out) throw Error(Errc::IoFailure, "cannot write model metadata in " + dir.string());
}

krr::KrrModel<double> load_krr_model(const fs::path& dir) {
  std::ifstream in(dir / "krr_model.json");
  if (!in) throw Error(Errc::IoFailure, "no krr_model.json in " + dir.string());
  const json meta = json::parse(in);
  krr::KrrModel<double> model;
  const std::string kind = meta.at("kernel").get<std::string>();
  model.kernel.type = kind == "rbf" ? krr::KernelType::Rbf
                      : kind == "linear" ? krr::KernelType::Linear
                                         : krr::KernelType::Polynomial;
  model.kernel.gamma = meta.at("gamma").get<double>();
  model.kernel.degree = meta.at("degree").get<int>();
  model.kernel.coef0 = meta.at("coef0").get<double>();
  model.ridge = meta.at("ridge").get<double>();
  model.jitter = meta.at("jitter").get<double>();
  // Column-major model matrices from row-major files.
  model.training_inputs = read_npy(dir / "training_inputs.npy").to_matrix();
  model.dual_coefficients = read_npy(dir / "dual_coefficients.npy").to_matrix();
  const auto w = read_npy(dir / "sample_weights.npy").to_double();
  model.sample_weights = Eigen::Map<const Eigen::VectorXd>(w.data(), static_cast<Index>(w.size()));
  return model;
}

}  // namespace xaiens
