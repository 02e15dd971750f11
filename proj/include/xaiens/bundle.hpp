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

#ifndef XAIENS_BUNDLE_HPP
#define XAIENS_BUNDLE_HPP

// Dataset bundles described by a JSON manifest. Paths are relative to the
// manifest's directory.
//
//   {
//     "schema_version": 1,
//     "shape": {"N": 10, "C": 3, "H": 32, "W": 32},
//     "instance_ids": ["img0", ...],
//     "explanations": {"saliency": "saliency.npy", ...},     (N, C, H, W) each
//     "masks": "masks.npy",                                 (N, H, W), optional
//     "inputs": "inputs.npy",                               (N, C, H, W), optional
//     "labels": "labels.npy" | [3, 1, ...],                 (N,), optional
//     "perturbed": {"saliency": ["p0.npy", ...]},           optional
//     "input_distances": "dist.npy" | [[...], ...],         (P, N), with perturbed
//     "alt_models": {"saliency": ["m0.npy", "m1.npy"]},     optional
//     "oracle": {"builtin_weights": "w.npy", "model_command": "...",
//                "explainer_command": "...", "timeout": 60, "num_classes": 10}
//   }
//
// Method order is the order of keys in "explanations".

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "xaiens/core_model.hpp"
#include "xaiens/ensemble_autoweighted.hpp"
#include "xaiens/krr.hpp"
#include "xaiens/oracles.hpp"

namespace xaiens {

inline constexpr int kManifestSchemaVersion = 1;

struct OracleConfig {
  std::optional<std::filesystem::path> builtin_weights;
  std::optional<std::string> model_command;
  std::optional<std::string> explainer_command;
  double timeout_seconds = 60.0;
  Index num_classes = 0;
};

struct Bundle {
  std::filesystem::path manifest_path;
  ExplanationSet explanations;
  std::vector<std::filesystem::path> explanation_files;  // aligned with methods
  std::optional<MaskSet> masks;
  std::optional<RowMatrixXd> inputs;
  std::optional<std::vector<long>> labels;
  std::optional<PerturbationEvidence> evidence;
  OracleConfig oracle;
};

/// Reads, cross-checks against the declared shape, and validates. Throws
/// Errc::ManifestSchemaError naming the offending field as a JSON pointer;
/// array read errors keep their code and name the file.
Bundle load_bundle(const std::filesystem::path& manifest);

/// Writes every array of `bundle` as NPY into `dir` plus `manifest.json`, and
/// returns the manifest path. Oracle weights are written when given.
std::filesystem::path write_bundle(const std::filesystem::path& dir, const Bundle& bundle,
                                   const RowMatrixXd* builtin_weights = nullptr, Index num_classes = 0);

/// Model persistence: training_inputs.npy, dual_coefficients.npy,
/// sample_weights.npy and krr_model.json in `dir`.
void save_krr_model(const std::filesystem::path& dir, const krr::KrrModel<double>& model);
krr::KrrModel<double> load_krr_model(const std::filesystem::path& dir);

}  // namespace xaiens

#endif  // XAIENS_BUNDLE_HPP
