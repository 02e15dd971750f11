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

#ifndef XAIENS_SYNTHETIC_HPP
#define XAIENS_SYNTHETIC_HPP

// Self-contained synthetic task for benchmarking and end-to-end tests: a
// linear classifier whose classes respond to a blob at a class-specific
// position, inputs containing their class blob, masks covering it, and four
// explanation methods computed against the classifier.

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "xaiens/bundle.hpp"
#include "xaiens/ensemble_autoweighted.hpp"
#include "xaiens/oracles.hpp"

namespace xaiens {

struct SyntheticConfig {
  Index instances = 100;
  Shape shape{3, 32, 32};
  Index classes = 10;
  int perturbations = 3;
  int alt_models = 2;
  /// Perturbation std relative to the input std.
  double noise = 0.05;
  std::uint64_t seed = 0;
};

class SyntheticWorld {
 public:
  explicit SyntheticWorld(const SyntheticConfig& config);

  const SyntheticConfig& config() const noexcept { return config_; }
  LinearModel& model() noexcept { return *model_; }
  const LinearModel& model() const noexcept { return *model_; }
  const RowMatrixXd& inputs() const noexcept { return inputs_; }
  const std::vector<long>& labels() const noexcept { return labels_; }
  const MaskSet& masks() const noexcept { return masks_; }
  const std::vector<std::string>& instance_ids() const noexcept { return ids_; }

  /// Method names in ensemble order.
  static const std::vector<std::string>& method_names();

  /// Every method's explanation of `inputs` for each instance's label under
  /// `model`.
  ExplanationSet explain(LinearModel& model, const RowMatrixXd& inputs, int threads = 0) const;

  /// Explanations of the clean inputs under the base model.
  ExplanationSet explanations(int threads = 0) const;

  /// Re-runs every method on freshly perturbed inputs and on each alternate
  /// model.
  PerturbationEvidence compute_evidence(int threads = 0) const;

  Bundle bundle(bool with_evidence, int threads = 0) const;

 private:
  SyntheticConfig config_;
  std::unique_ptr<LinearModel> model_;
  std::vector<std::unique_ptr<LinearModel>> alt_models_;
  RowMatrixXd inputs_;
  std::vector<long> labels_;
  MaskSet masks_;
  std::vector<std::string> ids_;
};

}  // namespace xaiens

#endif  // XAIENS_SYNTHETIC_HPP
