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

#ifndef XAIENS_ENSEMBLE_SUPERVISED_HPP
#define XAIENS_ENSEMBLE_SUPERVISED_HPP

#include <string>
#include <variant>
#include <vector>

#include "xaiens/core_model.hpp"
#include "xaiens/krr.hpp"

namespace xaiens {

/// Regression problem: row i of X is instance i's explanations (all methods,
/// second-moment scaled, concatenated in method order); row i of Y is its
/// flattened mask.
struct SupervisedDesign {
  RowMatrixXd X;
  RowMatrixXd Y;
  Eigen::VectorXd weights;
  std::vector<std::string> instance_ids;
};

/// w_i = 1 / max(area_i, 1), rescaled to mean one. Empty masks are clamped to
/// area one and reported in `warnings`.
Eigen::VectorXd mask_weights(const MaskSet& masks, std::vector<std::string>* warnings = nullptr);

/// Throws Errc::MissingMasks when `masks` is null.
SupervisedDesign build_design(const ExplanationSet& expl, const MaskSet* masks,
                              std::vector<std::string>* warnings = nullptr);

struct KFold {
  int folds = 5;
};

/// Single train/test split. Without labels the last `test_fraction` of the
/// instances are held out; with labels the split is made within each class.
struct Holdout {
  double test_fraction = 0.2;
  std::vector<long> labels;
};

using Split = std::variant<KFold, Holdout>;

/// One trained model: the instances it was fitted on and the instances whose
/// output it produced.
struct FoldRecord {
  std::vector<Index> train;
  std::vector<Index> predict;
};

/// Contiguous k-fold blocks (the first n % k folds get one extra instance) or
/// a holdout split, in which the single model predicts every instance.
std::vector<FoldRecord> make_folds(Index n, const Split& split);

struct SupervisedOptions {
  krr::Kernel kernel = krr::Kernel::rbf();
  double ridge = 1.0;
  Split split = KFold{};
  /// false fits with uniform weights.
  bool mask_area_weights = true;
  bool center_bias_audit = false;
  krr::FitOptions fit;
  int threads = 0;
};

struct SupervisedOutput {
  EnsembleResult ensemble;
  std::vector<FoldRecord> folds;
  /// Index into `folds` of the model that produced each instance's map.
  std::vector<std::size_t> fold_of;
  /// True for holdout training instances, whose maps are in-sample fits.
  std::vector<bool> in_sample;
  /// Share of predicted values outside [0, 1] before clamping.
  double out_of_range_fraction = 0.0;
  /// Mean attribution by integer distance from the image center (only with
  /// center_bias_audit).
  std::vector<double> radial_profile;
};

/// Fits weighted multi-output KRR from explanations to masks and returns one
/// single-channel map per instance, clamped to [0, 1].
SupervisedOutput supervised_xai(const ExplanationSet& expl, const MaskSet* masks, const SupervisedOptions& opts = {});

/// Mean of `maps` (N x H*W) binned by floor(distance to the center).
std::vector<double> radial_profile(const RowMatrixXd& maps, Index height, Index width);

}  // namespace xaiens

#endif  // XAIENS_ENSEMBLE_SUPERVISED_HPP
