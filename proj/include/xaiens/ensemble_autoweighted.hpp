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

#ifndef XAIENS_ENSEMBLE_AUTOWEIGHTED_HPP
#define XAIENS_ENSEMBLE_AUTOWEIGHTED_HPP

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "xaiens/core_model.hpp"

namespace xaiens {

/// Explanations of one method under input noise and under model changes.
struct MethodEvidence {
  /// Explanations on the clean inputs (N x C*H*W). May be left empty when the
  /// evidence is used together with an ExplanationSet that provides them.
  RowMatrixXd baseline;
  /// P stacks of explanations on perturbed inputs, same layout as baseline.
  std::vector<RowMatrixXd> perturbed;
  /// M stacks of explanations produced with alternate models.
  std::vector<RowMatrixXd> alt_models;
};

struct PerturbationEvidence {
  /// ||x - x_p||_2 for perturbation p (row) and instance i (column).
  RowMatrixXd input_distances;
  std::map<std::string, MethodEvidence, std::less<>> methods;

  const MethodEvidence& at(std::string_view method) const;
};

struct MethodScore {
  std::string method;
  double stability = 0.0;
  double consistency = 0.0;
  double es = 0.0;
  double normalized_weight = 0.0;
};

using EnsembleScores = std::vector<MethodScore>;

/// Combines (stability, consistency) into an Ensemble Score.
using EsCombiner = std::function<double(double, double)>;

inline double arithmetic_mean_es(double stability, double consistency) { return 0.5 * (stability + consistency); }

/// 1 / (1 + L) with L the mean over instances and perturbations of
/// ||phi(x) - phi(x_p)|| / ||x - x_p||. Throws Errc::MissingEvidence.
double stability_score(const PerturbationEvidence& evidence, std::string_view method);

/// 1 / (1 + D) with D the largest ||phi_m1 - phi_m2|| / (C*H*W) over instances
/// and alternate-model pairs. Throws Errc::MissingEvidence.
double consistency_score(const PerturbationEvidence& evidence, std::string_view method);

/// Scores for each method in order, weights normalized to sum to one.
EnsembleScores ensemble_scores(const PerturbationEvidence& evidence, const std::vector<std::string>& methods,
                               const EsCombiner& combiner = arithmetic_mean_es);

/// Fills in missing baselines from `expl`.
PerturbationEvidence with_baselines(PerturbationEvidence evidence, const ExplanationSet& expl);

struct AutoweightedOptions {
  EsCombiner combiner = arithmetic_mean_es;
  int threads = 0;
};

/// Weighted mean of standard-normalized explanations with weights
/// ES_e / sum(ES).
EnsembleResult autoweighted_ensemble(const ExplanationSet& expl, const PerturbationEvidence& evidence,
                                     const AutoweightedOptions& opts = {});

/// Same, with precomputed scores; uses each score's normalized_weight.
EnsembleResult autoweighted_ensemble(const ExplanationSet& expl, const EnsembleScores& scores,
                                     const AutoweightedOptions& opts = {});

}  // namespace xaiens

#endif  // XAIENS_ENSEMBLE_AUTOWEIGHTED_HPP
