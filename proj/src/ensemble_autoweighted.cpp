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

#include "xaiens/ensemble_autoweighted.hpp"

#include <algorithm>
#include <cmath>

#include "xaiens/normalization.hpp"
#include "xaiens/numeric.hpp"
#include "xaiens/parallel.hpp"

namespace xaiens {

const MethodEvidence& PerturbationEvidence::at(std::string_view method) const {
  const auto it = methods.find(method);
  if (it == methods.end()) throw Error(Errc::MissingEvidence, "no evidence for method '" + std::string(method) + "'");
  return it->second;
}

double stability_score(const PerturbationEvidence& evidence, std::string_view method) {
  const auto& ev = evidence.at(method);
  const std::string name(method);
  if (ev.perturbed.empty()) throw Error(Errc::MissingEvidence, "no perturbed explanations for '" + name + "'");
  if (ev.baseline.size() == 0) throw Error(Errc::MissingEvidence, "no baseline explanations for '" + name + "'");
  const auto p_count = static_cast<Index>(ev.perturbed.size());
  const Index n = ev.baseline.rows();
  if (evidence.input_distances.rows() != p_count || evidence.input_distances.cols() != n) {
    throw Error(Errc::DimensionMismatch, "input_distances must be " + std::to_string(p_count) + " x " +
                                             std::to_string(n) + " for '" + name + "'");
  }
  if (!(evidence.input_distances.array() > 0.0).all()) {
    throw Error(Errc::PreconditionViolation, "perturbation distances must be positive");
  }

  Eigen::MatrixXd ratios(p_count, n);
  for (Index p = 0; p < p_count; ++p) {
    const auto& stack = ev.perturbed[static_cast<std::size_t>(p)];
    if (stack.rows() != n || stack.cols() != ev.baseline.cols()) {
      throw Error(Errc::DimensionMismatch, "perturbed stack " + std::to_string(p) + " of '" + name +
                                               "' does not match the baseline shape");
    }
    for (Index i = 0; i < n; ++i) {
      ratios(p, i) = (ev.baseline.row(i) - stack.row(i)).norm() / evidence.input_distances(p, i);
    }
  }
  const double mean_ratio = compensated_sum(ratios) / static_cast<double>(ratios.size());
  return 1.0 / (1.0 + mean_ratio);
}

double consistency_score(const PerturbationEvidence& evidence, std::string_view method) {
  const auto& ev = evidence.at(method);
  const std::string name(method);
  if (ev.alt_models.size() < 2) {
    throw Error(Errc::MissingEvidence, "consistency of '" + name + "' needs explanations from at least two models");
  }
  const auto& first = ev.alt_models.front();
  for (const auto& m : ev.alt_models) {
    if (m.rows() != first.rows() || m.cols() != first.cols()) {
      throw Error(Errc::DimensionMismatch, "alternate-model stacks of '" + name + "' differ in shape");
    }
  }
  const auto elements = static_cast<double>(first.cols());
  double worst = 0.0;
  for (std::size_t a = 0; a < ev.alt_models.size(); ++a) {
    for (std::size_t b = a + 1; b < ev.alt_models.size(); ++b) {
      for (Index i = 0; i < first.rows(); ++i) {
        worst = std::max(worst, (ev.alt_models[a].row(i) - ev.alt_models[b].row(i)).norm() / elements);
      }
    }
  }
  return 1.0 / (1.0 + worst);
}

EnsembleScores ensemble_scores(const PerturbationEvidence& evidence, const std::vector<std::string>& methods,
                               const EsCombiner& combiner) {
  EnsembleScores scores;
  double total = 0.0;
  for (const auto& m : methods) {
    MethodScore s;
    s.method = m;
    s.stability = stability_score(evidence, m);
    s.consistency = consistency_score(evidence, m);
    s.es = combiner(s.stability, s.consistency);
    if (!(s.es >= 0.0) || !std::isfinite(s.es)) {
      throw Error(Errc::PreconditionViolation, "ensemble score of '" + m + "' is negative or non-finite");
    }
    total += s.es;
    scores.push_back(std::move(s));
  }
  if (!(total > 0.0)) throw Error(Errc::PreconditionViolation, "all ensemble scores are zero");
  for (auto& s : scores) s.normalized_weight = s.es / total;
  return scores;
}

PerturbationEvidence with_baselines(PerturbationEvidence evidence, const ExplanationSet& expl) {
  for (std::size_t e = 0; e < expl.methods.size(); ++e) {
    auto it = evidence.methods.find(expl.methods[e]);
    if (it != evidence.methods.end() && it->second.baseline.size() == 0) it->second.baseline = expl.data[e];
  }
  return evidence;
}

EnsembleResult autoweighted_ensemble(const ExplanationSet& expl, const PerturbationEvidence& evidence,
                                     const AutoweightedOptions& opts) {
  require_valid(expl);
  for (const auto& m : expl.methods) evidence.at(m);
  const auto scores = ensemble_scores(with_baselines(evidence, expl), expl.methods, opts.combiner);
  return autoweighted_ensemble(expl, scores, opts);
}

EnsembleResult autoweighted_ensemble(const ExplanationSet& expl, const EnsembleScores& scores,
                                     const AutoweightedOptions& opts) {
  require_valid(expl);
  std::vector<double> weights(expl.num_methods(), 0.0);
  double total = 0.0;
  for (std::size_t e = 0; e < expl.num_methods(); ++e) {
    const auto it = std::find_if(scores.begin(), scores.end(),
                                 [&](const MethodScore& s) { return s.method == expl.methods[e]; });
    if (it == scores.end()) throw Error(Errc::MissingEvidence, "no score for method '" + expl.methods[e] + "'");
    if (!(it->normalized_weight >= 0.0)) throw Error(Errc::PreconditionViolation, "negative weight");
    weights[e] = it->normalized_weight;
    total += weights[e];
  }
  if (std::abs(total - 1.0) > 1e-9) {
    throw Error(Errc::PreconditionViolation, "weights sum to " + std::to_string(total) + ", expected 1");
  }

  const ExplanationSet normalized = normalize_standard(expl);
  EnsembleResult result;
  result.shape = expl.shape;
  result.instance_ids = expl.instance_ids;
  result.strategy = Strategy::Autoweighted;
  result.normalization = NormalizationKind::Standard;
  result.weights = weights;
  result.tensors = RowMatrixXd::Zero(expl.num_instances(), expl.shape.size());
  parallel_for(expl.num_instances(), resolve_threads(opts.threads), [&](Index i) {
    for (std::size_t e = 0; e < weights.size(); ++e) {
      result.tensors.row(i) += weights[e] * normalized.data[e].row(i);
    }
  });
  return result;
}

}  // namespace xaiens
