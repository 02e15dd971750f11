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

#ifndef XAIENS_ENSEMBLE_BASIC_HPP
#define XAIENS_ENSEMBLE_BASIC_HPP

#include <span>
#include <vector>

#include "xaiens/core_model.hpp"
#include "xaiens/normalization.hpp"

namespace xaiens {

/// Reduces the candidate values of one feature (one per method, in method
/// order) to a single value.
///
/// Avg sorts the candidates and returns min + sum(v - min) / k clamped to
/// [min, max]: k copies of x give exactly x, the result never leaves the
/// candidate range, and it does not depend on the method order. MaxAbs
/// returns the signed candidate of largest magnitude, the earliest one on
/// ties.
double reduce_values(std::span<double> candidates, AggregationKind kind);

/// Elementwise reduction across the method axis. Throws Errc::EmptyList,
/// Errc::ShapeMismatch.
AttributionTensor aggregate(std::span<const AttributionTensor> tensors, AggregationKind kind);

/// Fraction of features where |aggregate| < 1% of the mean component
/// magnitude. Features with all-zero components are not counted as
/// cancelled.
double cancellation_fraction(std::span<const RowMatrixXd> components, const RowMatrixXd& aggregate);

/// Above this cancellation fraction an averaging ensemble carries a warning.
inline constexpr double kCancellationWarnFraction = 0.10;

struct NormEnsembleOptions {
  NormalizeOptions normalize;
  int threads = 0;
};

/// Normalize every method, then reduce across methods per feature.
EnsembleResult norm_ensemble_xai(const ExplanationSet& expl, NormalizationKind norm, AggregationKind kind,
                                 const NormEnsembleOptions& opts = {});

/// Reduction step alone, on an already normalized set.
RowMatrixXd aggregate_set(const ExplanationSet& normalized, AggregationKind kind, int threads = 0);

}  // namespace xaiens

#endif  // XAIENS_ENSEMBLE_BASIC_HPP
