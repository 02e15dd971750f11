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

#include "xaiens/ensemble_basic.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "xaiens/parallel.hpp"

namespace xaiens {

double reduce_values(std::span<double> v, AggregationKind kind) {
  if (v.empty()) throw Error(Errc::EmptyList, "nothing to aggregate");
  switch (kind) {
    case AggregationKind::Max:
      return *std::max_element(v.begin(), v.end());
    case AggregationKind::Min:
      return *std::min_element(v.begin(), v.end());
    case AggregationKind::MaxAbs: {
      double best = v[0];
      for (std::size_t e = 1; e < v.size(); ++e) {
        if (std::abs(v[e]) > std::abs(best)) best = v[e];
      }
      return best;
    }
    case AggregationKind::Avg: {
      std::sort(v.begin(), v.end());
      const double lo = v.front();
      double excess = 0.0;
      for (double x : v) excess += x - lo;
      return std::clamp(lo + excess / static_cast<double>(v.size()), lo, v.back());
    }
  }
  return 0.0;
}

AttributionTensor aggregate(std::span<const AttributionTensor> tensors, AggregationKind kind) {
  if (tensors.empty()) throw Error(Errc::EmptyList, "aggregate() needs at least one tensor");
  const Shape shape = tensors.front().shape;
  for (const auto& t : tensors) {
    if (!(t.shape == shape) || t.values.size() != shape.size()) {
      throw Error(Errc::ShapeMismatch, "cannot aggregate " + t.shape.str() + " with " + shape.str());
    }
  }
  AttributionTensor out(shape);
  std::vector<double> buf(tensors.size());
  for (Index j = 0; j < shape.size(); ++j) {
    for (std::size_t e = 0; e < tensors.size(); ++e) buf[e] = tensors[e].values(j);
    out.values(j) = reduce_values(buf, kind);
  }
  return out;
}

RowMatrixXd aggregate_set(const ExplanationSet& normalized, AggregationKind kind, int threads) {
  if (normalized.data.empty()) throw Error(Errc::EmptyList, "no methods to aggregate");
  const Index n = normalized.num_instances();
  const Index width = normalized.shape.size();
  RowMatrixXd out(n, width);
  parallel_for(n, resolve_threads(threads), [&](Index i) {
    std::vector<double> buf(normalized.data.size());
    for (Index j = 0; j < width; ++j) {
      for (std::size_t e = 0; e < buf.size(); ++e) buf[e] = normalized.data[e](i, j);
      out(i, j) = reduce_values(buf, kind);
    }
  });
  return out;
}

double cancellation_fraction(std::span<const RowMatrixXd> components, const RowMatrixXd& aggregate) {
  if (components.empty() || aggregate.size() == 0) return 0.0;
  Eigen::ArrayXXd mean_magnitude = Eigen::ArrayXXd::Zero(aggregate.rows(), aggregate.cols());
  for (const auto& c : components) mean_magnitude += c.array().abs();
  mean_magnitude /= static_cast<double>(components.size());
  const auto cancelled = (aggregate.array().abs() < 0.01 * mean_magnitude).count();
  return static_cast<double>(cancelled) / static_cast<double>(aggregate.size());
}

EnsembleResult norm_ensemble_xai(const ExplanationSet& expl, NormalizationKind norm, AggregationKind kind,
                                 const NormEnsembleOptions& opts) {
  require_valid(expl);
  const ExplanationSet normalized = normalize(expl, norm, opts.normalize);

  EnsembleResult result;
  result.shape = expl.shape;
  result.instance_ids = expl.instance_ids;
  result.strategy = Strategy::NormEnsemble;
  result.normalization = norm;
  result.aggregator = kind;
  result.tensors = aggregate_set(normalized, kind, opts.threads);

  if (kind == AggregationKind::Avg && normalized.num_methods() > 1) {
    const double frac = cancellation_fraction(normalized.data, result.tensors);
    if (frac > kCancellationWarnFraction) {
      std::ostringstream os;
      os << "sign cancellation: " << frac * 100.0
         << "% of features average to under 1% of their mean component magnitude";
      result.warnings.push_back(os.str());
    }
  }
  return result;
}

}  // namespace xaiens
