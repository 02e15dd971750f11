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

#include "xaiens/core_model.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_set>

#include "xaiens/numeric.hpp"

namespace xaiens {

std::string Shape::str() const {
  std::ostringstream os;
  os << "(" << channels << ", " << height << ", " << width << ")";
  return os.str();
}

std::size_t ExplanationSet::method_index(std::string_view name) const {
  const auto it = std::find(methods.begin(), methods.end(), name);
  if (it == methods.end()) throw Error(Errc::UnknownMethod, "no method named '" + std::string(name) + "'");
  return static_cast<std::size_t>(it - methods.begin());
}

AttributionTensor ExplanationSet::tensor(std::size_t method, Index instance) const {
  return AttributionTensor(shape, data.at(method).row(instance).transpose().array());
}

ExplanationSet ExplanationSet::select(const std::vector<Index>& rows) const {
  ExplanationSet out;
  out.shape = shape;
  out.methods = methods;
  out.data.reserve(data.size());
  for (const auto& m : data) {
    RowMatrixXd block(static_cast<Index>(rows.size()), m.cols());
    for (std::size_t r = 0; r < rows.size(); ++r) block.row(static_cast<Index>(r)) = m.row(rows[r]);
    out.data.push_back(std::move(block));
  }
  for (Index r : rows) out.instance_ids.push_back(instance_ids.at(static_cast<std::size_t>(r)));
  return out;
}

ExplanationSet ExplanationSet::from_tensors(std::vector<std::string> method_names,
                                            const std::vector<std::vector<AttributionTensor>>& tensors,
                                            std::vector<std::string> ids) {
  if (method_names.size() != tensors.size()) {
    throw Error(Errc::DimensionMismatch, "method names and tensor stacks differ in count");
  }
  if (tensors.empty() || tensors.front().empty()) throw Error(Errc::EmptyData, "no tensors given");
  ExplanationSet out;
  out.shape = tensors.front().front().shape;
  out.methods = std::move(method_names);
  out.instance_ids = std::move(ids);
  for (const auto& stack : tensors) {
    RowMatrixXd block(static_cast<Index>(stack.size()), out.shape.size());
    for (std::size_t i = 0; i < stack.size(); ++i) {
      if (!(stack[i].shape == out.shape)) {
        throw Error(Errc::ShapeMismatch, "tensor " + stack[i].shape.str() + " vs " + out.shape.str());
      }
      block.row(static_cast<Index>(i)) = stack[i].values.matrix().transpose();
    }
    out.data.push_back(std::move(block));
  }
  return out;
}

Index MaskSet::area(Index i) const {
  return static_cast<Index>((masks.row(i).array() > 0.5).count());
}

MaskSet MaskSet::select(const std::vector<Index>& rows) const {
  MaskSet out;
  out.height = height;
  out.width = width;
  out.masks.resize(static_cast<Index>(rows.size()), masks.cols());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    out.masks.row(static_cast<Index>(r)) = masks.row(rows[r]);
    out.instance_ids.push_back(instance_ids.at(static_cast<std::size_t>(rows[r])));
  }
  return out;
}

AttributionTensor EnsembleResult::tensor(Index i) const {
  return AttributionTensor(shape, tensors.row(i).transpose().array());
}

std::string_view to_string(Strategy s) noexcept {
  switch (s) {
    case Strategy::NormEnsemble: return "norm";
    case Strategy::Autoweighted: return "autoweighted";
    case Strategy::Supervised: return "supervised";
  }
  return "?";
}

std::string_view to_string(NormalizationKind k) noexcept {
  switch (k) {
    case NormalizationKind::None: return "none";
    case NormalizationKind::Standard: return "standard";
    case NormalizationKind::Robust: return "robust";
    case NormalizationKind::SecondMoment: return "second-moment";
  }
  return "?";
}

std::string_view to_string(AggregationKind k) noexcept {
  switch (k) {
    case AggregationKind::Max: return "max";
    case AggregationKind::Min: return "min";
    case AggregationKind::Avg: return "avg";
    case AggregationKind::MaxAbs: return "max-abs";
  }
  return "?";
}

NormalizationKind parse_normalization(std::string_view text) {
  for (auto k : {NormalizationKind::None, NormalizationKind::Standard, NormalizationKind::Robust,
                 NormalizationKind::SecondMoment}) {
    if (to_string(k) == text) return k;
  }
  throw Error(Errc::ConfigError, "unknown normalization '" + std::string(text) + "'");
}

AggregationKind parse_aggregation(std::string_view text) {
  for (auto k : {AggregationKind::Max, AggregationKind::Min, AggregationKind::Avg, AggregationKind::MaxAbs}) {
    if (to_string(k) == text) return k;
  }
  throw Error(Errc::ConfigError, "unknown aggregator '" + std::string(text) + "'");
}

Strategy parse_strategy(std::string_view text) {
  for (auto s : {Strategy::NormEnsemble, Strategy::Autoweighted, Strategy::Supervised}) {
    if (to_string(s) == text) return s;
  }
  throw Error(Errc::ConfigError, "unknown strategy '" + std::string(text) + "'");
}

ValidationReport validate_bundle(const ExplanationSet& expl, const MaskSet* masks) {
  ValidationReport report;
  const Index n = expl.num_instances();

  if (!expl.shape.valid()) report.push_back("invalid explanation shape " + expl.shape.str());
  if (expl.methods.empty()) report.push_back("no explanation methods");
  if (expl.data.size() != expl.methods.size()) {
    report.push_back("method list and data stacks differ in count");
    return report;
  }
  std::unordered_set<std::string> seen;
  for (const auto& m : expl.methods) {
    if (!seen.insert(m).second) report.push_back("duplicate method identifier '" + m + "'");
  }
  {
    std::unordered_set<std::string> ids;
    for (const auto& id : expl.instance_ids) {
      if (!ids.insert(id).second) report.push_back("duplicate instance id '" + id + "'");
    }
  }

  for (std::size_t e = 0; e < expl.methods.size(); ++e) {
    const auto& block = expl.data[e];
    const auto& name = expl.methods[e];
    if (block.rows() != n) {
      report.push_back("method '" + name + "' has " + std::to_string(block.rows()) + " instances, expected " +
                       std::to_string(n));
    }
    if (block.cols() != expl.shape.size()) {
      report.push_back("method '" + name + "' shape mismatch: " + std::to_string(block.cols()) +
                       " values per instance, expected " + std::to_string(expl.shape.size()));
      continue;
    }
    if (!block.allFinite()) {
      // Report the first offending element only; one is enough to reject.
      const double* first = std::find_if(block.data(), block.data() + block.size(),
                                         [](double v) { return !std::isfinite(v); });
      const auto flat = static_cast<Index>(first - block.data());
      report.push_back("non-finite value at (" + name + ", " + std::to_string(flat / block.cols()) + ", " +
                       std::to_string(flat % block.cols()) + ")");
    }
  }

  if (masks != nullptr) {
    if (masks->height != expl.shape.height || masks->width != expl.shape.width ||
        masks->masks.cols() != expl.shape.spatial()) {
      report.push_back("mask/explanation shape mismatch: mask (" + std::to_string(masks->height) + ", " +
                       std::to_string(masks->width) + ") vs explanation (" + std::to_string(expl.shape.height) +
                       ", " + std::to_string(expl.shape.width) + ")");
    }
    if (masks->masks.rows() != n) {
      report.push_back("mask count " + std::to_string(masks->masks.rows()) + " differs from instance count " +
                       std::to_string(n));
    }
    const bool binary = (masks->masks.array() == 0.0 || masks->masks.array() == 1.0).all();
    if (!binary) report.push_back("non-binary mask value");
    if (masks->instance_ids != expl.instance_ids) report.push_back("mask instance ids misaligned with explanations");
  }
  return report;
}

void require_valid(const ExplanationSet& expl, const MaskSet* masks) {
  const auto report = validate_bundle(expl, masks);
  if (report.empty()) return;
  std::string joined;
  for (const auto& v : report) joined += (joined.empty() ? "" : "; ") + v;
  throw Error(Errc::ValidationError, joined);
}

double sorted_quantile(const std::vector<double>& sorted, double q) {
  if (sorted.empty()) throw Error(Errc::EmptyData, "quantile of empty range");
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

StatSummary summarize(const RowMatrixXd& values, const Shape& shape) {
  if (values.size() < 2) throw Error(Errc::EmptyData, "at least two values are needed for statistics");
  StatSummary s;
  std::tie(s.mean, s.std) = population_mean_std(values);

  std::vector<double> sorted(values.data(), values.data() + values.size());
  std::sort(sorted.begin(), sorted.end());
  s.median = sorted_quantile(sorted, 0.5);
  s.iqr = sorted_quantile(sorted, 0.75) - sorted_quantile(sorted, 0.25);

  s.per_channel_std.resize(shape.channels);
  const Index plane = shape.spatial();
  for (Index c = 0; c < shape.channels; ++c) {
    s.per_channel_std(c) = population_mean_std(values.middleCols(c * plane, plane)).second;
  }
  return s;
}

StatSummary compute_stats(const ExplanationSet& expl, std::string_view method) {
  return summarize(expl.method(method), expl.shape);
}

}  // namespace xaiens
