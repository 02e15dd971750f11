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

#ifndef XAIENS_CORE_MODEL_HPP
#define XAIENS_CORE_MODEL_HPP

#include <Eigen/Core>

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "xaiens/error.hpp"

namespace xaiens {

using Index = Eigen::Index;

template <typename Scalar>
using RowMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowMatrixXd = RowMatrix<double>;

/// (C, H, W) extent of one attribution map.
struct Shape {
  Index channels = 1;
  Index height = 1;
  Index width = 1;

  Index size() const noexcept { return channels * height * width; }
  Index spatial() const noexcept { return height * width; }
  bool valid() const noexcept { return channels >= 1 && height >= 1 && width >= 1; }
  std::string str() const;

  friend bool operator==(const Shape&, const Shape&) = default;
};

/// One explanation of one instance, stored C-order as a flat array of C*H*W
/// values.
template <typename Scalar>
struct BasicAttribution {
  using Values = Eigen::Array<Scalar, Eigen::Dynamic, 1>;
  using ChannelMap = Eigen::Map<const RowMatrix<Scalar>>;

  Shape shape;
  Values values;

  BasicAttribution() = default;
  explicit BasicAttribution(const Shape& s) : shape(s), values(Values::Zero(s.size())) {}
  BasicAttribution(const Shape& s, Values v) : shape(s), values(std::move(v)) {
    if (values.size() != shape.size()) {
      throw Error(Errc::ShapeMismatch, "attribution of " + std::to_string(values.size()) +
                                           " values does not fit shape " + shape.str());
    }
  }

  Scalar& operator()(Index c, Index h, Index w) {
    return values((c * shape.height + h) * shape.width + w);
  }
  Scalar operator()(Index c, Index h, Index w) const {
    return values((c * shape.height + h) * shape.width + w);
  }

  /// H x W view of channel c.
  ChannelMap channel(Index c) const {
    return ChannelMap(values.data() + c * shape.spatial(), shape.height, shape.width);
  }

  bool all_finite() const { return values.allFinite(); }

  template <typename Other>
  BasicAttribution<Other> cast() const {
    return BasicAttribution<Other>(shape, values.template cast<Other>());
  }
};

using AttributionTensor = BasicAttribution<double>;

/// Explanations of N instances by several methods. `data[e]` holds method e
/// as an N x (C*H*W) matrix, one row per instance.
struct ExplanationSet {
  Shape shape;
  std::vector<std::string> methods;
  std::vector<RowMatrixXd> data;
  std::vector<std::string> instance_ids;

  Index num_instances() const noexcept { return static_cast<Index>(instance_ids.size()); }
  std::size_t num_methods() const noexcept { return methods.size(); }

  /// Throws Errc::UnknownMethod.
  std::size_t method_index(std::string_view name) const;
  const RowMatrixXd& method(std::string_view name) const { return data[method_index(name)]; }

  AttributionTensor tensor(std::size_t method, Index instance) const;

  /// Keeps only the listed instances (by position), preserving method order.
  ExplanationSet select(const std::vector<Index>& rows) const;

  static ExplanationSet from_tensors(std::vector<std::string> methods,
                                     const std::vector<std::vector<AttributionTensor>>& tensors,
                                     std::vector<std::string> instance_ids);
};

/// Binary segmentation masks, one row of H*W values per instance.
struct MaskSet {
  Index height = 0;
  Index width = 0;
  RowMatrixXd masks;
  std::vector<std::string> instance_ids;

  Index num_instances() const noexcept { return masks.rows(); }
  Index area(Index i) const;
  MaskSet select(const std::vector<Index>& rows) const;
};

struct StatSummary {
  double mean = 0.0;
  double std = 0.0;
  double median = 0.0;
  double iqr = 0.0;
  Eigen::VectorXd per_channel_std;

  double channel_avg_std() const { return per_channel_std.size() ? per_channel_std.mean() : 0.0; }
};

enum class Strategy { NormEnsemble, Autoweighted, Supervised };
enum class NormalizationKind { None, Standard, Robust, SecondMoment };
enum class AggregationKind { Max, Min, Avg, MaxAbs };

std::string_view to_string(Strategy s) noexcept;
std::string_view to_string(NormalizationKind k) noexcept;
std::string_view to_string(AggregationKind k) noexcept;

/// Accept the CLI spellings ("standard", "second-moment", "max-abs", ...).
/// Throws Errc::ConfigError.
NormalizationKind parse_normalization(std::string_view text);
AggregationKind parse_aggregation(std::string_view text);
Strategy parse_strategy(std::string_view text);

/// Ensembled explanations for every instance of a set, plus how they were
/// produced.
struct EnsembleResult {
  Shape shape;
  RowMatrixXd tensors;
  std::vector<std::string> instance_ids;
  Strategy strategy = Strategy::NormEnsemble;
  NormalizationKind normalization = NormalizationKind::None;
  std::optional<AggregationKind> aggregator;
  std::optional<std::vector<double>> weights;
  std::vector<std::string> warnings;

  Index num_instances() const noexcept { return tensors.rows(); }
  AttributionTensor tensor(Index i) const;
};

using ValidationReport = std::vector<std::string>;

/// Lists every broken invariant of the bundle. Empty iff usable.
ValidationReport validate_bundle(const ExplanationSet& expl, const MaskSet* masks = nullptr);

/// Throws Errc::ValidationError with the joined report if it is not empty.
void require_valid(const ExplanationSet& expl, const MaskSet* masks = nullptr);

/// Population mean/std, linear-interpolation median and IQR, and per-channel
/// population std of one method over all instances and features.
StatSummary compute_stats(const ExplanationSet& expl, std::string_view method);

/// Same statistics for a raw N x (C*H*W) block.
StatSummary summarize(const RowMatrixXd& values, const Shape& shape);

/// Quantile of an ascending-sorted range by linear interpolation between order
/// statistics (position q * (n - 1)).
double sorted_quantile(const std::vector<double>& sorted, double q);

}  // namespace xaiens

#endif  // XAIENS_CORE_MODEL_HPP
