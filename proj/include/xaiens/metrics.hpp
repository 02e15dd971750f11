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

#ifndef XAIENS_METRICS_HPP
#define XAIENS_METRICS_HPP

#include <algorithm>
#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "xaiens/core_model.hpp"
#include "xaiens/oracles.hpp"

namespace xaiens {

using Warnings = std::vector<std::string>;

/// H x W map of sum over channels of |attribution|.
Eigen::ArrayXXd abs_channel_sum(const AttributionTensor& attr);

/// H x W map of the signed channel sum.
Eigen::ArrayXXd channel_sum(const AttributionTensor& attr);

/// 1 iff the largest pixel of abs_channel_sum(attr) lies inside the mask
/// (H*W values, row-major). Ties resolve to the first pixel; an all-zero map
/// adds a warning.
int pointing_game(const AttributionTensor& attr, const Eigen::Ref<const Eigen::RowVectorXd>& mask,
                  Warnings* warnings = nullptr);

/// Gini index of |x| sorted ascending: sum_i (2i - n - 1) a_(i) / (n sum a).
/// 0 for a uniform magnitude, (n-1)/n for a one-hot.
template <typename Derived>
double gini_index(const Eigen::DenseBase<Derived>& values) {
  std::vector<double> a(static_cast<std::size_t>(values.size()));
  Eigen::Index k = 0;
  const auto& v = values.derived();
  for (Eigen::Index j = 0; j < v.cols(); ++j)
    for (Eigen::Index i = 0; i < v.rows(); ++i) a[static_cast<std::size_t>(k++)] = std::abs(static_cast<double>(v(i, j)));
  std::sort(a.begin(), a.end());
  const auto n = static_cast<double>(a.size());
  double weighted = 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    weighted += (2.0 * static_cast<double>(i + 1) - n - 1.0) * a[i];
    total += a[i];
  }
  if (!(total > 0.0)) throw Error(Errc::AllZeroAttribution, "sparseness of an all-zero attribution");
  return weighted / (n * total);
}

/// Complexity score (higher is sparser). Throws Errc::AllZeroAttribution.
double sparseness_gini(const AttributionTensor& attr);

/// Single-window SSIM of two equally sized maps with C1 = (0.01 L)^2 and
/// C2 = (0.03 L)^2, L the joint value range. Two equal constant maps give 1.
double global_ssim(const Eigen::Ref<const Eigen::ArrayXXd>& a, const Eigen::Ref<const Eigen::ArrayXXd>& b);

struct PixelFlippingOptions {
  int steps = 10;
  double baseline = 0.0;
};

/// Mean over k = 1..steps of max(0, f(x_k) / f(x_0)), where x_k has the
/// k * H*W / steps most attributed pixels (all channels) set to the baseline.
/// Lower is more faithful. Throws Errc::NonPositiveInitialScore when
/// f(x_0) <= 0 and Errc::PreconditionViolation for steps outside [1, H*W].
double pixel_flipping(const AttributionTensor& attr, const AttributionTensor& input, Index label,
                      ModelOracle& model, const PixelFlippingOptions& opts = {}, Warnings* warnings = nullptr);

/// SSIM between the signed channel sums of `attr_true` and of the oracle's
/// explanation for a random class != label. Lower is better.
double random_logit(const AttributionTensor& attr_true, const AttributionTensor& input, Index label,
                    ExplainerOracle& explainer, Index num_classes, std::uint64_t seed);

struct LipschitzOptions {
  int samples = 10;
  /// Ball radius; <= 0 selects 0.1 * ||x|| / sqrt(C*H*W).
  double radius = 0.0;
};

struct LipschitzEstimate {
  double value = 0.0;
  std::vector<double> ratios;
};

/// max over uniform-ball perturbations x' of ||phi(x) - phi(x')|| / ||x - x'||,
/// with phi(x) = attr and phi(x') from the explainer.
LipschitzEstimate local_lipschitz_samples(const AttributionTensor& attr, const AttributionTensor& input, Index label,
                                          ExplainerOracle& explainer, const LipschitzOptions& opts,
                                          std::uint64_t seed);

double local_lipschitz(const AttributionTensor& attr, const AttributionTensor& input, Index label,
                       ExplainerOracle& explainer, const LipschitzOptions& opts, std::uint64_t seed);

enum class Metric { Faithfulness, Randomization, Robustness, Complexity, Localization };

inline constexpr std::array<Metric, 5> kAllMetrics = {Metric::Faithfulness, Metric::Randomization,
                                                      Metric::Robustness, Metric::Complexity,
                                                      Metric::Localization};

/// "fa", "ra", "ro", "co", "lo".
std::string_view metric_key(Metric m) noexcept;
Metric parse_metric(std::string_view key);

struct MetricSeries {
  Metric metric = Metric::Localization;
  std::vector<std::optional<double>> per_instance;
  double mean = 0.0;
  double std = 0.0;
  Index evaluated = 0;
  Index skipped = 0;
};

struct MetricReport {
  std::vector<std::string> instance_ids;
  std::vector<MetricSeries> series;
  Warnings warnings;

  const MetricSeries* find(Metric m) const;
};

/// Inputs the metrics read besides the attributions themselves.
struct EvaluationData {
  const RowMatrixXd* inputs = nullptr;   // N x C*H*W, needed by fa/ra/ro
  const std::vector<long>* labels = nullptr;
  const MaskSet* masks = nullptr;        // needed by lo
};

struct OracleSet {
  ModelOracle* model = nullptr;
  ExplainerOracle* explainer = nullptr;
};

struct EvaluateOptions {
  PixelFlippingOptions pixel_flipping;
  LipschitzOptions lipschitz;
  std::uint64_t seed = 0;
  int threads = 0;
};

/// Scores every instance on the selected metrics. Instances failing a metric
/// are skipped for it and counted; a metric with no successful instance
/// raises that failure. Missing oracles or data raise Errc::ConfigError.
MetricReport evaluate_all(const Shape& shape, const RowMatrixXd& attributions,
                          const std::vector<std::string>& instance_ids, const EvaluationData& data,
                          const OracleSet& oracles, const std::vector<Metric>& selection,
                          const EvaluateOptions& opts = {});

/// Per-instance seed derived from a run seed.
std::uint64_t instance_seed(std::uint64_t seed, Index instance) noexcept;

}  // namespace xaiens

#endif  // XAIENS_METRICS_HPP
