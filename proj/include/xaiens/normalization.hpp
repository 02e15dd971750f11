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

#ifndef XAIENS_NORMALIZATION_HPP
#define XAIENS_NORMALIZATION_HPP

#include <string>
#include <vector>

#include "xaiens/core_model.hpp"

namespace xaiens {

/// Spreads at or below this are treated as a constant explanation.
inline constexpr double kSpreadEpsilon = 1e-12;

enum class Precision { Float64, Float32 };

struct NormalizeOptions {
  /// Float32 rounds every output value through single precision.
  Precision precision = Precision::Float64;
  int threads = 0;
};

/// The affine map applied to one method: x' = (x - center) / scale.
struct NormalizationRecord {
  std::string method;
  NormalizationKind kind = NormalizationKind::None;
  double center = 0.0;
  double scale = 1.0;
  StatSummary stats;
};

struct Normalized {
  ExplanationSet set;
  std::vector<NormalizationRecord> records;
};

/// (x - mean) / std per method. Throws Errc::DegenerateSpread.
ExplanationSet normalize_standard(const ExplanationSet& expl, const NormalizeOptions& opts = {});

/// (x - median) / IQR per method. Throws Errc::DegenerateSpread.
ExplanationSet normalize_robust(const ExplanationSet& expl, const NormalizeOptions& opts = {});

/// x / mean_c(std_c) per method, where std_c is the population std of channel
/// c over all instances and pixels. No centering, so signs survive.
ExplanationSet normalize_second_moment(const ExplanationSet& expl, const NormalizeOptions& opts = {});

ExplanationSet normalize(const ExplanationSet& expl, NormalizationKind kind, const NormalizeOptions& opts = {});

/// As normalize(), also returning the statistics and affine map used for each
/// method.
Normalized normalize_with_records(const ExplanationSet& expl, NormalizationKind kind,
                                  const NormalizeOptions& opts = {});

}  // namespace xaiens

#endif  // XAIENS_NORMALIZATION_HPP
