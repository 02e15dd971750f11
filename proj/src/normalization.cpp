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

#include "xaiens/normalization.hpp"

#include <sstream>

#include "xaiens/parallel.hpp"

namespace xaiens {
namespace {

NormalizationRecord plan(const std::string& method, const RowMatrixXd& values, const Shape& shape,
                         NormalizationKind kind) {
  NormalizationRecord rec;
  rec.method = method;
  rec.kind = kind;
  rec.stats = summarize(values, shape);

  double spread = 1.0;
  const char* what = "";
  switch (kind) {
    case NormalizationKind::None:
      return rec;
    case NormalizationKind::Standard:
      rec.center = rec.stats.mean;
      spread = rec.stats.std;
      what = "standard deviation";
      break;
    case NormalizationKind::Robust:
      rec.center = rec.stats.median;
      spread = rec.stats.iqr;
      what = "interquartile range";
      break;
    case NormalizationKind::SecondMoment:
      rec.center = 0.0;
      spread = rec.stats.channel_avg_std();
      what = "channel-averaged standard deviation";
      break;
  }
  if (!(spread > kSpreadEpsilon)) {
    std::ostringstream os;
    os << "method '" << method << "' has " << what << " " << spread << " <= " << kSpreadEpsilon;
    throw Error(Errc::DegenerateSpread, os.str());
  }
  rec.scale = spread;
  return rec;
}

}  // namespace

Normalized normalize_with_records(const ExplanationSet& expl, NormalizationKind kind, const NormalizeOptions& opts) {
  Normalized out;
  out.set.shape = expl.shape;
  out.set.methods = expl.methods;
  out.set.instance_ids = expl.instance_ids;
  out.set.data.resize(expl.data.size());
  out.records.resize(expl.data.size());

  // Methods are independent; each record and block is written by one worker.
  parallel_for(static_cast<Index>(expl.data.size()), resolve_threads(opts.threads), [&](Index e) {
    const auto k = static_cast<std::size_t>(e);
    const auto& rec = out.records[k] = plan(expl.methods[k], expl.data[k], expl.shape, kind);
    RowMatrixXd block = kind == NormalizationKind::None
                            ? expl.data[k]
                            : RowMatrixXd((expl.data[k].array() - rec.center) / rec.scale);
    if (opts.precision == Precision::Float32) block = block.cast<float>().cast<double>();
    out.set.data[k] = std::move(block);
  });
  return out;
}

ExplanationSet normalize(const ExplanationSet& expl, NormalizationKind kind, const NormalizeOptions& opts) {
  return normalize_with_records(expl, kind, opts).set;
}

ExplanationSet normalize_standard(const ExplanationSet& expl, const NormalizeOptions& opts) {
  return normalize(expl, NormalizationKind::Standard, opts);
}

ExplanationSet normalize_robust(const ExplanationSet& expl, const NormalizeOptions& opts) {
  return normalize(expl, NormalizationKind::Robust, opts);
}

ExplanationSet normalize_second_moment(const ExplanationSet& expl, const NormalizeOptions& opts) {
  return normalize(expl, NormalizationKind::SecondMoment, opts);
}

}  // namespace xaiens
