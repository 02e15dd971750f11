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

#include "xaiens/ensemble_supervised.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include "xaiens/normalization.hpp"
#include "xaiens/parallel.hpp"

namespace xaiens {

Eigen::VectorXd mask_weights(const MaskSet& masks, std::vector<std::string>* warnings) {
  const Index n = masks.num_instances();
  Eigen::VectorXd w(n);
  for (Index i = 0; i < n; ++i) {
    Index area = masks.area(i);
    if (area == 0) {
      if (warnings) warnings->push_back("empty mask for instance " + masks.instance_ids.at(static_cast<std::size_t>(i)) +
                                        "; area clamped to 1");
      area = 1;
    }
    w(i) = 1.0 / static_cast<double>(area);
  }
  if (n > 0) w /= w.mean();
  return w;
}

SupervisedDesign build_design(const ExplanationSet& expl, const MaskSet* masks, std::vector<std::string>* warnings) {
  if (masks == nullptr) throw Error(Errc::MissingMasks, "supervised ensembling needs segmentation masks");
  require_valid(expl, masks);

  const ExplanationSet scaled = normalize_second_moment(expl);
  const Index width = expl.shape.size();
  SupervisedDesign design;
  design.X.resize(expl.num_instances(), width * static_cast<Index>(expl.num_methods()));
  for (std::size_t e = 0; e < scaled.num_methods(); ++e) {
    design.X.middleCols(static_cast<Index>(e) * width, width) = scaled.data[e];
  }
  design.Y = masks->masks;
  design.weights = mask_weights(*masks, warnings);
  design.instance_ids = expl.instance_ids;
  return design;
}

std::vector<FoldRecord> make_folds(Index n, const Split& split) {
  std::vector<FoldRecord> folds;
  if (const auto* kf = std::get_if<KFold>(&split)) {
    if (kf->folds < 2) throw Error(Errc::PreconditionViolation, "k-fold needs at least 2 folds");
    if (n < kf->folds) {
      throw Error(Errc::TooFewInstances, std::to_string(n) + " instances for " + std::to_string(kf->folds) + " folds");
    }
    const Index k = kf->folds;
    Index start = 0;
    for (Index f = 0; f < k; ++f) {
      const Index size = n / k + (f < n % k ? 1 : 0);
      FoldRecord rec;
      for (Index i = 0; i < n; ++i) {
        (i >= start && i < start + size ? rec.predict : rec.train).push_back(i);
      }
      start += size;
      folds.push_back(std::move(rec));
    }
    return folds;
  }

  const auto& ho = std::get<Holdout>(split);
  if (!(ho.test_fraction > 0.0 && ho.test_fraction < 1.0)) {
    throw Error(Errc::PreconditionViolation, "holdout test fraction must lie in (0, 1)");
  }
  if (!ho.labels.empty() && static_cast<Index>(ho.labels.size()) != n) {
    throw Error(Errc::DimensionMismatch, "holdout labels do not cover every instance");
  }
  // Group by class (a single group without labels); the tail of each group is held out.
  std::map<long, std::vector<Index>> groups;
  for (Index i = 0; i < n; ++i) groups[ho.labels.empty() ? 0 : ho.labels[static_cast<std::size_t>(i)]].push_back(i);
  FoldRecord rec;
  std::vector<bool> test(static_cast<std::size_t>(n), false);
  for (const auto& [label, members] : groups) {
    const auto held = static_cast<std::size_t>(std::llround(ho.test_fraction * static_cast<double>(members.size())));
    for (std::size_t m = members.size() - std::min(held, members.size()); m < members.size(); ++m) {
      test[static_cast<std::size_t>(members[m])] = true;
    }
  }
  for (Index i = 0; i < n; ++i) {
    if (!test[static_cast<std::size_t>(i)]) rec.train.push_back(i);
    rec.predict.push_back(i);
  }
  if (rec.train.empty() || rec.train.size() == static_cast<std::size_t>(n)) {
    throw Error(Errc::TooFewInstances, "holdout split leaves an empty train or test set");
  }
  folds.push_back(std::move(rec));
  return folds;
}

std::vector<double> radial_profile(const RowMatrixXd& maps, Index height, Index width) {
  const Eigen::RowVectorXd mean = maps.colwise().mean();
  const double ch = 0.5 * static_cast<double>(height - 1);
  const double cw = 0.5 * static_cast<double>(width - 1);
  std::vector<double> sum;
  std::vector<Index> count;
  for (Index h = 0; h < height; ++h) {
    for (Index w = 0; w < width; ++w) {
      const auto bin = static_cast<std::size_t>(std::floor(std::hypot(h - ch, w - cw)));
      if (bin >= sum.size()) {
        sum.resize(bin + 1, 0.0);
        count.resize(bin + 1, 0);
      }
      sum[bin] += mean(h * width + w);
      ++count[bin];
    }
  }
  for (std::size_t b = 0; b < sum.size(); ++b) sum[b] = count[b] ? sum[b] / static_cast<double>(count[b]) : 0.0;
  return sum;
}

SupervisedOutput supervised_xai(const ExplanationSet& expl, const MaskSet* masks, const SupervisedOptions& opts) {
  SupervisedOutput out;
  auto& result = out.ensemble;
  const SupervisedDesign design = build_design(expl, masks, &result.warnings);
  const Index n = design.X.rows();

  out.folds = make_folds(n, opts.split);
  out.fold_of.assign(static_cast<std::size_t>(n), 0);
  out.in_sample.assign(static_cast<std::size_t>(n), false);
  for (std::size_t f = 0; f < out.folds.size(); ++f) {
    const auto& rec = out.folds[f];
    for (Index i : rec.predict) {
      out.fold_of[static_cast<std::size_t>(i)] = f;
      out.in_sample[static_cast<std::size_t>(i)] = std::binary_search(rec.train.begin(), rec.train.end(), i);
    }
  }
  if (std::holds_alternative<KFold>(opts.split)) {
    for (std::size_t i = 0; i < out.in_sample.size(); ++i) {
      if (out.in_sample[i]) throw Error(Errc::PreconditionViolation, "fold bookkeeping leaks instance " + std::to_string(i));
    }
  }

  RowMatrixXd raw(n, design.Y.cols());
  parallel_for(static_cast<Index>(out.folds.size()), resolve_threads(opts.threads), [&](Index f) {
    const auto& rec = out.folds[static_cast<std::size_t>(f)];
    const auto train = static_cast<Index>(rec.train.size());
    krr::Matrix<double> X(train, design.X.cols());
    krr::Matrix<double> Y(train, design.Y.cols());
    Eigen::VectorXd w(train);
    for (Index r = 0; r < train; ++r) {
      const Index src = rec.train[static_cast<std::size_t>(r)];
      X.row(r) = design.X.row(src);
      Y.row(r) = design.Y.row(src);
      w(r) = opts.mask_area_weights ? design.weights(src) : 1.0;
    }
    // Rescale on the training rows only so held-out masks cannot shift the fit.
    w /= w.mean();
    const auto model = krr::krr_fit(X, Y, opts.kernel, opts.ridge, w, opts.fit);

    krr::Matrix<double> query(static_cast<Index>(rec.predict.size()), design.X.cols());
    for (std::size_t r = 0; r < rec.predict.size(); ++r) query.row(static_cast<Index>(r)) = design.X.row(rec.predict[r]);
    const krr::Matrix<double> pred = krr::krr_predict(model, query);
    for (std::size_t r = 0; r < rec.predict.size(); ++r) raw.row(rec.predict[r]) = pred.row(static_cast<Index>(r));
  });

  const auto outside = (raw.array() < 0.0 || raw.array() > 1.0).count();
  out.out_of_range_fraction = raw.size() ? static_cast<double>(outside) / static_cast<double>(raw.size()) : 0.0;

  result.shape = Shape{1, expl.shape.height, expl.shape.width};
  result.instance_ids = expl.instance_ids;
  result.strategy = Strategy::Supervised;
  result.normalization = NormalizationKind::SecondMoment;
  result.tensors = raw.array().max(0.0).min(1.0).matrix();

  if (out.out_of_range_fraction > 0.0) {
    std::ostringstream os;
    os << "clamped " << out.out_of_range_fraction * 100.0 << "% of predicted values into [0, 1]";
    result.warnings.push_back(os.str());
  }
  if (opts.center_bias_audit) {
    out.radial_profile = radial_profile(result.tensors, expl.shape.height, expl.shape.width);
  }
  return out;
}

}  // namespace xaiens
