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

#include "xaiens/synthetic.hpp"

#include <cmath>
#include <random>

#include "xaiens/parallel.hpp"

namespace xaiens {
namespace {

struct Center {
  double h;
  double w;
};

Eigen::RowVectorXd blob(const Shape& s, Center c, double sigma) {
  Eigen::RowVectorXd out(s.size());
  for (Index ch = 0; ch < s.channels; ++ch) {
    for (Index h = 0; h < s.height; ++h) {
      for (Index w = 0; w < s.width; ++w) {
        const double d2 = (h - c.h) * (h - c.h) + (w - c.w) * (w - c.w);
        out((ch * s.height + h) * s.width + w) = std::exp(-d2 / (2 * sigma * sigma));
      }
    }
  }
  return out;
}

}  // namespace

SyntheticWorld::SyntheticWorld(const SyntheticConfig& config) : config_(config) {
  const Shape& s = config_.shape;
  const Index k = config_.classes;
  std::mt19937_64 rng(config_.seed);
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> uniform;

  const double sigma = std::max(1.0, static_cast<double>(std::min(s.height, s.width)) / 8.0);
  std::vector<Center> centers;
  for (Index c = 0; c < k; ++c) {
    centers.push_back({(0.2 + 0.6 * uniform(rng)) * static_cast<double>(s.height - 1),
                       (0.2 + 0.6 * uniform(rng)) * static_cast<double>(s.width - 1)});
  }

  RowMatrixXd weights(k, s.size());
  for (Index c = 0; c < k; ++c) {
    weights.row(c) = blob(s, centers[static_cast<std::size_t>(c)], sigma);
    for (Index j = 0; j < s.size(); ++j) weights(c, j) += 0.05 * normal(rng) - 0.02;
  }
  model_ = std::make_unique<LinearModel>(s, weights);
  for (int m = 0; m < config_.alt_models; ++m) {
    RowMatrixXd alt = weights;
    for (Index j = 0; j < alt.size(); ++j) alt.data()[j] += 0.1 * normal(rng);
    alt_models_.push_back(std::make_unique<LinearModel>(s, alt));
  }

  const Index n = config_.instances;
  inputs_.resize(n, s.size());
  masks_.height = s.height;
  masks_.width = s.width;
  masks_.masks.resize(n, s.spatial());
  for (Index i = 0; i < n; ++i) {
    const auto label = static_cast<long>(i % k);
    labels_.push_back(label);
    ids_.push_back("synthetic_" + std::to_string(i));
    const Center c = centers[static_cast<std::size_t>(label)];
    inputs_.row(i) = blob(s, c, sigma);
    for (Index j = 0; j < s.size(); ++j) inputs_(i, j) += 0.1 * normal(rng) + 0.2 * uniform(rng);
    for (Index h = 0; h < s.height; ++h) {
      for (Index w = 0; w < s.width; ++w) {
        masks_.masks(i, h * s.width + w) = std::hypot(h - c.h, w - c.w) <= 1.5 * sigma ? 1.0 : 0.0;
      }
    }
  }
  masks_.instance_ids = ids_;
}

const std::vector<std::string>& SyntheticWorld::method_names() {
  static const std::vector<std::string> names{"input_x_gradient", "saliency", "occlusion_4", "occlusion_8"};
  return names;
}

ExplanationSet SyntheticWorld::explain(LinearModel& model, const RowMatrixXd& inputs, int threads) const {
  const Shape& s = config_.shape;
  const Index n = inputs.rows();
  ExplanationSet out;
  out.shape = s;
  out.methods = method_names();
  out.instance_ids = ids_;
  out.data.assign(out.methods.size(), RowMatrixXd(n, s.size()));

  GradientExplainer saliency(model);
  OcclusionExplainer occlusion4(model, 4);
  OcclusionExplainer occlusion8(model, 8);
  std::vector<ExplainerOracle*> explainers{&model, &saliency, &occlusion4, &occlusion8};

  parallel_for(n, resolve_threads(threads), [&](Index i) {
    const Batch one{s, inputs.row(i)};
    const Index target = labels_[static_cast<std::size_t>(i)];
    for (std::size_t e = 0; e < explainers.size(); ++e) {
      out.data[e].row(i) = explain_batch(*explainers[e], one, target);
    }
  });
  return out;
}

ExplanationSet SyntheticWorld::explanations(int threads) const { return explain(*model_, inputs_, threads); }

PerturbationEvidence SyntheticWorld::compute_evidence(int threads) const {
  const Index n = inputs_.rows();
  std::mt19937_64 rng(config_.seed ^ 0xE71DE7CEull);
  std::normal_distribution<double> normal;
  const double scale = config_.noise * std::sqrt((inputs_.array() - inputs_.mean()).square().mean());

  PerturbationEvidence ev;
  ev.input_distances.resize(config_.perturbations, n);
  const auto& names = method_names();
  const ExplanationSet base = explain(*model_, inputs_, threads);
  for (std::size_t e = 0; e < names.size(); ++e) ev.methods[names[e]].baseline = base.data[e];

  for (int p = 0; p < config_.perturbations; ++p) {
    RowMatrixXd noisy = inputs_;
    for (Index j = 0; j < noisy.size(); ++j) noisy.data()[j] += scale * normal(rng);
    ev.input_distances.row(p) = (noisy - inputs_).rowwise().norm().transpose();
    const ExplanationSet explained = explain(*model_, noisy, threads);
    for (std::size_t e = 0; e < names.size(); ++e) ev.methods[names[e]].perturbed.push_back(explained.data[e]);
  }
  for (const auto& alt : alt_models_) {
    const ExplanationSet explained = explain(*alt, inputs_, threads);
    for (std::size_t e = 0; e < names.size(); ++e) ev.methods[names[e]].alt_models.push_back(explained.data[e]);
  }
  return ev;
}

Bundle SyntheticWorld::bundle(bool with_evidence, int threads) const {
  Bundle b;
  b.explanations = explanations(threads);
  b.masks = masks_;
  b.inputs = inputs_;
  b.labels = labels_;
  if (with_evidence) b.evidence = compute_evidence(threads);
  b.oracle.num_classes = config_.classes;
  return b;
}

}  // namespace xaiens
