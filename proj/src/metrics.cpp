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

#include "xaiens/metrics.hpp"

#include <cmath>
#include <exception>
#include <numeric>
#include <random>

#include "xaiens/numeric.hpp"
#include "xaiens/parallel.hpp"

namespace xaiens {

Eigen::ArrayXXd abs_channel_sum(const AttributionTensor& attr) {
  Eigen::ArrayXXd out = Eigen::ArrayXXd::Zero(attr.shape.height, attr.shape.width);
  for (Index c = 0; c < attr.shape.channels; ++c) out += attr.channel(c).array().abs();
  return out;
}

Eigen::ArrayXXd channel_sum(const AttributionTensor& attr) {
  Eigen::ArrayXXd out = Eigen::ArrayXXd::Zero(attr.shape.height, attr.shape.width);
  for (Index c = 0; c < attr.shape.channels; ++c) out += attr.channel(c).array();
  return out;
}

namespace {

/// Row-major flattening of an H x W map.
std::vector<double> flatten(const Eigen::ArrayXXd& map) {
  std::vector<double> out(static_cast<std::size_t>(map.size()));
  for (Index h = 0; h < map.rows(); ++h)
    for (Index w = 0; w < map.cols(); ++w) out[static_cast<std::size_t>(h * map.cols() + w)] = map(h, w);
  return out;
}

/// ||a - b||_2 summed in index order, so equal-scaled operands give exactly
/// scaled results regardless of how the rows happen to be aligned in memory.
template <typename A, typename B>
double distance(const Eigen::MatrixBase<A>& a, const Eigen::MatrixBase<B>& b) {
  double sum = 0.0;
  for (Index j = 0; j < a.size(); ++j) {
    const double d = a(j) - b(j);
    sum += d * d;
  }
  return std::sqrt(sum);
}

Batch single(const AttributionTensor& input) { return Batch{input.shape, input.values.matrix().transpose()}; }

}  // namespace

int pointing_game(const AttributionTensor& attr, const Eigen::Ref<const Eigen::RowVectorXd>& mask,
                  Warnings* warnings) {
  if (mask.size() != attr.shape.spatial()) {
    throw Error(Errc::ShapeMismatch, "mask has " + std::to_string(mask.size()) + " pixels, attribution " +
                                         std::to_string(attr.shape.spatial()));
  }
  const auto scores = flatten(abs_channel_sum(attr));
  const auto best = std::max_element(scores.begin(), scores.end());  // first maximum
  if (*best == 0.0 && warnings) warnings->push_back("AllZeroAttribution: pointing game fell back to the first pixel");
  return mask(best - scores.begin()) > 0.5 ? 1 : 0;
}

double sparseness_gini(const AttributionTensor& attr) { return gini_index(attr.values); }

double global_ssim(const Eigen::Ref<const Eigen::ArrayXXd>& a, const Eigen::Ref<const Eigen::ArrayXXd>& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw Error(Errc::ShapeMismatch, "SSIM of differently sized maps");
  const double range = std::max(a.maxCoeff(), b.maxCoeff()) - std::min(a.minCoeff(), b.minCoeff());
  if (range == 0.0) return 1.0;  // both maps are the same constant
  const double c1 = (0.01 * range) * (0.01 * range);
  const double c2 = (0.03 * range) * (0.03 * range);
  const auto n = static_cast<double>(a.size());
  const double mu_a = a.sum() / n;
  const double mu_b = b.sum() / n;
  const double var_a = (a - mu_a).square().sum() / n;
  const double var_b = (b - mu_b).square().sum() / n;
  const double cov = ((a - mu_a) * (b - mu_b)).sum() / n;
  return ((2 * mu_a * mu_b + c1) * (2 * cov + c2)) / ((mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2));
}

double pixel_flipping(const AttributionTensor& attr, const AttributionTensor& input, Index label,
                      ModelOracle& model, const PixelFlippingOptions& opts, Warnings* warnings) {
  const Shape& s = input.shape;
  if (!(attr.shape == s)) throw Error(Errc::ShapeMismatch, "attribution and input shapes differ");
  const Index pixels = s.spatial();
  if (opts.steps < 1 || opts.steps > pixels) {
    throw Error(Errc::PreconditionViolation,
                "pixel flipping steps must lie in [1, " + std::to_string(pixels) + "], got " + std::to_string(opts.steps));
  }

  const auto scores = flatten(abs_channel_sum(attr));
  std::vector<Index> order(static_cast<std::size_t>(pixels));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Index l, Index r) {
    return scores[static_cast<std::size_t>(l)] > scores[static_cast<std::size_t>(r)];
  });
  if (std::all_of(scores.begin(), scores.end(), [](double v) { return v == 0.0; }) && warnings) {
    warnings->push_back("AllZeroAttribution: pixels flipped in index order");
  }

  Batch curve{s, RowMatrixXd(opts.steps + 1, s.size())};
  curve.data.row(0) = input.values.matrix().transpose();
  Index flipped = 0;
  for (Index k = 1; k <= opts.steps; ++k) {
    curve.data.row(k) = curve.data.row(k - 1);
    const Index upto = k * pixels / opts.steps;
    for (; flipped < upto; ++flipped) {
      const Index p = order[static_cast<std::size_t>(flipped)];
      for (Index c = 0; c < s.channels; ++c) curve.data(k, c * pixels + p) = opts.baseline;
    }
  }

  const Eigen::MatrixXd logits = predict_batch(model, curve);
  if (label < 0 || label >= logits.cols()) throw Error(Errc::PreconditionViolation, "label outside the model's classes");
  const double initial = logits(0, label);
  if (!(initial > 0.0)) {
    throw Error(Errc::NonPositiveInitialScore, "initial class score " + std::to_string(initial) + " is not positive");
  }
  double total = 0.0;
  for (Index k = 1; k <= opts.steps; ++k) total += std::max(0.0, logits(k, label) / initial);
  return total / static_cast<double>(opts.steps);
}

double random_logit(const AttributionTensor& attr_true, const AttributionTensor& input, Index label,
                    ExplainerOracle& explainer, Index num_classes, std::uint64_t seed) {
  if (num_classes < 2) throw Error(Errc::SingleClassModel, "random logit needs at least two classes");
  if (label < 0 || label >= num_classes) throw Error(Errc::PreconditionViolation, "label outside the model's classes");
  std::mt19937_64 rng(seed);
  Index other = std::uniform_int_distribution<Index>(0, num_classes - 2)(rng);
  if (other >= label) ++other;

  const RowMatrixXd alt = explain_batch(explainer, single(input), other);
  const AttributionTensor alt_attr(input.shape, alt.row(0).transpose().array());
  return global_ssim(channel_sum(attr_true), channel_sum(alt_attr));
}

LipschitzEstimate local_lipschitz_samples(const AttributionTensor& attr, const AttributionTensor& input, Index label,
                                          ExplainerOracle& explainer, const LipschitzOptions& opts,
                                          std::uint64_t seed) {
  if (opts.samples < 1) throw Error(Errc::PreconditionViolation, "local Lipschitz needs at least one sample");
  const Index n = input.shape.size();
  double radius = opts.radius;
  if (!(radius > 0.0)) radius = 0.1 * input.values.matrix().norm() / std::sqrt(static_cast<double>(n));
  if (!(radius > 0.0)) throw Error(Errc::PreconditionViolation, "perturbation radius must be positive");

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> uniform;
  Batch perturbed{input.shape, RowMatrixXd(opts.samples, n)};
  const Eigen::RowVectorXd x = input.values.matrix().transpose();
  for (Index s = 0; s < opts.samples; ++s) {
    Eigen::RowVectorXd delta(n);
    double norm = 0.0;
    while (norm == 0.0) {
      for (Index j = 0; j < n; ++j) delta(j) = normal(rng);
      norm = delta.norm();
    }
    const double r = radius * std::pow(uniform(rng), 1.0 / static_cast<double>(n));
    perturbed.data.row(s) = x + delta * (r / norm);
  }

  const RowMatrixXd explained = explain_batch(explainer, perturbed, label);
  const Eigen::RowVectorXd phi = attr.values.matrix().transpose();
  LipschitzEstimate est;
  for (Index s = 0; s < opts.samples; ++s) {
    const double dx = distance(x, perturbed.data.row(s));
    if (dx == 0.0) continue;  // perturbation vanished in rounding
    est.ratios.push_back(distance(phi, explained.row(s)) / dx);
  }
  if (est.ratios.empty()) throw Error(Errc::PreconditionViolation, "every perturbation rounded to the input");
  est.value = *std::max_element(est.ratios.begin(), est.ratios.end());
  return est;
}

double local_lipschitz(const AttributionTensor& attr, const AttributionTensor& input, Index label,
                       ExplainerOracle& explainer, const LipschitzOptions& opts, std::uint64_t seed) {
  return local_lipschitz_samples(attr, input, label, explainer, opts, seed).value;
}

std::string_view metric_key(Metric m) noexcept {
  switch (m) {
    case Metric::Faithfulness: return "fa";
    case Metric::Randomization: return "ra";
    case Metric::Robustness: return "ro";
    case Metric::Complexity: return "co";
    case Metric::Localization: return "lo";
  }
  return "?";
}

Metric parse_metric(std::string_view key) {
  for (Metric m : kAllMetrics) {
    if (metric_key(m) == key) return m;
  }
  throw Error(Errc::ConfigError, "unknown metric '" + std::string(key) + "' (expected fa, ra, ro, co, lo)");
}

const MetricSeries* MetricReport::find(Metric m) const {
  for (const auto& s : series) {
    if (s.metric == m) return &s;
  }
  return nullptr;
}

std::uint64_t instance_seed(std::uint64_t seed, Index instance) noexcept {
  // splitmix64 finalizer
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (static_cast<std::uint64_t>(instance) + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

namespace {

void require(bool ok, Metric m, const std::string& what) {
  if (!ok) throw Error(Errc::ConfigError, "metric '" + std::string(metric_key(m)) + "' requires " + what);
}

}  // namespace

MetricReport evaluate_all(const Shape& shape, const RowMatrixXd& attributions,
                          const std::vector<std::string>& instance_ids, const EvaluationData& data,
                          const OracleSet& oracles, const std::vector<Metric>& selection,
                          const EvaluateOptions& opts) {
  const Index n = attributions.rows();
  if (attributions.cols() != shape.size()) throw Error(Errc::ShapeMismatch, "attributions do not match shape");
  if (static_cast<Index>(instance_ids.size()) != n) throw Error(Errc::DimensionMismatch, "instance ids misaligned");

  Index num_classes = 0;
  if (oracles.model) num_classes = oracles.model->num_classes();
  if (num_classes == 0 && oracles.explainer) num_classes = oracles.explainer->num_classes();

  for (Metric m : selection) {
    const bool needs_input = m == Metric::Faithfulness || m == Metric::Randomization || m == Metric::Robustness;
    if (needs_input) {
      require(data.inputs != nullptr, m, "model inputs in the bundle");
      require(data.labels != nullptr, m, "labels in the bundle");
      require(data.inputs->rows() == n && data.inputs->cols() == shape.size(), m, "inputs shaped like the attributions");
      require(static_cast<Index>(data.labels->size()) == n, m, "one label per instance");
    }
    if (m == Metric::Faithfulness) require(oracles.model != nullptr, m, "a model oracle");
    if (m == Metric::Randomization) {
      require(oracles.explainer != nullptr, m, "an explainer oracle");
      require(num_classes > 0, m, "a known class count (model oracle or num_classes)");
    }
    if (m == Metric::Robustness) require(oracles.explainer != nullptr, m, "an explainer oracle");
    if (m == Metric::Localization) {
      require(data.masks != nullptr, m, "segmentation masks");
      require(data.masks->num_instances() == n && data.masks->masks.cols() == shape.spatial(), m,
              "masks aligned with the attributions");
    }
  }

  const std::size_t metric_count = selection.size();
  std::vector<std::vector<std::optional<double>>> values(metric_count,
                                                         std::vector<std::optional<double>>(static_cast<std::size_t>(n)));
  std::vector<std::vector<std::exception_ptr>> failures(metric_count,
                                                        std::vector<std::exception_ptr>(static_cast<std::size_t>(n)));
  std::vector<Warnings> instance_warnings(static_cast<std::size_t>(n));

  parallel_for(n, resolve_threads(opts.threads), [&](Index i) {
    const auto ui = static_cast<std::size_t>(i);
    const AttributionTensor attr(shape, attributions.row(i).transpose().array());
    std::optional<AttributionTensor> input;
    if (data.inputs) input.emplace(shape, data.inputs->row(i).transpose().array());
    const Index label = data.labels ? (*data.labels)[ui] : 0;
    const std::uint64_t seed = instance_seed(opts.seed, i);
    Warnings& warn = instance_warnings[ui];

    for (std::size_t k = 0; k < metric_count; ++k) {
      try {
        switch (selection[k]) {
          case Metric::Faithfulness:
            values[k][ui] = pixel_flipping(attr, *input, label, *oracles.model, opts.pixel_flipping, &warn);
            break;
          case Metric::Randomization:
            values[k][ui] = random_logit(attr, *input, label, *oracles.explainer, num_classes, seed);
            break;
          case Metric::Robustness:
            values[k][ui] = local_lipschitz(attr, *input, label, *oracles.explainer, opts.lipschitz, seed ^ 0x5bd1e995u);
            break;
          case Metric::Complexity:
            values[k][ui] = sparseness_gini(attr);
            break;
          case Metric::Localization:
            values[k][ui] = pointing_game(attr, data.masks->masks.row(i), &warn);
            break;
        }
      } catch (const Error& e) {
        failures[k][ui] = std::current_exception();
        warn.push_back(std::string(metric_key(selection[k])) + " skipped instance " + instance_ids[ui] + ": " +
                       e.what());
      }
    }
  });

  MetricReport report;
  report.instance_ids = instance_ids;
  for (std::size_t i = 0; i < instance_warnings.size(); ++i) {
    for (auto& w : instance_warnings[i]) report.warnings.push_back(std::move(w));
  }
  for (std::size_t k = 0; k < metric_count; ++k) {
    MetricSeries s;
    s.metric = selection[k];
    s.per_instance = std::move(values[k]);
    std::vector<double> ok;
    for (const auto& v : s.per_instance) {
      if (v) ok.push_back(*v);
    }
    s.evaluated = static_cast<Index>(ok.size());
    s.skipped = n - s.evaluated;
    if (n > 0 && ok.empty()) {
      for (const auto& f : failures[k]) {
        if (f) std::rethrow_exception(f);
      }
    }
    if (!ok.empty()) {
      std::tie(s.mean, s.std) = population_mean_std(Eigen::Map<const Eigen::VectorXd>(ok.data(), static_cast<Index>(ok.size())));
    }
    report.series.push_back(std::move(s));
  }
  return report;
}

}  // namespace xaiens
