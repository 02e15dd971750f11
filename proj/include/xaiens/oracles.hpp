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

#ifndef XAIENS_ORACLES_HPP
#define XAIENS_ORACLES_HPP

#include <filesystem>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "xaiens/core_model.hpp"

namespace xaiens {

/// N inputs of one shape, one flattened (C, H, W) input per row.
struct Batch {
  Shape shape;
  RowMatrixXd data;

  Index size() const noexcept { return data.rows(); }
};

/// Stand-in for a trained classifier.
class ModelOracle {
 public:
  virtual ~ModelOracle() = default;
  virtual Index num_classes() const = 0;
  /// Logits, N x num_classes().
  virtual Eigen::MatrixXd predict(const Batch& inputs) = 0;
};

/// Stand-in for an attribution method.
class ExplainerOracle {
 public:
  virtual ~ExplainerOracle() = default;
  /// Attributions of `target`, same layout as inputs.
  virtual RowMatrixXd explain(const Batch& inputs, Index target) = 0;
  /// Advertised class count, or 0 when unknown.
  virtual Index num_classes() const { return 0; }
};

/// Calls the oracle and checks the contract. Throws Errc::OracleFailure.
Eigen::MatrixXd predict_batch(ModelOracle& model, const Batch& inputs);

/// Calls the oracle and checks the contract. A target outside the advertised
/// classes is Errc::PreconditionViolation; a malformed answer is
/// Errc::OracleFailure.
RowMatrixXd explain_batch(ExplainerOracle& explainer, const Batch& inputs, Index target);

/// Linear classifier logit_k(x) = <W_k, x>. As an explainer it returns
/// input x gradient, W_target * x elementwise, whose sum is the logit.
class LinearModel final : public ModelOracle, public ExplainerOracle {
 public:
  /// `weights` is num_classes x (C*H*W).
  LinearModel(Shape shape, RowMatrixXd weights);

  /// Loads a (num_classes, C, H, W) array.
  static LinearModel from_npy(const std::filesystem::path& path);

  Index num_classes() const override { return weights_.rows(); }
  const Shape& shape() const noexcept { return shape_; }
  const RowMatrixXd& weights() const noexcept { return weights_; }

  Eigen::MatrixXd predict(const Batch& inputs) override;
  RowMatrixXd explain(const Batch& inputs, Index target) override;

 private:
  Shape shape_;
  RowMatrixXd weights_;
};

/// Saliency of a linear model: |W_target| broadcast to every input.
class GradientExplainer final : public ExplainerOracle {
 public:
  explicit GradientExplainer(const LinearModel& model) : model_(model) {}
  RowMatrixXd explain(const Batch& inputs, Index target) override;
  Index num_classes() const override { return model_.num_classes(); }

 private:
  const LinearModel& model_;
};

/// Occlusion: every feature of a patch x patch window gets the drop in the
/// target logit when the whole window (all channels) is set to `baseline`.
/// Costs one forward pass per window, like its model-agnostic counterparts.
class OcclusionExplainer final : public ExplainerOracle {
 public:
  OcclusionExplainer(ModelOracle& model, Index patch, double baseline = 0.0)
      : model_(model), patch_(patch), baseline_(baseline) {}
  RowMatrixXd explain(const Batch& inputs, Index target) override;
  Index num_classes() const override { return model_.num_classes(); }

 private:
  ModelOracle& model_;
  Index patch_;
  double baseline_;
};

/// External program speaking the file protocol: the request batch is written
/// as an (N, C, H, W) float64 NPY file, `{input}`, `{output}` and (for
/// explainers) `{target}` are substituted into the command template, the
/// command runs under /bin/sh, and the response NPY is read back.
struct CommandSpec {
  std::string command_template;
  double timeout_seconds = 60.0;
  /// Advertised class count (required for models).
  Index num_classes = 0;
};

/// Runs one command invocation. Captured stderr is included in failures.
/// Returns the parsed response. Throws Errc::OracleFailure.
RowMatrixXd run_external(const CommandSpec& spec, const Batch& request, std::optional<Index> target,
                         std::vector<std::size_t>* response_shape = nullptr);

/// One invocation in flight per instance.
class ExternalModel final : public ModelOracle {
 public:
  explicit ExternalModel(CommandSpec spec);
  Index num_classes() const override { return spec_.num_classes; }
  Eigen::MatrixXd predict(const Batch& inputs) override;

 private:
  CommandSpec spec_;
  std::mutex mutex_;
};

class ExternalExplainer final : public ExplainerOracle {
 public:
  explicit ExternalExplainer(CommandSpec spec) : spec_(std::move(spec)) {}
  RowMatrixXd explain(const Batch& inputs, Index target) override;
  Index num_classes() const override { return spec_.num_classes; }

 private:
  CommandSpec spec_;
  std::mutex mutex_;
};

}  // namespace xaiens

#endif  // XAIENS_ORACLES_HPP
