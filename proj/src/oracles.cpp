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

#include "xaiens/oracles.hpp"

#include <fcntl.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <atomic>
#include <chrono>
#include <fstream>
#include <sstream>
#include <thread>

#include "xaiens/npy.hpp"

namespace xaiens {

Eigen::MatrixXd predict_batch(ModelOracle& model, const Batch& inputs) {
  Eigen::MatrixXd logits = model.predict(inputs);
  if (logits.rows() != inputs.size() || logits.cols() != model.num_classes()) {
    throw Error(Errc::OracleFailure, "model returned " + std::to_string(logits.rows()) + " x " +
                                         std::to_string(logits.cols()) + " logits, expected " +
                                         std::to_string(inputs.size()) + " x " + std::to_string(model.num_classes()));
  }
  if (!logits.allFinite()) throw Error(Errc::OracleFailure, "model returned non-finite logits");
  return logits;
}

RowMatrixXd explain_batch(ExplainerOracle& explainer, const Batch& inputs, Index target) {
  const Index classes = explainer.num_classes();
  if (target < 0 || (classes > 0 && target >= classes)) {
    throw Error(Errc::PreconditionViolation,
                "target class " + std::to_string(target) + " outside [0, " + std::to_string(classes) + ")");
  }
  RowMatrixXd attr = explainer.explain(inputs, target);
  if (attr.rows() != inputs.data.rows() || attr.cols() != inputs.data.cols()) {
    throw Error(Errc::OracleFailure, "explainer returned " + std::to_string(attr.rows()) + " x " +
                                         std::to_string(attr.cols()) + " attributions, expected " +
                                         std::to_string(inputs.data.rows()) + " x " +
                                         std::to_string(inputs.data.cols()));
  }
  if (!attr.allFinite()) throw Error(Errc::OracleFailure, "explainer returned non-finite attributions");
  return attr;
}

LinearModel::LinearModel(Shape shape, RowMatrixXd weights) : shape_(shape), weights_(std::move(weights)) {
  if (weights_.cols() != shape_.size()) {
    throw Error(Errc::DimensionMismatch, "linear weights have " + std::to_string(weights_.cols()) +
                                             " features, shape " + shape_.str() + " needs " +
                                             std::to_string(shape_.size()));
  }
  if (weights_.rows() < 1) throw Error(Errc::SingleClassModel, "linear model without classes");
}

LinearModel LinearModel::from_npy(const std::filesystem::path& path) {
  const NpyArray a = read_npy(path);
  if (a.shape.size() != 4) {
    throw Error(Errc::DimensionMismatch, path.string() + ": linear weights must be (classes, C, H, W)");
  }
  const Shape shape{static_cast<Index>(a.shape[1]), static_cast<Index>(a.shape[2]), static_cast<Index>(a.shape[3])};
  return LinearModel(shape, a.to_matrix());
}

Eigen::MatrixXd LinearModel::predict(const Batch& inputs) {
  if (inputs.data.cols() != shape_.size()) throw Error(Errc::DimensionMismatch, "input shape mismatch");
  return inputs.data * weights_.transpose();
}

RowMatrixXd LinearModel::explain(const Batch& inputs, Index target) {
  if (inputs.data.cols() != shape_.size()) throw Error(Errc::DimensionMismatch, "input shape mismatch");
  return (inputs.data.array().rowwise() * weights_.row(target).array()).matrix();
}

RowMatrixXd GradientExplainer::explain(const Batch& inputs, Index target) {
  return model_.weights().row(target).cwiseAbs().replicate(inputs.size(), 1);
}

RowMatrixXd OcclusionExplainer::explain(const Batch& inputs, Index target) {
  const Shape& s = inputs.shape;
  const Index ph = (s.height + patch_ - 1) / patch_;
  const Index pw = (s.width + patch_ - 1) / patch_;
  RowMatrixXd attr = RowMatrixXd::Zero(inputs.size(), s.size());
  Batch occluded{s, RowMatrixXd(ph * pw, s.size())};
  for (Index i = 0; i < inputs.size(); ++i) {
    Batch single{s, inputs.data.row(i)};
    const double reference = predict_batch(model_, single)(0, target);
    for (Index by = 0; by < ph; ++by) {
      for (Index bx = 0; bx < pw; ++bx) {
        auto row = occluded.data.row(by * pw + bx);
        row = inputs.data.row(i);
        for (Index c = 0; c < s.channels; ++c) {
          for (Index y = by * patch_; y < std::min((by + 1) * patch_, s.height); ++y) {
            for (Index x = bx * patch_; x < std::min((bx + 1) * patch_, s.width); ++x) {
              row((c * s.height + y) * s.width + x) = baseline_;
            }
          }
        }
      }
    }
    const Eigen::MatrixXd logits = predict_batch(model_, occluded);
    for (Index by = 0; by < ph; ++by) {
      for (Index bx = 0; bx < pw; ++bx) {
        const double drop = reference - logits(by * pw + bx, target);
        for (Index c = 0; c < s.channels; ++c) {
          for (Index y = by * patch_; y < std::min((by + 1) * patch_, s.height); ++y) {
            for (Index x = bx * patch_; x < std::min((bx + 1) * patch_, s.width); ++x) {
              attr(i, (c * s.height + y) * s.width + x) = drop;
            }
          }
        }
      }
    }
  }
  return attr;
}

namespace {

std::string substitute(std::string text, const std::string& key, const std::string& value) {
  for (auto pos = text.find(key); pos != std::string::npos; pos = text.find(key, pos + value.size())) {
    text.replace(pos, key.size(), value);
  }
  return text;
}

std::string read_tail(const std::filesystem::path& path, std::size_t limit = 2000) {
  std::ifstream in(path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return text.size() > limit ? text.substr(text.size() - limit) : text;
}

/// Scratch directory removed on scope exit.
class ScratchDir {
 public:
  ScratchDir() {
    static std::atomic<unsigned long> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("xaiens-oracle-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~ScratchDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  ScratchDir(const ScratchDir&) = delete;
  ScratchDir& operator=(const ScratchDir&) = delete;
  const std::filesystem::path& path() const noexcept { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace

RowMatrixXd run_external(const CommandSpec& spec, const Batch& request, std::optional<Index> target,
                         std::vector<std::size_t>* response_shape) {
  ScratchDir scratch;
  const auto input = scratch.path() / "request.npy";
  const auto output = scratch.path() / "response.npy";
  const auto log = scratch.path() / "stderr.log";

  write_npy(input, NpyArray::from_matrix({static_cast<std::size_t>(request.size()),
                                          static_cast<std::size_t>(request.shape.channels),
                                          static_cast<std::size_t>(request.shape.height),
                                          static_cast<std::size_t>(request.shape.width)},
                                         request.data));
  std::string command = substitute(spec.command_template, "{input}", input.string());
  command = substitute(command, "{output}", output.string());
  if (target) command = substitute(command, "{target}", std::to_string(*target));

  const pid_t pid = ::fork();
  if (pid < 0) throw Error(Errc::OracleFailure, "fork failed");
  if (pid == 0) {
    ::setpgid(0, 0);
    const int fd = ::open(log.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
    if (fd >= 0) {
      ::dup2(fd, STDOUT_FILENO);
      ::dup2(fd, STDERR_FILENO);
      ::close(fd);
    }
    ::execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
    ::_exit(127);
  }

  const auto deadline = std::chrono::steady_clock::now() + std::chrono::duration<double>(spec.timeout_seconds);
  int status = 0;
  for (;;) {
    const pid_t done = ::waitpid(pid, &status, WNOHANG);
    if (done == pid) break;
    if (done < 0) throw Error(Errc::OracleFailure, "waitpid failed for '" + command + "'");
    if (std::chrono::steady_clock::now() > deadline) {
      ::kill(-pid, SIGKILL);
      ::waitpid(pid, &status, 0);
      throw Error(Errc::OracleFailure, "'" + command + "' timed out after " + std::to_string(spec.timeout_seconds) +
                                           " s; output: " + read_tail(log));
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(2));
  }
  if (!WIFEXITED(status) || WEXITSTATUS(status) != 0) {
    const int code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    throw Error(Errc::OracleFailure,
                "'" + command + "' exited with status " + std::to_string(code) + "; output: " + read_tail(log));
  }

  NpyArray response;
  try {
    response = read_npy(output);
  } catch (const Error& e) {
    throw Error(Errc::OracleFailure, "unreadable response: " + e.detail());
  }
  if (response_shape) *response_shape = response.shape;
  if (response.shape.empty() || response.shape[0] != static_cast<std::size_t>(request.size())) {
    throw Error(Errc::OracleFailure, "response does not have one row per request");
  }
  return response.to_matrix();
}

ExternalModel::ExternalModel(CommandSpec spec) : spec_(std::move(spec)) {
  if (spec_.num_classes < 2) throw Error(Errc::SingleClassModel, "external model must advertise >= 2 classes");
}

Eigen::MatrixXd ExternalModel::predict(const Batch& inputs) {
  std::lock_guard lock(mutex_);
  std::vector<std::size_t> shape;
  RowMatrixXd logits = run_external(spec_, inputs, std::nullopt, &shape);
  if (shape.size() != 2 || shape[1] != static_cast<std::size_t>(spec_.num_classes)) {
    throw Error(Errc::OracleFailure, "model response must be (N, " + std::to_string(spec_.num_classes) + ")");
  }
  return logits;
}

RowMatrixXd ExternalExplainer::explain(const Batch& inputs, Index target) {
  std::lock_guard lock(mutex_);
  std::vector<std::size_t> shape;
  RowMatrixXd attr = run_external(spec_, inputs, target, &shape);
  const std::vector<std::size_t> expected{static_cast<std::size_t>(inputs.size()),
                                          static_cast<std::size_t>(inputs.shape.channels),
                                          static_cast<std::size_t>(inputs.shape.height),
                                          static_cast<std::size_t>(inputs.shape.width)};
  if (shape != expected) throw Error(Errc::OracleFailure, "explainer response shape does not match the request");
  return attr;
}

}  // namespace xaiens
