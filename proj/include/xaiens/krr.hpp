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

#ifndef XAIENS_KRR_HPP
#define XAIENS_KRR_HPP

// Weighted multi-output kernel ridge regression.
//
// The dual system solved by krr_fit is
//
//   (K + ridge * W^-1) A = Y,   W = diag(sample_weights),
//
// which is the dual of minimizing sum_i w_i ||y_i - f(x_i)||^2 + ridge ||f||^2.
// A heavier sample shrinks its diagonal regularizer and is fitted more closely.

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <sstream>
#include <string>

#include "xaiens/error.hpp"

namespace xaiens::krr {

using Index = Eigen::Index;

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

enum class KernelType { Rbf, Linear, Polynomial };

struct Kernel {
  KernelType type = KernelType::Rbf;
  /// RBF width; values <= 0 mean "use 1 / input dimension".
  double gamma = 0.0;
  int degree = 2;
  double coef0 = 1.0;

  static Kernel rbf(double gamma = 0.0) { return {KernelType::Rbf, gamma, 2, 1.0}; }
  static Kernel linear() { return {KernelType::Linear, 0.0, 1, 0.0}; }
  static Kernel polynomial(int degree, double coef0) { return {KernelType::Polynomial, 0.0, degree, coef0}; }

  /// Copy with the default RBF width filled in for inputs of dimension d.
  Kernel resolved(Index d) const {
    Kernel k = *this;
    if (k.type == KernelType::Rbf && !(k.gamma > 0.0)) k.gamma = 1.0 / static_cast<double>(std::max<Index>(d, 1));
    return k;
  }

  void validate() const {
    if (type == KernelType::Polynomial && degree < 1) {
      throw Error(Errc::PreconditionViolation, "polynomial kernel degree must be >= 1");
    }
    if (!std::isfinite(gamma) || !std::isfinite(coef0)) {
      throw Error(Errc::PreconditionViolation, "kernel parameters must be finite");
    }
  }

  std::string str() const {
    std::ostringstream os;
    switch (type) {
      case KernelType::Rbf: os << "rbf(gamma=" << gamma << ")"; break;
      case KernelType::Linear: os << "linear"; break;
      case KernelType::Polynomial: os << "polynomial(degree=" << degree << ", coef0=" << coef0 << ")"; break;
    }
    return os.str();
  }
};

namespace detail {

template <typename Derived>
void require_finite(const Eigen::MatrixBase<Derived>& m, const char* what) {
  if (!m.allFinite()) throw Error(Errc::NonFiniteInput, std::string(what) + " contains non-finite values");
}

}  // namespace detail

/// K[a, b] = k(A_a, B_b) for the rows of A (m x d) and B (n x d).
template <typename DerivedA, typename DerivedB>
Matrix<typename DerivedA::Scalar> cross_gram(const Eigen::MatrixBase<DerivedA>& A,
                                             const Eigen::MatrixBase<DerivedB>& B, const Kernel& kernel) {
  using Scalar = typename DerivedA::Scalar;
  if (A.cols() != B.cols()) {
    throw Error(Errc::DimensionMismatch, "kernel inputs have " + std::to_string(A.cols()) + " and " +
                                             std::to_string(B.cols()) + " columns");
  }
  detail::require_finite(A, "kernel input");
  detail::require_finite(B, "kernel input");
  const Kernel k = kernel.resolved(A.cols());
  k.validate();

  Matrix<Scalar> inner = A * B.transpose();
  switch (k.type) {
    case KernelType::Linear:
      return inner;
    case KernelType::Polynomial:
      return (inner.array() + static_cast<Scalar>(k.coef0)).pow(static_cast<Scalar>(k.degree)).matrix();
    case KernelType::Rbf: {
      const Vector<Scalar> a2 = A.rowwise().squaredNorm();
      const Vector<Scalar> b2 = B.rowwise().squaredNorm();
      Matrix<Scalar> d2 = (-2 * inner).colwise() + a2;
      d2.rowwise() += b2.transpose();
      return (-static_cast<Scalar>(k.gamma) * d2.array().max(Scalar(0))).exp().matrix();
    }
  }
  return inner;
}

/// Symmetric n x n Gram matrix of the rows of X. The lower triangle mirrors
/// the upper one exactly; RBF diagonals are exactly one.
template <typename Derived>
Matrix<typename Derived::Scalar> gram_matrix(const Eigen::MatrixBase<Derived>& X, const Kernel& kernel) {
  if (X.rows() < 1) throw Error(Errc::EmptyData, "gram_matrix needs at least one row");
  Matrix<typename Derived::Scalar> K = cross_gram(X, X, kernel);
  K.template triangularView<Eigen::StrictlyLower>() = K.transpose();
  if (kernel.type == KernelType::Rbf) K.diagonal().setOnes();
  return K;
}

template <typename Scalar>
struct KrrModel {
  Matrix<Scalar> training_inputs;
  Matrix<Scalar> dual_coefficients;
  Kernel kernel;
  Scalar ridge = 1;
  Vector<Scalar> sample_weights;
  /// Diagonal jitter that was needed for the factorization (0 when none).
  Scalar jitter = 0;

  Index num_outputs() const { return dual_coefficients.cols(); }
};

struct FitOptions {
  /// Fail fast when the dense n x n system would need more than this.
  std::size_t byte_budget = std::size_t{4} << 30;
  int max_jitter_doublings = 8;
};

/// Bytes krr_fit will hold for an n-sample problem (Gram matrix and factor).
template <typename Scalar>
constexpr std::size_t fit_bytes(Index n) {
  return 2 * static_cast<std::size_t>(n) * static_cast<std::size_t>(n) * sizeof(Scalar);
}

template <typename DerivedX, typename DerivedY, typename DerivedW>
KrrModel<typename DerivedX::Scalar> krr_fit(const Eigen::MatrixBase<DerivedX>& X, const Eigen::MatrixBase<DerivedY>& Y,
                                            const Kernel& kernel, double ridge,
                                            const Eigen::MatrixBase<DerivedW>& weights, const FitOptions& opts = {}) {
  using Scalar = typename DerivedX::Scalar;
  const Index n = X.rows();
  if (n < 1) throw Error(Errc::EmptyData, "krr_fit needs at least one sample");
  if (Y.rows() != n || weights.size() != n) {
    throw Error(Errc::DimensionMismatch, "X has " + std::to_string(n) + " rows, Y " + std::to_string(Y.rows()) +
                                             ", weights " + std::to_string(weights.size()));
  }
  if (!(ridge > 0.0)) throw Error(Errc::PreconditionViolation, "ridge must be positive");
  if (!(weights.array() > Scalar(0)).all()) throw Error(Errc::PreconditionViolation, "sample weights must be positive");
  detail::require_finite(Y, "regression targets");
  if (fit_bytes<Scalar>(n) > opts.byte_budget) {
    throw Error(Errc::BudgetExceeded, "dense KRR on " + std::to_string(n) + " samples needs " +
                                          std::to_string(fit_bytes<Scalar>(n)) + " bytes, budget is " +
                                          std::to_string(opts.byte_budget));
  }

  KrrModel<Scalar> model;
  model.kernel = kernel.resolved(X.cols());
  model.ridge = static_cast<Scalar>(ridge);
  model.training_inputs = X;
  model.sample_weights = weights;

  Matrix<Scalar> system = gram_matrix(X, model.kernel);
  const Scalar base_jitter = std::max<Scalar>(Scalar(1e-10) * system.trace() / static_cast<Scalar>(n), Scalar(1e-10));
  system.diagonal().array() += model.ridge / weights.array();

  Eigen::LLT<Matrix<Scalar>> llt(system);
  Scalar jitter = 0;
  for (int attempt = 0; llt.info() != Eigen::Success; ++attempt) {
    if (attempt == opts.max_jitter_doublings) {
      throw Error(Errc::SingularSystem, "Cholesky factorization failed after " +
                                            std::to_string(opts.max_jitter_doublings) + " jitter doublings");
    }
    const Scalar next = attempt == 0 ? base_jitter : 2 * jitter;
    system.diagonal().array() += next - jitter;
    jitter = next;
    llt.compute(system);
  }
  model.jitter = jitter;
  model.dual_coefficients = llt.solve(Y.template cast<Scalar>());
  if (!model.dual_coefficients.allFinite()) throw Error(Errc::SingularSystem, "dual solution is not finite");
  return model;
}

/// K(X_new, X_train) * A.
template <typename Scalar, typename Derived>
Matrix<Scalar> krr_predict(const KrrModel<Scalar>& model, const Eigen::MatrixBase<Derived>& X_new) {
  if (X_new.cols() != model.training_inputs.cols()) {
    throw Error(Errc::DimensionMismatch, "model was trained on " + std::to_string(model.training_inputs.cols()) +
                                             " features, got " + std::to_string(X_new.cols()));
  }
  return cross_gram(X_new.template cast<Scalar>(), model.training_inputs, model.kernel) * model.dual_coefficients;
}

}  // namespace xaiens::krr

#endif  // XAIENS_KRR_HPP
