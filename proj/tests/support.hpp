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

#ifndef XAIENS_TESTS_SUPPORT_HPP
#define XAIENS_TESTS_SUPPORT_HPP

// Fixtures and independent reference computations shared by the unit tests
// and the acceptance runner. The references deliberately avoid the library's
// own helpers: plain loops, std::sort, and Eigen's general-purpose solvers.

#include <Eigen/Dense>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <random>
#include <string>
#include <vector>

#include "xaiens/core_model.hpp"

namespace xaiens::testing {

inline std::vector<std::string> make_ids(Index n, const std::string& prefix = "img") {
  std::vector<std::string> ids;
  for (Index i = 0; i < n; ++i) ids.push_back(prefix + std::to_string(i));
  return ids;
}

/// Methods named m0, m1, ... with entries drawn from a per-method affine
/// transform of a standard normal, so methods have different scales.
inline ExplanationSet random_set(std::mt19937_64& rng, Index n, Shape shape, std::size_t methods) {
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> scale(0.1, 10.0);
  std::uniform_real_distribution<double> shift(-5.0, 5.0);
  ExplanationSet s;
  s.shape = shape;
  s.instance_ids = make_ids(n);
  for (std::size_t e = 0; e < methods; ++e) {
    s.methods.push_back("m" + std::to_string(e));
    const double a = scale(rng);
    const double b = shift(rng);
    RowMatrixXd m(n, shape.size());
    for (Index k = 0; k < m.size(); ++k) m.data()[k] = a * normal(rng) + b;
    s.data.push_back(std::move(m));
  }
  return s;
}

inline ExplanationSet single_method(const std::vector<double>& values, Shape shape, Index n = 1) {
  ExplanationSet s;
  s.shape = shape;
  s.methods = {"m"};
  s.instance_ids = make_ids(n);
  RowMatrixXd m(n, shape.size());
  for (Index k = 0; k < m.size(); ++k) m.data()[k] = values[static_cast<std::size_t>(k)];
  s.data.push_back(m);
  return s;
}

/// Flattened values of a matrix, row by row.
inline std::vector<double> flat(const RowMatrixXd& m) { return {m.data(), m.data() + m.size()}; }

inline double ref_mean(const std::vector<double>& v) {
  long double s = 0;
  for (double x : v) s += x;
  return static_cast<double>(s / static_cast<long double>(v.size()));
}

inline double ref_pop_std(const std::vector<double>& v) {
  const long double m = ref_mean(v);
  long double s = 0;
  for (double x : v) s += (x - m) * (x - m);
  return static_cast<double>(std::sqrt(s / static_cast<long double>(v.size())));
}

/// Linear-interpolation quantile on a sorted copy.
inline double ref_quantile(std::vector<double> v, double q) {
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

/// Solves (K + lambda * diag(1/w)) A = Y with a full-pivot LU.
inline Eigen::MatrixXd dense_dual_solve(const Eigen::MatrixXd& K, double lambda, const Eigen::VectorXd& w,
                                        const Eigen::MatrixXd& Y) {
  Eigen::MatrixXd system = K;
  for (Index i = 0; i < K.rows(); ++i) system(i, i) += lambda / w(i);
  return system.fullPivLu().solve(Y);
}

/// Minimizer of sum_i w_i ||y_i - B^T x_i||^2 + lambda ||B||^2 via the normal
/// equations (X^T W X + lambda I) B = X^T W Y.
inline Eigen::MatrixXd primal_weighted_ridge(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y,
                                             const Eigen::VectorXd& w, double lambda) {
  const Eigen::MatrixXd XtW = X.transpose() * w.asDiagonal();
  Eigen::MatrixXd lhs = XtW * X;
  lhs.diagonal().array() += lambda;
  return lhs.fullPivLu().solve(XtW * Y);
}

/// Explicit RBF Gram matrix from pairwise distances.
inline Eigen::MatrixXd ref_rbf_gram(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B, double gamma) {
  Eigen::MatrixXd K(A.rows(), B.rows());
  for (Index i = 0; i < A.rows(); ++i)
    for (Index j = 0; j < B.rows(); ++j) K(i, j) = std::exp(-gamma * (A.row(i) - B.row(j)).squaredNorm());
  return K;
}

class TempDir {
 public:
  explicit TempDir(const std::string& tag = "xaiens") {
    static std::atomic<int> counter{0};
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            (tag + "_" + std::to_string(rd()) + "_" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const noexcept { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline std::vector<std::uint8_t> read_bytes(const std::filesystem::path& p) {
  std::ifstream is(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

inline void write_bytes(const std::filesystem::path& p, const std::vector<std::uint8_t>& bytes) {
  std::ofstream os(p, std::ios::binary);
  os.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

inline void write_text(const std::filesystem::path& p, const std::string& text) {
  std::ofstream os(p);
  os << text;
}

inline bool bit_equal(const RowMatrixXd& a, const RowMatrixXd& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) return false;
  return std::equal(a.data(), a.data() + a.size(), b.data(), [](double x, double y) {
    return std::memcmp(&x, &y, sizeof(double)) == 0;
  });
}

}  // namespace xaiens::testing

#endif  // XAIENS_TESTS_SUPPORT_HPP
