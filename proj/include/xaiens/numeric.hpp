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

#ifndef XAIENS_NUMERIC_HPP
#define XAIENS_NUMERIC_HPP

#include <Eigen/Core>

#include <cmath>
#include <utility>

namespace xaiens {

/// Neumaier-compensated sum in storage order. The result depends only on the
/// values, never on how callers split work across threads.
template <typename Derived>
typename Derived::Scalar compensated_sum(const Eigen::DenseBase<Derived>& x) {
  using Scalar = typename Derived::Scalar;
  Scalar sum = 0;
  Scalar carry = 0;
  const auto& self = x.derived();
  auto add = [&](Scalar v) {
    const Scalar t = sum + v;
    if (std::abs(sum) >= std::abs(v)) {
      carry += (sum - t) + v;
    } else {
      carry += (v - t) + sum;
    }
    sum = t;
  };
  if constexpr (Derived::IsRowMajor) {
    for (Eigen::Index i = 0; i < self.rows(); ++i)
      for (Eigen::Index j = 0; j < self.cols(); ++j) add(self(i, j));
  } else {
    for (Eigen::Index j = 0; j < self.cols(); ++j)
      for (Eigen::Index i = 0; i < self.rows(); ++i) add(self(i, j));
  }
  return sum + carry;
}

/// Population mean and standard deviation (two-pass, compensated).
template <typename Derived>
std::pair<double, double> population_mean_std(const Eigen::DenseBase<Derived>& x) {
  const auto n = static_cast<double>(x.size());
  if (n == 0) return {0.0, 0.0};
  const double mean = static_cast<double>(compensated_sum(x.derived().template cast<double>())) / n;
  const double ss = compensated_sum((x.derived().template cast<double>().array() - mean).square());
  return {mean, std::sqrt(ss / n)};
}

}  // namespace xaiens

#endif  // XAIENS_NUMERIC_HPP
