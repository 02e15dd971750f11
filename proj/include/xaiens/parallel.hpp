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

#ifndef XAIENS_PARALLEL_HPP
#define XAIENS_PARALLEL_HPP

#include <algorithm>
#include <cstdlib>
#include <exception>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Core>

namespace xaiens {

/// Environment variable that overrides the default worker count.
inline constexpr const char* kThreadsEnv = "XAIENS_THREADS";

/// Worker count: `requested` if positive, else $XAIENS_THREADS, else the
/// hardware concurrency.
inline int resolve_threads(int requested = 0) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv(kThreadsEnv)) {
    const int v = std::atoi(env);
    if (v > 0) return v;
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

/// Runs body(i) for i in [0, n) on up to `threads` workers, each taking a
/// contiguous block. Every index is handled by exactly one call, so results
/// written per index do not depend on the thread count. The exception from
/// the lowest failing block is rethrown.
template <typename Body>
void parallel_for(Eigen::Index n, int threads, Body&& body) {
  if (n <= 0) return;
  const auto workers = static_cast<Eigen::Index>(std::min<Eigen::Index>(std::max(threads, 1), n));
  if (workers == 1) {
    for (Eigen::Index i = 0; i < n; ++i) body(i);
    return;
  }
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(workers));
  {
    std::vector<std::jthread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (Eigen::Index w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        const Eigen::Index begin = n * w / workers;
        const Eigen::Index end = n * (w + 1) / workers;
        try {
          for (Eigen::Index i = begin; i < end; ++i) body(i);
        } catch (...) {
          errors[static_cast<std::size_t>(w)] = std::current_exception();
        }
      });
    }
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace xaiens

#endif  // XAIENS_PARALLEL_HPP
