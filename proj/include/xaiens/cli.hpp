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

#ifndef XAIENS_CLI_HPP
#define XAIENS_CLI_HPP

#include <iosfwd>
#include <string>
#include <vector>

#include "xaiens/error.hpp"

namespace xaiens::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInput = 2;
inline constexpr int kExitPrecondition = 3;
inline constexpr int kExitOracle = 4;

/// Exit status for a library error: input and validation problems map to 2,
/// strategy preconditions to 3, oracle failures to 4.
int exit_code(Errc code) noexcept;

/// Runs the command line `args` (without the program name). Results go to
/// files; progress and summaries to `out`, diagnostics to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace xaiens::cli

#endif  // XAIENS_CLI_HPP
