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

#ifndef XAIENS_NPY_HPP
#define XAIENS_NPY_HPP

// NPY format version 1.0, C order, little-endian f4/f8 and b1 only:
//
//   "\x93NUMPY" 0x01 0x00 <uint16 LE header length> <ASCII dict header,
//   space padded so the payload starts on a 64-byte boundary, '\n'> <payload>

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "xaiens/core_model.hpp"

namespace xaiens {

enum class DType { Float32, Float64, Bool };

std::string_view descr(DType dtype) noexcept;
std::size_t itemsize(DType dtype) noexcept;

struct NpyArray {
  DType dtype = DType::Float64;
  std::vector<std::size_t> shape;
  std::vector<std::uint8_t> payload;

  std::size_t count() const noexcept;
  /// Values widened to double (booleans as 0/1).
  std::vector<double> to_double() const;
  /// Interpret as a rows x (count / rows) matrix; rows = shape[0].
  RowMatrixXd to_matrix() const;

  /// Encodes doubles as `dtype` (booleans: value != 0).
  static NpyArray from_values(std::vector<std::size_t> shape, std::span<const double> values,
                              DType dtype = DType::Float64);
  static NpyArray from_matrix(std::vector<std::size_t> shape, const RowMatrixXd& values,
                              DType dtype = DType::Float64);
};

/// Header dict text including padding and the trailing newline.
std::string npy_header(const NpyArray& array);

std::vector<std::uint8_t> serialize_npy(const NpyArray& array);

/// Throws Errc::BadMagic, UnsupportedVersion, MalformedHeader,
/// UnsupportedDtype, FortranOrderUnsupported, TruncatedPayload.
NpyArray parse_npy(std::span<const std::uint8_t> bytes);

/// Errors from parse_npy are rethrown with the path prepended; a missing or
/// unreadable file raises Errc::IoFailure.
NpyArray read_npy(const std::filesystem::path& path);

/// Refuses non-finite float payloads unless allow_non_finite is set.
void write_npy(const std::filesystem::path& path, const NpyArray& array, bool allow_non_finite = false);

}  // namespace xaiens

#endif  // XAIENS_NPY_HPP
