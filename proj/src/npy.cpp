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

#include "xaiens/npy.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <numeric>
#include <regex>
#include <sstream>

namespace xaiens {
namespace {

constexpr std::uint8_t kMagic[6] = {0x93, 'N', 'U', 'M', 'P', 'Y'};
constexpr std::size_t kPreamble = 10;  // magic + version + header length
constexpr std::size_t kAlignment = 64;

static_assert(std::endian::native == std::endian::little, "NPY payloads are read as host-order little-endian");

template <typename T>
T load(const std::uint8_t* p) {
  T v;
  std::memcpy(&v, p, sizeof(T));
  return v;
}

template <typename T>
void store(std::uint8_t* p, T v) {
  std::memcpy(p, &v, sizeof(T));
}

DType parse_descr(const std::string& text) {
  if (text == "<f4") return DType::Float32;
  if (text == "<f8") return DType::Float64;
  if (text == "|b1") return DType::Bool;
  throw Error(Errc::UnsupportedDtype, "dtype '" + text + "' (accepted: <f4, <f8, |b1)");
}

std::vector<std::size_t> parse_shape(const std::string& text) {
  std::vector<std::size_t> shape;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto first = item.find_first_not_of(" \t");
    if (first == std::string::npos) continue;
    const auto last = item.find_last_not_of(" \t");
    const std::string token = item.substr(first, last - first + 1);
    if (!std::all_of(token.begin(), token.end(), [](unsigned char c) { return std::isdigit(c) || c == 'L'; })) {
      throw Error(Errc::MalformedHeader, "bad shape entry '" + token + "'");
    }
    shape.push_back(static_cast<std::size_t>(std::stoull(token)));
  }
  return shape;
}

}  // namespace

std::string_view descr(DType dtype) noexcept {
  switch (dtype) {
    case DType::Float32: return "<f4";
    case DType::Float64: return "<f8";
    case DType::Bool: return "|b1";
  }
  return "";
}

std::size_t itemsize(DType dtype) noexcept {
  switch (dtype) {
    case DType::Float32: return 4;
    case DType::Float64: return 8;
    case DType::Bool: return 1;
  }
  return 0;
}

std::size_t NpyArray::count() const noexcept {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::vector<double> NpyArray::to_double() const {
  const std::size_t n = count();
  std::vector<double> out(n);
  const std::uint8_t* p = payload.data();
  for (std::size_t i = 0; i < n; ++i) {
    switch (dtype) {
      case DType::Float32: out[i] = load<float>(p + 4 * i); break;
      case DType::Float64: out[i] = load<double>(p + 8 * i); break;
      case DType::Bool: out[i] = p[i] != 0 ? 1.0 : 0.0; break;
    }
  }
  return out;
}

RowMatrixXd NpyArray::to_matrix() const {
  const auto values = to_double();
  const auto rows = static_cast<Index>(shape.empty() ? 1 : shape[0]);
  const Index cols = rows == 0 ? 0 : static_cast<Index>(values.size()) / rows;
  return Eigen::Map<const RowMatrixXd>(values.data(), rows, cols);
}

NpyArray NpyArray::from_values(std::vector<std::size_t> shape, std::span<const double> values, DType dtype) {
  NpyArray a;
  a.dtype = dtype;
  a.shape = std::move(shape);
  if (a.count() != values.size()) {
    throw Error(Errc::DimensionMismatch, std::to_string(values.size()) + " values for an array of " +
                                             std::to_string(a.count()));
  }
  a.payload.resize(values.size() * itemsize(dtype));
  std::uint8_t* p = a.payload.data();
  for (std::size_t i = 0; i < values.size(); ++i) {
    switch (dtype) {
      case DType::Float32: store<float>(p + 4 * i, static_cast<float>(values[i])); break;
      case DType::Float64: store<double>(p + 8 * i, values[i]); break;
      case DType::Bool: p[i] = values[i] != 0.0 ? 1 : 0; break;
    }
  }
  return a;
}

NpyArray NpyArray::from_matrix(std::vector<std::size_t> shape, const RowMatrixXd& values, DType dtype) {
  return from_values(std::move(shape), std::span<const double>(values.data(), static_cast<std::size_t>(values.size())),
                     dtype);
}

std::string npy_header(const NpyArray& array) {
  std::ostringstream os;
  os << "{'descr': '" << descr(array.dtype) << "', 'fortran_order': False, 'shape': (";
  for (std::size_t i = 0; i < array.shape.size(); ++i) {
    os << array.shape[i];
    if (i + 1 < array.shape.size() || array.shape.size() == 1) os << ",";
    if (i + 1 < array.shape.size()) os << " ";
  }
  os << "), }";
  std::string header = os.str();
  const std::size_t unpadded = kPreamble + header.size() + 1;
  header.append((kAlignment - unpadded % kAlignment) % kAlignment, ' ');
  header.push_back('\n');
  return header;
}

std::vector<std::uint8_t> serialize_npy(const NpyArray& array) {
  if (array.payload.size() != array.count() * itemsize(array.dtype)) {
    throw Error(Errc::DimensionMismatch, "payload size does not match shape");
  }
  const std::string header = npy_header(array);
  if (header.size() > 0xFFFF) throw Error(Errc::IoFailure, "header too long for format version 1.0");
  std::vector<std::uint8_t> out(kPreamble + header.size() + array.payload.size());
  std::copy(std::begin(kMagic), std::end(kMagic), out.begin());
  std::size_t at = std::size(kMagic);
  out[at++] = 1;
  out[at++] = 0;
  out[at++] = static_cast<std::uint8_t>(header.size() & 0xFF);
  out[at++] = static_cast<std::uint8_t>(header.size() >> 8);
  std::copy(header.begin(), header.end(), out.begin() + static_cast<std::ptrdiff_t>(at));
  if (!array.payload.empty()) {
    std::memcpy(out.data() + at + header.size(), array.payload.data(), array.payload.size());
  }
  return out;
}

NpyArray parse_npy(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 6 || !std::equal(std::begin(kMagic), std::end(kMagic), bytes.begin())) {
    throw Error(Errc::BadMagic, "not an NPY file");
  }
  if (bytes.size() < kPreamble) throw Error(Errc::MalformedHeader, "file ends inside the preamble");
  if (bytes[6] != 1 || bytes[7] != 0) {
    throw Error(Errc::UnsupportedVersion,
                "format version " + std::to_string(bytes[6]) + "." + std::to_string(bytes[7]) + " (only 1.0)");
  }
  const std::size_t header_len = bytes[8] | (static_cast<std::size_t>(bytes[9]) << 8);
  if (kPreamble + header_len > bytes.size()) throw Error(Errc::MalformedHeader, "header length overruns the file");
  const std::string header(reinterpret_cast<const char*>(bytes.data() + kPreamble), header_len);

  static const std::regex descr_re(R"(['"]descr['"]\s*:\s*['"]([^'"]*)['"])");
  static const std::regex fortran_re(R"(['"]fortran_order['"]\s*:\s*(True|False))");
  static const std::regex shape_re(R"(['"]shape['"]\s*:\s*\(([^)]*)\))");
  std::smatch m_descr, m_fortran, m_shape;
  if (header.find('{') == std::string::npos || !std::regex_search(header, m_descr, descr_re) ||
      !std::regex_search(header, m_fortran, fortran_re) || !std::regex_search(header, m_shape, shape_re)) {
    throw Error(Errc::MalformedHeader, "header lacks descr, fortran_order or shape: " + header);
  }

  NpyArray a;
  a.dtype = parse_descr(m_descr[1].str());
  if (m_fortran[1].str() == "True") throw Error(Errc::FortranOrderUnsupported, "Fortran-ordered arrays are rejected");
  a.shape = parse_shape(m_shape[1].str());

  const std::size_t expected = a.count() * itemsize(a.dtype);
  const std::size_t remaining = bytes.size() - kPreamble - header_len;
  if (remaining != expected) {
    throw Error(Errc::TruncatedPayload, "shape needs " + std::to_string(expected) + " payload bytes, found " +
                                            std::to_string(remaining));
  }
  a.payload.assign(bytes.begin() + static_cast<std::ptrdiff_t>(kPreamble + header_len), bytes.end());
  return a;
}

NpyArray read_npy(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::IoFailure, "cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  try {
    return parse_npy(bytes);
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.detail());
  }
}

void write_npy(const std::filesystem::path& path, const NpyArray& array, bool allow_non_finite) {
  if (!allow_non_finite && array.dtype != DType::Bool) {
    const auto values = array.to_double();
    if (!std::all_of(values.begin(), values.end(), [](double v) { return std::isfinite(v); })) {
      throw Error(Errc::NonFiniteInput, "refusing to write non-finite values to " + path.string());
    }
  }
  const auto bytes = serialize_npy(array);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::IoFailure, "cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(Errc::IoFailure, "short write to " + path.string());
}

}  // namespace xaiens
