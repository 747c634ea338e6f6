// Copyright 2026 The appsim Authors.
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

#pragma once

// Dense f32 tensors and the IFTENSR1 container.
//
// Layout (all integers little-endian):
//   bytes 0..7   magic "IFTENSR1"
//   byte  8      dtype code (0 = f32; nothing else is accepted)
//   byte  9      ndim (1..4)
//   ndim x u64   dims
//   payload      prod(dims) x f32, row-major, little-endian

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "appsim/error.hpp"

namespace appsim {

inline constexpr std::array<char, 8> kTensorMagic = {'I', 'F', 'T', 'E',
                                                     'N', 'S', 'R', '1'};
inline constexpr std::uint8_t kDtypeF32 = 0;
inline constexpr std::size_t kMaxTensorRank = 4;

class Tensor {
 public:
  Tensor(std::vector<std::size_t> dims, std::vector<float> data)
      : dims_(std::move(dims)), data_(std::move(data)) {
    if (dims_.empty() || dims_.size() > kMaxTensorRank) {
      fail(ErrorKind::kShape, "tensor rank must be in 1..4, got " +
                                  std::to_string(dims_.size()));
    }
    for (auto d : dims_) {
      if (d == 0) fail(ErrorKind::kShape, "tensor dims must be >= 1");
    }
    if (data_.size() != element_count(dims_)) {
      fail(ErrorKind::kShape, "tensor data length " +
                                  std::to_string(data_.size()) +
                                  " does not match dims product " +
                                  std::to_string(element_count(dims_)));
    }
  }

  static Tensor zeros(std::vector<std::size_t> dims) {
    auto n = element_count(dims);
    return Tensor(std::move(dims), std::vector<float>(n, 0.0f));
  }

  static Tensor vector(std::vector<float> values) {
    auto n = values.size();
    return Tensor({n}, std::move(values));
  }

  static Tensor matrix(std::size_t rows, std::size_t cols,
                       std::vector<float> values) {
    return Tensor({rows, cols}, std::move(values));
  }

  static std::size_t element_count(std::span<const std::size_t> dims) {
    return std::accumulate(dims.begin(), dims.end(), std::size_t{1},
                           std::multiplies<>());
  }

  std::size_t ndim() const noexcept { return dims_.size(); }
  const std::vector<std::size_t>& dims() const noexcept { return dims_; }
  std::size_t dim(std::size_t axis) const { return dims_.at(axis); }
  std::size_t size() const noexcept { return data_.size(); }

  std::span<const float> values() const noexcept { return data_; }
  std::span<float> values() noexcept { return data_; }
  const std::vector<float>& storage() const noexcept { return data_; }
  std::vector<float> release() && { return std::move(data_); }

  // Rows of the tensor viewed as dims[0] x (product of the remaining dims).
  std::size_t rows() const noexcept { return dims_[0]; }
  std::size_t row_width() const noexcept { return data_.size() / dims_[0]; }
  std::span<const float> row(std::size_t i) const {
    return std::span<const float>(data_).subspan(i * row_width(), row_width());
  }
  std::span<float> row(std::size_t i) {
    return std::span<float>(data_).subspan(i * row_width(), row_width());
  }

  bool all_finite() const noexcept {
    for (float v : data_) {
      if (!std::isfinite(v)) return false;
    }
    return true;
  }

  // Bitwise equality (distinguishes -0.0 from 0.0 and compares NaN payloads).
  friend bool operator==(const Tensor& a, const Tensor& b) {
    return a.dims_ == b.dims_ &&
           (a.data_.empty() ||
            std::memcmp(a.data_.data(), b.data_.data(),
                        a.data_.size() * sizeof(float)) == 0);
  }

 private:
  std::vector<std::size_t> dims_;
  std::vector<float> data_;
};

namespace detail {

template <typename T>
T to_little_endian(T v) {
  if constexpr (std::endian::native == std::endian::big) {
    auto bytes = std::bit_cast<std::array<std::uint8_t, sizeof(T)>>(v);
    std::reverse(bytes.begin(), bytes.end());
    return std::bit_cast<T>(bytes);
  }
  return v;
}

template <typename T>
void put(std::string& out, T v) {
  v = to_little_endian(v);
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

template <typename T>
T get(const char* p) {
  T v;
  std::memcpy(&v, p, sizeof(T));
  return to_little_endian(v);
}

}  // namespace detail

inline std::string encode_tensor(const Tensor& t) {
  std::string out;
  out.reserve(10 + 8 * t.ndim() + 4 * t.size());
  out.append(kTensorMagic.data(), kTensorMagic.size());
  out.push_back(static_cast<char>(kDtypeF32));
  out.push_back(static_cast<char>(t.ndim()));
  for (auto d : t.dims()) detail::put<std::uint64_t>(out, d);
  if constexpr (std::endian::native == std::endian::little) {
    out.append(reinterpret_cast<const char*>(t.values().data()),
               t.size() * sizeof(float));
  } else {
    for (float v : t.values()) detail::put<std::uint32_t>(out, std::bit_cast<std::uint32_t>(v));
  }
  return out;
}

namespace detail {

struct TensorHeader {
  std::vector<std::size_t> dims;
  std::size_t count = 0;
  std::size_t size = 0;  // header bytes
};

inline TensorHeader parse_tensor_header(std::string_view bytes, const std::string& origin) {
  if (bytes.size() < 10 ||
      std::memcmp(bytes.data(), kTensorMagic.data(), kTensorMagic.size()) != 0) {
    fail(ErrorKind::kFormat, origin + ": missing IFTENSR1 magic");
  }
  auto dtype = static_cast<std::uint8_t>(bytes[8]);
  auto ndim = static_cast<std::uint8_t>(bytes[9]);
  if (dtype != kDtypeF32) {
    fail(ErrorKind::kFormat,
         origin + ": unsupported dtype code " + std::to_string(dtype));
  }
  if (ndim < 1 || ndim > kMaxTensorRank) {
    fail(ErrorKind::kFormat, origin + ": bad ndim " + std::to_string(ndim));
  }
  TensorHeader h;
  h.size = 10 + 8 * std::size_t{ndim};
  if (bytes.size() < h.size) {
    fail(ErrorKind::kCorruption, origin + ": truncated header");
  }
  h.dims.resize(ndim);
  h.count = 1;
  for (std::size_t i = 0; i < ndim; ++i) {
    auto d = get<std::uint64_t>(bytes.data() + 10 + 8 * i);
    if (d == 0) fail(ErrorKind::kFormat, origin + ": zero dimension");
    if (h.count > (std::size_t{1} << 40) / d) {
      fail(ErrorKind::kCorruption, origin + ": dims product overflows");
    }
    h.dims[i] = static_cast<std::size_t>(d);
    h.count *= h.dims[i];
  }
  return h;
}

inline void payload_size_check(std::size_t payload, std::size_t count, const std::string& origin) {
  if (payload != count * sizeof(float)) {
    fail(ErrorKind::kCorruption,
         origin + ": payload is " + std::to_string(payload) + " bytes, dims need " +
             std::to_string(count * sizeof(float)));
  }
}

}  // namespace detail

// `origin` only labels error messages.
inline Tensor decode_tensor(std::string_view bytes,
                            const std::string& origin = "<memory>") {
  auto h = detail::parse_tensor_header(bytes, origin);
  const std::size_t header = h.size;
  const std::size_t count = h.count;
  auto dims = std::move(h.dims);
  auto payload = bytes.size() - header;
  detail::payload_size_check(payload, count, origin);
  std::vector<float> data(count);
  if constexpr (std::endian::native == std::endian::little) {
    std::memcpy(data.data(), bytes.data() + header, payload);
  } else {
    for (std::size_t i = 0; i < count; ++i) {
      data[i] = std::bit_cast<float>(
          detail::get<std::uint32_t>(bytes.data() + header + 4 * i));
    }
  }
  return Tensor(std::move(dims), std::move(data));
}

inline std::string read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::kIo, "cannot open " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(in)),
                    std::istreambuf_iterator<char>());
  if (in.bad()) fail(ErrorKind::kIo, "read failed for " + path.string());
  return bytes;
}

inline void write_file_bytes(const std::filesystem::path& path,
                             std::string_view bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::kIo, "cannot open " + path.string() + " for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  out.flush();
  if (!out) fail(ErrorKind::kIo, "write failed for " + path.string());
}

// Streams header and payload without building the encoded file in memory.
inline void write_tensor_data(const std::filesystem::path& path,
                              std::span<const std::size_t> dims,
                              std::span<const float> values) {
  if (dims.empty() || dims.size() > kMaxTensorRank ||
      Tensor::element_count(dims) != values.size()) {
    fail(ErrorKind::kShape, "tensor dims do not match " + std::to_string(values.size()) + " values");
  }
  std::string header;
  header.append(kTensorMagic.data(), kTensorMagic.size());
  header.push_back(static_cast<char>(kDtypeF32));
  header.push_back(static_cast<char>(dims.size()));
  for (auto d : dims) detail::put<std::uint64_t>(header, d);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::kIo, "cannot open " + path.string() + " for writing");
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  if constexpr (std::endian::native == std::endian::little) {
    out.write(reinterpret_cast<const char*>(values.data()),
              static_cast<std::streamsize>(values.size() * sizeof(float)));
  } else {
    std::string chunk;
    for (float v : values) detail::put<std::uint32_t>(chunk, std::bit_cast<std::uint32_t>(v));
    out.write(chunk.data(), static_cast<std::streamsize>(chunk.size()));
  }
  out.flush();
  if (!out) fail(ErrorKind::kIo, "write failed for " + path.string());
}

inline void write_tensor(const Tensor& t, const std::filesystem::path& path) {
  write_tensor_data(path, t.dims(), t.values());
}

// An open tensor file positioned at its payload.
class TensorReader {
 public:
  explicit TensorReader(const std::filesystem::path& path)
      : origin_(path.string()), in_(path, std::ios::binary) {
    if (!in_) fail(ErrorKind::kIo, "cannot open " + origin_);
    std::string head(10 + 8 * kMaxTensorRank, '\0');
    in_.read(head.data(), static_cast<std::streamsize>(head.size()));
    head.resize(static_cast<std::size_t>(in_.gcount()));
    auto h = detail::parse_tensor_header(head, origin_);
    dims_ = std::move(h.dims);
    count_ = h.count;
    detail::payload_size_check(std::filesystem::file_size(path) - h.size, count_, origin_);
    in_.clear();
    in_.seekg(static_cast<std::streamoff>(h.size));
  }

  const std::vector<std::size_t>& dims() const noexcept { return dims_; }
  std::size_t count() const noexcept { return count_; }

  void read_into(std::span<float> out) {
    if (out.size() != count_) fail(ErrorKind::kShape, origin_ + ": destination size mismatch");
    in_.read(reinterpret_cast<char*>(out.data()),
             static_cast<std::streamsize>(out.size() * sizeof(float)));
    if (static_cast<std::size_t>(in_.gcount()) != out.size() * sizeof(float)) {
      fail(ErrorKind::kCorruption, origin_ + ": truncated payload");
    }
    if constexpr (std::endian::native != std::endian::little) {
      for (auto& v : out) {
        v = std::bit_cast<float>(detail::to_little_endian(std::bit_cast<std::uint32_t>(v)));
      }
    }
  }

 private:
  std::string origin_;
  std::ifstream in_;
  std::vector<std::size_t> dims_;
  std::size_t count_ = 0;
};

inline Tensor read_tensor(const std::filesystem::path& path) {
  TensorReader reader(path);
  std::vector<float> data(reader.count());
  reader.read_into(data);
  return Tensor(reader.dims(), std::move(data));
}

}  // namespace appsim
