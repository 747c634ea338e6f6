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

// 1024-bit image hashes (average, difference, perceptual, wavelet), Hamming
// distance, and SSIM dissimilarity over 32x32 grayscale icons.
//
// Every hash thresholds with a strict comparison: a value equal to the
// threshold yields bit 0.

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "appsim/error.hpp"
#include "appsim/tensor.hpp"

namespace appsim {

enum class HashKind : std::uint8_t {
  kAverage = 0,
  kDifference = 1,
  kPerceptual = 2,
  kWavelet = 3,
};

inline constexpr std::array<HashKind, 4> kHashKinds = {
    HashKind::kAverage, HashKind::kDifference, HashKind::kPerceptual,
    HashKind::kWavelet};

constexpr std::string_view hash_kind_name(HashKind k) {
  switch (k) {
    case HashKind::kAverage: return "average";
    case HashKind::kDifference: return "difference";
    case HashKind::kPerceptual: return "perceptual";
    case HashKind::kWavelet: return "wavelet";
  }
  return "?";
}

inline HashKind parse_hash_kind(std::string_view name) {
  for (auto k : kHashKinds) {
    if (hash_kind_name(k) == name) return k;
  }
  fail(ErrorKind::kUsage, "unknown hash kind '" + std::string(name) +
                              "' (expected average|difference|perceptual|wavelet)");
}

// 1024 packed bits; bit i lives in word i / 64 at position i % 64.
class BitVector1024 {
 public:
  static constexpr std::size_t kBits = 1024;
  static constexpr std::size_t kWords = kBits / 64;
  static constexpr std::size_t kBytes = kBits / 8;

  explicit BitVector1024(HashKind kind = HashKind::kAverage) : kind_(kind) {}

  HashKind kind() const noexcept { return kind_; }

  bool test(std::size_t i) const noexcept { return (words_[i / 64] >> (i % 64)) & 1u; }
  void set(std::size_t i, bool v = true) noexcept {
    std::uint64_t mask = std::uint64_t{1} << (i % 64);
    if (v) {
      words_[i / 64] |= mask;
    } else {
      words_[i / 64] &= ~mask;
    }
  }

  std::size_t count() const noexcept {
    std::size_t n = 0;
    for (auto w : words_) n += static_cast<std::size_t>(std::popcount(w));
    return n;
  }

  BitVector1024 complement() const noexcept {
    BitVector1024 out(kind_);
    for (std::size_t i = 0; i < kWords; ++i) out.words_[i] = ~words_[i];
    return out;
  }

  const std::array<std::uint64_t, kWords>& words() const noexcept { return words_; }
  std::array<std::uint64_t, kWords>& words() noexcept { return words_; }

  // Byte b holds bits 8b..8b+7, least significant bit first.
  std::array<std::uint8_t, kBytes> to_bytes() const noexcept {
    std::array<std::uint8_t, kBytes> out{};
    for (std::size_t b = 0; b < kBytes; ++b) {
      out[b] = static_cast<std::uint8_t>(words_[b / 8] >> (8 * (b % 8)));
    }
    return out;
  }

  static BitVector1024 from_bytes(std::span<const std::uint8_t, kBytes> bytes,
                                  HashKind kind) noexcept {
    BitVector1024 out(kind);
    for (std::size_t b = 0; b < kBytes; ++b) {
      out.words_[b / 8] |= std::uint64_t{bytes[b]} << (8 * (b % 8));
    }
    return out;
  }

  friend bool operator==(const BitVector1024&, const BitVector1024&) = default;

 private:
  std::array<std::uint64_t, kWords> words_{};
  HashKind kind_;
};

inline std::size_t hamming_unchecked(const BitVector1024& a,
                                     const BitVector1024& b) noexcept {
  std::size_t n = 0;
  for (std::size_t i = 0; i < BitVector1024::kWords; ++i) {
    n += static_cast<std::size_t>(std::popcount(a.words()[i] ^ b.words()[i]));
  }
  return n;
}

inline std::size_t hamming(const BitVector1024& a, const BitVector1024& b) {
  if (a.kind() != b.kind()) {
    fail(ErrorKind::kUsage, "hamming distance between " +
                                std::string(hash_kind_name(a.kind())) + " and " +
                                std::string(hash_kind_name(b.kind())) + " hashes");
  }
  return hamming_unchecked(a, b);
}

// Row-major f32 luma in [0, 255].
struct GrayImage {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<float> pixels;

  GrayImage() = default;
  GrayImage(std::size_t w, std::size_t h, float fill = 0.0f)
      : width(w), height(h), pixels(w * h, fill) {}
  GrayImage(std::size_t w, std::size_t h, std::vector<float> px)
      : width(w), height(h), pixels(std::move(px)) {
    if (pixels.size() != w * h) fail(ErrorKind::kShape, "gray image size mismatch");
  }

  float at(std::size_t row, std::size_t col) const { return pixels[row * width + col]; }
  float& at(std::size_t row, std::size_t col) { return pixels[row * width + col]; }

  friend bool operator==(const GrayImage&, const GrayImage&) = default;
};

inline constexpr std::size_t kHashSide = 32;

namespace detail {

inline void require_size(const GrayImage& g, std::size_t w, std::size_t h,
                         const char* what) {
  if (g.width != w || g.height != h) {
    fail(ErrorKind::kShape, std::string(what) + " expects a " + std::to_string(w) +
                                "x" + std::to_string(h) + " image, got " +
                                std::to_string(g.width) + "x" +
                                std::to_string(g.height));
  }
}

inline BitVector1024 threshold_bits(std::span<const double> values, double threshold,
                                    HashKind kind) {
  BitVector1024 out(kind);
  for (std::size_t i = 0; i < values.size(); ++i) out.set(i, values[i] > threshold);
  return out;
}

inline double median(std::vector<double> v) {
  auto n = v.size();
  auto mid = v.begin() + static_cast<std::ptrdiff_t>(n / 2);
  std::nth_element(v.begin(), mid, v.end());
  double upper = *mid;
  if (n % 2 == 1) return upper;
  double lower = *std::max_element(v.begin(), mid);
  return (lower + upper) / 2.0;
}

// Orthonormal DCT-II basis: basis[u * n + x] = a(u) cos(pi (2x + 1) u / 2n).
inline std::vector<double> dct_basis(std::size_t n) {
  std::vector<double> basis(n * n);
  for (std::size_t u = 0; u < n; ++u) {
    double scale = u == 0 ? std::sqrt(1.0 / n) : std::sqrt(2.0 / n);
    for (std::size_t x = 0; x < n; ++x) {
      basis[u * n + x] =
          scale * std::cos(std::numbers::pi * (2.0 * x + 1.0) * u / (2.0 * n));
    }
  }
  return basis;
}

}  // namespace detail

// Controls which coefficients feed the median threshold of the frequency hashes.
enum class MedianMode {
  kExcludeDc,  // all coefficients except the DC / LL(0,0) term
  kAll,        // every coefficient
};

// Coefficients closer to zero than this are treated as exactly zero, so that
// flat regions hash identically regardless of rounding in the transform.
inline constexpr double kCoefficientEpsilon = 1e-6;

inline BitVector1024 average_hash(const GrayImage& g) {
  detail::require_size(g, kHashSide, kHashSide, "average_hash");
  double sum = 0.0;
  for (float p : g.pixels) sum += p;
  double mean = sum / static_cast<double>(g.pixels.size());
  BitVector1024 out(HashKind::kAverage);
  for (std::size_t i = 0; i < g.pixels.size(); ++i) out.set(i, g.pixels[i] > mean);
  return out;
}

// Expects the 33x32 grayscale grid; bit (r, c) compares columns c + 1 and c.
inline BitVector1024 difference_hash(const GrayImage& g) {
  detail::require_size(g, kHashSide + 1, kHashSide, "difference_hash");
  BitVector1024 out(HashKind::kDifference);
  for (std::size_t r = 0; r < kHashSide; ++r) {
    for (std::size_t c = 0; c < kHashSide; ++c) {
      out.set(r * kHashSide + c, g.at(r, c + 1) > g.at(r, c));
    }
  }
  return out;
}

// 2-D orthonormal DCT-II of a square image, row-major over (u, v) where u
// indexes vertical frequency.
inline std::vector<double> dct2(const GrayImage& g) {
  const std::size_t n = g.width;
  if (g.height != n) fail(ErrorKind::kShape, "dct2 expects a square image");
  static thread_local std::vector<double> basis;
  if (basis.size() != n * n) basis = detail::dct_basis(n);
  // Transform rows (along x), then columns (along y).
  std::vector<double> tmp(n * n, 0.0);
  for (std::size_t y = 0; y < n; ++y) {
    for (std::size_t v = 0; v < n; ++v) {
      double s = 0.0;
      for (std::size_t x = 0; x < n; ++x) s += basis[v * n + x] * g.pixels[y * n + x];
      tmp[y * n + v] = s;
    }
  }
  std::vector<double> out(n * n, 0.0);
  for (std::size_t u = 0; u < n; ++u) {
    for (std::size_t v = 0; v < n; ++v) {
      double s = 0.0;
      for (std::size_t y = 0; y < n; ++y) s += basis[u * n + y] * tmp[y * n + v];
      out[u * n + v] = std::abs(s) < kCoefficientEpsilon ? 0.0 : s;
    }
  }
  return out;
}

inline BitVector1024 perceptual_hash(const GrayImage& g,
                                     MedianMode mode = MedianMode::kExcludeDc) {
  detail::require_size(g, kHashSide, kHashSide, "perceptual_hash");
  auto coeffs = dct2(g);
  std::vector<double> pool(coeffs.begin() + (mode == MedianMode::kExcludeDc ? 1 : 0),
                           coeffs.end());
  return detail::threshold_bits(coeffs, detail::median(std::move(pool)),
                                HashKind::kPerceptual);
}

// Single-level 2-D Haar transform of a 32x32 image: rows first, then columns,
// each pair mapped to ((a + b) / sqrt 2, (a - b) / sqrt 2). Output is the four
// 16x16 subbands concatenated as LL, LH, HL, HH, each row-major, where the
// first letter is the vertical (column) filter and the second the horizontal
// (row) filter: LH is top-right, HL bottom-left.
inline std::vector<double> haar2(const GrayImage& g) {
  detail::require_size(g, kHashSide, kHashSide, "haar2");
  constexpr std::size_t n = kHashSide;
  constexpr std::size_t h = n / 2;
  const double r2 = std::numbers::sqrt2;
  std::vector<double> rows(n * n);
  for (std::size_t y = 0; y < n; ++y) {
    for (std::size_t j = 0; j < h; ++j) {
      double a = g.pixels[y * n + 2 * j];
      double b = g.pixels[y * n + 2 * j + 1];
      rows[y * n + j] = (a + b) / r2;
      rows[y * n + h + j] = (a - b) / r2;
    }
  }
  std::vector<double> full(n * n);
  for (std::size_t x = 0; x < n; ++x) {
    for (std::size_t i = 0; i < h; ++i) {
      double a = rows[(2 * i) * n + x];
      double b = rows[(2 * i + 1) * n + x];
      full[i * n + x] = (a + b) / r2;
      full[(h + i) * n + x] = (a - b) / r2;
    }
  }
  std::vector<double> out;
  out.reserve(n * n);
  const std::array<std::pair<std::size_t, std::size_t>, 4> origins = {
      std::pair{0, 0}, std::pair{0, h}, std::pair{h, 0}, std::pair{h, h}};
  for (auto [r0, c0] : origins) {
    for (std::size_t i = 0; i < h; ++i) {
      for (std::size_t j = 0; j < h; ++j) out.push_back(full[(r0 + i) * n + c0 + j]);
    }
  }
  return out;
}

inline BitVector1024 wavelet_hash(const GrayImage& g,
                                  MedianMode mode = MedianMode::kExcludeDc) {
  auto coeffs = haar2(g);
  std::vector<double> pool(coeffs.begin() + (mode == MedianMode::kExcludeDc ? 1 : 0),
                           coeffs.end());
  return detail::threshold_bits(coeffs, detail::median(std::move(pool)),
                                HashKind::kWavelet);
}

struct SsimOptions {
  std::size_t window = 7;
  double sigma = 1.5;
  double dynamic_range = 255.0;
};

// Mean SSIM over every fully contained Gaussian window (no padding).
inline double mean_ssim(const GrayImage& a, const GrayImage& b,
                        const SsimOptions& opt = {}) {
  if (a.width != b.width || a.height != b.height) {
    fail(ErrorKind::kUsage, "ssim on images of different size");
  }
  const std::size_t w = opt.window;
  if (a.width < w || a.height < w) fail(ErrorKind::kUsage, "image smaller than SSIM window");
  std::vector<double> kernel(w * w);
  double total = 0.0;
  const double c = (static_cast<double>(w) - 1.0) / 2.0;
  for (std::size_t i = 0; i < w; ++i) {
    for (std::size_t j = 0; j < w; ++j) {
      double d2 = (i - c) * (i - c) + (j - c) * (j - c);
      kernel[i * w + j] = std::exp(-d2 / (2.0 * opt.sigma * opt.sigma));
      total += kernel[i * w + j];
    }
  }
  for (auto& k : kernel) k /= total;
  const double c1 = std::pow(0.01 * opt.dynamic_range, 2);
  const double c2 = std::pow(0.03 * opt.dynamic_range, 2);

  double sum = 0.0;
  std::size_t windows = 0;
  for (std::size_t y = 0; y + w <= a.height; ++y) {
    for (std::size_t x = 0; x + w <= a.width; ++x) {
      double ma = 0, mb = 0, saa = 0, sbb = 0, sab = 0;
      for (std::size_t i = 0; i < w; ++i) {
        for (std::size_t j = 0; j < w; ++j) {
          double k = kernel[i * w + j];
          double pa = a.at(y + i, x + j);
          double pb = b.at(y + i, x + j);
          ma += k * pa;
          mb += k * pb;
          saa += k * (pa * pa);
          sbb += k * (pb * pb);
          sab += k * (pa * pb);
        }
      }
      double va = saa - ma * ma;
      double vb = sbb - mb * mb;
      double cov = sab - ma * mb;
      double num = (2.0 * (ma * mb) + c1) * (2.0 * cov + c2);
      double den = ((ma * ma + mb * mb) + c1) * ((va + vb) + c2);
      sum += num / den;
      ++windows;
    }
  }
  return sum / static_cast<double>(windows);
}

// (1 - SSIM) / 2, in [0, 1].
inline double ssim_dissimilarity(const GrayImage& a, const GrayImage& b,
                                 const SsimOptions& opt = {}) {
  return (1.0 - mean_ssim(a, b, opt)) / 2.0;
}

// Hash sidecar: "IFHASH01", u8 kind, u64 count, then per record
// u32 id length, id bytes, 128 hash bytes (all integers little-endian).
inline constexpr std::string_view kHashMagic = "IFHASH01";

struct HashTable {
  HashKind kind = HashKind::kAverage;
  std::vector<std::pair<std::string, BitVector1024>> entries;
};

inline void write_hash_table(const HashTable& table, const std::filesystem::path& path) {
  std::string out(kHashMagic);
  out.push_back(static_cast<char>(table.kind));
  detail::put<std::uint64_t>(out, table.entries.size());
  for (const auto& [id, bits] : table.entries) {
    if (bits.kind() != table.kind) {
      fail(ErrorKind::kUsage, "hash table mixes kinds at '" + id + "'");
    }
    detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(id.size()));
    out += id;
    auto bytes = bits.to_bytes();
    out.append(reinterpret_cast<const char*>(bytes.data()), bytes.size());
  }
  write_file_bytes(path, out);
}

inline HashTable read_hash_table(const std::filesystem::path& path) {
  auto bytes = read_file_bytes(path);
  const auto origin = path.string();
  if (bytes.size() < 17 || std::string_view(bytes).substr(0, 8) != kHashMagic) {
    fail(ErrorKind::kFormat, origin + ": missing IFHASH01 magic");
  }
  HashTable table;
  auto code = static_cast<std::uint8_t>(bytes[8]);
  if (code > 3) fail(ErrorKind::kFormat, origin + ": unknown hash kind code");
  table.kind = static_cast<HashKind>(code);
  auto count = detail::get<std::uint64_t>(bytes.data() + 9);
  std::size_t pos = 17;
  for (std::uint64_t r = 0; r < count; ++r) {
    if (pos + 4 > bytes.size()) fail(ErrorKind::kCorruption, origin + ": truncated");
    auto len = detail::get<std::uint32_t>(bytes.data() + pos);
    pos += 4;
    if (pos + len + BitVector1024::kBytes > bytes.size()) {
      fail(ErrorKind::kCorruption, origin + ": truncated");
    }
    std::string id = bytes.substr(pos, len);
    pos += len;
    std::array<std::uint8_t, BitVector1024::kBytes> raw;
    std::memcpy(raw.data(), bytes.data() + pos, raw.size());
    pos += raw.size();
    table.entries.emplace_back(std::move(id), BitVector1024::from_bytes(raw, table.kind));
  }
  if (pos != bytes.size()) fail(ErrorKind::kCorruption, origin + ": trailing bytes");
  return table;
}

}  // namespace appsim
