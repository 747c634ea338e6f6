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

// Style embeddings: Gram matrices of feature maps, optional kernel transforms,
// upper-triangular flattening, and very sparse random projection.

#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <sstream>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include "appsim/error.hpp"
#include "appsim/feature_map.hpp"
#include "appsim/parallel.hpp"
#include "appsim/tensor.hpp"

namespace appsim {

class GramMatrix {
 public:
  explicit GramMatrix(Tensor values) : values_(std::move(values)) {
    if (values_.ndim() != 2 || values_.dim(0) != values_.dim(1)) {
      fail(ErrorKind::kShape, "Gram matrix must be square");
    }
  }

  std::size_t n() const noexcept { return values_.dim(0); }
  float at(std::size_t i, std::size_t j) const { return values_.values()[i * n() + j]; }
  const Tensor& values() const noexcept { return values_; }

 private:
  Tensor values_;
};

namespace detail {

// Fills the upper triangle with f(dot(row_i, row_j)) and mirrors it.
template <typename Transform>
GramMatrix gram_with(const Tensor& rows, Transform&& transform) {
  const std::size_t n = rows.dim(0);
  const std::size_t m = rows.row_width();
  std::vector<float> out(n * n);
  const float* base = rows.values().data();
  for (std::size_t i = 0; i < n; ++i) {
    const float* ri = base + i * m;
    for (std::size_t j = i; j < n; ++j) {
      const float* rj = base + j * m;
      double s = 0.0;
      for (std::size_t k = 0; k < m; ++k) {
        s += static_cast<double>(ri[k]) * static_cast<double>(rj[k]);
      }
      float v = static_cast<float>(transform(s));
      out[i * n + j] = v;
      out[j * n + i] = v;
    }
  }
  return GramMatrix(Tensor::matrix(n, n, std::move(out)));
}

}  // namespace detail

inline GramMatrix gram_matrix(const FeatureMap& f) {
  return detail::gram_with(f.values(), [](double s) { return s; });
}

// Length n(n+1)/2, ordered (0,0), (0,1), ..., (0,n-1), (1,1), ...
inline Tensor flatten_upper(const GramMatrix& g) {
  const std::size_t n = g.n();
  std::vector<float> out;
  out.reserve(n * (n + 1) / 2);
  auto v = g.values().values();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i; j < n; ++j) out.push_back(v[i * n + j]);
  }
  return Tensor::vector(std::move(out));
}

// Polynomial kernel on filter-response rows: (dot(row_i, row_j) + a)^b.
inline GramMatrix kernel_poly(const FeatureMap& f, double a, double b) {
  if (b == 0.0) fail(ErrorKind::kUsage, "polynomial kernel exponent must be non-zero");
  const bool integral = std::floor(b) == b;
  return detail::gram_with(f.values(), [&](double s) {
    double base = s + a;
    if (b == 1.0) return base;
    if (base < 0.0 && !integral) {
      fail(ErrorKind::kDomain, "polynomial kernel: negative base with non-integer exponent");
    }
    return std::pow(base, b);
  });
}

// Gram matrix of the feature map with c added to every activation.
inline GramMatrix kernel_shift(const FeatureMap& f, double c) {
  if (c == 0.0) return gram_matrix(f);
  std::vector<float> shifted(f.values().values().begin(), f.values().values().end());
  for (auto& v : shifted) v = static_cast<float>(v + c);
  return gram_matrix(FeatureMap(Tensor(f.values().dims(), std::move(shifted))));
}

// Elementwise exp(G / d).
inline GramMatrix kernel_sqexp(const GramMatrix& g, double d) {
  if (!(d > 0.0)) fail(ErrorKind::kUsage, "squared-exponential kernel needs d > 0");
  const std::size_t n = g.n();
  std::vector<float> out(n * n);
  std::vector<std::pair<std::size_t, std::size_t>> overflow;
  auto v = g.values().values();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      float e = static_cast<float>(std::exp(static_cast<double>(v[i * n + j]) / d));
      if (std::isinf(e) && i <= j) overflow.emplace_back(i, j);
      out[i * n + j] = e;
    }
  }
  if (!overflow.empty()) {
    std::ostringstream msg;
    msg << "squared-exponential kernel overflows at " << overflow.size()
        << " entries, e.g.";
    for (std::size_t k = 0; k < std::min<std::size_t>(overflow.size(), 8); ++k) {
      msg << " (" << overflow[k].first << "," << overflow[k].second << ")";
    }
    fail(ErrorKind::kRange, msg.str());
  }
  return GramMatrix(Tensor::matrix(n, n, std::move(out)));
}

struct KernelNone {};
struct KernelPoly { double a = 0, b = 1; };
struct KernelShift { double c = 0; };
struct KernelSqExp { double d = 1; };
using StyleKernel = std::variant<KernelNone, KernelPoly, KernelShift, KernelSqExp>;

// Parses "none", "poly:a,b", "shift:c", or "sqexp:d".
inline StyleKernel parse_style_kernel(const std::string& spec) {
  auto colon = spec.find(':');
  std::string name = spec.substr(0, colon);
  std::string args = colon == std::string::npos ? "" : spec.substr(colon + 1);
  auto number = [&](const std::string& s) {
    try {
      std::size_t used = 0;
      double v = std::stod(s, &used);
      if (used != s.size()) throw std::invalid_argument(s);
      return v;
    } catch (const std::exception&) {
      fail(ErrorKind::kUsage, "bad kernel parameter '" + s + "' in '" + spec + "'");
    }
  };
  if (name == "none" && args.empty()) return KernelNone{};
  if (name == "poly") {
    auto comma = args.find(',');
    if (comma == std::string::npos) fail(ErrorKind::kUsage, "poly kernel needs a,b");
    return KernelPoly{number(args.substr(0, comma)), number(args.substr(comma + 1))};
  }
  if (name == "shift") return KernelShift{number(args)};
  if (name == "sqexp") return KernelSqExp{number(args)};
  fail(ErrorKind::kUsage, "unknown style kernel '" + spec + "'");
}

inline GramMatrix style_gram(const FeatureMap& f, const StyleKernel& kernel) {
  struct Visitor {
    const FeatureMap& f;
    GramMatrix operator()(KernelNone) const { return gram_matrix(f); }
    GramMatrix operator()(KernelPoly k) const { return kernel_poly(f, k.a, k.b); }
    GramMatrix operator()(KernelShift k) const { return kernel_shift(f, k.c); }
    GramMatrix operator()(KernelSqExp k) const { return kernel_sqexp(gram_matrix(f), k.d); }
  };
  return std::visit(Visitor{f}, kernel);
}

// Counter-based generator: the value for a counter depends only on the key.
inline constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

// Very sparse random projection R (D x k). Entry (r, c) is +D^(1/4) or
// -D^(1/4) with probability 1 / (2 sqrt D) each, otherwise 0, drawn from a
// hash of (seed, r, c). Only nonzeros are stored, grouped by column.
class ProjectionMatrix {
 public:
  ProjectionMatrix(std::size_t input_dim, std::size_t output_dim, std::uint64_t seed,
                   unsigned threads = 1)
      : input_dim_(input_dim), output_dim_(output_dim), seed_(seed) {
    if (input_dim == 0 || output_dim == 0) {
      fail(ErrorKind::kUsage, "projection dimensions must be positive");
    }
    if (input_dim > std::numeric_limits<std::uint32_t>::max()) {
      fail(ErrorKind::kUsage, "projection input dimension too large");
    }
    scale_ = std::pow(static_cast<double>(input_dim), 0.25);
    std::vector<std::vector<std::int64_t>> columns(output_dim);
    parallel_for(output_dim, threads, [&](std::size_t c) {
      auto& col = columns[c];
      for (std::size_t r = 0; r < input_dim; ++r) {
        int s = entry_sign(r, c);
        if (s != 0) col.push_back(s > 0 ? static_cast<std::int64_t>(r) + 1
                                        : -static_cast<std::int64_t>(r) - 1);
      }
    });
    offsets_.reserve(output_dim + 1);
    offsets_.push_back(0);
    for (const auto& col : columns) {
      for (auto e : col) {
        rows_.push_back(static_cast<std::uint32_t>(e > 0 ? e - 1 : -e - 1));
        signs_.push_back(static_cast<std::int8_t>(e > 0 ? 1 : -1));
      }
      offsets_.push_back(rows_.size());
    }
  }

  // Builds from an explicit dense D x k matrix (row-major). Every entry must be
  // 0 or +/- D^(1/4).
  static ProjectionMatrix from_dense(std::size_t input_dim, std::size_t output_dim,
                                     std::span<const float> dense) {
    if (dense.size() != input_dim * output_dim) {
      fail(ErrorKind::kShape, "dense projection has the wrong number of entries");
    }
    ProjectionMatrix p;
    p.input_dim_ = input_dim;
    p.output_dim_ = output_dim;
    p.scale_ = std::pow(static_cast<double>(input_dim), 0.25);
    p.offsets_.push_back(0);
    for (std::size_t c = 0; c < output_dim; ++c) {
      for (std::size_t r = 0; r < input_dim; ++r) {
        double v = dense[r * output_dim + c];
        if (v == 0.0) continue;
        if (std::abs(std::abs(v) - p.scale_) > 1e-5 * p.scale_) {
          fail(ErrorKind::kValidation, "projection entries must be 0 or +/- D^(1/4)");
        }
        p.rows_.push_back(static_cast<std::uint32_t>(r));
        p.signs_.push_back(v > 0 ? 1 : -1);
      }
      p.offsets_.push_back(p.rows_.size());
    }
    return p;
  }

  // Sign of entry (r, c) as generated for `seed`: +1, -1, or 0.
  static int entry_sign(std::size_t input_dim, std::uint64_t seed, std::size_t r,
                        std::size_t c, std::size_t output_dim) noexcept {
    const std::uint64_t half = half_threshold(input_dim);
    const std::uint64_t h = splitmix64(splitmix64(seed) ^ (r * output_dim + c));
    if (h < half) return +1;
    if (h - half < half) return -1;
    return 0;
  }

  int entry_sign(std::size_t r, std::size_t c) const noexcept {
    return entry_sign(input_dim_, seed_, r, c, output_dim_);
  }

  std::size_t input_dim() const noexcept { return input_dim_; }
  std::size_t output_dim() const noexcept { return output_dim_; }
  std::uint64_t seed() const noexcept { return seed_; }
  double scale() const noexcept { return scale_; }
  std::size_t nonzeros() const noexcept { return rows_.size(); }

  std::span<const std::uint32_t> column_rows(std::size_t c) const {
    return std::span(rows_).subspan(offsets_[c], offsets_[c + 1] - offsets_[c]);
  }
  std::span<const std::int8_t> column_signs(std::size_t c) const {
    return std::span(signs_).subspan(offsets_[c], offsets_[c + 1] - offsets_[c]);
  }

  // Row-major dense copy; intended for small matrices.
  std::vector<float> to_dense() const {
    std::vector<float> out(input_dim_ * output_dim_, 0.0f);
    for (std::size_t c = 0; c < output_dim_; ++c) {
      auto rows = column_rows(c);
      auto signs = column_signs(c);
      for (std::size_t e = 0; e < rows.size(); ++e) {
        out[rows[e] * output_dim_ + c] = static_cast<float>(signs[e] * scale_);
      }
    }
    return out;
  }

  // One output row: (1 / sqrt k) * a * R.
  void project_row(std::span<const float> a, std::span<float> out) const {
    if (a.size() != input_dim_) {
      fail(ErrorKind::kShape, "projection input has width " + std::to_string(a.size()) +
                                  ", expected " + std::to_string(input_dim_));
    }
    if (out.size() != output_dim_) fail(ErrorKind::kShape, "projection output width");
    const double factor = scale_ / std::sqrt(static_cast<double>(output_dim_));
    for (std::size_t c = 0; c < output_dim_; ++c) {
      double s = 0.0;
      for (std::size_t e = offsets_[c]; e < offsets_[c + 1]; ++e) {
        s += signs_[e] * static_cast<double>(a[rows_[e]]);
      }
      out[c] = static_cast<float>(s * factor);
    }
  }

 private:
  ProjectionMatrix() = default;

  static std::uint64_t half_threshold(std::size_t input_dim) noexcept {
    // floor(2^64 / (2 sqrt D)), saturated for D = 1 where it is exactly 2^63.
    long double p = 0.5L / std::sqrt(static_cast<long double>(input_dim));
    long double t = std::ldexp(p, 64);
    if (t >= 18446744073709551615.0L) return std::numeric_limits<std::uint64_t>::max();
    return static_cast<std::uint64_t>(t);
  }

  std::size_t input_dim_ = 0;
  std::size_t output_dim_ = 0;
  std::uint64_t seed_ = 0;
  double scale_ = 1.0;
  std::vector<std::size_t> offsets_;
  std::vector<std::uint32_t> rows_;
  std::vector<std::int8_t> signs_;
};

inline ProjectionMatrix make_projection(std::size_t input_dim, std::size_t output_dim,
                                        std::uint64_t seed, unsigned threads = 1) {
  return ProjectionMatrix(input_dim, output_dim, seed, threads);
}

// B = (1 / sqrt k) A R for an n x D batch; rows are independent.
inline Tensor project(const Tensor& batch, const ProjectionMatrix& p,
                      unsigned threads = 1) {
  if (batch.ndim() != 2 || batch.dim(1) != p.input_dim()) {
    fail(ErrorKind::kShape, "projection batch must be n x " + std::to_string(p.input_dim()));
  }
  Tensor out = Tensor::zeros({batch.dim(0), p.output_dim()});
  parallel_for(batch.dim(0), threads,
               [&](std::size_t i) { p.project_row(batch.row(i), out.row(i)); });
  return out;
}

// Feature map -> (kernel) Gram -> upper triangle -> projection.
inline std::vector<float> style_embedding(const FeatureMap& f, const ProjectionMatrix& p,
                                          const StyleKernel& kernel = KernelNone{}) {
  auto flat = flatten_upper(style_gram(f, kernel));
  std::vector<float> out(p.output_dim());
  p.project_row(flat.values(), out);
  return out;
}

}  // namespace appsim
