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

// Vector kernels, cosine distance, and the weighted multi-modal distance.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>

#include "appsim/error.hpp"

namespace appsim {

// Products are accumulated in double across eight independent lanes. The
// result depends only on the two inputs, never on how a scan is sharded.
inline double dot(std::span<const float> a, std::span<const float> b) noexcept {
  constexpr std::size_t kLanes = 8;
  std::array<double, kLanes> acc{};
  const std::size_t n = a.size();
  const float* pa = a.data();
  const float* pb = b.data();
  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes) {
    for (std::size_t j = 0; j < kLanes; ++j) {
      acc[j] += static_cast<double>(pa[i + j]) * static_cast<double>(pb[i + j]);
    }
  }
  double tail = 0.0;
  for (; i < n; ++i) tail += static_cast<double>(pa[i]) * static_cast<double>(pb[i]);
  return ((acc[0] + acc[1]) + (acc[2] + acc[3])) +
         ((acc[4] + acc[5]) + (acc[6] + acc[7])) + tail;
}

inline double l2_norm(std::span<const float> a) noexcept {
  return std::sqrt(dot(a, a));
}

struct CosineDistance {
  double value = 1.0;
  // Set when either input is the zero vector; value is then 1.
  bool degenerate = false;
};

// 1 - cos(x, y) from the dot product and the squared norms. sqrt(a * a) == a
// in IEEE arithmetic, so x == y gives exactly 0.
inline CosineDistance cosine_from_parts(double dot_xy, double sq_norm_x,
                                        double sq_norm_y) noexcept {
  if (sq_norm_x == 0.0 || sq_norm_y == 0.0) return {1.0, true};
  double cos = dot_xy / std::sqrt(sq_norm_x * sq_norm_y);
  return {1.0 - std::clamp(cos, -1.0, 1.0), false};
}

inline CosineDistance cosine_distance_checked(std::span<const float> x,
                                              std::span<const float> y) {
  if (x.size() != y.size()) {
    fail(ErrorKind::kShape, "cosine distance on vectors of length " +
                                std::to_string(x.size()) + " and " +
                                std::to_string(y.size()));
  }
  return cosine_from_parts(dot(x, y), dot(x, x), dot(y, y));
}

inline double cosine_distance(std::span<const float> x, std::span<const float> y) {
  return cosine_distance_checked(x, y).value;
}

enum class Modality { kContent = 0, kStyle = 1, kText = 2 };
inline constexpr std::array<Modality, 3> kModalities = {
    Modality::kContent, Modality::kStyle, Modality::kText};

constexpr const char* modality_name(Modality m) {
  switch (m) {
    case Modality::kContent: return "content";
    case Modality::kStyle: return "style";
    case Modality::kText: return "text";
  }
  return "?";
}

// Fusion weights; alpha scales content, beta style, gamma text.
struct Weights {
  double alpha = 1.0;
  double beta = 5.0;
  double gamma = 4.0;

  double operator[](Modality m) const noexcept {
    switch (m) {
      case Modality::kContent: return alpha;
      case Modality::kStyle: return beta;
      case Modality::kText: return gamma;
    }
    return 0.0;
  }

  double total() const noexcept { return alpha + beta + gamma; }

  void validate() const {
    if (!(alpha >= 0 && beta >= 0 && gamma >= 0)) {
      fail(ErrorKind::kValidation, "fusion weights must be non-negative");
    }
    if (alpha == 0 && beta == 0 && gamma == 0) {
      fail(ErrorKind::kValidation, "at least one fusion weight must be positive");
    }
  }

  static Weights only(Modality m) {
    Weights w{0, 0, 0};
    switch (m) {
      case Modality::kContent: w.alpha = 1; break;
      case Modality::kStyle: w.beta = 1; break;
      case Modality::kText: w.gamma = 1; break;
    }
    return w;
  }

  friend bool operator==(const Weights&, const Weights&) = default;
};

// Weighted sum of per-modality distances. Modalities with zero weight do not
// contribute even when their distance is unknown.
inline double fuse(const std::array<double, 3>& distances, const Weights& w) noexcept {
  double total = 0.0;
  for (auto m : kModalities) {
    double wm = w[m];
    if (wm != 0.0) total += wm * distances[static_cast<std::size_t>(m)];
  }
  return total;
}

}  // namespace appsim
