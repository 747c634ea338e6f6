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

// Kneedle knee detection.
//
// Points are normalised to the unit square and mapped onto a concave
// increasing curve (rotating or mirroring as needed), so the knee is the
// point furthest above the chord y = x. The maximum of the difference curve
// y - x is accepted as the knee once some later point falls below
// max - S * (mean x spacing).

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "appsim/error.hpp"

namespace appsim {

enum class CurveShape { kConcave, kConvex };
enum class CurveDirection { kIncreasing, kDecreasing };

struct Knee {
  std::size_t index = 0;  // position in the input arrays
  double x = 0.0;
  double y = 0.0;
  CurveShape shape = CurveShape::kConcave;
  CurveDirection direction = CurveDirection::kIncreasing;
};

inline Knee find_knee(std::span<const double> x, std::span<const double> y,
                      double sensitivity = 1.0) {
  const std::size_t n = x.size();
  if (n != y.size()) fail(ErrorKind::kUsage, "knee: x and y differ in length");
  std::vector<std::pair<double, double>> distinct;
  for (std::size_t i = 0; i < n; ++i) distinct.emplace_back(x[i], y[i]);
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  if (distinct.size() < 3) fail(ErrorKind::kUsage, "knee detection needs at least 3 distinct points");

  auto [xmin, xmax] = std::minmax_element(x.begin(), x.end());
  auto [ymin, ymax] = std::minmax_element(y.begin(), y.end());
  const double xr = *xmax - *xmin;
  const double yr = *ymax - *ymin;
  if (xr == 0.0 || yr == 0.0) fail(ErrorKind::kNoKnee, "flat curve has no knee");

  // Order by x to find the endpoints and the chord.
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return x[a] < x[b]; });
  std::vector<double> xn(n), yn(n);
  for (std::size_t i = 0; i < n; ++i) {
    xn[i] = (x[i] - *xmin) / xr;
    yn[i] = (y[i] - *ymin) / yr;
  }
  const double y_first = yn[order.front()];
  const double y_last = yn[order.back()];
  const auto direction = y_last >= y_first ? CurveDirection::kIncreasing : CurveDirection::kDecreasing;
  double above = 0.0;
  for (std::size_t i = 0; i < n; ++i) above += yn[i] - (y_first + (y_last - y_first) * xn[i]);
  const auto shape = above > 0.0 ? CurveShape::kConcave : CurveShape::kConvex;

  std::vector<double> u(n), v(n);
  for (std::size_t i = 0; i < n; ++i) {
    const bool inc = direction == CurveDirection::kIncreasing;
    const bool concave = shape == CurveShape::kConcave;
    u[i] = (inc == concave) ? xn[i] : 1.0 - xn[i];
    v[i] = concave ? yn[i] : 1.0 - yn[i];
  }
  std::vector<std::size_t> by_u(n);
  std::iota(by_u.begin(), by_u.end(), std::size_t{0});
  std::stable_sort(by_u.begin(), by_u.end(), [&](auto a, auto b) { return u[a] < u[b]; });

  std::vector<double> diff(n);
  for (std::size_t i = 0; i < n; ++i) diff[i] = v[by_u[i]] - u[by_u[i]];
  const std::size_t best =
      static_cast<std::size_t>(std::max_element(diff.begin(), diff.end()) - diff.begin());
  if (best == 0 || best == n - 1) fail(ErrorKind::kNoKnee, "difference curve has no interior maximum");
  const double spacing = (u[by_u[n - 1]] - u[by_u[0]]) / static_cast<double>(n - 1);
  const double threshold = diff[best] - sensitivity * spacing;
  bool confirmed = false;
  for (std::size_t i = best + 1; i < n && !confirmed; ++i) confirmed = diff[i] < threshold;
  if (!confirmed) fail(ErrorKind::kNoKnee, "difference curve never drops below the knee threshold");

  Knee k;
  k.index = by_u[best];
  k.x = x[k.index];
  k.y = y[k.index];
  k.shape = shape;
  k.direction = direction;
  return k;
}

// Knee of the sorted-distance curve (x = rank / n, y = distance); returns
// the distance at the knee.
inline double kneedle_threshold(std::span<const double> distances, double sensitivity = 1.0) {
  std::vector<double> sorted(distances.begin(), distances.end());
  std::sort(sorted.begin(), sorted.end());
  std::vector<double> rank(sorted.size());
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    rank[i] = static_cast<double>(i) / static_cast<double>(sorted.size());
  }
  return find_knee(rank, sorted, sensitivity).y;
}

// Linear-interpolated quantile, q in [0, 1].
inline double quantile(std::span<const double> values, double q) {
  if (values.empty()) fail(ErrorKind::kUsage, "quantile of an empty list");
  if (!(q >= 0.0 && q <= 1.0)) fail(ErrorKind::kUsage, "quantile must be in [0, 1]");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  double pos = q * static_cast<double>(sorted.size() - 1);
  auto lo = static_cast<std::size_t>(std::floor(pos));
  auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

}  // namespace appsim
