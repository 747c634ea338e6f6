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

#include <gtest/gtest.h>

#include <random>

#include "appsim/knee.hpp"

namespace appsim {
namespace {

ErrorKind kind_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  return ErrorKind::kIo;
}

TEST(Kneedle, ThreeSegmentFixture) {
  std::vector<double> x{0, 0.2, 1}, y{0, 0.8, 1};
  auto k = find_knee(x, y);
  EXPECT_NEAR(k.x, 0.2, 1e-9);
  EXPECT_EQ(k.shape, CurveShape::kConcave);
  EXPECT_EQ(k.direction, CurveDirection::kIncreasing);
}

TEST(Kneedle, OrientationIsDetected) {
  // The same bend mirrored into convex and decreasing forms.
  std::vector<double> x{0, 0.8, 1}, convex{0, 0.2, 1};
  auto c = find_knee(x, convex);
  EXPECT_NEAR(c.x, 0.8, 1e-9);
  EXPECT_EQ(c.shape, CurveShape::kConvex);
  std::vector<double> xd{0, 0.2, 1}, dec{1, 0.2, 0};
  auto d = find_knee(xd, dec);
  EXPECT_NEAR(d.x, 0.2, 1e-9);
  EXPECT_EQ(d.direction, CurveDirection::kDecreasing);
}

TEST(Kneedle, LinearCurveHasNoKnee) {
  std::vector<double> x, y;
  for (int i = 0; i < 50; ++i) {
    x.push_back(i);
    y.push_back(3.0 * i + 1);
  }
  EXPECT_EQ(kind_of([&] { find_knee(x, y); }), ErrorKind::kNoKnee);
  EXPECT_EQ(kind_of([&] { kneedle_threshold(y); }), ErrorKind::kNoKnee);
  std::vector<double> flat(10, 2.0);
  EXPECT_EQ(kind_of([&] { kneedle_threshold(flat); }), ErrorKind::kNoKnee);
}

TEST(Kneedle, NeedsThreeDistinctPoints) {
  std::vector<double> two{1, 2};
  EXPECT_EQ(kind_of([&] { kneedle_threshold(two); }), ErrorKind::kUsage);
  std::vector<double> x{0, 0, 1}, y{0, 0, 1};
  EXPECT_EQ(kind_of([&] { find_knee(x, y); }), ErrorKind::kUsage);
}

TEST(Kneedle, ThresholdSitsAtTheJump) {
  // Sorted distances: a tight low cluster then a wide high plateau.
  std::vector<double> d;
  for (int i = 0; i < 20; ++i) d.push_back(0.01 * i);
  for (int i = 0; i < 80; ++i) d.push_back(5.0 + 0.001 * i);
  double t = kneedle_threshold(d);
  EXPECT_GE(t, 0.19);
  EXPECT_LE(t, 5.0);
  std::shuffle(d.begin(), d.end(), std::mt19937_64(1));
  EXPECT_EQ(kneedle_threshold(d), t);
}

TEST(Quantile, Interpolates) {
  std::vector<double> v{4, 1, 3, 2};
  EXPECT_EQ(quantile(v, 0), 1.0);
  EXPECT_EQ(quantile(v, 1), 4.0);
  EXPECT_DOUBLE_EQ(quantile(v, 0.5), 2.5);
  EXPECT_THROW(quantile(v, 1.5), Error);
  EXPECT_THROW(quantile(std::vector<double>{}, 0.5), Error);
}

}  // namespace
}  // namespace appsim
