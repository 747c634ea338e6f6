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

#include <cmath>
#include <numbers>
#include <random>

#include "appsim/hashing.hpp"
#include "support/oracles.hpp"

namespace appsim {
namespace {

GrayImage constant(float v, std::size_t w = kHashSide) { return GrayImage(w, kHashSide, v); }

GrayImage ramp(bool brightening) {
  GrayImage g(kHashSide + 1, kHashSide);
  for (std::size_t r = 0; r < g.height; ++r) {
    for (std::size_t c = 0; c < g.width; ++c) {
      g.at(r, c) = static_cast<float>(brightening ? c * 7 : 255 - c * 7);
    }
  }
  return g;
}

TEST(BitVector, HammingExamples) {
  std::mt19937_64 rng(1);
  BitVector1024 a(HashKind::kAverage);
  for (std::size_t i = 0; i < 1024; ++i) a.set(i, rng() & 1);
  EXPECT_EQ(hamming(a, a), 0u);
  EXPECT_EQ(hamming(a, a.complement()), 1024u);
  auto b = a;
  for (std::size_t i : {3u, 500u, 1023u}) b.set(i, !b.test(i));
  EXPECT_EQ(hamming(a, b), 3u);
  EXPECT_THROW(hamming(a, BitVector1024(HashKind::kWavelet)), Error);
  auto bytes = a.to_bytes();
  EXPECT_EQ(BitVector1024::from_bytes(bytes, HashKind::kAverage), a);
  EXPECT_EQ(bytes[0] & 1, a.test(0) ? 1 : 0);
  EXPECT_EQ((bytes[1] >> 2) & 1, a.test(10) ? 1 : 0);
}

TEST(BitVector, HammingIsAMetric) {
  std::mt19937_64 rng(2);
  auto random_bits = [&] {
    BitVector1024 v(HashKind::kPerceptual);
    // Mix sparse and dense vectors so distances vary widely.
    std::uint64_t density = rng() % 4;
    for (std::size_t i = 0; i < 1024; ++i) v.set(i, (rng() % 4) < density);
    return v;
  };
  for (int t = 0; t < 1000; ++t) {
    auto x = random_bits(), y = random_bits(), z = random_bits();
    EXPECT_EQ(hamming(x, y), hamming(y, x));
    EXPECT_LE(hamming(x, z), hamming(x, y) + hamming(y, z));
    EXPECT_EQ(hamming(x, y) == 0, x == y);
  }
}

TEST(AverageHash, TieRules) {
  EXPECT_EQ(average_hash(constant(0)).count(), 0u);
  EXPECT_EQ(average_hash(constant(200)).count(), 0u);
  GrayImage halves(kHashSide, kHashSide);
  GrayImage checker(kHashSide, kHashSide);
  for (std::size_t r = 0; r < kHashSide; ++r) {
    for (std::size_t c = 0; c < kHashSide; ++c) {
      halves.at(r, c) = c < 16 ? 0.0f : 255.0f;
      checker.at(r, c) = (r + c) % 2 ? 255.0f : 0.0f;
    }
  }
  auto h = average_hash(halves);
  auto k = average_hash(checker);
  for (std::size_t i = 0; i < 1024; ++i) {
    EXPECT_EQ(h.test(i), (i % 32) >= 16);
    EXPECT_EQ(k.test(i), ((i / 32) + (i % 32)) % 2 == 1);
  }
  EXPECT_THROW(average_hash(GrayImage(16, 16)), Error);

  std::mt19937_64 rng(4);
  for (int t = 0; t < 50; ++t) EXPECT_LT(average_hash(testing::random_gray(rng)).count(), 1024u);
}

TEST(DifferenceHash, Gradients) {
  EXPECT_EQ(difference_hash(constant(90, kHashSide + 1)).count(), 0u);
  EXPECT_EQ(difference_hash(ramp(true)).count(), 1024u);
  EXPECT_EQ(difference_hash(ramp(false)).count(), 0u);
  EXPECT_THROW(difference_hash(constant(1)), Error);
}

// Direct evaluation of the orthonormal 2-D DCT-II definition.
std::vector<double> naive_dct(const GrayImage& g) {
  const std::size_t n = g.width;
  std::vector<double> out(n * n);
  for (std::size_t u = 0; u < n; ++u) {
    for (std::size_t v = 0; v < n; ++v) {
      long double s = 0;
      for (std::size_t y = 0; y < n; ++y) {
        for (std::size_t x = 0; x < n; ++x) {
          s += g.at(y, x) * std::cos(std::numbers::pi * (2 * y + 1) * u / (2.0 * n)) *
               std::cos(std::numbers::pi * (2 * x + 1) * v / (2.0 * n));
        }
      }
      double cu = u == 0 ? std::sqrt(1.0 / n) : std::sqrt(2.0 / n);
      double cv = v == 0 ? std::sqrt(1.0 / n) : std::sqrt(2.0 / n);
      out[u * n + v] = static_cast<double>(s) * cu * cv;
    }
  }
  return out;
}

TEST(PerceptualHash, DctMatchesDefinition) {
  std::mt19937_64 rng(6);
  auto g = testing::random_gray(rng);
  auto fast = dct2(g);
  auto slow = naive_dct(g);
  for (std::size_t i = 0; i < fast.size(); ++i) EXPECT_NEAR(fast[i], slow[i], 1e-6);
}

TEST(PerceptualHash, ConstantImageSetsOnlyDc) {
  auto h = perceptual_hash(constant(128));
  EXPECT_EQ(h.count(), 1u);
  EXPECT_TRUE(h.test(0));
  EXPECT_EQ(perceptual_hash(constant(0)).count(), 0u);
  std::mt19937_64 rng(7);
  auto g = testing::random_gray(rng);
  EXPECT_EQ(hamming(perceptual_hash(g), perceptual_hash(g)), 0u);
}

// Haar subbands from 2x2 blocks [a b; c d].
std::vector<double> naive_haar(const GrayImage& g) {
  std::vector<double> ll, lh, hl, hh;
  for (std::size_t i = 0; i < 16; ++i) {
    for (std::size_t j = 0; j < 16; ++j) {
      double a = g.at(2 * i, 2 * j), b = g.at(2 * i, 2 * j + 1);
      double c = g.at(2 * i + 1, 2 * j), d = g.at(2 * i + 1, 2 * j + 1);
      ll.push_back((a + b + c + d) / 2);
      lh.push_back((a - b + c - d) / 2);
      hl.push_back((a + b - c - d) / 2);
      hh.push_back((a - b - c + d) / 2);
    }
  }
  std::vector<double> out;
  for (auto* band : {&ll, &lh, &hl, &hh}) out.insert(out.end(), band->begin(), band->end());
  return out;
}

TEST(WaveletHash, HaarMatchesBlockOracle) {
  std::mt19937_64 rng(8);
  auto g = testing::random_gray(rng);
  auto fast = haar2(g);
  auto slow = naive_haar(g);
  ASSERT_EQ(fast.size(), 1024u);
  for (std::size_t i = 0; i < 1024; ++i) EXPECT_NEAR(fast[i], slow[i], 1e-9);
}

TEST(WaveletHash, ConstantImageSetsOnlyApproximationBand) {
  auto h = wavelet_hash(constant(50));
  for (std::size_t i = 0; i < 1024; ++i) EXPECT_EQ(h.test(i), i < 256) << i;
  EXPECT_EQ(wavelet_hash(constant(0)).count(), 0u);
  // Including LL(0,0) in the median changes nothing for a constant image.
  EXPECT_EQ(wavelet_hash(constant(50), MedianMode::kAll).count(), 256u);
}

TEST(Ssim, IdentitySymmetryAndNegative) {
  std::mt19937_64 rng(9);
  for (int t = 0; t < 100; ++t) {
    auto a = testing::random_gray(rng), b = testing::random_gray(rng);
    EXPECT_EQ(ssim_dissimilarity(a, a), 0.0);
    double ab = ssim_dissimilarity(a, b);
    EXPECT_EQ(ab, ssim_dissimilarity(b, a));
    EXPECT_GE(ab, 0.0);
    EXPECT_LE(ab, 1.0);
  }
  auto g = testing::random_gray(rng);
  auto neg = g;
  for (auto& p : neg.pixels) p = 255.0f - p;
  EXPECT_GT(ssim_dissimilarity(g, neg), 0.9);
  EXPECT_EQ(ssim_dissimilarity(constant(7), constant(7)), 0.0);
  EXPECT_THROW(ssim_dissimilarity(constant(1), GrayImage(16, 16)), Error);
}

TEST(HashTable, SidecarRoundTrip) {
  testing::TempDir dir("hash");
  std::mt19937_64 rng(10);
  HashTable t;
  t.kind = HashKind::kDifference;
  for (int i = 0; i < 5; ++i) {
    BitVector1024 v(HashKind::kDifference);
    for (std::size_t b = 0; b < 1024; ++b) v.set(b, rng() & 1);
    t.entries.emplace_back("app" + std::to_string(i), v);
  }
  write_hash_table(t, dir / "d.hashes");
  auto back = read_hash_table(dir / "d.hashes");
  EXPECT_EQ(back.kind, t.kind);
  EXPECT_EQ(back.entries, t.entries);

  auto bytes = read_file_bytes(dir / "d.hashes");
  write_file_bytes(dir / "cut.hashes", bytes.substr(0, bytes.size() - 1));
  EXPECT_THROW(read_hash_table(dir / "cut.hashes"), Error);
  bytes[0] = 'X';
  write_file_bytes(dir / "bad.hashes", bytes);
  EXPECT_THROW(read_hash_table(dir / "bad.hashes"), Error);
}

TEST(HashKinds, ParseNames) {
  for (auto k : kHashKinds) EXPECT_EQ(parse_hash_kind(hash_kind_name(k)), k);
  EXPECT_THROW(parse_hash_kind("sift"), Error);
}

}  // namespace
}  // namespace appsim
