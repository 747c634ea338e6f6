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

#include <cstring>
#include <fstream>
#include <limits>
#include <random>

#include "appsim/tensor.hpp"
#include "support/oracles.hpp"

namespace appsim {
namespace {

using testing::TempDir;

ErrorKind kind_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no appsim::Error thrown";
  return ErrorKind::kIo;
}

TEST(Tensor, RejectsBadShapes) {
  EXPECT_EQ(kind_of([] { Tensor({}, {}); }), ErrorKind::kShape);
  EXPECT_EQ(kind_of([] { Tensor({1, 1, 1, 1, 1}, {1.0f}); }), ErrorKind::kShape);
  EXPECT_EQ(kind_of([] { Tensor({2, 0}, {}); }), ErrorKind::kShape);
  EXPECT_EQ(kind_of([] { Tensor({2, 3}, std::vector<float>(5)); }), ErrorKind::kShape);
}

TEST(Tensor, OneElementFileIs22Bytes) {
  TempDir dir("tensor");
  write_tensor(Tensor::vector({1.0f}), dir / "t.tensor");
  EXPECT_EQ(std::filesystem::file_size(dir / "t.tensor"), 22u);
}

TEST(Tensor, ByteLayoutMatchesHandEncoding) {
  // Built byte by byte: magic, dtype 0, ndim 2, dims 2 and 3 as u64 LE, six
  // zero floats.
  std::string expected = "IFTENSR1";
  expected += '\0';
  expected += '\2';
  for (std::uint64_t d : {2u, 3u}) {
    for (int b = 0; b < 8; ++b) expected += static_cast<char>((d >> (8 * b)) & 0xff);
  }
  expected += std::string(24, '\0');
  EXPECT_EQ(encode_tensor(Tensor::zeros({2, 3})), expected);

  // 1.0f is 0x3f800000, stored little-endian.
  auto one = encode_tensor(Tensor::vector({1.0f}));
  ASSERT_EQ(one.size(), 22u);
  EXPECT_EQ(static_cast<unsigned char>(one[18]), 0x00);
  EXPECT_EQ(static_cast<unsigned char>(one[20]), 0x80);
  EXPECT_EQ(static_cast<unsigned char>(one[21]), 0x3f);
}

TEST(Tensor, RandomRoundTripIsBitExact) {
  std::mt19937_64 rng(11);
  TempDir dir("tensor");
  auto t = testing::random_tensor(rng, 4096, -1e6f, 1e6f);
  t.values()[0] = -0.0f;
  t.values()[1] = std::numeric_limits<float>::denorm_min();
  t.values()[2] = std::numeric_limits<float>::max();
  write_tensor(t, dir / "r.tensor");
  EXPECT_EQ(read_tensor(dir / "r.tensor"), t);
  EXPECT_EQ(decode_tensor(encode_tensor(t)), t);

  Tensor four({2, 3, 4, 5}, testing::random_vector(rng, 120));
  write_tensor(four, dir / "four.tensor");
  EXPECT_EQ(read_tensor(dir / "four.tensor"), four);
}

TEST(Tensor, ReadErrors) {
  TempDir dir("tensor");
  auto good = encode_tensor(Tensor::zeros({2, 3}));

  auto bad_magic = good;
  bad_magic[0] = 'X';
  write_file_bytes(dir / "magic", bad_magic);
  EXPECT_EQ(kind_of([&] { read_tensor(dir / "magic"); }), ErrorKind::kFormat);

  auto bad_dtype = good;
  bad_dtype[8] = 1;
  write_file_bytes(dir / "dtype", bad_dtype);
  EXPECT_EQ(kind_of([&] { read_tensor(dir / "dtype"); }), ErrorKind::kFormat);

  auto bad_ndim = good;
  bad_ndim[9] = 5;
  write_file_bytes(dir / "ndim", bad_ndim);
  EXPECT_EQ(kind_of([&] { read_tensor(dir / "ndim"); }), ErrorKind::kFormat);

  write_file_bytes(dir / "short", good.substr(0, good.size() - 4));
  EXPECT_EQ(kind_of([&] { read_tensor(dir / "short"); }), ErrorKind::kCorruption);
  EXPECT_EQ(kind_of([&] { decode_tensor(good.substr(0, good.size() - 4)); }), ErrorKind::kCorruption);

  write_file_bytes(dir / "long", good + "xxxx");
  EXPECT_EQ(kind_of([&] { read_tensor(dir / "long"); }), ErrorKind::kCorruption);

  write_file_bytes(dir / "header", good.substr(0, 14));
  EXPECT_EQ(kind_of([&] { read_tensor(dir / "header"); }), ErrorKind::kCorruption);

  EXPECT_EQ(kind_of([&] { read_tensor(dir / "missing"); }), ErrorKind::kIo);
}

TEST(Tensor, StreamingReaderFillsCallerStorage) {
  std::mt19937_64 rng(3);
  TempDir dir("tensor");
  auto t = Tensor::matrix(7, 9, testing::random_vector(rng, 63));
  write_tensor(t, dir / "m.tensor");
  TensorReader reader(dir / "m.tensor");
  EXPECT_EQ(reader.dims(), (std::vector<std::size_t>{7, 9}));
  std::vector<float> out(63);
  reader.read_into(out);
  EXPECT_EQ(std::memcmp(out.data(), t.values().data(), 63 * sizeof(float)), 0);
}

}  // namespace
}  // namespace appsim
