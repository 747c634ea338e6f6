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
#include <thread>

#include "appsim/image.hpp"
#include "appsim/inference.hpp"
#include "support/oracles.hpp"

namespace appsim {
namespace {

const std::filesystem::path kModel = std::filesystem::path(APPSIM_TEST_DATA) / "mini_vgg.onnx";

ModelSpec mini_spec() {
  ModelSpec s;
  s.model_path = kModel;
  s.content_dim = 16;
  s.style_channels = 8;
  return s;
}

Tensor random_input(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return Tensor({3, 224, 224}, testing::random_vector(rng, 3 * 224 * 224, -120, 130));
}

ErrorKind kind_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  return ErrorKind::kIo;
}

TEST(Inference, LayerShapes) {
  InferenceModel m(mini_spec());
  auto input = random_input(1);
  EXPECT_EQ(m.extract_content(input).dims(), (std::vector<std::size_t>{16}));
  auto f = m.extract_feature_map(input);
  EXPECT_EQ(f.channels(), 8u);
  EXPECT_EQ(f.spatial_size(), 196u);
  auto raw = m.forward(input, {"avg_pool"});
  EXPECT_EQ(raw[0].size(), 8u);
  // Global average pooling of conv5_1 is the per-channel mean.
  for (std::size_t c = 0; c < 8; ++c) {
    double mean = 0;
    for (float v : f.channel(c)) mean += v;
    EXPECT_NEAR(raw[0].values()[c], mean / 196, 1e-4);
  }
}

TEST(Inference, DeterministicAndConsistentAcrossEntryPoints) {
  InferenceModel m(mini_spec());
  auto input = preprocess_image(solid_image(64, 64, 200, 30, 90));
  auto [content, fmap] = m.extract(input);
  EXPECT_EQ(m.extract_content(input), content);
  EXPECT_EQ(m.extract_feature_map(input).values(), fmap.values());
  EXPECT_EQ(m.extract_content(input), content);
}

TEST(Inference, ConcurrentCallsAgree) {
  InferenceModel m(mini_spec());
  auto input = random_input(2);
  auto expected = m.extract_content(input);
  std::vector<std::thread> threads;
  std::atomic<int> mismatches{0};
  for (int t = 0; t < 4; ++t) {
    threads.emplace_back([&] {
      for (int i = 0; i < 3; ++i) mismatches += !(m.extract_content(input) == expected);
    });
  }
  for (auto& t : threads) t.join();
  EXPECT_EQ(mismatches.load(), 0);
}

TEST(Inference, ConfigurationErrors) {
  auto spec = mini_spec();
  spec.style_output = "conv9_9";
  EXPECT_EQ(kind_of([&] { InferenceModel m(spec); }), ErrorKind::kConfiguration);
  spec = mini_spec();
  spec.model_path = "/nonexistent/model.onnx";
  EXPECT_EQ(kind_of([&] { InferenceModel m(spec); }), ErrorKind::kConfiguration);
  testing::TempDir dir("inference");
  write_file_bytes(dir / "junk.onnx", "not a model");
  spec.model_path = dir / "junk.onnx";
  EXPECT_EQ(kind_of([&] { InferenceModel m(spec); }), ErrorKind::kConfiguration);
}

TEST(Inference, ShapeErrors) {
  auto spec = mini_spec();
  spec.style_channels = 512;
  InferenceModel wrong_channels(spec);
  auto input = random_input(3);
  EXPECT_EQ(kind_of([&] { wrong_channels.extract_feature_map(input); }), ErrorKind::kShape);
  spec = mini_spec();
  spec.content_dim = 4096;
  InferenceModel wrong_dim(spec);
  EXPECT_EQ(kind_of([&] { wrong_dim.extract_content(input); }), ErrorKind::kShape);
  InferenceModel ok(mini_spec());
  EXPECT_EQ(kind_of([&] { ok.extract_content(Tensor::zeros({3, 100, 100})); }), ErrorKind::kShape);
}

TEST(Inference, PrecomputedTensors) {
  testing::TempDir dir("precomputed");
  std::mt19937_64 rng(4);
  write_tensor(Tensor({1, 8, 14, 14}, testing::random_vector(rng, 8 * 196)), dir / "fmap.tensor");
  write_tensor(Tensor::vector(testing::random_vector(rng, 16)), dir / "content.tensor");
  EXPECT_TRUE(is_tensor_file(dir / "fmap.tensor"));
  EXPECT_FALSE(is_tensor_file(kModel));
  auto f = load_precomputed_feature_map(dir / "fmap.tensor", 8);
  EXPECT_EQ(f.spatial_size(), 196u);
  EXPECT_EQ(kind_of([&] { load_precomputed_feature_map(dir / "fmap.tensor", 512); }), ErrorKind::kShape);
  EXPECT_EQ(load_precomputed_content(dir / "content.tensor", 16).size(), 16u);
  EXPECT_EQ(kind_of([&] { load_precomputed_content(dir / "content.tensor", 4096); }), ErrorKind::kShape);
  write_tensor(Tensor::vector(std::vector<float>(16, NAN)), dir / "nan.tensor");
  EXPECT_EQ(kind_of([&] { load_precomputed_content(dir / "nan.tensor", 16); }), ErrorKind::kInference);
}

TEST(Inference, ModelSpecJson) {
  auto spec = mini_spec();
  auto back = model_spec_from_json(to_json(spec));
  EXPECT_EQ(back.model_path, spec.model_path);
  EXPECT_EQ(back.content_dim, 16u);
  EXPECT_EQ(back.style_output, "conv5_1");
  EXPECT_EQ(kind_of([] { model_spec_from_json(nlohmann::json{{"content_dim", "big"}}); }),
            ErrorKind::kConfiguration);
  EXPECT_EQ(kind_of([] { model_spec_from_json(nlohmann::json{{"style_channels", 0}}); }),
            ErrorKind::kConfiguration);
}

}  // namespace
}  // namespace appsim
