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

// Content vectors and convolutional feature maps, either from an ONNX model run
// through OpenCV's dnn module or from precomputed IFTENSR1 files.

#include <opencv2/core.hpp>
#include <opencv2/dnn.hpp>

#include <algorithm>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "appsim/error.hpp"
#include "appsim/feature_map.hpp"
#include "appsim/tensor.hpp"

namespace appsim {

struct ModelSpec {
  std::filesystem::path model_path;
  std::string content_output = "fc7";
  std::string style_output = "conv5_1";
  std::size_t content_dim = 4096;
  std::size_t style_channels = 512;
  std::size_t input_width = 224;
  std::size_t input_height = 224;
};

inline nlohmann::json to_json(const ModelSpec& s) {
  return {{"model_path", s.model_path.string()},  {"content_output", s.content_output},
          {"style_output", s.style_output},       {"content_dim", s.content_dim},
          {"style_channels", s.style_channels},   {"input_width", s.input_width},
          {"input_height", s.input_height}};
}

inline ModelSpec model_spec_from_json(const nlohmann::json& j) {
  ModelSpec s;
  try {
    if (j.contains("model_path")) s.model_path = j["model_path"].get<std::string>();
    s.content_output = j.value("content_output", s.content_output);
    s.style_output = j.value("style_output", s.style_output);
    s.content_dim = j.value("content_dim", s.content_dim);
    s.style_channels = j.value("style_channels", s.style_channels);
    s.input_width = j.value("input_width", s.input_width);
    s.input_height = j.value("input_height", s.input_height);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::kConfiguration, std::string("bad model spec: ") + e.what());
  }
  if (s.content_dim == 0 || s.style_channels == 0 || s.input_width == 0 || s.input_height == 0) {
    fail(ErrorKind::kConfiguration, "model spec dimensions must be positive");
  }
  return s;
}

// Rejects anything but an N_l-channel map; never reshapes to fit.
inline FeatureMap checked_feature_map(Tensor t, std::size_t channels, const std::string& origin) {
  FeatureMap f(std::move(t));
  if (f.channels() != channels) {
    fail(ErrorKind::kShape, origin + ": feature map has " + std::to_string(f.channels()) +
                                " channels, expected " + std::to_string(channels));
  }
  return f;
}

inline Tensor checked_content(Tensor t, std::size_t dim, const std::string& origin) {
  if (t.size() != dim) {
    fail(ErrorKind::kShape, origin + ": content output has " + std::to_string(t.size()) +
                                " values, expected " + std::to_string(dim));
  }
  if (!t.all_finite()) fail(ErrorKind::kInference, origin + ": non-finite content activations");
  return Tensor::vector(std::move(t).release());
}

// True when the file starts with the IFTENSR1 magic.
inline bool is_tensor_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::array<char, 8> magic{};
  if (!in.read(magic.data(), magic.size())) return false;
  return magic == kTensorMagic;
}

inline FeatureMap load_precomputed_feature_map(const std::filesystem::path& path,
                                               std::size_t channels) {
  return checked_feature_map(read_tensor(path), channels, path.string());
}

inline Tensor load_precomputed_content(const std::filesystem::path& path, std::size_t dim) {
  return checked_content(read_tensor(path), dim, path.string());
}

class InferenceModel {
 public:
  explicit InferenceModel(ModelSpec spec) : spec_(std::move(spec)) {
    if (!std::filesystem::exists(spec_.model_path)) {
      fail(ErrorKind::kConfiguration, "model file not found: " + spec_.model_path.string());
    }
    try {
      net_ = cv::dnn::readNet(spec_.model_path.string());
    } catch (const cv::Exception& e) {
      fail(ErrorKind::kConfiguration, "cannot load model " + spec_.model_path.string() + ": " + e.what());
    }
    if (net_.empty()) fail(ErrorKind::kConfiguration, "empty model " + spec_.model_path.string());
    net_.setPreferableBackend(cv::dnn::DNN_BACKEND_OPENCV);
    net_.setPreferableTarget(cv::dnn::DNN_TARGET_CPU);
    for (const auto* name : {&spec_.content_output, &spec_.style_output}) {
      if (net_.getLayerId(*name) < 0) {
        fail(ErrorKind::kConfiguration, "layer '" + *name + "' not found in " + spec_.model_path.string());
      }
    }
  }

  const ModelSpec& spec() const noexcept { return spec_; }

  Tensor extract_content(const Tensor& input) const {
    auto out = forward(input, {spec_.content_output});
    return checked_content(std::move(out[0]), spec_.content_dim, spec_.content_output);
  }

  FeatureMap extract_feature_map(const Tensor& input) const {
    auto out = forward(input, {spec_.style_output});
    return checked_feature_map(std::move(out[0]), spec_.style_channels, spec_.style_output);
  }

  // One forward pass for both outputs.
  std::pair<Tensor, FeatureMap> extract(const Tensor& input) const {
    auto out = forward(input, {spec_.content_output, spec_.style_output});
    auto content = checked_content(std::move(out[0]), spec_.content_dim, spec_.content_output);
    return {std::move(content),
            checked_feature_map(std::move(out[1]), spec_.style_channels, spec_.style_output)};
  }

  // Raw activations of any named layer, batch dimension kept.
  std::vector<Tensor> forward(const Tensor& input, const std::vector<std::string>& names) const {
    const auto dims = input.dims();
    if (dims.size() != 3 || dims[0] != 3 || dims[1] != spec_.input_height ||
        dims[2] != spec_.input_width) {
      fail(ErrorKind::kShape, "model input must be 3 x " + std::to_string(spec_.input_height) +
                                  " x " + std::to_string(spec_.input_width));
    }
    int shape[4] = {1, 3, static_cast<int>(dims[1]), static_cast<int>(dims[2])};
    cv::Mat blob(4, shape, CV_32F);
    std::memcpy(blob.ptr<float>(), input.values().data(), input.size() * sizeof(float));

    std::vector<cv::Mat> outs;
    {
      // cv::dnn::Net::forward mutates internal buffers.
      std::lock_guard lock(mutex_);
      try {
        net_.setInput(blob);
        std::vector<cv::String> layer_names(names.begin(), names.end());
        net_.forward(outs, layer_names);
      } catch (const cv::Exception& e) {
        fail(ErrorKind::kInference, std::string("inference failed: ") + e.what());
      }
    }
    std::vector<Tensor> result;
    for (std::size_t i = 0; i < outs.size(); ++i) {
      cv::Mat m = outs[i].isContinuous() ? outs[i] : outs[i].clone();
      if (m.type() != CV_32F || m.dims < 1 || m.dims > 4) {
        fail(ErrorKind::kInference, "unexpected output layout at '" + names[i] + "'");
      }
      std::vector<std::size_t> tdims;
      for (int d = 0; d < m.dims; ++d) tdims.push_back(static_cast<std::size_t>(m.size[d]));
      const auto* p = m.ptr<float>();
      result.emplace_back(std::move(tdims), std::vector<float>(p, p + m.total()));
    }
    return result;
  }

 private:
  ModelSpec spec_;
  mutable cv::dnn::Net net_;
  mutable std::mutex mutex_;
};

}  // namespace appsim
