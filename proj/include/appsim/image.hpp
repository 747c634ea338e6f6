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

// Raster decoding and the two image preparations: the CNN input tensor and the
// small grayscale image used by the hashes and SSIM.

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include <array>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "appsim/error.hpp"
#include "appsim/hashing.hpp"
#include "appsim/tensor.hpp"

namespace appsim {

// ImageNet channel means in RGB order, on the 0..255 scale.
inline constexpr std::array<float, 3> kImageNetMeanRgb = {123.68f, 116.779f, 103.939f};
inline constexpr std::size_t kDefaultInputSide = 224;

// A decoded image: CV_32FC3, RGB order, values on the 0..255 scale.
struct RgbImage {
  cv::Mat pixels;

  int width() const { return pixels.cols; }
  int height() const { return pixels.rows; }
};

inline RgbImage rgb_from_mat(const cv::Mat& raw, std::string_view origin) {
  if (raw.empty() || raw.rows < 1 || raw.cols < 1) {
    fail(ErrorKind::kDecode, "cannot decode image " + std::string(origin));
  }
  double scale = 1.0;
  switch (raw.depth()) {
    case CV_8U: break;
    case CV_16U: scale = 255.0 / 65535.0; break;
    case CV_32F: break;
    default: fail(ErrorKind::kDecode, "unsupported pixel depth in " + std::string(origin));
  }
  cv::Mat f;
  raw.convertTo(f, CV_32F, scale);
  cv::Mat rgb;
  switch (f.channels()) {
    case 1: cv::cvtColor(f, rgb, cv::COLOR_GRAY2RGB); break;
    case 2: {
      cv::Mat gray;
      cv::extractChannel(f, gray, 0);
      cv::cvtColor(gray, rgb, cv::COLOR_GRAY2RGB);
      break;
    }
    case 3: cv::cvtColor(f, rgb, cv::COLOR_BGR2RGB); break;
    case 4: cv::cvtColor(f, rgb, cv::COLOR_BGRA2RGB); break;
    default: fail(ErrorKind::kDecode, "unsupported channel count in " + std::string(origin));
  }
  return RgbImage{rgb};
}

inline RgbImage decode_image(std::string_view bytes, std::string_view origin = "<memory>") {
  if (bytes.empty()) fail(ErrorKind::kDecode, "empty image " + std::string(origin));
  cv::Mat buf(1, static_cast<int>(bytes.size()), CV_8U, const_cast<char*>(bytes.data()));
  cv::Mat raw;
  try {
    raw = cv::imdecode(buf, cv::IMREAD_UNCHANGED);
  } catch (const cv::Exception& e) {
    fail(ErrorKind::kDecode, "cannot decode image " + std::string(origin) + ": " + e.what());
  }
  return rgb_from_mat(raw, origin);
}

inline RgbImage load_image(const std::filesystem::path& path) {
  return decode_image(read_file_bytes(path), path.string());
}

// Solid-colour image, mostly for tests and fixtures.
inline RgbImage solid_image(int width, int height, float r, float g, float b) {
  return RgbImage{cv::Mat(height, width, CV_32FC3, cv::Scalar(r, g, b))};
}

inline cv::Mat resize_bilinear(const cv::Mat& src, int width, int height) {
  if (src.cols == width && src.rows == height) return src;
  cv::Mat out;
  cv::resize(src, out, cv::Size(width, height), 0, 0, cv::INTER_LINEAR);
  return out;
}

// CNN input: bilinear resize, mean subtraction, laid out 3×H×W.
inline Tensor preprocess_image(const RgbImage& img, std::size_t width = kDefaultInputSide,
                               std::size_t height = kDefaultInputSide) {
  cv::Mat resized = resize_bilinear(img.pixels, static_cast<int>(width), static_cast<int>(height));
  std::vector<float> out(3 * width * height);
  const std::size_t plane = width * height;
  for (std::size_t y = 0; y < height; ++y) {
    const auto* row = resized.ptr<cv::Vec3f>(static_cast<int>(y));
    for (std::size_t x = 0; x < width; ++x) {
      for (std::size_t c = 0; c < 3; ++c) {
        out[c * plane + y * width + x] = row[x][static_cast<int>(c)] - kImageNetMeanRgb[c];
      }
    }
  }
  return Tensor({3, height, width}, std::move(out));
}

// Bilinear resize then luma 0.299R + 0.587G + 0.114B.
inline GrayImage to_gray(const RgbImage& img, std::size_t width = kHashSide,
                         std::size_t height = kHashSide) {
  cv::Mat resized = resize_bilinear(img.pixels, static_cast<int>(width), static_cast<int>(height));
  GrayImage g(width, height);
  for (std::size_t y = 0; y < height; ++y) {
    const auto* row = resized.ptr<cv::Vec3f>(static_cast<int>(y));
    for (std::size_t x = 0; x < width; ++x) {
      g.at(y, x) = 0.299f * row[x][0] + 0.587f * row[x][1] + 0.114f * row[x][2];
    }
  }
  return g;
}

inline GrayImage to_gray32(const RgbImage& img) { return to_gray(img); }

inline BitVector1024 difference_hash(const RgbImage& img) {
  return difference_hash(to_gray(img, kHashSide + 1, kHashSide));
}

inline BitVector1024 image_hash(const RgbImage& img, HashKind kind) {
  switch (kind) {
    case HashKind::kAverage: return average_hash(to_gray32(img));
    case HashKind::kDifference: return difference_hash(img);
    case HashKind::kPerceptual: return perceptual_hash(to_gray32(img));
    case HashKind::kWavelet: return wavelet_hash(to_gray32(img));
  }
  fail(ErrorKind::kUsage, "unknown hash kind");
}

}  // namespace appsim
