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

#include <cstddef>
#include <string>
#include <utility>

#include "appsim/error.hpp"
#include "appsim/tensor.hpp"

namespace appsim {

// Filter responses of one convolutional layer: row i holds channel i's
// activations over all spatial positions.
class FeatureMap {
 public:
  // Accepts N x M, N x H x W, or 1 x N x H x W tensors.
  explicit FeatureMap(Tensor values) : values_(reshape(std::move(values))) {
    if (!values_.all_finite()) {
      fail(ErrorKind::kValidation, "feature map contains non-finite values");
    }
  }

  std::size_t channels() const noexcept { return values_.dim(0); }
  std::size_t spatial_size() const noexcept { return values_.dim(1); }
  const Tensor& values() const noexcept { return values_; }
  std::span<const float> channel(std::size_t i) const { return values_.row(i); }

 private:
  static Tensor reshape(Tensor t) {
    const auto dims = t.dims();
    switch (dims.size()) {
      case 2:
        return t;
      case 3:
        return Tensor({dims[0], dims[1] * dims[2]}, std::move(t).release());
      case 4:
        if (dims[0] == 1) {
          return Tensor({dims[1], dims[2] * dims[3]}, std::move(t).release());
        }
        break;
      default:
        break;
    }
    fail(ErrorKind::kShape, "feature map must be N x M, N x H x W or 1 x N x H x W");
  }

  Tensor values_;
};

}  // namespace appsim
