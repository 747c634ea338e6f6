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

// Everything except the OpenCV-backed headers (image.hpp, inference.hpp).

#include "appsim/analysis.hpp"
#include "appsim/corpus.hpp"
#include "appsim/digest.hpp"
#include "appsim/distance.hpp"
#include "appsim/embedding.hpp"
#include "appsim/error.hpp"
#include "appsim/eval.hpp"
#include "appsim/feature_map.hpp"
#include "appsim/hashing.hpp"
#include "appsim/index.hpp"
#include "appsim/knee.hpp"
#include "appsim/manifest.hpp"
#include "appsim/parallel.hpp"
#include "appsim/style.hpp"
#include "appsim/tensor.hpp"
#include "appsim/text.hpp"
