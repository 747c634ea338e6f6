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

#include <algorithm>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace appsim {

inline unsigned default_threads() {
  return std::max(1u, std::thread::hardware_concurrency());
}

// Splits [0, n) into `threads` contiguous shards. Shard boundaries depend only
// on n and the shard count.
inline std::vector<std::size_t> shard_bounds(std::size_t n, unsigned shards) {
  shards = std::max(1u, shards);
  std::vector<std::size_t> bounds(shards + 1);
  for (unsigned s = 0; s <= shards; ++s) bounds[s] = n * s / shards;
  return bounds;
}

// Runs fn(shard_index, begin, end) on each shard; the first exception thrown
// by any worker is rethrown on the caller.
template <typename Fn>
void parallel_shards(std::size_t n, unsigned threads, Fn&& fn) {
  threads = static_cast<unsigned>(std::min<std::size_t>(std::max(1u, threads),
                                                        std::max<std::size_t>(n, 1)));
  auto bounds = shard_bounds(n, threads);
  if (threads == 1) {
    fn(0u, bounds[0], bounds[1]);
    return;
  }
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> workers;
  workers.reserve(threads);
  for (unsigned s = 0; s < threads; ++s) {
    workers.emplace_back([&, s] {
      try {
        fn(s, bounds[s], bounds[s + 1]);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    });
  }
  for (auto& w : workers) w.join();
  if (error) std::rethrow_exception(error);
}

template <typename Fn>
void parallel_for(std::size_t n, unsigned threads, Fn&& fn) {
  parallel_shards(n, threads, [&](unsigned, std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) fn(i);
  });
}

}  // namespace appsim
