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

// Per-app embeddings and the on-disk embedding table (row-aligned
// `<name>.tensor` + `<name>.ids.json`).

#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <unordered_set>
#include <vector>

#include "json.hpp"

#include "appsim/distance.hpp"
#include "appsim/error.hpp"
#include "appsim/hashing.hpp"
#include "appsim/tensor.hpp"

namespace appsim {

inline constexpr std::size_t kDefaultContentDim = 4096;
inline constexpr std::size_t kDefaultStyleDim = 4096;
inline constexpr std::size_t kDefaultTextDim = 100;

struct EmbeddingSet {
  std::string app_id;
  std::optional<Tensor> content;
  std::optional<Tensor> style;
  std::optional<Tensor> text;
  std::map<HashKind, BitVector1024> hashes;
  // 32x32 luma, kept for SSIM retrieval.
  std::optional<GrayImage> gray;

  const std::optional<Tensor>& modality(Modality m) const {
    switch (m) {
      case Modality::kContent: return content;
      case Modality::kStyle: return style;
      case Modality::kText: return text;
    }
    return content;
  }
  std::optional<Tensor>& modality(Modality m) {
    return const_cast<std::optional<Tensor>&>(std::as_const(*this).modality(m));
  }

  void validate() const {
    for (auto m : kModalities) {
      const auto& t = modality(m);
      if (t && !t->all_finite()) {
        fail(ErrorKind::kValidation, "app '" + app_id + "': " + modality_name(m) +
                                         " embedding has non-finite values");
      }
    }
  }
};

// Per-modality distances and their weighted sum. A modality whose weight is
// non-zero must be present on both sides.
inline double fused_distance(const EmbeddingSet& a, const EmbeddingSet& b,
                             const Weights& w) {
  std::array<double, 3> d{};
  for (auto m : kModalities) {
    if (w[m] == 0.0) continue;
    const auto& x = a.modality(m);
    const auto& y = b.modality(m);
    if (!x || !y) {
      fail(ErrorKind::kUsage, std::string("fused distance needs the ") + modality_name(m) +
                                  " embedding of '" + (x ? b.app_id : a.app_id) + "'");
    }
    d[static_cast<std::size_t>(m)] = cosine_distance(x->values(), y->values());
  }
  return fuse(d, w);
}

struct EmbeddingTable {
  std::vector<std::string> ids;
  std::size_t dim = 0;
  std::vector<float> rows;  // ids.size() x dim

  std::span<const float> row(std::size_t i) const {
    return std::span(rows).subspan(i * dim, dim);
  }

  void append(const std::string& id, std::span<const float> values) {
    if (ids.empty() && dim == 0) dim = values.size();
    if (values.size() != dim) {
      fail(ErrorKind::kValidation, "embedding for '" + id + "' has dim " +
                                       std::to_string(values.size()) + ", table has " +
                                       std::to_string(dim));
    }
    ids.push_back(id);
    rows.insert(rows.end(), values.begin(), values.end());
  }
};

inline std::filesystem::path table_tensor_path(const std::filesystem::path& base) {
  return std::filesystem::path(base.string() + ".tensor");
}
inline std::filesystem::path table_ids_path(const std::filesystem::path& base) {
  return std::filesystem::path(base.string() + ".ids.json");
}

inline void write_embedding_table(const EmbeddingTable& table,
                                  const std::filesystem::path& base) {
  {
    std::ofstream out(table_ids_path(base), std::ios::trunc);
    if (!out) fail(ErrorKind::kIo, "cannot write " + table_ids_path(base).string());
    out << nlohmann::json(table.ids).dump() << '\n';
  }
  auto tensor_path = table_tensor_path(base);
  if (table.ids.empty()) {
    std::filesystem::remove(tensor_path);
    return;
  }
  const std::array<std::size_t, 2> dims = {table.ids.size(), table.dim};
  write_tensor_data(tensor_path, dims, table.rows);
}

inline EmbeddingTable read_embedding_table(const std::filesystem::path& base) {
  EmbeddingTable table;
  std::ifstream in(table_ids_path(base));
  if (!in) fail(ErrorKind::kIo, "cannot open " + table_ids_path(base).string());
  try {
    table.ids = nlohmann::json::parse(in).get<std::vector<std::string>>();
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::kParse, table_ids_path(base).string() + ": " + e.what());
  }
  if (table.ids.empty()) return table;
  auto t = read_tensor(table_tensor_path(base));
  if (t.ndim() != 2 || t.dim(0) != table.ids.size()) {
    fail(ErrorKind::kValidation, table_tensor_path(base).string() +
                                     ": row count does not match ids file");
  }
  if (!t.all_finite()) {
    fail(ErrorKind::kValidation, table_tensor_path(base).string() + ": non-finite values");
  }
  std::unordered_set<std::string> seen;
  for (const auto& id : table.ids) {
    if (!seen.insert(id).second) {
      fail(ErrorKind::kValidation, table_ids_path(base).string() + ": duplicate id '" + id + "'");
    }
  }
  table.dim = t.dim(1);
  table.rows = std::move(t).release();
  return table;
}

}  // namespace appsim
