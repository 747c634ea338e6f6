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

// Immutable multi-modal index with exact brute-force k-NN.
//
// Rows are stored per modality as contiguous row-major matrices with their
// L2 norms precomputed. A query scans every eligible row, optionally split
// into contiguous shards on separate threads; each shard keeps its own top-k
// under the total order (distance, app_id) and the shard lists are merged
// under the same order, so results do not depend on the thread count.

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <queue>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "json.hpp"

#include "appsim/distance.hpp"
#include "appsim/embedding.hpp"
#include "appsim/error.hpp"
#include "appsim/hashing.hpp"
#include "appsim/parallel.hpp"
#include "appsim/tensor.hpp"

namespace appsim {

struct ModalityColumn {
  std::size_t dim = 0;
  std::vector<float> values;          // rows x dim; absent rows are zero
  std::vector<double> norms;          // per row
  std::vector<double> sq_norms;       // per row, what the scan uses
  std::vector<std::uint8_t> present;  // per row

  bool enabled() const noexcept { return dim > 0; }
  std::span<const float> row(std::size_t i) const {
    return std::span(values).subspan(i * dim, dim);
  }
};

struct HashColumn {
  std::vector<BitVector1024> values;
  std::vector<std::uint8_t> present;
};

class SearchIndex {
 public:
  class Builder;

  std::size_t size() const noexcept { return app_ids_.size(); }
  bool empty() const noexcept { return app_ids_.empty(); }
  const std::string& app_id(std::size_t row) const { return app_ids_.at(row); }
  const std::string& developer_id(std::size_t row) const { return developer_ids_.at(row); }
  const std::vector<std::string>& app_ids() const noexcept { return app_ids_; }

  std::optional<std::size_t> row_of(const std::string& app_id) const {
    auto it = rows_.find(app_id);
    if (it == rows_.end()) return std::nullopt;
    return it->second;
  }

  const ModalityColumn& column(Modality m) const {
    return columns_[static_cast<std::size_t>(m)];
  }

  bool has_hash(HashKind kind) const { return hashes_.contains(kind); }
  const HashColumn& hash_column(HashKind kind) const {
    auto it = hashes_.find(kind);
    if (it == hashes_.end()) {
      fail(ErrorKind::kUsage, "index carries no " + std::string(hash_kind_name(kind)) +
                                  " hashes");
    }
    return it->second;
  }
  const std::map<HashKind, HashColumn>& hash_columns() const noexcept { return hashes_; }

  bool has_gray() const noexcept { return !gray_present_.empty(); }
  bool gray_present(std::size_t row) const {
    return has_gray() && gray_present_[row] != 0;
  }
  GrayImage gray(std::size_t row) const {
    if (!gray_present(row)) fail(ErrorKind::kUsage, "no gray image for '" + app_id(row) + "'");
    auto begin = gray_.begin() + static_cast<std::ptrdiff_t>(row * kGrayPixels);
    return GrayImage(kHashSide, kHashSide, std::vector<float>(begin, begin + kGrayPixels));
  }

  // Reassembles the stored embeddings of one row (used as a query).
  EmbeddingSet embedding(std::size_t row) const {
    EmbeddingSet e;
    e.app_id = app_id(row);
    for (auto m : kModalities) {
      const auto& col = column(m);
      if (col.enabled() && col.present[row]) {
        auto r = col.row(row);
        e.modality(m) = Tensor::vector(std::vector<float>(r.begin(), r.end()));
      }
    }
    for (const auto& [kind, col] : hashes_) {
      if (col.present[row]) e.hashes.emplace(kind, col.values[row]);
    }
    if (gray_present(row)) e.gray = gray(row);
    return e;
  }

  static constexpr std::size_t kGrayPixels = kHashSide * kHashSide;

 private:
  friend class Builder;
  friend SearchIndex load_index(const std::filesystem::path& dir);

  std::vector<std::string> app_ids_;
  std::vector<std::string> developer_ids_;
  std::unordered_map<std::string, std::size_t> rows_;
  std::array<ModalityColumn, 3> columns_;
  std::map<HashKind, HashColumn> hashes_;
  std::vector<float> gray_;
  std::vector<std::uint8_t> gray_present_;
};

// Accumulates rows, then freezes them into a SearchIndex. Modality dims are
// fixed by the first row that carries the modality unless preset.
class SearchIndex::Builder {
 public:
  Builder() = default;
  Builder(std::size_t content_dim, std::size_t style_dim, std::size_t text_dim) {
    set_dim(Modality::kContent, content_dim);
    set_dim(Modality::kStyle, style_dim);
    set_dim(Modality::kText, text_dim);
  }

  void set_dim(Modality m, std::size_t dim) {
    auto& col = idx_.columns_[static_cast<std::size_t>(m)];
    if (col.enabled() && col.dim != dim) {
      fail(ErrorKind::kValidation, std::string(modality_name(m)) + " dim already set");
    }
    col.dim = dim;
    col.values.resize(idx_.size() * dim, 0.0f);
  }

  void reserve(std::size_t rows) {
    for (auto& col : idx_.columns_) col.values.reserve(rows * col.dim);
    idx_.app_ids_.reserve(rows);
    idx_.developer_ids_.reserve(rows);
  }

  // Appends an empty row and returns its index.
  std::size_t add_row(const std::string& app_id, const std::string& developer_id) {
    if (!idx_.rows_.emplace(app_id, idx_.size()).second) {
      fail(ErrorKind::kValidation, "duplicate app_id '" + app_id + "' in index");
    }
    idx_.app_ids_.push_back(app_id);
    idx_.developer_ids_.push_back(developer_id);
    for (auto& col : idx_.columns_) {
      col.values.resize(col.values.size() + col.dim, 0.0f);
      col.present.push_back(0);
    }
    for (auto& [kind, col] : idx_.hashes_) {
      col.values.emplace_back(kind);
      col.present.push_back(0);
    }
    if (idx_.has_gray()) {
      idx_.gray_.resize(idx_.gray_.size() + kGrayPixels, 0.0f);
      idx_.gray_present_.push_back(0);
    }
    return idx_.size() - 1;
  }

  std::size_t dim(Modality m) const { return idx_.columns_[static_cast<std::size_t>(m)].dim; }

  // The whole row-major matrix of one modality, for bulk loading. Rows still
  // need mark_present.
  std::span<float> column_values(Modality m) {
    return idx_.columns_[static_cast<std::size_t>(m)].values;
  }

  // Marks a bulk-loaded row present after checking it is finite.
  void mark_present(std::size_t row, Modality m) {
    for (float v : mutable_row(row, m)) {
      if (!std::isfinite(v)) {
        fail(ErrorKind::kValidation, std::string(modality_name(m)) + " embedding of '" +
                                         idx_.app_ids_.at(row) + "' is not finite");
      }
    }
  }

  // Writable storage for one modality of `row`; marks it present.
  std::span<float> mutable_row(std::size_t row, Modality m) {
    auto& col = idx_.columns_[static_cast<std::size_t>(m)];
    if (!col.enabled()) fail(ErrorKind::kUsage, std::string(modality_name(m)) + " dim unset");
    col.present.at(row) = 1;
    return std::span(col.values).subspan(row * col.dim, col.dim);
  }

  void set_modality(std::size_t row, Modality m, std::span<const float> values) {
    auto& col = idx_.columns_[static_cast<std::size_t>(m)];
    if (!col.enabled()) set_dim(m, values.size());
    if (values.size() != col.dim) {
      fail(ErrorKind::kValidation, std::string(modality_name(m)) + " embedding of '" +
                                       idx_.app_ids_.at(row) + "' has dim " +
                                       std::to_string(values.size()) + ", index has " +
                                       std::to_string(col.dim));
    }
    for (float v : values) {
      if (!std::isfinite(v)) {
        fail(ErrorKind::kValidation, std::string(modality_name(m)) + " embedding of '" +
                                         idx_.app_ids_.at(row) + "' is not finite");
      }
    }
    std::copy(values.begin(), values.end(), mutable_row(row, m).begin());
  }

  void set_hash(std::size_t row, const BitVector1024& bits) {
    auto [it, inserted] = idx_.hashes_.try_emplace(bits.kind());
    auto& col = it->second;
    if (inserted) {
      col.values.assign(idx_.size(), BitVector1024(bits.kind()));
      col.present.assign(idx_.size(), 0);
    }
    col.values.at(row) = bits;
    col.present.at(row) = 1;
  }

  void set_gray(std::size_t row, const GrayImage& g) {
    if (g.width != kHashSide || g.height != kHashSide) {
      fail(ErrorKind::kShape, "index gray images must be 32x32");
    }
    if (!idx_.has_gray()) {
      idx_.gray_.assign(idx_.size() * kGrayPixels, 0.0f);
      idx_.gray_present_.assign(idx_.size(), 0);
    }
    std::copy(g.pixels.begin(), g.pixels.end(),
              idx_.gray_.begin() + static_cast<std::ptrdiff_t>(row * kGrayPixels));
    idx_.gray_present_.at(row) = 1;
  }

  std::size_t add(const EmbeddingSet& e, const std::string& developer_id) {
    auto row = add_row(e.app_id, developer_id);
    for (auto m : kModalities) {
      if (const auto& t = e.modality(m)) set_modality(row, m, t->values());
    }
    for (const auto& [kind, bits] : e.hashes) set_hash(row, bits);
    if (e.gray) set_gray(row, *e.gray);
    return row;
  }

  SearchIndex build(unsigned threads = 1) && {
    for (auto& col : idx_.columns_) {
      col.norms.assign(idx_.size(), 0.0);
      col.sq_norms.assign(idx_.size(), 0.0);
      if (!col.enabled()) continue;
      parallel_for(idx_.size(), threads, [&](std::size_t i) {
        if (!col.present[i]) return;
        col.sq_norms[i] = dot(col.row(i), col.row(i));
        col.norms[i] = std::sqrt(col.sq_norms[i]);
      });
    }
    return std::move(idx_);
  }

 private:
  static constexpr std::size_t kGrayPixels = SearchIndex::kGrayPixels;
  SearchIndex idx_;
};

// Rows follow the input order. `developers` maps app_id -> developer_id;
// unknown apps get an empty developer.
inline SearchIndex build_index(const std::vector<EmbeddingSet>& embeddings,
                               const std::unordered_map<std::string, std::string>& developers,
                               unsigned threads = 1) {
  SearchIndex::Builder builder;
  for (const auto& e : embeddings) {
    auto it = developers.find(e.app_id);
    builder.add(e, it == developers.end() ? std::string{} : it->second);
  }
  return std::move(builder).build(threads);
}

// Per-modality distances are NaN when a modality was not evaluated.
struct Hit {
  std::string app_id;
  double distance = 0.0;
  std::array<double, 3> modality_distances = {
      std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::quiet_NaN(),
      std::numeric_limits<double>::quiet_NaN()};

  friend bool operator==(const Hit& a, const Hit& b) {
    auto same = [](double x, double y) { return x == y || (std::isnan(x) && std::isnan(y)); };
    return a.app_id == b.app_id && a.distance == b.distance &&
           same(a.modality_distances[0], b.modality_distances[0]) &&
           same(a.modality_distances[1], b.modality_distances[1]) &&
           same(a.modality_distances[2], b.modality_distances[2]);
  }
};

enum class Method {
  kFused,
  kContent,
  kStyle,
  kText,
  kAverageHash,
  kDifferenceHash,
  kPerceptualHash,
  kWaveletHash,
  kSsim,
};

inline constexpr std::array<Method, 9> kMethods = {
    Method::kFused,          Method::kContent,        Method::kStyle,
    Method::kText,           Method::kAverageHash,    Method::kDifferenceHash,
    Method::kPerceptualHash, Method::kWaveletHash,    Method::kSsim};

constexpr std::string_view method_name(Method m) {
  switch (m) {
    case Method::kFused: return "fused";
    case Method::kContent: return "content";
    case Method::kStyle: return "style";
    case Method::kText: return "text";
    case Method::kAverageHash: return "avg-hash";
    case Method::kDifferenceHash: return "diff-hash";
    case Method::kPerceptualHash: return "phash";
    case Method::kWaveletHash: return "whash";
    case Method::kSsim: return "ssim";
  }
  return "?";
}

inline Method parse_method(std::string_view name) {
  for (auto m : kMethods) {
    if (method_name(m) == name) return m;
  }
  fail(ErrorKind::kUsage, "unknown method '" + std::string(name) + "'");
}

inline std::optional<HashKind> method_hash_kind(Method m) {
  switch (m) {
    case Method::kAverageHash: return HashKind::kAverage;
    case Method::kDifferenceHash: return HashKind::kDifference;
    case Method::kPerceptualHash: return HashKind::kPerceptual;
    case Method::kWaveletHash: return HashKind::kWavelet;
    default: return std::nullopt;
  }
}

struct RetrievalResult {
  std::string query_app_id;
  Method method = Method::kFused;
  std::vector<Hit> hits;
  // Rows skipped because a weighted modality (or the hash/image) was missing.
  std::size_t skipped_missing = 0;
  // Rows whose cosine distance involved a zero vector (defined as 1).
  std::size_t degenerate = 0;
};

struct KnnOptions {
  std::size_t k = 10;
  Weights weights;
  std::optional<std::string> exclude_developer;
  std::optional<std::string> exclude_app;
  unsigned threads = 1;
};

namespace detail {

struct Candidate {
  double distance;
  std::size_t row;
  std::array<double, 3> parts;
};

// Total order used for ranking: distance, then app_id.
struct CandidateLess {
  const SearchIndex* index;
  bool operator()(const Candidate& a, const Candidate& b) const {
    if (a.distance != b.distance) return a.distance < b.distance;
    return index->app_id(a.row) < index->app_id(b.row);
  }
};

struct ShardResult {
  std::vector<Candidate> top;
  std::size_t eligible = 0;
  std::size_t skipped = 0;
  std::size_t degenerate = 0;
};

// Scores every eligible row with `score(row, candidate&) -> bool` (false means
// skipped) and returns the k best under CandidateLess.
template <typename Score>
RetrievalResult scan(const SearchIndex& index, const KnnOptions& opt, Method method,
                     std::string query_id, Score&& score) {
  if (opt.k == 0) fail(ErrorKind::kUsage, "k must be at least 1");
  if (index.empty()) fail(ErrorKind::kEmptyResult, "index is empty");
  const std::size_t n = index.size();
  const unsigned shards = std::max(1u, opt.threads);
  std::vector<ShardResult> partial(std::min<std::size_t>(shards, std::max<std::size_t>(n, 1)));
  CandidateLess less{&index};
  parallel_shards(n, shards, [&](unsigned s, std::size_t begin, std::size_t end) {
    auto& out = partial[s];
    std::priority_queue<Candidate, std::vector<Candidate>, CandidateLess> heap(less);
    for (std::size_t row = begin; row < end; ++row) {
      if (opt.exclude_app && index.app_id(row) == *opt.exclude_app) continue;
      if (opt.exclude_developer && index.developer_id(row) == *opt.exclude_developer) continue;
      Candidate c{0.0, row, {std::numeric_limits<double>::quiet_NaN(),
                             std::numeric_limits<double>::quiet_NaN(),
                             std::numeric_limits<double>::quiet_NaN()}};
      bool degenerate = false;
      if (!score(row, c, degenerate)) {
        ++out.skipped;
        continue;
      }
      ++out.eligible;
      out.degenerate += degenerate;
      if (heap.size() < opt.k) {
        heap.push(c);
      } else if (less(c, heap.top())) {
        heap.pop();
        heap.push(c);
      }
    }
    out.top.reserve(heap.size());
    while (!heap.empty()) {
      out.top.push_back(heap.top());
      heap.pop();
    }
  });

  RetrievalResult result;
  result.query_app_id = std::move(query_id);
  result.method = method;
  std::vector<Candidate> merged;
  std::size_t eligible = 0;
  for (auto& p : partial) {
    eligible += p.eligible;
    result.skipped_missing += p.skipped;
    result.degenerate += p.degenerate;
    merged.insert(merged.end(), p.top.begin(), p.top.end());
  }
  if (eligible == 0) {
    fail(ErrorKind::kEmptyResult, "no eligible rows for query '" + result.query_app_id + "'");
  }
  std::sort(merged.begin(), merged.end(), less);
  if (merged.size() > opt.k) merged.resize(opt.k);
  result.hits.reserve(merged.size());
  for (const auto& c : merged) {
    result.hits.push_back(Hit{index.app_id(c.row), c.distance, c.parts});
  }
  return result;
}

}  // namespace detail

// Exact k nearest neighbours under the weighted cosine distance.
inline RetrievalResult knn(const SearchIndex& index, const EmbeddingSet& query,
                           const KnnOptions& opt) {
  opt.weights.validate();
  if (index.empty()) fail(ErrorKind::kEmptyResult, "index is empty");
  std::array<std::span<const float>, 3> q;
  std::array<double, 3> qnorm{};
  std::array<bool, 3> active{};
  for (auto m : kModalities) {
    auto i = static_cast<std::size_t>(m);
    if (opt.weights[m] == 0.0) continue;
    const auto& t = query.modality(m);
    if (!t) {
      fail(ErrorKind::kUsage, "query '" + query.app_id + "' lacks the " +
                                  modality_name(m) + " embedding");
    }
    const auto& col = index.column(m);
    if (!col.enabled()) {
      fail(ErrorKind::kUsage, std::string("index has no ") + modality_name(m) + " embeddings");
    }
    if (t->size() != col.dim) {
      fail(ErrorKind::kShape, std::string(modality_name(m)) + " query has dim " +
                                  std::to_string(t->size()) + ", index has " +
                                  std::to_string(col.dim));
    }
    q[i] = t->values();
    qnorm[i] = dot(q[i], q[i]);
    active[i] = true;
  }
  return detail::scan(index, opt, Method::kFused, query.app_id,
                      [&](std::size_t row, detail::Candidate& c, bool& degenerate) {
    for (std::size_t i = 0; i < 3; ++i) {
      if (active[i] && !index.column(kModalities[i]).present[row]) return false;
    }
    for (std::size_t i = 0; i < 3; ++i) {
      if (!active[i]) continue;
      const auto& col = index.column(kModalities[i]);
      auto cd = cosine_from_parts(dot(q[i], col.row(row)), qnorm[i], col.sq_norms[row]);
      degenerate |= cd.degenerate;
      c.parts[i] = cd.value;
    }
    std::array<double, 3> parts{};
    for (std::size_t i = 0; i < 3; ++i) parts[i] = active[i] ? c.parts[i] : 0.0;
    c.distance = fuse(parts, opt.weights);
    return true;
  });
}

// Exact k nearest neighbours by Hamming distance on one hash kind.
inline RetrievalResult knn_hamming(const SearchIndex& index, const BitVector1024& query,
                                   const KnnOptions& opt, std::string query_id = {}) {
  const auto& col = index.hash_column(query.kind());
  Method method = Method::kAverageHash;
  for (auto m : kMethods) {
    if (method_hash_kind(m) == query.kind()) method = m;
  }
  return detail::scan(index, opt, method, std::move(query_id),
                      [&](std::size_t row, detail::Candidate& c, bool&) {
    if (!col.present[row]) return false;
    c.distance = static_cast<double>(hamming_unchecked(query, col.values[row]));
    return true;
  });
}

// Exact k nearest neighbours by SSIM dissimilarity.
inline RetrievalResult knn_ssim(const SearchIndex& index, const GrayImage& query,
                                const KnnOptions& opt, std::string query_id = {}) {
  if (!index.has_gray()) fail(ErrorKind::kUsage, "index carries no gray images");
  return detail::scan(index, opt, Method::kSsim, std::move(query_id),
                      [&](std::size_t row, detail::Candidate& c, bool&) {
    if (!index.gray_present(row)) return false;
    c.distance = ssim_dissimilarity(query, index.gray(row));
    return true;
  });
}

// Dispatches on `method`; the query is taken from an embedding set.
inline RetrievalResult retrieve(const SearchIndex& index, const EmbeddingSet& query,
                                Method method, KnnOptions opt) {
  switch (method) {
    case Method::kFused:
      return knn(index, query, opt);
    case Method::kContent:
    case Method::kStyle:
    case Method::kText: {
      opt.weights = Weights::only(method == Method::kContent ? Modality::kContent
                                  : method == Method::kStyle ? Modality::kStyle
                                                             : Modality::kText);
      auto r = knn(index, query, opt);
      r.method = method;
      return r;
    }
    case Method::kSsim:
      if (!query.gray) fail(ErrorKind::kUsage, "query '" + query.app_id + "' has no gray image");
      return knn_ssim(index, *query.gray, opt, query.app_id);
    default: {
      auto kind = *method_hash_kind(method);
      auto it = query.hashes.find(kind);
      if (it == query.hashes.end()) {
        fail(ErrorKind::kUsage, "query '" + query.app_id + "' has no " +
                                    std::string(hash_kind_name(kind)) + " hash");
      }
      return knn_hamming(index, it->second, opt, query.app_id);
    }
  }
}

// Keeps hits with distance <= threshold, in order.
inline RetrievalResult filter_by_threshold(RetrievalResult r, double threshold) {
  if (!(threshold >= 0.0)) fail(ErrorKind::kUsage, "threshold must be >= 0");
  std::erase_if(r.hits, [&](const Hit& h) { return h.distance > threshold; });
  return r;
}

inline nlohmann::json to_json(const RetrievalResult& r) {
  auto hits = nlohmann::json::array();
  const bool fused = r.method == Method::kFused;
  for (const auto& h : r.hits) {
    nlohmann::json hit = {{"app_id", h.app_id}};
    hit[fused ? "fused_distance" : "distance"] = h.distance;
    nlohmann::json parts = nlohmann::json::object();
    for (auto m : kModalities) {
      double v = h.modality_distances[static_cast<std::size_t>(m)];
      if (!std::isnan(v)) parts[modality_name(m)] = v;
    }
    if (!parts.empty()) hit["distances"] = parts;
    hits.push_back(std::move(hit));
  }
  return {{"query_app_id", r.query_app_id},
          {"method", method_name(r.method)},
          {"hits", hits},
          {"skipped_missing", r.skipped_missing},
          {"degenerate", r.degenerate}};
}

inline RetrievalResult retrieval_from_json(const nlohmann::json& j) {
  RetrievalResult r;
  r.query_app_id = j.at("query_app_id").get<std::string>();
  r.method = parse_method(j.value("method", std::string("fused")));
  r.skipped_missing = j.value("skipped_missing", std::size_t{0});
  r.degenerate = j.value("degenerate", std::size_t{0});
  for (const auto& h : j.at("hits")) {
    Hit hit;
    hit.app_id = h.at("app_id").get<std::string>();
    hit.distance = h.contains("fused_distance") ? h.at("fused_distance").get<double>()
                                                : h.at("distance").get<double>();
    if (h.contains("distances")) {
      for (auto m : kModalities) {
        if (h["distances"].contains(modality_name(m))) {
          hit.modality_distances[static_cast<std::size_t>(m)] =
              h["distances"][modality_name(m)].get<double>();
        }
      }
    }
    r.hits.push_back(std::move(hit));
  }
  return r;
}

inline std::vector<RetrievalResult> read_retrievals(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::kIo, "cannot open " + path.string());
  std::vector<RetrievalResult> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(retrieval_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorKind::kParse, path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

// On-disk layout: index.json (ids, developers, presence), one IFTENSR1 matrix
// per enabled modality, gray.tensor, and one IFHASH01 file per hash kind.
inline void save_index(const SearchIndex& index, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  nlohmann::json meta = {{"format", "appsim-index-1"},
                         {"app_ids", index.app_ids()},
                         {"developer_ids", nlohmann::json::array()},
                         {"modalities", nlohmann::json::object()},
                         {"hashes", nlohmann::json::array()},
                         {"gray", index.has_gray()}};
  for (std::size_t i = 0; i < index.size(); ++i) {
    meta["developer_ids"].push_back(index.developer_id(i));
  }
  for (auto m : kModalities) {
    const auto& col = index.column(m);
    if (!col.enabled()) continue;
    meta["modalities"][modality_name(m)] = {{"dim", col.dim}, {"present", col.present}};
    if (!index.empty()) {
      const std::array<std::size_t, 2> dims = {index.size(), col.dim};
      write_tensor_data(dir / (std::string(modality_name(m)) + ".tensor"), dims, col.values);
    }
  }
  for (const auto& [kind, col] : index.hash_columns()) {
    HashTable table{kind, {}};
    for (std::size_t i = 0; i < index.size(); ++i) {
      if (col.present[i]) table.entries.emplace_back(index.app_id(i), col.values[i]);
    }
    write_hash_table(table, dir / (std::string(hash_kind_name(kind)) + ".hashes"));
    meta["hashes"].push_back(hash_kind_name(kind));
  }
  if (index.has_gray() && !index.empty()) {
    std::vector<float> gray;
    std::vector<std::uint8_t> present;
    for (std::size_t i = 0; i < index.size(); ++i) {
      present.push_back(index.gray_present(i));
      if (index.gray_present(i)) {
        auto g = index.gray(i);
        gray.insert(gray.end(), g.pixels.begin(), g.pixels.end());
      } else {
        gray.insert(gray.end(), SearchIndex::kGrayPixels, 0.0f);
      }
    }
    meta["gray_present"] = present;
    write_tensor(Tensor::matrix(index.size(), SearchIndex::kGrayPixels, std::move(gray)),
                 dir / "gray.tensor");
  }
  std::ofstream out(dir / "index.json", std::ios::trunc);
  if (!out) fail(ErrorKind::kIo, "cannot write " + (dir / "index.json").string());
  out << meta.dump() << '\n';
}

inline SearchIndex load_index(const std::filesystem::path& dir) {
  std::ifstream in(dir / "index.json");
  if (!in) fail(ErrorKind::kIo, "cannot open " + (dir / "index.json").string());
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::kParse, (dir / "index.json").string() + ": " + e.what());
  }
  auto ids = meta.at("app_ids").get<std::vector<std::string>>();
  auto devs = meta.at("developer_ids").get<std::vector<std::string>>();
  if (ids.size() != devs.size()) fail(ErrorKind::kValidation, "index.json: id/developer mismatch");

  SearchIndex::Builder builder;
  for (auto m : kModalities) {
    if (meta["modalities"].contains(modality_name(m))) {
      builder.set_dim(m, meta["modalities"][modality_name(m)].at("dim").get<std::size_t>());
    }
  }
  builder.reserve(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) builder.add_row(ids[i], devs[i]);
  for (auto m : kModalities) {
    if (!meta["modalities"].contains(modality_name(m)) || ids.empty()) continue;
    auto present =
        meta["modalities"][modality_name(m)].at("present").get<std::vector<std::uint8_t>>();
    // Streamed straight into the column; the matrix is never held twice.
    TensorReader reader(dir / (std::string(modality_name(m)) + ".tensor"));
    const auto& dims = reader.dims();
    if (dims.size() != 2 || dims[0] != ids.size() || present.size() != ids.size() ||
        dims[1] != builder.dim(m)) {
      fail(ErrorKind::kValidation, std::string("index ") + modality_name(m) +
                                       " matrix does not match index.json");
    }
    reader.read_into(builder.column_values(m));
    for (std::size_t i = 0; i < ids.size(); ++i) {
      if (present[i]) builder.mark_present(i, m);
    }
  }
  std::unordered_map<std::string, std::size_t> row_of;
  for (std::size_t i = 0; i < ids.size(); ++i) row_of.emplace(ids[i], i);
  for (const auto& name : meta.at("hashes")) {
    auto kind = parse_hash_kind(name.get<std::string>());
    auto table = read_hash_table(dir / (name.get<std::string>() + ".hashes"));
    for (const auto& [id, bits] : table.entries) {
      auto it = row_of.find(id);
      if (it == row_of.end() || bits.kind() != kind) {
        fail(ErrorKind::kValidation, "hash entry '" + id + "' not in index");
      }
      builder.set_hash(it->second, bits);
    }
  }
  if (meta.value("gray", false) && !ids.empty()) {
    auto present = meta.at("gray_present").get<std::vector<std::uint8_t>>();
    auto t = read_tensor(dir / "gray.tensor");
    if (t.ndim() != 2 || t.dim(0) != ids.size() || t.dim(1) != SearchIndex::kGrayPixels) {
      fail(ErrorKind::kValidation, "gray.tensor does not match index.json");
    }
    for (std::size_t i = 0; i < ids.size(); ++i) {
      if (!present.at(i)) continue;
      auto r = t.row(i);
      builder.set_gray(i, GrayImage(kHashSide, kHashSide, std::vector<float>(r.begin(), r.end())));
    }
  }
  return std::move(builder).build(default_threads());
}

}  // namespace appsim
