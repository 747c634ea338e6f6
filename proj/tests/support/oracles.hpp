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

// Independent reference implementations and fixture generators shared by the
// unit and acceptance suites. Nothing here calls into the code under test for
// the quantity being checked.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <random>
#include <string>
#include <tuple>
#include <unordered_map>
#include <vector>

#include "appsim/appsim.hpp"

namespace appsim::testing {

inline std::filesystem::path temp_dir(const std::string& name) {
  static std::mt19937_64 rng(std::random_device{}());
  auto p = std::filesystem::temp_directory_path() /
           ("appsim-" + name + "-" + std::to_string(rng() % 1000000000));
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

struct TempDir {
  std::filesystem::path path;
  explicit TempDir(const std::string& name) : path(temp_dir(name)) {}
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
  std::filesystem::path operator/(const std::string& s) const { return path / s; }
};

inline std::vector<float> random_vector(std::mt19937_64& rng, std::size_t n, float lo = -1.0f,
                                        float hi = 1.0f) {
  std::uniform_real_distribution<float> u(lo, hi);
  std::vector<float> v(n);
  for (auto& x : v) x = u(rng);
  return v;
}

inline Tensor random_tensor(std::mt19937_64& rng, std::size_t n, float lo = -1.0f, float hi = 1.0f) {
  return Tensor::vector(random_vector(rng, n, lo, hi));
}

// Plain triple loop over rows of an N x M matrix.
inline std::vector<double> naive_gram(const std::vector<float>& f, std::size_t n, std::size_t m) {
  std::vector<double> g(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      long double s = 0;
      for (std::size_t k = 0; k < m; ++k) s += static_cast<long double>(f[i * m + k]) * f[j * m + k];
      g[i * n + j] = static_cast<double>(s);
    }
  }
  return g;
}

inline double naive_cosine_distance(const std::vector<float>& x, const std::vector<float>& y) {
  long double xy = 0, xx = 0, yy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    xy += static_cast<long double>(x[i]) * y[i];
    xx += static_cast<long double>(x[i]) * x[i];
    yy += static_cast<long double>(y[i]) * y[i];
  }
  if (xx == 0 || yy == 0) return 1.0;
  return static_cast<double>(1.0L - xy / std::sqrt(xx * yy));
}

// One synthetic app for the k-NN oracles.
struct OracleRow {
  std::string app_id;
  std::string developer_id;
  std::array<std::optional<std::vector<float>>, 3> modalities;
};

inline EmbeddingSet to_embedding(const OracleRow& r) {
  EmbeddingSet e;
  e.app_id = r.app_id;
  for (auto m : kModalities) {
    const auto& v = r.modalities[static_cast<std::size_t>(m)];
    if (v) e.modality(m) = Tensor::vector(*v);
  }
  return e;
}

struct OracleHit {
  std::string app_id;
  double distance;
};

// Two-loop brute force: score every row, sort by (distance, app_id), cut at k.
inline std::vector<OracleHit> naive_knn(const std::vector<OracleRow>& rows, const OracleRow& query,
                                        std::size_t k, std::array<double, 3> w,
                                        const std::string& exclude_developer = "",
                                        const std::string& exclude_app = "") {
  std::vector<OracleHit> all;
  for (const auto& r : rows) {
    if (!exclude_app.empty() && r.app_id == exclude_app) continue;
    if (!exclude_developer.empty() && r.developer_id == exclude_developer) continue;
    double d = 0;
    bool ok = true;
    for (std::size_t m = 0; m < 3; ++m) {
      if (w[m] == 0) continue;
      if (!r.modalities[m] || !query.modalities[m]) {
        ok = false;
        break;
      }
      d += w[m] * naive_cosine_distance(*query.modalities[m], *r.modalities[m]);
    }
    if (ok) all.push_back({r.app_id, d});
  }
  std::sort(all.begin(), all.end(), [](const OracleHit& a, const OracleHit& b) {
    return std::tie(a.distance, a.app_id) < std::tie(b.distance, b.app_id);
  });
  if (all.size() > k) all.resize(k);
  return all;
}

// Random corpus with some rows missing modalities and a handful of developers.
inline std::vector<OracleRow> random_corpus(std::mt19937_64& rng, std::size_t n,
                                            std::array<std::size_t, 3> dims,
                                            double missing_rate = 0.1) {
  std::vector<OracleRow> rows(n);
  std::bernoulli_distribution missing(missing_rate);
  std::uniform_int_distribution<int> dev(0, 9);
  for (std::size_t i = 0; i < n; ++i) {
    auto& r = rows[i];
    char buf[32];
    std::snprintf(buf, sizeof buf, "app%05zu", i);
    r.app_id = buf;
    r.developer_id = "dev" + std::to_string(dev(rng));
    for (std::size_t m = 0; m < 3; ++m) {
      if (i > 0 && missing(rng)) continue;
      r.modalities[m] = random_vector(rng, dims[m]);
    }
  }
  std::shuffle(rows.begin(), rows.end(), rng);
  return rows;
}

inline SearchIndex index_of(const std::vector<OracleRow>& rows, unsigned threads = 1) {
  SearchIndex::Builder b;
  for (const auto& r : rows) b.add(to_embedding(r), r.developer_id);
  return std::move(b).build(threads);
}

inline GrayImage random_gray(std::mt19937_64& rng, std::size_t w = kHashSide,
                             std::size_t h = kHashSide) {
  std::uniform_real_distribution<float> u(0.0f, 255.0f);
  GrayImage g(w, h);
  for (auto& p : g.pixels) p = u(rng);
  return g;
}

// Two-topic toy corpus: 20 documents drawn from each vocabulary.
// Topic words sit at every third position between shared filler words, so with
// a narrow window the topic is only recoverable through the document vector.
inline std::vector<std::vector<std::string>> two_topic_corpus(std::uint64_t seed = 7) {
  const std::vector<std::string> sports = {"football", "goal",  "team",   "match",
                                           "player",   "score", "league", "coach"};
  const std::vector<std::string> cooking = {"recipe", "oven",   "flour",   "sugar",
                                            "bake",   "butter", "kitchen", "dough"};
  const std::vector<std::string> filler = {"app",   "free", "new",    "best", "easy", "fun",
                                           "daily", "great", "simple", "top",  "play", "get"};
  std::mt19937_64 rng(seed);
  std::vector<std::vector<std::string>> docs;
  for (int topic = 0; topic < 2; ++topic) {
    const auto& vocab = topic == 0 ? sports : cooking;
    std::uniform_int_distribution<std::size_t> pick(0, vocab.size() - 1), any(0, filler.size() - 1);
    for (int d = 0; d < 20; ++d) {
      std::vector<std::string> doc;
      for (int w = 0; w < 40; ++w) doc.push_back(w % 3 == 1 ? vocab[pick(rng)] : filler[any(rng)]);
      docs.push_back(std::move(doc));
    }
  }
  return docs;
}

inline double cosine_similarity(std::span<const float> a, std::span<const float> b) {
  return 1.0 - naive_cosine_distance(std::vector<float>(a.begin(), a.end()),
                                     std::vector<float>(b.begin(), b.end()));
}

// Mean intra-topic minus mean inter-topic doc-vector similarity for the
// two-topic corpus (documents 0..19 vs 20..39).
inline std::pair<double, double> topic_similarity(const TextModel& m) {
  double intra = 0, inter = 0;
  std::size_t ni = 0, nx = 0;
  for (std::size_t i = 0; i < 40; ++i) {
    for (std::size_t j = i + 1; j < 40; ++j) {
      double s = cosine_similarity(m.doc_vector(i), m.doc_vector(j));
      if ((i < 20) == (j < 20)) {
        intra += s;
        ++ni;
      } else {
        inter += s;
        ++nx;
      }
    }
  }
  return {intra / static_cast<double>(ni), inter / static_cast<double>(nx)};
}

// Planted evaluation corpus: groups of exact duplicates hidden among random
// distractors. Every modality, hash and gray image of a member is a copy of
// the group's base.
struct PlantedCorpus {
  SearchIndex index;
  LabelledSet labelled;
  std::vector<std::size_t> group_sizes;
};

inline PlantedCorpus planted_corpus(std::uint64_t seed, std::size_t groups, std::size_t distractors,
                                    std::array<std::size_t, 3> dims = {32, 32, 16}) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> size_dist(2, 6);
  struct Proto {
    std::array<std::vector<float>, 3> v;
    GrayImage gray;
  };
  auto make_proto = [&] {
    Proto p;
    for (std::size_t m = 0; m < 3; ++m) p.v[m] = random_vector(rng, dims[m]);
    p.gray = random_gray(rng);
    return p;
  };
  struct Pending {
    std::string id;
    std::size_t proto;
  };
  std::vector<Proto> protos;
  std::vector<Pending> rows;
  PlantedCorpus out;
  for (std::size_t g = 0; g < groups; ++g) {
    protos.push_back(make_proto());
    std::size_t size = size_dist(rng);
    out.group_sizes.push_back(size);
    LabelledGroup group;
    group.group_id = "g" + std::to_string(g);
    for (std::size_t s = 0; s < size; ++s) {
      std::string id = "g" + std::to_string(g) + "m" + std::to_string(s);
      group.member_app_ids.push_back(id);
      rows.push_back({id, protos.size() - 1});
    }
    group.base_app_id = group.member_app_ids.front();
    out.labelled.groups.push_back(group);
  }
  for (std::size_t d = 0; d < distractors; ++d) {
    protos.push_back(make_proto());
    rows.push_back({"d" + std::to_string(d), protos.size() - 1});
  }
  std::shuffle(rows.begin(), rows.end(), rng);
  SearchIndex::Builder b;
  for (const auto& r : rows) {
    const auto& p = protos[r.proto];
    EmbeddingSet e;
    e.app_id = r.id;
    for (auto m : kModalities) e.modality(m) = Tensor::vector(p.v[static_cast<std::size_t>(m)]);
    e.hashes.emplace(HashKind::kAverage, average_hash(p.gray));
    e.hashes.emplace(HashKind::kPerceptual, perceptual_hash(p.gray));
    e.hashes.emplace(HashKind::kWavelet, wavelet_hash(p.gray));
    GrayImage wide(kHashSide + 1, kHashSide);
    for (std::size_t y = 0; y < kHashSide; ++y) {
      for (std::size_t x = 0; x <= kHashSide; ++x) wide.at(y, x) = p.gray.at(y, std::min(x, kHashSide - 1));
    }
    e.hashes.emplace(HashKind::kDifference, difference_hash(wide));
    e.gray = p.gray;
    b.add(e, "dev-" + r.id);
  }
  out.index = std::move(b).build();
  return out;
}

}  // namespace appsim::testing
