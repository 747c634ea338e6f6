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

// Paragraph vectors (distributed-memory variant) over app descriptions.
//
// Each training position predicts its centre word from the mean of the
// document vector and the surrounding context word vectors, trained by
// negative sampling with SGD. Single-threaded training is bit-reproducible for
// a given seed; threads > 1 switches to lock-free shared updates, which gives
// up reproducibility.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "json.hpp"

#include "appsim/error.hpp"
#include "appsim/parallel.hpp"
#include "appsim/stopwords.hpp"
#include "appsim/style.hpp"
#include "appsim/tensor.hpp"

namespace appsim {

using StopwordSet = std::unordered_set<std::string>;

inline const StopwordSet& default_stopwords() {
  static const StopwordSet set = [] {
    StopwordSet s;
    for (auto w : kEnglishStopwords) s.emplace(w);
    return s;
  }();
  return set;
}

// Lowercases ASCII letters and splits on every byte that is neither an ASCII
// letter/digit nor part of a multi-byte UTF-8 sequence.
inline std::vector<std::string> preprocess_text(std::string_view text,
                                                const StopwordSet& stopwords = default_stopwords()) {
  std::vector<std::string> tokens;
  std::string current;
  auto flush = [&] {
    if (!current.empty() && !stopwords.contains(current)) tokens.push_back(current);
    current.clear();
  };
  for (char ch : text) {
    auto c = static_cast<unsigned char>(ch);
    if (c >= 0x80 || std::isalnum(c)) {
      current.push_back(c < 0x80 ? static_cast<char>(std::tolower(c)) : ch);
    } else {
      flush();
    }
  }
  flush();
  return tokens;
}

struct TextParams {
  std::size_t dim = 100;
  std::size_t window = 5;
  std::size_t negative = 5;
  std::size_t min_count = 2;
  std::size_t epochs = 1000;
  std::size_t infer_epochs = 100;
  double alpha = 0.025;
  double min_alpha = 0.0001;
  double noise_power = 0.75;
  std::uint64_t seed = 1;
  unsigned threads = 1;

  friend bool operator==(const TextParams&, const TextParams&) = default;
};

inline void to_json(nlohmann::json& j, const TextParams& p) {
  j = {{"dim", p.dim},           {"window", p.window},
       {"negative", p.negative}, {"min_count", p.min_count},
       {"epochs", p.epochs},     {"infer_epochs", p.infer_epochs},
       {"alpha", p.alpha},       {"min_alpha", p.min_alpha},
       {"noise_power", p.noise_power}, {"seed", p.seed},
       {"threads", p.threads}};
}

inline void from_json(const nlohmann::json& j, TextParams& p) {
  TextParams d;
  p.dim = j.value("dim", d.dim);
  p.window = j.value("window", d.window);
  p.negative = j.value("negative", d.negative);
  p.min_count = j.value("min_count", d.min_count);
  p.epochs = j.value("epochs", d.epochs);
  p.infer_epochs = j.value("infer_epochs", d.infer_epochs);
  p.alpha = j.value("alpha", d.alpha);
  p.min_alpha = j.value("min_alpha", d.min_alpha);
  p.noise_power = j.value("noise_power", d.noise_power);
  p.seed = j.value("seed", d.seed);
  p.threads = j.value("threads", d.threads);
}

namespace detail {

class SplitMixRng {
 public:
  explicit SplitMixRng(std::uint64_t seed) : state_(seed) {}
  std::uint64_t next() noexcept { return splitmix64(state_++); }
  // Uniform in [0, 1).
  double uniform() noexcept { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

 private:
  std::uint64_t state_;
};

inline double sigmoid(double x) noexcept { return 1.0 / (1.0 + std::exp(-x)); }

// Element access for the optional lock-free parallel mode.
template <bool Shared>
inline float load(const float& x) noexcept {
  if constexpr (Shared) {
    return std::atomic_ref<const float>(x).load(std::memory_order_relaxed);
  } else {
    return x;
  }
}

template <bool Shared>
inline void add(float& x, float delta) noexcept {
  if constexpr (Shared) {
    std::atomic_ref<float> r(x);
    r.store(r.load(std::memory_order_relaxed) + delta, std::memory_order_relaxed);
  } else {
    x += delta;
  }
}

}  // namespace detail

class TextModel {
 public:
  TextParams params;
  std::vector<std::string> vocab;
  std::vector<std::uint64_t> counts;
  std::vector<std::string> doc_ids;
  std::vector<float> word_vectors;    // |V| x dim
  std::vector<float> doc_vectors;     // docs x dim
  std::vector<float> output_weights;  // |V| x dim, negative-sampling outputs
  std::vector<double> epoch_loss;     // mean objective per prediction, per epoch

  std::size_t dim() const noexcept { return params.dim; }
  std::size_t vocab_size() const noexcept { return vocab.size(); }
  std::size_t doc_count() const noexcept { return doc_vectors.size() / params.dim; }

  std::span<const float> word_vector(std::size_t i) const {
    return std::span(word_vectors).subspan(i * dim(), dim());
  }
  std::span<const float> doc_vector(std::size_t i) const {
    return std::span(doc_vectors).subspan(i * dim(), dim());
  }

  std::optional<std::uint32_t> word_index(const std::string& token) const {
    auto it = index_.find(token);
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  std::optional<std::size_t> doc_index(const std::string& id) const {
    auto it = std::find(doc_ids.begin(), doc_ids.end(), id);
    if (it == doc_ids.end()) return std::nullopt;
    return static_cast<std::size_t>(it - doc_ids.begin());
  }

  std::vector<std::uint32_t> encode(const std::vector<std::string>& tokens) const {
    std::vector<std::uint32_t> ids;
    for (const auto& t : tokens) {
      if (auto i = word_index(t)) ids.push_back(*i);
    }
    return ids;
  }

  // Draws a noise word for u in [0, 1) from the count^noise_power distribution.
  std::uint32_t sample_noise(double u) const {
    auto it = std::upper_bound(noise_cdf_.begin(), noise_cdf_.end(), u);
    if (it == noise_cdf_.end()) --it;
    return static_cast<std::uint32_t>(it - noise_cdf_.begin());
  }

  // Rebuilds the token index and noise distribution after vocab/counts change.
  void finalize() {
    index_.clear();
    for (std::size_t i = 0; i < vocab.size(); ++i) {
      index_.emplace(vocab[i], static_cast<std::uint32_t>(i));
    }
    noise_cdf_.assign(vocab.size(), 0.0);
    double total = 0.0;
    for (std::size_t i = 0; i < vocab.size(); ++i) {
      total += std::pow(static_cast<double>(counts[i]), params.noise_power);
      noise_cdf_[i] = total;
    }
    for (auto& v : noise_cdf_) v /= total;
  }

 private:
  std::unordered_map<std::string, std::uint32_t> index_;
  std::vector<double> noise_cdf_;
};

namespace detail {

// One prediction: updates `doc` (unless frozen), context words (unless frozen)
// and output weights (unless frozen). Returns the negative-sampling loss.
template <bool Shared>
double pvdm_step(TextModel& m, float* doc, std::span<const std::uint32_t> ids,
                 std::size_t pos, double lr, SplitMixRng& rng, bool train_words,
                 std::vector<double>& h, std::vector<double>& grad) {
  const std::size_t dim = m.dim();
  const std::size_t lo = pos >= m.params.window ? pos - m.params.window : 0;
  const std::size_t hi = std::min(ids.size(), pos + m.params.window + 1);
  for (std::size_t k = 0; k < dim; ++k) h[k] = load<Shared>(doc[k]);
  std::size_t count = 1;
  for (std::size_t j = lo; j < hi; ++j) {
    if (j == pos) continue;
    const float* w = m.word_vectors.data() + std::size_t{ids[j]} * dim;
    for (std::size_t k = 0; k < dim; ++k) h[k] += load<Shared>(w[k]);
    ++count;
  }
  for (std::size_t k = 0; k < dim; ++k) h[k] /= static_cast<double>(count);
  std::fill(grad.begin(), grad.end(), 0.0);

  double loss = 0.0;
  const std::uint32_t centre = ids[pos];
  for (std::size_t s = 0; s <= m.params.negative; ++s) {
    std::uint32_t target = centre;
    double label = 1.0;
    if (s > 0) {
      target = m.sample_noise(rng.uniform());
      if (target == centre) continue;
      label = 0.0;
    }
    float* out = m.output_weights.data() + std::size_t{target} * dim;
    double f = 0.0;
    for (std::size_t k = 0; k < dim; ++k) f += h[k] * load<Shared>(out[k]);
    double sig = sigmoid(f);
    loss -= std::log(std::max(label > 0 ? sig : 1.0 - sig, 1e-12));
    double g = (label - sig) * lr;
    for (std::size_t k = 0; k < dim; ++k) grad[k] += g * load<Shared>(out[k]);
    if (train_words) {
      for (std::size_t k = 0; k < dim; ++k) add<Shared>(out[k], static_cast<float>(g * h[k]));
    }
  }
  for (std::size_t k = 0; k < dim; ++k) add<Shared>(doc[k], static_cast<float>(grad[k]));
  if (train_words) {
    for (std::size_t j = lo; j < hi; ++j) {
      if (j == pos) continue;
      float* w = m.word_vectors.data() + std::size_t{ids[j]} * dim;
      for (std::size_t k = 0; k < dim; ++k) add<Shared>(w[k], static_cast<float>(grad[k]));
    }
  }
  return loss;
}

inline void random_init(std::span<float> v, std::size_t dim, SplitMixRng& rng) {
  for (auto& x : v) x = static_cast<float>((rng.uniform() - 0.5) / static_cast<double>(dim));
}

}  // namespace detail

inline TextModel train_pvdm(const std::vector<std::vector<std::string>>& docs,
                            const TextParams& params,
                            std::vector<std::string> doc_ids = {}) {
  if (params.dim == 0 || params.epochs == 0) {
    fail(ErrorKind::kUsage, "text model needs dim > 0 and epochs > 0");
  }
  if (!doc_ids.empty() && doc_ids.size() != docs.size()) {
    fail(ErrorKind::kUsage, "doc_ids and docs differ in length");
  }
  TextModel m;
  m.params = params;
  if (doc_ids.empty()) {
    for (std::size_t i = 0; i < docs.size(); ++i) doc_ids.push_back(std::to_string(i));
  }
  m.doc_ids = std::move(doc_ids);

  std::map<std::string, std::uint64_t> freq;
  for (const auto& d : docs) {
    for (const auto& t : d) ++freq[t];
  }
  std::vector<std::pair<std::string, std::uint64_t>> kept;
  for (auto& [token, n] : freq) {
    if (n >= params.min_count) kept.emplace_back(token, n);
  }
  std::stable_sort(kept.begin(), kept.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  if (kept.empty()) {
    fail(ErrorKind::kTraining, "empty vocabulary after applying min_count " +
                                   std::to_string(params.min_count));
  }
  for (auto& [token, n] : kept) {
    m.vocab.push_back(token);
    m.counts.push_back(n);
  }
  m.finalize();

  const std::size_t dim = params.dim;
  detail::SplitMixRng init_rng(params.seed);
  m.word_vectors.resize(m.vocab.size() * dim);
  m.doc_vectors.resize(docs.size() * dim);
  m.output_weights.assign(m.vocab.size() * dim, 0.0f);
  detail::random_init(m.word_vectors, dim, init_rng);
  detail::random_init(m.doc_vectors, dim, init_rng);

  std::vector<std::vector<std::uint32_t>> encoded;
  std::size_t words_per_epoch = 0;
  for (const auto& d : docs) {
    encoded.push_back(m.encode(d));
    words_per_epoch += encoded.back().size();
  }
  if (words_per_epoch == 0) fail(ErrorKind::kTraining, "no in-vocabulary tokens");
  const double total = static_cast<double>(words_per_epoch * params.epochs);
  const unsigned threads = std::max(1u, params.threads);

  m.epoch_loss.reserve(params.epochs);
  for (std::size_t epoch = 0; epoch < params.epochs; ++epoch) {
    std::vector<double> loss(threads, 0.0);
    std::vector<std::size_t> predictions(threads, 0);
    auto run = [&](unsigned shard, std::size_t begin, std::size_t end) {
      detail::SplitMixRng rng(splitmix64(params.seed) ^ (epoch * 0x10001ULL + shard + 1));
      std::vector<double> h(dim), grad(dim);
      std::size_t done = epoch * words_per_epoch;
      for (std::size_t d = 0; d < begin; ++d) done += encoded[d].size();
      for (std::size_t d = begin; d < end; ++d) {
        float* doc = m.doc_vectors.data() + d * dim;
        const auto& ids = encoded[d];
        for (std::size_t pos = 0; pos < ids.size(); ++pos, ++done) {
          double lr = params.alpha - (params.alpha - params.min_alpha) * (done / total);
          double l = threads > 1
                         ? detail::pvdm_step<true>(m, doc, ids, pos, lr, rng, true, h, grad)
                         : detail::pvdm_step<false>(m, doc, ids, pos, lr, rng, true, h, grad);
          loss[shard] += l;
          ++predictions[shard];
        }
      }
    };
    parallel_shards(encoded.size(), threads, run);
    double l = 0.0;
    std::size_t n = 0;
    for (unsigned s = 0; s < threads; ++s) {
      l += loss[s];
      n += predictions[s];
    }
    m.epoch_loss.push_back(n ? l / static_cast<double>(n) : 0.0);
  }
  return m;
}

struct InferredVector {
  std::vector<float> values;
  // Set when no token was in the vocabulary; values are then all zero.
  bool out_of_vocabulary = false;
};

// Fits a fresh document vector with word and output weights frozen.
inline InferredVector infer_doc_vector(const TextModel& model,
                                       const std::vector<std::string>& tokens) {
  InferredVector result;
  const std::size_t dim = model.dim();
  auto ids = model.encode(tokens);
  if (ids.empty()) {
    result.values.assign(dim, 0.0f);
    result.out_of_vocabulary = true;
    return result;
  }
  const auto& p = model.params;
  detail::SplitMixRng rng(splitmix64(p.seed ^ 0x1F0A5EEDULL));
  result.values.resize(dim);
  detail::random_init(result.values, dim, rng);
  // pvdm_step never writes the frozen weights; the cast only satisfies its
  // signature, which is shared with training.
  auto& m = const_cast<TextModel&>(model);
  std::vector<double> h(dim), grad(dim);
  const std::size_t epochs = std::max<std::size_t>(1, p.infer_epochs);
  const double total = static_cast<double>(epochs * ids.size());
  std::size_t done = 0;
  for (std::size_t e = 0; e < epochs; ++e) {
    for (std::size_t pos = 0; pos < ids.size(); ++pos, ++done) {
      double lr = p.alpha - (p.alpha - p.min_alpha) * (done / total);
      detail::pvdm_step<false>(m, result.values.data(), ids, pos, lr, rng, false, h, grad);
    }
  }
  return result;
}

inline void save_text_model(const TextModel& m, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  nlohmann::json vocab = nlohmann::json::array();
  for (std::size_t i = 0; i < m.vocab.size(); ++i) {
    vocab.push_back({{"token", m.vocab[i]}, {"count", m.counts[i]}});
  }
  nlohmann::json j = {{"format", "appsim-pvdm-1"},
                      {"params", m.params},
                      {"vocab", vocab},
                      {"doc_ids", m.doc_ids},
                      {"epoch_loss", m.epoch_loss}};
  std::ofstream out(dir / "vocab.json", std::ios::trunc);
  if (!out) fail(ErrorKind::kIo, "cannot write " + (dir / "vocab.json").string());
  out << j.dump(1) << '\n';
  const std::size_t dim = m.dim();
  write_tensor(Tensor::matrix(m.vocab.size(), dim, m.word_vectors), dir / "words.tensor");
  write_tensor(Tensor::matrix(m.vocab.size(), dim, m.output_weights), dir / "output.tensor");
  if (m.doc_count() > 0) {
    write_tensor(Tensor::matrix(m.doc_count(), dim, m.doc_vectors), dir / "docs.tensor");
  }
}

inline TextModel load_text_model(const std::filesystem::path& dir) {
  std::ifstream in(dir / "vocab.json");
  if (!in) fail(ErrorKind::kIo, "cannot open " + (dir / "vocab.json").string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::kParse, (dir / "vocab.json").string() + ": " + e.what());
  }
  TextModel m;
  m.params = j.at("params").get<TextParams>();
  for (const auto& v : j.at("vocab")) {
    m.vocab.push_back(v.at("token").get<std::string>());
    m.counts.push_back(v.at("count").get<std::uint64_t>());
  }
  m.doc_ids = j.at("doc_ids").get<std::vector<std::string>>();
  m.epoch_loss = j.value("epoch_loss", std::vector<double>{});
  auto expect = [&](const Tensor& t, std::size_t rows, const char* name) {
    if (t.ndim() != 2 || t.dim(0) != rows || t.dim(1) != m.params.dim) {
      fail(ErrorKind::kValidation, std::string("text model tensor ") + name +
                                       " has the wrong shape");
    }
  };
  auto words = read_tensor(dir / "words.tensor");
  auto output = read_tensor(dir / "output.tensor");
  expect(words, m.vocab.size(), "words");
  expect(output, m.vocab.size(), "output");
  m.word_vectors = std::move(words).release();
  m.output_weights = std::move(output).release();
  if (!m.doc_ids.empty()) {
    auto docs = read_tensor(dir / "docs.tensor");
    expect(docs, m.doc_ids.size(), "docs");
    m.doc_vectors = std::move(docs).release();
  }
  m.finalize();
  return m;
}

}  // namespace appsim
