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

// appsim: file-based pipeline from app metadata and icons to counterfeit
// candidate reports. Data goes to stdout or --out files; progress to stderr.

#include <atomic>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "appsim/appsim.hpp"
#include "appsim/image.hpp"
#include "appsim/inference.hpp"
#include "cli_config.hpp"

#ifndef APPSIM_DEFAULT_CONFIG_DIR
#define APPSIM_DEFAULT_CONFIG_DIR "config"
#endif

namespace fs = std::filesystem;
using nlohmann::json;

namespace appsim::cli {
namespace {

struct Globals {
  unsigned threads = default_threads();
  bool quiet = false;
  std::vector<std::string> argv;
};

Globals g;

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

Stopwatch g_clock;

void log(const std::string& msg) {
  if (g.quiet) return;
  static std::mutex m;
  std::lock_guard lock(m);
  std::fprintf(stderr, "[appsim %7.2fs] %s\n", g_clock.seconds(), msg.c_str());
}

RunManifest start_manifest(const std::string& command) {
  RunManifest m;
  m.command = command;
  m.arguments = g.argv;
  m.started_at = utc_timestamp(std::chrono::system_clock::now());
  m.settings["threads"] = g.threads;
  return m;
}

void finish_manifest(RunManifest& m, const fs::path& path) {
  m.finished_at = utc_timestamp(std::chrono::system_clock::now());
  write_manifest(m, path);
  log("manifest " + path.string());
}

// Writes to `path`, or stdout when empty.
class Output {
 public:
  explicit Output(const fs::path& path) {
    if (path.empty()) return;
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    file_.open(path, std::ios::binary | std::ios::trunc);
    if (!file_) fail(ErrorKind::kIo, "cannot write " + path.string());
  }
  std::ostream& stream() { return file_.is_open() ? file_ : std::cout; }
  void close(const fs::path& path) {
    if (!file_.is_open()) return;
    file_.close();
    if (!file_) fail(ErrorKind::kIo, "write failed for " + path.string());
  }

 private:
  std::ofstream file_;
};

std::string sha_of(const json& j) { return sha256_hex(j.dump()); }

bool has_table(const fs::path& base) { return fs::exists(table_ids_path(base)); }

// Per-record failures that skip the record unless --strict.
bool recoverable(const Error& e) {
  switch (e.kind()) {
    case ErrorKind::kIo:
    case ErrorKind::kDecode:
    case ErrorKind::kFormat:
    case ErrorKind::kCorruption:
    case ErrorKind::kShape:
    case ErrorKind::kInference:
    case ErrorKind::kValidation:
      return true;
    default:
      return false;
  }
}

class SkipLog {
 public:
  void add(const std::string& app_id, const std::string& why) {
    std::lock_guard lock(m_);
    entries_.emplace_back(app_id, why);
  }
  std::size_t size() const { return entries_.size(); }
  void report(const std::string& what) {
    std::sort(entries_.begin(), entries_.end());
    for (std::size_t i = 0; i < entries_.size() && i < 10; ++i) {
      log("skipped " + entries_[i].first + ": " + entries_[i].second);
    }
    if (entries_.size() > 10) log("... " + std::to_string(entries_.size() - 10) + " more " + what + " skipped");
  }
  json to_json() const {
    json j = json::object();
    for (const auto& [id, why] : entries_) j[id] = why;
    return j;
  }

 private:
  std::mutex m_;
  std::vector<std::pair<std::string, std::string>> entries_;
};

void write_rows(const std::vector<AppRecord>& records,
                const std::vector<std::optional<std::vector<float>>>& rows, const fs::path& base) {
  EmbeddingTable table;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (rows[i]) table.append(records[i].app_id, *rows[i]);
  }
  write_embedding_table(table, base);
  log("wrote " + std::to_string(table.ids.size()) + " rows to " + table_tensor_path(base).string());
}

// ---------------------------------------------------------------------------
// embed-icons

struct EmbedIcons {
  fs::path corpus, out, model;
  ModelSpec spec;
  std::string kernel = "none";
  std::size_t projection_dim = kDefaultStyleDim;
  std::uint64_t seed = 42;
  bool no_content = false, no_style = false, strict = false;

  void setup(CLI::App& app) {
    auto* sub = app.add_subcommand("embed-icons", "Content and style embeddings for every icon");
    sub->add_option("--corpus", corpus, "Corpus NDJSON")->required();
    sub->add_option("--out", out, "Output directory")->required();
    sub->add_option("--model", model, "ONNX model (needed for image icons)");
    sub->add_option("--content-layer", spec.content_output, "Layer for content vectors")->capture_default_str();
    sub->add_option("--style-layer", spec.style_output, "Layer for style feature maps")->capture_default_str();
    sub->add_option("--content-dim", spec.content_dim)->capture_default_str();
    sub->add_option("--style-channels", spec.style_channels)->capture_default_str();
    sub->add_option("--input-size", spec.input_width, "Square model input side")->capture_default_str();
    sub->add_option("--kernel", kernel, "none | poly:a,b | shift:c | sqexp:d")->capture_default_str();
    sub->add_option("--projection-dim", projection_dim)->capture_default_str();
    sub->add_option("--seed", seed, "Projection seed")->capture_default_str();
    sub->add_flag("--no-content", no_content);
    sub->add_flag("--no-style", no_style);
    sub->add_flag("--strict", strict, "Fail on the first bad record");
    sub->callback([this] { run(); });
  }

  void run() {
    spec.input_height = spec.input_width;
    spec.model_path = model;
    auto style_kernel = parse_style_kernel(kernel);
    auto records = load_corpus(corpus);
    log("loaded " + std::to_string(records.size()) + " records");
    std::unique_ptr<InferenceModel> net;
    if (!model.empty()) {
      net = std::make_unique<InferenceModel>(spec);
      log("model " + model.string());
    }
    std::optional<ProjectionMatrix> proj;
    if (!no_style) {
      const std::size_t d = spec.style_channels * (spec.style_channels + 1) / 2;
      proj.emplace(d, projection_dim, seed, g.threads);
      log("projection " + std::to_string(d) + " -> " + std::to_string(projection_dim));
    }

    const std::size_t n = records.size();
    std::vector<std::optional<std::vector<float>>> content(n), style(n);
    SkipLog skipped;
    std::atomic<std::size_t> done{0};
    parallel_for(n, g.threads, [&](std::size_t i) {
      const auto& r = records[i];
      try {
        std::optional<FeatureMap> fmap;
        bool icon_is_image = false;
        fs::path icon;
        if (!r.icon_ref.empty()) {
          icon = resolve_ref(corpus, r.icon_ref);
          icon_is_image = !is_tensor_file(icon);
          if (!icon_is_image && !no_style) {
            fmap = load_precomputed_feature_map(icon, spec.style_channels);
          }
        }
        const bool want_content = !no_content && (!r.content_ref.empty() || icon_is_image);
        const bool want_style = !no_style && (fmap || icon_is_image);
        if (!no_content && !r.content_ref.empty()) {
          content[i] = load_precomputed_content(resolve_ref(corpus, r.content_ref), spec.content_dim)
                           .release();
        }
        if (icon_is_image && ((want_content && !content[i]) || (want_style && !fmap))) {
          if (!net) {
            fail(ErrorKind::kConfiguration, "icon of '" + r.app_id + "' is an image; pass --model");
          }
          auto input = preprocess_image(load_image(icon), spec.input_width, spec.input_height);
          auto [c, f] = net->extract(input);
          if (want_content && !content[i]) content[i] = std::move(c).release();
          if (want_style && !fmap) fmap.emplace(std::move(f));
        }
        if (fmap && proj) style[i] = style_embedding(*fmap, *proj, style_kernel);
        if (!content[i] && !style[i]) skipped.add(r.app_id, "no icon or precomputed tensors");
      } catch (const Error& e) {
        if (strict || !recoverable(e)) throw;
        content[i].reset();
        style[i].reset();
        skipped.add(r.app_id, e.what());
      }
      auto k = ++done;
      if (k % 1000 == 0) log("embedded " + std::to_string(k) + " / " + std::to_string(n));
    });
    skipped.report("records");

    fs::create_directories(out);
    auto m = start_manifest("embed-icons");
    m.add_input("corpus", corpus);
    if (!no_content) {
      write_rows(records, content, out / "content");
      m.outputs["content"] = table_tensor_path(out / "content").string();
    }
    if (!no_style) {
      write_rows(records, style, out / "style");
      m.outputs["style"] = table_tensor_path(out / "style").string();
    }
    m.config_hashes["model_spec"] = sha_of(to_json(spec));
    if (!model.empty()) m.add_config("model", model);
    m.seeds["projection"] = seed;
    m.settings["model_spec"] = to_json(spec);
    m.settings["kernel"] = kernel;
    m.settings["projection_dim"] = projection_dim;
    m.settings["preprocessing"] = {{"resize", "bilinear"},
                                   {"channel_order", "RGB"},
                                   {"mean_rgb", kImageNetMeanRgb}};
    m.settings["skipped"] = skipped.to_json();
    finish_manifest(m, out / "embed-icons.manifest.json");
  }
};

// ---------------------------------------------------------------------------
// hash

struct Hash {
  fs::path corpus, out;
  std::vector<std::string> kinds = {"average", "difference", "perceptual", "wavelet"};
  bool no_gray = false, strict = false;

  void setup(CLI::App& app) {
    auto* sub = app.add_subcommand("hash", "1024-bit image hashes and 32x32 gray images");
    sub->add_option("--corpus", corpus)->required();
    sub->add_option("--out", out, "Output directory")->required();
    sub->add_option("--kind", kinds, "average,difference,perceptual,wavelet")
        ->delimiter(',')
        ->capture_default_str();
    sub->add_flag("--no-gray", no_gray, "Skip the gray images used for SSIM");
    sub->add_flag("--strict", strict);
    sub->callback([this] { run(); });
  }

  void run() {
    std::vector<HashKind> hk;
    for (const auto& k : kinds) hk.push_back(parse_hash_kind(k));
    auto records = load_corpus(corpus);
    const std::size_t n = records.size();
    std::vector<std::vector<std::optional<BitVector1024>>> bits(hk.size(),
                                                                 std::vector<std::optional<BitVector1024>>(n));
    std::vector<std::optional<std::vector<float>>> gray(n);
    SkipLog skipped;
    parallel_for(n, g.threads, [&](std::size_t i) {
      const auto& r = records[i];
      if (r.icon_ref.empty()) return skipped.add(r.app_id, "no icon");
      auto icon = resolve_ref(corpus, r.icon_ref);
      try {
        if (is_tensor_file(icon)) return skipped.add(r.app_id, "icon is a precomputed tensor");
        auto img = load_image(icon);
        for (std::size_t k = 0; k < hk.size(); ++k) bits[k][i] = image_hash(img, hk[k]);
        if (!no_gray) gray[i] = to_gray32(img).pixels;
      } catch (const Error& e) {
        if (strict || !recoverable(e)) throw;
        for (auto& b : bits) b[i].reset();
        gray[i].reset();
        skipped.add(r.app_id, e.what());
      }
    });
    skipped.report("icons");
    fs::create_directories(out);
    auto m = start_manifest("hash");
    m.add_input("corpus", corpus);
    for (std::size_t k = 0; k < hk.size(); ++k) {
      HashTable table{hk[k], {}};
      for (std::size_t i = 0; i < n; ++i) {
        if (bits[k][i]) table.entries.emplace_back(records[i].app_id, *bits[k][i]);
      }
      auto path = out / (std::string(hash_kind_name(hk[k])) + ".hashes");
      write_hash_table(table, path);
      m.outputs[std::string(hash_kind_name(hk[k]))] = path.string();
      log("wrote " + std::to_string(table.entries.size()) + " hashes to " + path.string());
    }
    if (!no_gray) {
      write_rows(records, gray, out / "gray");
      m.outputs["gray"] = table_tensor_path(out / "gray").string();
    }
    m.settings["kinds"] = kinds;
    m.settings["skipped"] = skipped.to_json();
    finish_manifest(m, out / "hash.manifest.json");
  }
};

// ---------------------------------------------------------------------------
// train-text / embed-text

StopwordSet stopwords_from(const ConfigList& list) {
  return StopwordSet(list.entries().begin(), list.entries().end());
}

ConfigList builtin_stopwords() {
  return ConfigList(std::vector<std::string>(kEnglishStopwords.begin(), kEnglishStopwords.end()));
}

struct TrainText {
  fs::path corpus, out, stopwords;
  TextParams params;

  void setup(CLI::App& app) {
    auto* sub = app.add_subcommand("train-text", "Train a PV-DM model on app descriptions");
    sub->add_option("--corpus", corpus)->required();
    sub->add_option("--out", out, "Model directory")->required();
    sub->add_option("--dim", params.dim)->capture_default_str();
    sub->add_option("--window", params.window)->capture_default_str();
    sub->add_option("--negative", params.negative)->capture_default_str();
    sub->add_option("--min-count", params.min_count)->capture_default_str();
    sub->add_option("--epochs", params.epochs)->capture_default_str();
    sub->add_option("--infer-epochs", params.infer_epochs)->capture_default_str();
    sub->add_option("--alpha", params.alpha, "Initial learning rate")->capture_default_str();
    sub->add_option("--min-alpha", params.min_alpha)->capture_default_str();
    sub->add_option("--seed", params.seed)->capture_default_str();
    sub->add_option("--stopwords", stopwords, "Stopword list (default: built-in English)");
    sub->callback([this] { run(); });
  }

  void run() {
    params.threads = g.threads;
    auto records = load_corpus(corpus);
    auto list = stopwords.empty() ? builtin_stopwords() : ConfigList::load(stopwords);
    auto sw = stopwords_from(list);
    std::vector<std::vector<std::string>> docs;
    std::vector<std::string> ids;
    for (const auto& r : records) {
      docs.push_back(preprocess_text(r.description, sw));
      ids.push_back(r.app_id);
    }
    log("training on " + std::to_string(docs.size()) + " descriptions, " +
        std::to_string(params.epochs) + " epochs");
    auto model = train_pvdm(docs, params, ids);
    log("vocabulary " + std::to_string(model.vocab_size()) + ", final loss " +
        (model.epoch_loss.empty() ? std::string("n/a") : std::to_string(model.epoch_loss.back())));
    save_text_model(model, out);
    {
      std::ofstream sw_out(out / "stopwords.txt", std::ios::trunc);
      for (const auto& w : list.entries()) sw_out << w << '\n';
    }
    auto m = start_manifest("train-text");
    m.add_input("corpus", corpus);
    m.config_hashes["stopwords"] = list.digest();
    m.seeds["text"] = params.seed;
    m.settings["params"] = params;
    m.outputs["model"] = out.string();
    finish_manifest(m, out / "manifest.json");
  }
};

struct EmbedText {
  fs::path model_dir, corpus, out;
  bool reinfer = false;

  void setup(CLI::App& app) {
    auto* sub = app.add_subcommand("embed-text", "Description vectors from a trained text model");
    sub->add_option("--model", model_dir, "Model directory from train-text")->required();
    sub->add_option("--corpus", corpus)->required();
    sub->add_option("--out", out, "Output directory")->required();
    sub->add_flag("--reinfer", reinfer, "Infer vectors even for training documents");
    sub->callback([this] { run(); });
  }

  void run() {
    auto model = load_text_model(model_dir);
    auto list = fs::exists(model_dir / "stopwords.txt") ? ConfigList::load(model_dir / "stopwords.txt")
                                                        : builtin_stopwords();
    auto sw = stopwords_from(list);
    auto records = load_corpus(corpus);
    std::unordered_map<std::string, std::size_t> trained;
    for (std::size_t i = 0; i < model.doc_ids.size(); ++i) trained.emplace(model.doc_ids[i], i);
    const std::size_t n = records.size();
    std::vector<std::optional<std::vector<float>>> rows(n);
    std::atomic<std::size_t> oov{0}, inferred{0};
    parallel_for(n, g.threads, [&](std::size_t i) {
      const auto& r = records[i];
      auto it = trained.find(r.app_id);
      if (!reinfer && it != trained.end()) {
        auto v = model.doc_vector(it->second);
        rows[i] = std::vector<float>(v.begin(), v.end());
        return;
      }
      auto v = infer_doc_vector(model, preprocess_text(r.description, sw));
      ++inferred;
      if (v.out_of_vocabulary) ++oov;
      rows[i] = std::move(v.values);
    });
    if (oov > 0) log("warning: " + std::to_string(oov.load()) + " descriptions had no known words (zero vectors)");
    log("inferred " + std::to_string(inferred.load()) + " vectors");
    fs::create_directories(out);
    write_rows(records, rows, out / "text");
    auto m = start_manifest("embed-text");
    m.add_input("corpus", corpus);
    m.add_input("model", model_dir / "vocab.json");
    m.config_hashes["stopwords"] = list.digest();
    m.seeds["text"] = model.params.seed;
    m.settings["out_of_vocabulary"] = oov.load();
    m.outputs["text"] = table_tensor_path(out / "text").string();
    finish_manifest(m, out / "embed-text.manifest.json");
  }
};

// ---------------------------------------------------------------------------
// build-index

struct BuildIndex {
  fs::path corpus, out;
  std::vector<fs::path> dirs;

  void setup(CLI::App& app) {
    auto* sub = app.add_subcommand("build-index", "Assemble embeddings and hashes into a search index");
    sub->add_option("--corpus", corpus)->required();
    sub->add_option("--embeddings", dirs, "Directories from embed-icons, embed-text, hash")
        ->required()
        ->check(CLI::ExistingDirectory);
    sub->add_option("--out", out, "Index directory")->required();
    sub->callback([this] { run(); });
  }

  // Finds the single directory holding `name`; none is fine, two is an error.
  std::optional<fs::path> locate(const std::string& name, bool table) const {
    std::optional<fs::path> found;
    for (const auto& d : dirs) {
      auto p = d / name;
      if (table ? has_table(p) : fs::exists(p)) {
        if (found) fail(ErrorKind::kValidation, name + " found in both " + found->string() + " and " + d.string());
        found = p;
      }
    }
    return found;
  }

  void run() {
    auto records = load_corpus(corpus);
    SearchIndex::Builder builder;
    std::map<Modality, fs::path> tables;
    for (auto mod : kModalities) {
      if (auto p = locate(modality_name(mod), true)) tables[mod] = *p;
    }
    builder.reserve(records.size());
    auto m = start_manifest("build-index");
    m.add_input("corpus", corpus);
    for (const auto& r : records) builder.add_row(r.app_id, r.developer_id);
    std::unordered_map<std::string, std::size_t> row_of;
    for (std::size_t i = 0; i < records.size(); ++i) row_of.emplace(records[i].app_id, i);

    std::size_t unknown = 0;
    for (const auto& [mod, base] : tables) {
      auto table = read_embedding_table(base);
      m.add_input(modality_name(mod), table_tensor_path(base));
      if (table.ids.empty()) continue;
      builder.set_dim(mod, table.dim);
      for (std::size_t i = 0; i < table.ids.size(); ++i) {
        auto it = row_of.find(table.ids[i]);
        if (it == row_of.end()) {
          ++unknown;
          continue;
        }
        builder.set_modality(it->second, mod, table.row(i));
      }
      log(std::string(modality_name(mod)) + ": " + std::to_string(table.ids.size()) + " x " +
          std::to_string(table.dim));
    }
    for (auto kind : kHashKinds) {
      auto p = locate(std::string(hash_kind_name(kind)) + ".hashes", false);
      if (!p) continue;
      auto table = read_hash_table(*p);
      m.add_input(std::string(hash_kind_name(kind)), *p);
      for (const auto& [id, bits] : table.entries) {
        auto it = row_of.find(id);
        if (it == row_of.end()) {
          ++unknown;
          continue;
        }
        builder.set_hash(it->second, bits);
      }
      log(std::string(hash_kind_name(kind)) + " hashes: " + std::to_string(table.entries.size()));
    }
    if (auto p = locate("gray", true)) {
      auto table = read_embedding_table(*p);
      if (!table.ids.empty() && table.dim != SearchIndex::kGrayPixels) {
        fail(ErrorKind::kValidation, "gray table must hold 32x32 images");
      }
      for (std::size_t i = 0; i < table.ids.size(); ++i) {
        auto it = row_of.find(table.ids[i]);
        if (it == row_of.end()) {
          ++unknown;
          continue;
        }
        auto row = table.row(i);
        builder.set_gray(it->second, GrayImage(kHashSide, kHashSide, std::vector<float>(row.begin(), row.end())));
      }
    }
    if (unknown > 0) log("warning: ignored " + std::to_string(unknown) + " rows for apps not in the corpus");
    auto index = std::move(builder).build(g.threads);
    save_index(index, out);
    log("index of " + std::to_string(index.size()) + " apps in " + out.string());
    m.outputs["index"] = out.string();
    m.settings["unknown_rows"] = unknown;
    finish_manifest(m, out / "build-index.manifest.json");
  }
};

// ---------------------------------------------------------------------------
// search

std::vector<std::string> read_id_list(const fs::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::kIo, "cannot open " + path.string());
  std::vector<std::string> ids;
  std::string line;
  while (std::getline(in, line)) {
    auto b = line.find_first_not_of(" \t\r");
    if (b == std::string::npos || line[b] == '#') continue;
    auto e = line.find_last_not_of(" \t\r");
    ids.push_back(line.substr(b, e - b + 1));
  }
  return ids;
}

struct ThresholdChoice {
  double value = 0.0;
  std::string method;
};

ThresholdChoice choose_threshold(const std::vector<double>& distances, double fallback_q) {
  try {
    return {kneedle_threshold(distances), "kneedle"};
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::kNoKnee && e.kind() != ErrorKind::kUsage) throw;
    if (distances.empty()) throw;
    log(std::string("no knee (") + e.what() + "); using quantile " + std::to_string(fallback_q));
    return {quantile(distances, fallback_q), "quantile"};
  }
}

std::vector<double> all_distances(const std::vector<RetrievalResult>& results) {
  std::vector<double> d;
  for (const auto& r : results) {
    for (const auto& h : r.hits) d.push_back(h.distance);
  }
  return d;
}

struct Search {
  fs::path index_dir, queries_file, out;
  std::vector<std::string> queries;
  bool all = false, exclude_own = false, include_self = false;
  std::string exclude_developer_of, method = "fused", threshold = "none";
  std::size_t k = 10;
  Weights w;
  double fallback_q = 0.05;

  void setup(CLI::App& app) {
    auto* sub = app.add_subcommand("search", "k nearest neighbours of indexed apps");
    sub->add_option("--index", index_dir)->required()->check(CLI::ExistingDirectory);
    sub->add_option("--query", queries, "Query app_id (repeatable)");
    sub->add_option("--queries", queries_file, "File with one query app_id per line");
    sub->add_flag("--all", all, "Query every indexed app");
    sub->add_option("--k", k)->capture_default_str();
    sub->add_option("--method", method, "fused|content|style|text|avg-hash|diff-hash|phash|whash|ssim")
        ->capture_default_str();
    sub->add_option("--alpha", w.alpha)->capture_default_str();
    sub->add_option("--beta", w.beta)->capture_default_str();
    sub->add_option("--gamma", w.gamma)->capture_default_str();
    sub->add_option("--exclude-developer-of", exclude_developer_of, "Drop apps by this app's developer");
    sub->add_flag("--exclude-own-developer", exclude_own, "Drop apps by each query's developer");
    sub->add_flag("--include-self", include_self, "Keep the query app in its own results");
    sub->add_option("--threshold", threshold, "none | auto | <max distance>")->capture_default_str();
    sub->add_option("--fallback-quantile", fallback_q, "Used when --threshold auto finds no knee")
        ->capture_default_str();
    sub->add_option("--out", out, "NDJSON output (default stdout)");
    sub->callback([this] { run(); });
  }

  void run() {
    if (k == 0) fail(ErrorKind::kUsage, "--k must be at least 1");
    w.validate();
    const auto m_kind = parse_method(method);
    auto index = load_index(index_dir);
    log("index of " + std::to_string(index.size()) + " apps");
    std::vector<std::string> ids = queries;
    if (!queries_file.empty()) {
      auto more = read_id_list(queries_file);
      ids.insert(ids.end(), more.begin(), more.end());
    }
    if (all) ids.insert(ids.end(), index.app_ids().begin(), index.app_ids().end());
    if (ids.empty()) fail(ErrorKind::kUsage, "no queries: pass --query, --queries or --all");
    std::optional<std::string> fixed_dev;
    if (!exclude_developer_of.empty()) {
      auto row = index.row_of(exclude_developer_of);
      if (!row) fail(ErrorKind::kValidation, "unknown app '" + exclude_developer_of + "'");
      fixed_dev = index.developer_id(*row);
    }
    std::vector<std::size_t> rows;
    for (const auto& id : ids) {
      auto row = index.row_of(id);
      if (!row) fail(ErrorKind::kValidation, "query app '" + id + "' is not in the index");
      rows.push_back(*row);
    }
    std::vector<RetrievalResult> results(rows.size());
    const bool many = rows.size() > 1;
    std::atomic<std::size_t> done{0};
    parallel_for(rows.size(), many ? g.threads : 1, [&](std::size_t q) {
      KnnOptions opt;
      opt.k = k;
      opt.weights = w;
      opt.threads = many ? 1 : g.threads;
      opt.exclude_developer = fixed_dev;
      if (exclude_own) opt.exclude_developer = index.developer_id(rows[q]);
      if (!include_self) opt.exclude_app = index.app_id(rows[q]);
      results[q] = retrieve(index, index.embedding(rows[q]), m_kind, opt);
      auto n = ++done;
      if (n % 1000 == 0) log("searched " + std::to_string(n) + " / " + std::to_string(rows.size()));
    });

    auto m = start_manifest("search");
    m.add_input("index", index_dir / "index.json");
    m.settings["k"] = k;
    m.settings["method"] = method;
    m.settings["weights"] = {w.alpha, w.beta, w.gamma};
    if (threshold != "none") {
      ThresholdChoice t;
      if (threshold == "auto") {
        t = choose_threshold(all_distances(results), fallback_q);
      } else {
        try {
          t = {std::stod(threshold), "fixed"};
        } catch (const std::exception&) {
          fail(ErrorKind::kUsage, "--threshold must be none, auto or a number");
        }
      }
      log("threshold " + std::to_string(t.value) + " (" + t.method + ")");
      for (auto& r : results) r = filter_by_threshold(std::move(r), t.value);
      m.settings["threshold"] = {{"value", t.value}, {"method", t.method}};
    }
    Output o(out);
    for (const auto& r : results) o.stream() << appsim::to_json(r).dump() << '\n';
    o.close(out);
    if (!out.empty()) {
      m.outputs["retrievals"] = out.string();
      finish_manifest(m, manifest_path_for(out));
    }
  }
};

// ---------------------------------------------------------------------------
// eval / grid-search

std::vector<double> parse_range(const std::string& s) {
  auto colon = s.find(':');
  try {
    if (colon != std::string::npos) {
      int lo = std::stoi(s.substr(0, colon));
      int hi = std::stoi(s.substr(colon + 1));
      if (lo > hi) fail(ErrorKind::kUsage, "empty range '" + s + "'");
      return integer_range(lo, hi);
    }
    std::vector<double> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(std::stod(item));
    return out;
  } catch (const std::logic_error&) {
    fail(ErrorKind::kUsage, "bad range '" + s + "' (use lo:hi or a,b,c)");
  }
}

struct Eval {
  fs::path index_dir, labelled, out;
  std::vector<std::size_t> ks = {5, 10, 15, 20};
  std::vector<std::string> methods = {"fused"};
  Weights w;
  bool micro = false;

  void setup(CLI::App& app) {
    auto* sub = app.add_subcommand("eval", "precision@k and recall@k over labelled groups");
    sub->add_option("--index", index_dir)->required()->check(CLI::ExistingDirectory);
    sub->add_option("--labelled", labelled)->required();
    sub->add_option("--ks", ks)->delimiter(',')->capture_default_str();
    sub->add_option("--method", methods, "Comma-separated methods")->delimiter(',')->capture_default_str();
    sub->add_option("--alpha", w.alpha)->capture_default_str();
    sub->add_option("--beta", w.beta)->capture_default_str();
    sub->add_option("--gamma", w.gamma)->capture_default_str();
    sub->add_flag("--micro", micro, "Pool counts over groups instead of averaging");
    sub->add_option("--out", out, "CSV output (default stdout)");
    sub->callback([this] { run(); });
  }

  void run() {
    w.validate();
    std::vector<Method> ms;
    for (const auto& s : methods) ms.push_back(parse_method(s));
    auto set = load_labelled_set(labelled);
    auto index = load_index(index_dir);
    Output o(out);
    bool header = true;
    for (auto method : ms) {
      EvalOptions opt;
      opt.ks = ks;
      opt.weights = w;
      opt.method = method;
      opt.micro = micro;
      opt.threads = g.threads;
      auto table = evaluate(set, index, opt);
      for (const auto& s : table.skipped) {
        log(std::string(method_name(method)) + ": skipped group " + s.group_id + ": " + s.reason);
      }
      write_metrics_csv(table, o.stream(), header);
      header = false;
    }
    o.close(out);
    if (!out.empty()) {
      auto m = start_manifest("eval");
      m.add_input("labelled", labelled);
      m.add_input("index", index_dir / "index.json");
      m.settings["ks"] = ks;
      m.settings["methods"] = methods;
      m.settings["weights"] = {w.alpha, w.beta, w.gamma};
      m.settings["micro"] = micro;
      m.outputs["metrics"] = out.string();
      finish_manifest(m, manifest_path_for(out));
    }
  }
};

struct GridSearch {
  fs::path index_dir, labelled, out;
  std::size_t k = 5;
  std::string betas = "1:10", gammas = "1:10";

  void setup(CLI::App& app) {
    auto* sub = app.add_subcommand("grid-search", "Tune the style and text weights (alpha = 1)");
    sub->add_option("--index", index_dir)->required()->check(CLI::ExistingDirectory);
    sub->add_option("--labelled", labelled)->required();
    sub->add_option("--k", k)->capture_default_str();
    sub->add_option("--beta-range", betas, "lo:hi or a,b,c")->capture_default_str();
    sub->add_option("--gamma-range", gammas, "lo:hi or a,b,c")->capture_default_str();
    sub->add_option("--out", out, "CSV output (default stdout)");
    sub->callback([this] { run(); });
  }

  void run() {
    auto b = parse_range(betas);
    auto c = parse_range(gammas);
    auto set = load_labelled_set(labelled);
    auto index = load_index(index_dir);
    auto grid = grid_search(set, index, b, c, k, g.threads);
    char buf[160];
    std::snprintf(buf, sizeof buf, "best beta=%g gamma=%g: recall@%zu %.2f%%, precision@%zu %.2f%%",
                  grid.best.beta, grid.best.gamma, k, grid.best_cell.recall_pct, k,
                  grid.best_cell.precision_pct);
    log(buf);
    Output o(out);
    write_grid_csv(grid, k, o.stream());
    o.close(out);
    if (!out.empty()) {
      auto m = start_manifest("grid-search");
      m.add_input("labelled", labelled);
      m.add_input("index", index_dir / "index.json");
      m.settings["k"] = k;
      m.settings["best"] = {{"alpha", 1.0}, {"beta", grid.best.beta}, {"gamma", grid.best.gamma}};
      m.outputs["grid"] = out.string();
      finish_manifest(m, manifest_path_for(out));
    }
  }
};

// ---------------------------------------------------------------------------
// threshold

struct Threshold {
  fs::path retrievals, series;
  std::size_t points = 0;
  double fallback_q = 0.05;

  void setup(CLI::App& app) {
    auto* sub = app.add_subcommand("threshold", "Knee of the distance distribution of search results");
    sub->add_option("--retrievals", retrievals, "NDJSON from search")->required();
    sub->add_option("--series", series, "Also write the cumulative distribution CSV here");
    sub->add_option("--points", points, "Downsample the series (0 keeps every point)");
    sub->add_option("--fallback-quantile", fallback_q)->capture_default_str();
    sub->callback([this] { run(); });
  }

  void run() {
    auto d = all_distances(read_retrievals(retrievals));
    if (d.empty()) fail(ErrorKind::kValidation, "no hits in " + retrievals.string());
    auto t = choose_threshold(d, fallback_q);
    json j = {{"threshold", t.value}, {"method", t.method}, {"distances", d.size()}};
    std::cout << j.dump() << '\n';
    if (!series.empty()) {
      auto s = cumulative_distribution(d, points ? std::optional<std::size_t>(points) : std::nullopt);
      Output o(series);
      write_series_csv(s, o.stream());
      o.close(series);
      auto m = start_manifest("threshold");
      m.add_input("retrievals", retrievals);
      m.settings["threshold"] = j;
      m.outputs["series"] = series.string();
      finish_manifest(m, manifest_path_for(series));
    }
  }
};

// ---------------------------------------------------------------------------
// analyze / report

struct ListPaths {
  fs::path permissions = fs::path(APPSIM_DEFAULT_CONFIG_DIR) / "dangerous_permissions.txt";
  fs::path adlibs = fs::path(APPSIM_DEFAULT_CONFIG_DIR) / "ad_libraries.txt";

  void add(CLI::App* sub) {
    sub->add_option("--permissions", permissions, "Dangerous permission list")->capture_default_str();
    sub->add_option("--adlibs", adlibs, "Ad/analytics library prefix list")->capture_default_str();
  }
};

struct Analyze {
  fs::path retrievals, corpus, verdicts, out;
  ListPaths lists;
  std::optional<double> threshold;

  void setup(CLI::App& app) {
    auto* sub = app.add_subcommand("analyze", "Score search hits as counterfeit candidates");
    sub->add_option("--retrievals", retrievals, "NDJSON from search")->required();
    sub->add_option("--corpus", corpus)->required();
    lists.add(sub);
    sub->add_option("--verdicts", verdicts, "JSON map app_id -> positive AV engine count");
    sub->add_option("--threshold", threshold, "Drop hits farther than this");
    sub->add_option("--out", out, "Candidate pairs NDJSON")->required();
    sub->callback([this] { run(); });
  }

  void run() {
    auto perms = DangerousPermissionList::load(lists.permissions);
    auto ads = AdLibraryList::load(lists.adlibs);
    auto records = load_corpus(corpus);
    std::unordered_map<std::string, const AppRecord*> by_id;
    for (const auto& r : records) by_id.emplace(r.app_id, &r);
    Verdicts v;
    if (!verdicts.empty()) {
      std::ifstream in(verdicts);
      if (!in) fail(ErrorKind::kIo, "cannot open " + verdicts.string());
      try {
        v = parse_verdicts(json::parse(in));
      } catch (const json::exception& e) {
        fail(ErrorKind::kParse, verdicts.string() + ": " + e.what());
      }
    }
    auto results = read_retrievals(retrievals);
    std::vector<CandidatePair> pairs;
    std::size_t unknown = 0;
    for (const auto& r : results) {
      auto orig = by_id.find(r.query_app_id);
      for (const auto& h : r.hits) {
        if (threshold && h.distance > *threshold) continue;
        auto cand = by_id.find(h.app_id);
        if (orig == by_id.end() || cand == by_id.end()) {
          ++unknown;
          continue;
        }
        CandidatePair p;
        p.original_app_id = r.query_app_id;
        p.candidate_app_id = h.app_id;
        p.fused_distance = h.distance;
        p.permission_difference =
            permission_difference(cand->second->permissions, orig->second->permissions, perms);
        p.adlib_difference = adlib_difference(cand->second->ad_libraries, orig->second->ad_libraries, ads);
        if (auto it = v.find(h.app_id); it != v.end()) p.av_flags = it->second;
        pairs.push_back(std::move(p));
      }
    }
    if (unknown > 0) log("warning: " + std::to_string(unknown) + " hits reference apps missing from the corpus");
    log(std::to_string(pairs.size()) + " candidate pairs");
    ReportContext ctx{perms.digest(), ads.digest()};
    emit_report(pairs, ReportFormat::kNdjson, ctx, out);
    auto m = start_manifest("analyze");
    m.add_input("retrievals", retrievals);
    m.add_input("corpus", corpus);
    if (!verdicts.empty()) m.add_input("verdicts", verdicts);
    m.config_hashes["dangerous_permissions"] = perms.digest();
    m.config_hashes["ad_libraries"] = ads.digest();
    m.settings["list_sizes"] = {{"dangerous_permissions", perms.size()}, {"ad_libraries", ads.size()}};
    m.outputs["candidates"] = out.string();
    finish_manifest(m, manifest_path_for(out));
  }
};

struct Report {
  fs::path candidates, out, series, summary;
  ListPaths lists;
  std::string format = "csv";
  std::vector<int> av_thresholds = {2, 5};
  std::size_t points = 0;

  void setup(CLI::App& app) {
    auto* sub = app.add_subcommand("report", "CSV/NDJSON report, distance series and AV summary");
    sub->add_option("--candidates", candidates, "NDJSON from analyze")->required();
    sub->add_option("--format", format, "csv | ndjson")->capture_default_str();
    sub->add_option("--out", out, "Report path")->required();
    lists.add(sub);
    sub->add_option("--series", series, "Cumulative distance distribution CSV");
    sub->add_option("--points", points, "Downsample the series (0 keeps every point)");
    sub->add_option("--av-thresholds", av_thresholds)->delimiter(',')->capture_default_str();
    sub->add_option("--summary", summary, "Summary JSON (default stderr)");
    sub->callback([this] { run(); });
  }

  void run() {
    auto fmt = parse_report_format(format);
    std::ifstream in(candidates);
    if (!in) fail(ErrorKind::kIo, "cannot open " + candidates.string());
    auto pairs = read_candidates(in, candidates.string());
    ReportContext ctx{DangerousPermissionList::load(lists.permissions).digest(),
                      AdLibraryList::load(lists.adlibs).digest()};
    emit_report(pairs, fmt, ctx, out);
    log("report " + out.string() + " (" + std::to_string(pairs.size()) + " rows)");

    std::unordered_set<std::string> apps;
    std::vector<double> distances;
    for (const auto& p : pairs) {
      apps.insert(p.candidate_app_id);
      distances.push_back(p.fused_distance);
    }
    auto av = av_flag_summary(pairs, {}, av_thresholds);
    json s = {{"pairs", pairs.size()}, {"distinct_candidate_apps", apps.size()}};
    json by = json::object();
    for (const auto& [t, c] : av.by_threshold) by[std::to_string(t)] = {{"pairs", c.pairs}, {"apps", c.apps}};
    s["av_flagged"] = by;
    s["av_unscanned"] = {{"pairs", av.unscanned_pairs}, {"apps", av.unscanned_apps}};
    if (summary.empty()) {
      std::cerr << s.dump(2) << '\n';
    } else {
      Output o(summary);
      o.stream() << s.dump(2) << '\n';
      o.close(summary);
    }
    auto m = start_manifest("report");
    m.add_input("candidates", candidates);
    m.config_hashes["dangerous_permissions"] = ctx.permissions_digest;
    m.config_hashes["ad_libraries"] = ctx.adlibs_digest;
    m.outputs["report"] = out.string();
    if (!distances.empty() && !series.empty()) {
      auto cd = cumulative_distribution(distances, points ? std::optional<std::size_t>(points) : std::nullopt);
      Output o(series);
      write_series_csv(cd, o.stream());
      o.close(series);
      m.outputs["series"] = series.string();
    }
    if (!summary.empty()) m.outputs["summary"] = summary.string();
    m.settings["summary"] = s;
    finish_manifest(m, manifest_path_for(out));
  }
};

int run_cli(int argc, char** argv) {
  g.argv.assign(argv, argv + argc);
  CLI::App app{"appsim: multi-modal app similarity search and counterfeit screening", "appsim"};
  app.config_formatter(std::make_shared<JsonOrTomlConfig>());
  app.set_config("--config", "", "TOML or JSON file setting any flag ([subcommand] sections)");
  app.add_option("--threads", g.threads, "Worker threads")->check(CLI::PositiveNumber)->capture_default_str();
  app.add_flag("--quiet", g.quiet, "No progress output");
  app.set_version_flag("--version", std::string(kToolVersion));
  app.require_subcommand(1);
  app.fallthrough();

  EmbedIcons embed_icons;
  EmbedText embed_text;
  TrainText train_text;
  Hash hash;
  BuildIndex build_index;
  Search search;
  Eval eval;
  GridSearch grid;
  Threshold threshold;
  Analyze analyze;
  Report report;
  embed_icons.setup(app);
  embed_text.setup(app);
  train_text.setup(app);
  hash.setup(app);
  build_index.setup(app);
  search.setup(app);
  eval.setup(app);
  grid.setup(app);
  threshold.setup(app);
  analyze.setup(app);
  report.setup(app);
  attach_env(app);

  if (argc <= 1) {
    std::cerr << app.help();
    return 1;
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << app.help();
    return 1;
  }
  return 0;
}

}  // namespace
}  // namespace appsim::cli

int main(int argc, char** argv) {
  try {
    return appsim::cli::run_cli(argc, argv);
  } catch (const appsim::Error& e) {
    std::cerr << "error [" << appsim::to_string(e.kind()) << "]: " << e.what() << '\n';
    return e.is_validation() ? 1 : 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
}
