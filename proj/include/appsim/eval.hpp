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

// Retrieval quality over labelled groups: precision@k, recall@k, the
// per-group query protocol, and the fusion-weight grid search.

#include <algorithm>
#include <cstdio>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include "appsim/corpus.hpp"
#include "appsim/digest.hpp"
#include "appsim/distance.hpp"
#include "appsim/error.hpp"
#include "appsim/index.hpp"
#include "appsim/parallel.hpp"

namespace appsim {

inline std::size_t count_relevant(std::span<const std::string> retrieved,
                                  const std::unordered_set<std::string>& relevant) {
  std::size_t hits = 0;
  for (const auto& id : retrieved) hits += relevant.contains(id);
  return hits;
}

// Percentage of retrieved items that are relevant.
inline double precision_at_k(std::span<const std::string> retrieved,
                             const std::unordered_set<std::string>& relevant) {
  if (retrieved.empty()) fail(ErrorKind::kUsage, "precision@k of an empty retrieval");
  return 100.0 * static_cast<double>(count_relevant(retrieved, relevant)) /
         static_cast<double>(retrieved.size());
}

// Percentage of relevant items that were retrieved.
inline double recall_at_k(std::span<const std::string> retrieved,
                          const std::unordered_set<std::string>& relevant) {
  if (relevant.empty()) fail(ErrorKind::kUsage, "recall@k with no relevant items");
  return 100.0 * static_cast<double>(count_relevant(retrieved, relevant)) /
         static_cast<double>(relevant.size());
}

struct MetricRow {
  std::string method;
  std::size_t k = 0;
  double precision_pct = 0.0;
  double recall_pct = 0.0;
  std::size_t groups = 0;
};

struct SkippedGroup {
  std::string group_id;
  std::string reason;
};

struct MetricsTable {
  std::vector<MetricRow> rows;
  std::size_t corpus_size = 0;
  std::string labelled_digest;
  Weights weights;
  std::vector<SkippedGroup> skipped;

  const MetricRow* find(std::string_view method, std::size_t k) const {
    for (const auto& r : rows) {
      if (r.method == method && r.k == k) return &r;
    }
    return nullptr;
  }
};

inline std::string labelled_digest(const LabelledSet& set) {
  return sha256_hex(to_json(set).dump());
}

struct EvalOptions {
  std::vector<std::size_t> ks = {5, 10, 15, 20};
  Weights weights;
  Method method = Method::kFused;
  // Pools intersections over all groups instead of averaging per group.
  bool micro = false;
  unsigned threads = 1;
};

// Per-group outcome: intersections and retrieved counts at each k.
struct GroupOutcome {
  bool evaluated = false;
  std::string skip_reason;
  std::vector<std::size_t> intersections;
  std::vector<std::size_t> retrieved;
  std::size_t relevant = 0;
};

// Queries the index with each group's base app (the base itself excluded from
// the results). Relevant items are the other members present in the index;
// members missing from the index are dropped before scoring.
inline std::vector<GroupOutcome> run_groups(const LabelledSet& labelled,
                                            const SearchIndex& index,
                                            const EvalOptions& opt) {
  if (opt.ks.empty()) fail(ErrorKind::kUsage, "no k values to evaluate");
  for (auto k : opt.ks) {
    if (k == 0) fail(ErrorKind::kUsage, "k must be at least 1");
  }
  const std::size_t kmax = *std::max_element(opt.ks.begin(), opt.ks.end());
  std::vector<GroupOutcome> out(labelled.groups.size());
  parallel_for(labelled.groups.size(), opt.threads, [&](std::size_t g) {
    const auto& group = labelled.groups[g];
    auto& res = out[g];
    auto base_row = index.row_of(group.base_app_id);
    if (!base_row) {
      res.skip_reason = "base app '" + group.base_app_id + "' not in index";
      return;
    }
    std::unordered_set<std::string> relevant;
    for (const auto& id : group.member_app_ids) {
      if (id != group.base_app_id && index.row_of(id)) relevant.insert(id);
    }
    if (relevant.empty()) {
      res.skip_reason = "no other member of the group is in the index";
      return;
    }
    KnnOptions knn_opt;
    knn_opt.k = kmax;
    knn_opt.weights = opt.weights;
    knn_opt.exclude_app = group.base_app_id;
    RetrievalResult r;
    try {
      r = retrieve(index, index.embedding(*base_row), opt.method, knn_opt);
    } catch (const Error& e) {
      res.skip_reason = e.what();
      return;
    }
    std::vector<std::string> ids;
    ids.reserve(r.hits.size());
    for (const auto& h : r.hits) ids.push_back(h.app_id);
    res.relevant = relevant.size();
    for (auto k : opt.ks) {
      auto n = std::min(k, ids.size());
      res.intersections.push_back(count_relevant(std::span(ids).first(n), relevant));
      res.retrieved.push_back(n);
    }
    res.evaluated = true;
  });
  return out;
}

inline MetricsTable evaluate(const LabelledSet& labelled, const SearchIndex& index,
                             const EvalOptions& opt) {
  auto outcomes = run_groups(labelled, index, opt);
  MetricsTable table;
  table.corpus_size = index.size();
  table.labelled_digest = labelled_digest(labelled);
  table.weights = opt.weights;
  std::size_t evaluated = 0;
  for (std::size_t g = 0; g < outcomes.size(); ++g) {
    if (!outcomes[g].evaluated) {
      table.skipped.push_back({labelled.groups[g].group_id, outcomes[g].skip_reason});
    } else {
      ++evaluated;
    }
  }
  for (std::size_t ki = 0; ki < opt.ks.size(); ++ki) {
    MetricRow row;
    row.method = std::string(method_name(opt.method));
    row.k = opt.ks[ki];
    row.groups = evaluated;
    double p = 0, r = 0;
    std::size_t inter = 0, retrieved = 0, relevant = 0;
    for (const auto& o : outcomes) {
      if (!o.evaluated) continue;
      if (o.retrieved[ki] > 0) {
        p += 100.0 * static_cast<double>(o.intersections[ki]) / static_cast<double>(o.retrieved[ki]);
      }
      r += 100.0 * static_cast<double>(o.intersections[ki]) / static_cast<double>(o.relevant);
      inter += o.intersections[ki];
      retrieved += o.retrieved[ki];
      relevant += o.relevant;
    }
    if (evaluated > 0) {
      if (opt.micro) {
        row.precision_pct = retrieved ? 100.0 * static_cast<double>(inter) / static_cast<double>(retrieved) : 0.0;
        row.recall_pct = 100.0 * static_cast<double>(inter) / static_cast<double>(relevant);
      } else {
        row.precision_pct = p / static_cast<double>(evaluated);
        row.recall_pct = r / static_cast<double>(evaluated);
      }
    }
    table.rows.push_back(row);
  }
  return table;
}

inline void write_metrics_csv(const MetricsTable& table, std::ostream& out, bool header = true) {
  if (header) out << "method,k,precision_pct,recall_pct,groups_evaluated,groups_skipped\n";
  char buf[64];
  for (const auto& r : table.rows) {
    out << r.method << ',' << r.k << ',';
    std::snprintf(buf, sizeof buf, "%.4f,%.4f", r.precision_pct, r.recall_pct);
    out << buf << ',' << r.groups << ',' << table.skipped.size() << '\n';
  }
}

struct GridCell {
  double beta = 0;
  double gamma = 0;
  double precision_pct = 0;
  double recall_pct = 0;
};

struct GridResult {
  Weights best;
  GridCell best_cell;
  std::vector<GridCell> cells;  // beta-major
};

// True when `a` ranks above `b`: higher recall, then higher precision, then
// smaller beta + gamma, then smaller beta.
inline bool grid_better(const GridCell& a, const GridCell& b) {
  if (a.recall_pct != b.recall_pct) return a.recall_pct > b.recall_pct;
  if (a.precision_pct != b.precision_pct) return a.precision_pct > b.precision_pct;
  if (a.beta + a.gamma != b.beta + b.gamma) return a.beta + a.gamma < b.beta + b.gamma;
  return a.beta < b.beta;
}

inline std::vector<double> integer_range(int lo, int hi) {
  std::vector<double> out;
  for (int v = lo; v <= hi; ++v) out.push_back(v);
  return out;
}

// Evaluates every (beta, gamma) pair with alpha = 1 at cutoff k.
inline GridResult grid_search(const LabelledSet& labelled, const SearchIndex& index,
                              std::span<const double> betas, std::span<const double> gammas,
                              std::size_t k, unsigned threads = 1) {
  if (betas.empty() || gammas.empty()) fail(ErrorKind::kUsage, "grid ranges must be non-empty");
  GridResult result;
  for (double beta : betas) {
    for (double gamma : gammas) {
      EvalOptions opt;
      opt.ks = {k};
      opt.weights = Weights{1.0, beta, gamma};
      opt.method = Method::kFused;
      opt.threads = threads;
      auto table = evaluate(labelled, index, opt);
      GridCell cell{beta, gamma, table.rows[0].precision_pct, table.rows[0].recall_pct};
      if (result.cells.empty() || grid_better(cell, result.best_cell)) result.best_cell = cell;
      result.cells.push_back(cell);
    }
  }
  result.best = Weights{1.0, result.best_cell.beta, result.best_cell.gamma};
  return result;
}

inline void write_grid_csv(const GridResult& grid, std::size_t k, std::ostream& out) {
  out << "alpha,beta,gamma,k,precision_pct,recall_pct,best\n";
  char buf[96];
  for (const auto& c : grid.cells) {
    bool best = c.beta == grid.best_cell.beta && c.gamma == grid.best_cell.gamma;
    std::snprintf(buf, sizeof buf, "1,%g,%g,%zu,%.4f,%.4f,%d\n", c.beta, c.gamma, k,
                  c.precision_pct, c.recall_pct, best ? 1 : 0);
    out << buf;
  }
}

}  // namespace appsim
