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

// Candidate scoring: dangerous-permission and ad-library differences, AV flag
// summaries, cumulative distance series, and report emission.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "json.hpp"

#include "appsim/digest.hpp"
#include "appsim/error.hpp"

namespace appsim {

// A line-oriented list file: blank lines and '#' comments are ignored.
class ConfigList {
 public:
  ConfigList() = default;
  explicit ConfigList(std::vector<std::string> entries, std::string digest = {})
      : entries_(std::move(entries)), digest_(std::move(digest)) {
    std::sort(entries_.begin(), entries_.end());
    entries_.erase(std::unique(entries_.begin(), entries_.end()), entries_.end());
    if (digest_.empty()) {
      std::string joined;
      for (const auto& e : entries_) joined += e + "\n";
      digest_ = sha256_hex(joined);
    }
  }

  static ConfigList parse(std::string_view text, std::string digest = {}) {
    std::vector<std::string> entries;
    std::istringstream in{std::string(text)};
    std::string line;
    while (std::getline(in, line)) {
      auto b = line.find_first_not_of(" \t\r");
      if (b == std::string::npos || line[b] == '#') continue;
      auto e = line.find_last_not_of(" \t\r");
      entries.push_back(line.substr(b, e - b + 1));
    }
    return ConfigList(std::move(entries), std::move(digest));
  }

  static ConfigList load(const std::filesystem::path& path) {
    auto bytes = read_text(path);
    return parse(bytes, sha256_hex(bytes));
  }

  std::size_t size() const { return entries_.size(); }
  const std::vector<std::string>& entries() const { return entries_; }
  bool contains(const std::string& s) const {
    return std::binary_search(entries_.begin(), entries_.end(), s);
  }
  // SHA-256 of the file contents (or of the sorted entries when built in memory).
  const std::string& digest() const { return digest_; }

 private:
  static std::string read_text(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorKind::kIo, "cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
  }

  std::vector<std::string> entries_;
  std::string digest_;
};

using DangerousPermissionList = ConfigList;
using AdLibraryList = ConfigList;

inline constexpr std::size_t kDefaultDangerousPermissions = 26;
inline constexpr std::size_t kDefaultAdLibraries = 124;

// |L ∩ candidate \ original| − |L ∩ original \ candidate|
inline int permission_difference(const std::set<std::string>& candidate,
                                 const std::set<std::string>& original,
                                 const DangerousPermissionList& dangerous) {
  int diff = 0;
  for (const auto& p : candidate) {
    if (dangerous.contains(p) && !original.contains(p)) ++diff;
  }
  for (const auto& p : original) {
    if (dangerous.contains(p) && !candidate.contains(p)) --diff;
  }
  return diff;
}

// `lib` belongs to list entry `prefix` when equal to it or nested under it.
inline bool package_matches(std::string_view lib, std::string_view prefix) {
  if (prefix.empty() || !lib.starts_with(prefix)) return false;
  if (lib.size() == prefix.size() || prefix.back() == '.') return true;
  return lib[prefix.size()] == '.';
}

// Indices of the list entries matched by any of `libs`.
inline std::vector<std::size_t> matched_entries(const std::set<std::string>& libs,
                                                const AdLibraryList& list) {
  std::vector<std::size_t> out;
  const auto& entries = list.entries();
  for (std::size_t i = 0; i < entries.size(); ++i) {
    for (const auto& lib : libs) {
      if (package_matches(lib, entries[i])) {
        out.push_back(i);
        break;
      }
    }
  }
  return out;
}

// Same construction as permission_difference, counted per list entry.
inline int adlib_difference(const std::set<std::string>& candidate,
                            const std::set<std::string>& original,
                            const AdLibraryList& adlibs) {
  auto c = matched_entries(candidate, adlibs);
  auto o = matched_entries(original, adlibs);
  std::vector<std::size_t> only_c, only_o;
  std::set_difference(c.begin(), c.end(), o.begin(), o.end(), std::back_inserter(only_c));
  std::set_difference(o.begin(), o.end(), c.begin(), c.end(), std::back_inserter(only_o));
  return static_cast<int>(only_c.size()) - static_cast<int>(only_o.size());
}

struct CandidatePair {
  std::string original_app_id;
  std::string candidate_app_id;
  double fused_distance = 0.0;
  int permission_difference = 0;
  int adlib_difference = 0;
  std::optional<int> av_flags;

  friend bool operator==(const CandidatePair&, const CandidatePair&) = default;
};

inline bool report_order(const CandidatePair& a, const CandidatePair& b) {
  if (a.original_app_id != b.original_app_id) return a.original_app_id < b.original_app_id;
  if (a.fused_distance != b.fused_distance) return a.fused_distance < b.fused_distance;
  return a.candidate_app_id < b.candidate_app_id;
}

using Verdicts = std::unordered_map<std::string, int>;

inline Verdicts parse_verdicts(const nlohmann::json& j) {
  if (!j.is_object()) fail(ErrorKind::kParse, "verdicts must be a JSON object of app_id -> count");
  Verdicts out;
  for (const auto& [id, v] : j.items()) {
    if (!v.is_number_integer()) fail(ErrorKind::kParse, "verdict for '" + id + "' is not an integer");
    out[id] = v.get<int>();
  }
  return out;
}

struct FlagCount {
  std::size_t pairs = 0;
  std::size_t apps = 0;  // distinct candidate apps
};

struct AvFlagSummary {
  std::map<int, FlagCount> by_threshold;
  std::size_t unscanned_pairs = 0;
  std::size_t unscanned_apps = 0;
};

// A candidate's flag count comes from `verdicts` when present there, else from
// the pair itself; with neither it is unscanned.
inline AvFlagSummary av_flag_summary(std::span<const CandidatePair> pairs, const Verdicts& verdicts,
                                     std::span<const int> thresholds) {
  for (int t : thresholds) {
    if (t <= 0) fail(ErrorKind::kValidation, "AV thresholds must be positive");
  }
  AvFlagSummary s;
  std::map<int, std::set<std::string>> apps;
  std::set<std::string> unscanned;
  for (int t : thresholds) s.by_threshold[t];
  for (const auto& p : pairs) {
    std::optional<int> flags = p.av_flags;
    if (auto it = verdicts.find(p.candidate_app_id); it != verdicts.end()) flags = it->second;
    if (!flags) {
      ++s.unscanned_pairs;
      unscanned.insert(p.candidate_app_id);
      continue;
    }
    for (int t : thresholds) {
      if (*flags >= t) {
        ++s.by_threshold[t].pairs;
        apps[t].insert(p.candidate_app_id);
      }
    }
  }
  for (auto& [t, c] : s.by_threshold) c.apps = apps[t].size();
  s.unscanned_apps = unscanned.size();
  return s;
}

// Sorted distinct values with running counts. With `points`, keeps that many
// evenly spaced entries of the full series (always including the last).
inline std::vector<std::pair<double, std::size_t>> cumulative_distribution(
    std::span<const double> values, std::optional<std::size_t> points = std::nullopt) {
  if (values.empty()) fail(ErrorKind::kUsage, "cumulative distribution of no values");
  std::vector<double> v(values.begin(), values.end());
  std::sort(v.begin(), v.end());
  std::vector<std::pair<double, std::size_t>> series;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!series.empty() && series.back().first == v[i]) {
      series.back().second = i + 1;
    } else {
      series.emplace_back(v[i], i + 1);
    }
  }
  if (!points || *points == 0 || *points >= series.size()) return series;
  std::vector<std::pair<double, std::size_t>> out;
  const std::size_t m = series.size();
  const std::size_t p = *points;
  if (p == 1) return {series.back()};
  for (std::size_t i = 0; i < p; ++i) {
    auto idx = static_cast<std::size_t>(
        std::llround(static_cast<double>(i) * static_cast<double>(m - 1) / static_cast<double>(p - 1)));
    if (out.empty() || out.back() != series[idx]) out.push_back(series[idx]);
  }
  return out;
}

inline void write_series_csv(std::span<const std::pair<double, std::size_t>> series,
                             std::ostream& out) {
  out << "distance,cumulative_count\n";
  char buf[64];
  for (const auto& [x, c] : series) {
    std::snprintf(buf, sizeof buf, "%.17g,%zu\n", x, c);
    out << buf;
  }
}

inline nlohmann::json to_json(const CandidatePair& p) {
  nlohmann::json j = {{"original_app_id", p.original_app_id},
                      {"candidate_app_id", p.candidate_app_id},
                      {"fused_distance", p.fused_distance},
                      {"permission_difference", p.permission_difference},
                      {"adlib_difference", p.adlib_difference}};
  j["av_flags"] = p.av_flags ? nlohmann::json(*p.av_flags) : nlohmann::json(nullptr);
  return j;
}

inline CandidatePair candidate_from_json(const nlohmann::json& j) {
  try {
    CandidatePair p;
    p.original_app_id = j.at("original_app_id").get<std::string>();
    p.candidate_app_id = j.at("candidate_app_id").get<std::string>();
    p.fused_distance = j.at("fused_distance").get<double>();
    p.permission_difference = j.at("permission_difference").get<int>();
    p.adlib_difference = j.at("adlib_difference").get<int>();
    if (j.contains("av_flags") && !j["av_flags"].is_null()) p.av_flags = j["av_flags"].get<int>();
    return p;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::kParse, std::string("bad candidate pair: ") + e.what());
  }
}

inline std::vector<CandidatePair> read_candidates(std::istream& in, const std::string& origin) {
  std::vector<CandidatePair> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorKind::kParse, origin + ":" + std::to_string(n) + ": " + e.what());
    }
    out.push_back(candidate_from_json(j));
  }
  return out;
}

enum class ReportFormat { kCsv, kNdjson };

inline ReportFormat parse_report_format(std::string_view s) {
  if (s == "csv") return ReportFormat::kCsv;
  if (s == "ndjson") return ReportFormat::kNdjson;
  fail(ErrorKind::kUsage, "unknown report format '" + std::string(s) + "'");
}

inline constexpr std::string_view kReportVersion = "appsim-candidates-v1";
inline constexpr std::string_view kReportColumns =
    "original_app_id,candidate_app_id,fused_distance,permission_difference,adlib_difference,av_flags";

struct ReportContext {
  std::string permissions_digest;
  std::string adlibs_digest;
};

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

// Rows are written in report order regardless of input order. CSV carries the
// version and list digests as leading '#' lines.
inline void emit_report(std::vector<CandidatePair> pairs, ReportFormat format,
                        const ReportContext& ctx, std::ostream& out) {
  std::stable_sort(pairs.begin(), pairs.end(), report_order);
  if (format == ReportFormat::kNdjson) {
    for (const auto& p : pairs) out << to_json(p).dump() << '\n';
    return;
  }
  out << "# " << kReportVersion << '\n'
      << "# dangerous_permissions_sha256=" << ctx.permissions_digest << '\n'
      << "# ad_libraries_sha256=" << ctx.adlibs_digest << '\n'
      << kReportColumns << '\n';
  char buf[64];
  for (const auto& p : pairs) {
    std::snprintf(buf, sizeof buf, "%.17g", p.fused_distance);
    out << csv_field(p.original_app_id) << ',' << csv_field(p.candidate_app_id) << ',' << buf
        << ',' << p.permission_difference << ',' << p.adlib_difference << ',';
    if (p.av_flags) out << *p.av_flags;
    out << '\n';
  }
}

inline void emit_report(std::vector<CandidatePair> pairs, ReportFormat format,
                        const ReportContext& ctx, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::kIo, "cannot write " + path.string());
  emit_report(std::move(pairs), format, ctx, out);
  if (!out) fail(ErrorKind::kIo, "write failed for " + path.string());
}

}  // namespace appsim
