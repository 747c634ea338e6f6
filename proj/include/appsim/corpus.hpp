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

// App records (NDJSON manifests) and labelled similarity groups.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "json.hpp"

#include "appsim/error.hpp"

namespace appsim {

inline constexpr std::size_t kMaxDescriptionChars = 4000;
inline constexpr std::size_t kMinGroupSize = 2;
inline constexpr std::size_t kMaxGroupSize = 20;

struct AppRecord {
  std::string app_id;
  std::string developer_id;
  // Raster image, or an IFTENSR1 feature map (N_l x M_l) in precomputed mode.
  std::string icon_ref;
  // Optional precomputed content vector (IFTENSR1) for precomputed mode.
  std::string content_ref;
  std::string description;
  std::set<std::string> permissions;
  std::set<std::string> ad_libraries;
  std::optional<std::uint64_t> downloads;

  friend bool operator==(const AppRecord&, const AppRecord&) = default;
};

// Cuts `text` after `max_chars` UTF-8 code points.
inline std::string truncate_utf8(const std::string& text, std::size_t max_chars) {
  std::size_t chars = 0;
  for (std::size_t i = 0; i < text.size(); ++i) {
    auto c = static_cast<unsigned char>(text[i]);
    if ((c & 0xC0) != 0x80) {
      if (chars == max_chars) return text.substr(0, i);
      ++chars;
    }
  }
  return text;
}

inline std::size_t utf8_length(const std::string& text) {
  std::size_t chars = 0;
  for (unsigned char c : text) chars += (c & 0xC0) != 0x80;
  return chars;
}

namespace detail {

inline std::set<std::string> string_set(const nlohmann::json& j,
                                        const char* field) {
  std::set<std::string> out;
  if (!j.contains(field) || j[field].is_null()) return out;
  for (const auto& v : j.at(field)) out.insert(v.get<std::string>());
  return out;
}

}  // namespace detail

inline AppRecord app_record_from_json(const nlohmann::json& j) {
  AppRecord r;
  r.app_id = j.at("app_id").get<std::string>();
  if (r.app_id.empty()) fail(ErrorKind::kValidation, "empty app_id");
  r.developer_id = j.value("developer_id", std::string{});
  r.icon_ref = j.value("icon_ref", std::string{});
  r.content_ref = j.value("content_ref", std::string{});
  r.description =
      truncate_utf8(j.value("description", std::string{}), kMaxDescriptionChars);
  r.permissions = detail::string_set(j, "permissions");
  r.ad_libraries = detail::string_set(j, "ad_libraries");
  if (j.contains("downloads") && !j["downloads"].is_null()) {
    if (!j["downloads"].is_number_unsigned() && !j["downloads"].is_number_integer()) {
      fail(ErrorKind::kValidation, "downloads must be an integer");
    }
    auto d = j["downloads"].get<std::int64_t>();
    if (d < 0) fail(ErrorKind::kValidation, "downloads must be non-negative");
    r.downloads = static_cast<std::uint64_t>(d);
  }
  return r;
}

inline nlohmann::json to_json(const AppRecord& r) {
  nlohmann::json j = {{"app_id", r.app_id},
                      {"developer_id", r.developer_id},
                      {"icon_ref", r.icon_ref},
                      {"description", r.description},
                      {"permissions", r.permissions},
                      {"ad_libraries", r.ad_libraries}};
  if (!r.content_ref.empty()) j["content_ref"] = r.content_ref;
  if (r.downloads) j["downloads"] = *r.downloads;
  return j;
}

// One record per line; blank lines are skipped. Relative icon_ref and
// content_ref paths are kept verbatim; see resolve_ref().
inline std::vector<AppRecord> parse_corpus(std::istream& in,
                                           const std::string& origin) {
  std::vector<AppRecord> records;
  std::unordered_set<std::string> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    AppRecord r;
    try {
      r = app_record_from_json(nlohmann::json::parse(line));
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorKind::kParse, origin + ":" + std::to_string(line_no) + ": " + e.what());
    } catch (const Error& e) {
      fail(ErrorKind::kParse, origin + ":" + std::to_string(line_no) + ": " + e.what());
    }
    if (!seen.insert(r.app_id).second) {
      fail(ErrorKind::kValidation, origin + ":" + std::to_string(line_no) +
                                       ": duplicate app_id '" + r.app_id + "'");
    }
    records.push_back(std::move(r));
  }
  return records;
}

inline std::vector<AppRecord> load_corpus(const std::filesystem::path& manifest) {
  std::ifstream in(manifest);
  if (!in) fail(ErrorKind::kIo, "cannot open corpus manifest " + manifest.string());
  return parse_corpus(in, manifest.string());
}

inline void write_corpus(const std::vector<AppRecord>& records,
                         const std::filesystem::path& manifest) {
  std::ofstream out(manifest, std::ios::trunc);
  if (!out) fail(ErrorKind::kIo, "cannot write " + manifest.string());
  for (const auto& r : records) out << to_json(r).dump() << '\n';
  if (!out) fail(ErrorKind::kIo, "write failed for " + manifest.string());
}

// Resolves a reference relative to the directory holding the manifest.
inline std::filesystem::path resolve_ref(const std::filesystem::path& manifest,
                                         const std::string& ref) {
  std::filesystem::path p(ref);
  if (p.is_absolute() || ref.empty()) return p;
  return manifest.parent_path() / p;
}

struct LabelledGroup {
  std::string group_id;
  std::string base_app_id;
  std::vector<std::string> member_app_ids;
};

struct LabelledSet {
  std::vector<LabelledGroup> groups;

  std::size_t total_apps() const {
    std::size_t n = 0;
    for (const auto& g : groups) n += g.member_app_ids.size();
    return n;
  }
};

inline void validate_group(const LabelledGroup& g) {
  const auto& id = g.group_id;
  auto size = g.member_app_ids.size();
  if (size < kMinGroupSize || size > kMaxGroupSize) {
    fail(ErrorKind::kValidation, "group '" + id + "' has " + std::to_string(size) +
                                     " members; allowed range is 2..20");
  }
  std::unordered_set<std::string> members(g.member_app_ids.begin(),
                                           g.member_app_ids.end());
  if (members.size() != size) {
    fail(ErrorKind::kValidation, "group '" + id + "' lists a member twice");
  }
  if (!members.contains(g.base_app_id)) {
    fail(ErrorKind::kValidation, "group '" + id + "': base app '" + g.base_app_id +
                                     "' is not a member");
  }
}

inline LabelledSet parse_labelled_set(const nlohmann::json& j) {
  if (!j.is_array()) fail(ErrorKind::kParse, "labelled set must be a JSON array");
  LabelledSet set;
  for (const auto& item : j) {
    LabelledGroup g;
    try {
      g.group_id = item.at("group_id").is_string()
                       ? item.at("group_id").get<std::string>()
                       : item.at("group_id").dump();
      g.base_app_id = item.at("base_app_id").get<std::string>();
      g.member_app_ids = item.at("member_app_ids").get<std::vector<std::string>>();
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorKind::kParse, std::string("labelled group: ") + e.what());
    }
    validate_group(g);
    set.groups.push_back(std::move(g));
  }
  return set;
}

inline LabelledSet load_labelled_set(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::kIo, "cannot open labelled set " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::kParse, path.string() + ": " + e.what());
  }
  return parse_labelled_set(j);
}

inline nlohmann::json to_json(const LabelledSet& set) {
  auto j = nlohmann::json::array();
  for (const auto& g : set.groups) {
    j.push_back({{"group_id", g.group_id},
                 {"base_app_id", g.base_app_id},
                 {"member_app_ids", g.member_app_ids}});
  }
  return j;
}

}  // namespace appsim
