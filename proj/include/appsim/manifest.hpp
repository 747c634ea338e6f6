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

// Per-run record written beside every artifact: enough to rerun the command
// and check that the inputs are the same ones.

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"

#include "appsim/digest.hpp"
#include "appsim/error.hpp"

namespace appsim {

inline constexpr std::string_view kToolVersion = "0.1.0";

inline std::string utc_timestamp(std::chrono::system_clock::time_point t) {
  auto secs = std::chrono::system_clock::to_time_t(t);
  std::tm tm{};
  gmtime_r(&secs, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

struct RunManifest {
  std::string tool_version{kToolVersion};
  std::string command;
  std::vector<std::string> arguments;
  std::map<std::string, std::string> config_hashes;
  std::map<std::string, std::uint64_t> seeds;
  std::map<std::string, std::string> input_digests;
  std::map<std::string, std::string> outputs;
  nlohmann::json settings = nlohmann::json::object();
  std::string started_at;
  std::string finished_at;

  void add_input(const std::string& label, const std::filesystem::path& path) {
    input_digests[label + ":" + path.string()] = sha256_file(path);
  }

  void add_config(const std::string& label, const std::filesystem::path& path) {
    config_hashes[label] = sha256_file(path);
  }
};

inline nlohmann::json to_json(const RunManifest& m) {
  return {{"tool_version", m.tool_version}, {"command", m.command},
          {"arguments", m.arguments},       {"config_hashes", m.config_hashes},
          {"seeds", m.seeds},               {"input_digests", m.input_digests},
          {"outputs", m.outputs},           {"settings", m.settings},
          {"started_at", m.started_at},     {"finished_at", m.finished_at}};
}

inline RunManifest manifest_from_json(const nlohmann::json& j) {
  RunManifest m;
  try {
    m.tool_version = j.at("tool_version").get<std::string>();
    m.command = j.at("command").get<std::string>();
    m.arguments = j.value("arguments", std::vector<std::string>{});
    m.config_hashes = j.value("config_hashes", std::map<std::string, std::string>{});
    m.seeds = j.value("seeds", std::map<std::string, std::uint64_t>{});
    m.input_digests = j.value("input_digests", std::map<std::string, std::string>{});
    m.outputs = j.value("outputs", std::map<std::string, std::string>{});
    m.settings = j.value("settings", nlohmann::json::object());
    m.started_at = j.value("started_at", "");
    m.finished_at = j.value("finished_at", "");
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::kParse, std::string("bad run manifest: ") + e.what());
  }
  return m;
}

// `<artifact>.manifest.json`, or `<dir>/manifest.json` for directory outputs.
inline std::filesystem::path manifest_path_for(const std::filesystem::path& artifact) {
  if (std::filesystem::is_directory(artifact)) return artifact / "manifest.json";
  auto p = artifact;
  p += ".manifest.json";
  return p;
}

inline void write_manifest(const RunManifest& m, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::kIo, "cannot write " + path.string());
  out << to_json(m).dump(2) << '\n';
}

}  // namespace appsim
