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

// Config-file and environment plumbing for the command-line tool.
//
// Precedence: command line, then APPSIM_* environment variables, then the
// --config file, then built-in defaults. CLI11 applies config before the
// environment, so config entries shadowed by a set variable are dropped here.

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <iterator>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

namespace appsim::cli {

inline constexpr const char* kEnvPrefix = "APPSIM_";

// APPSIM_[<SUBCOMMAND>_]<OPTION>, upper-cased with dashes as underscores.
inline std::string env_name(const std::vector<std::string>& parents, const std::string& option) {
  std::string out = kEnvPrefix;
  auto append = [&](const std::string& part) {
    for (char c : part) {
      out += c == '-' || c == '.' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    }
  };
  for (const auto& p : parents) {
    append(p);
    out += '_';
  }
  append(option);
  return out;
}

inline void flatten_json(const nlohmann::json& j, std::vector<std::string>& parents,
                         std::vector<CLI::ConfigItem>& out) {
  for (const auto& [key, value] : j.items()) {
    if (value.is_object()) {
      parents.push_back(key);
      flatten_json(value, parents, out);
      parents.pop_back();
      continue;
    }
    CLI::ConfigItem item;
    item.parents = parents;
    item.name = key;
    auto scalar = [](const nlohmann::json& v) {
      if (v.is_string()) return v.get<std::string>();
      if (v.is_boolean()) return std::string(v.get<bool>() ? "true" : "false");
      return v.dump();
    };
    if (value.is_array()) {
      for (const auto& v : value) item.inputs.push_back(scalar(v));
    } else {
      item.inputs.push_back(scalar(value));
    }
    out.push_back(std::move(item));
  }
}

// Reads JSON when the file starts with '{', TOML otherwise.
class JsonOrTomlConfig : public CLI::ConfigTOML {
 public:
  std::vector<CLI::ConfigItem> from_config(std::istream& input) const override {
    std::string text(std::istreambuf_iterator<char>(input), {});
    auto first = text.find_first_not_of(" \t\r\n");
    std::vector<CLI::ConfigItem> items;
    if (first != std::string::npos && text[first] == '{') {
      nlohmann::json j;
      try {
        j = nlohmann::json::parse(text);
      } catch (const nlohmann::json::exception& e) {
        throw CLI::ParseError(std::string("config: ") + e.what(), CLI::ExitCodes::ConversionError);
      }
      std::vector<std::string> parents;
      flatten_json(j, parents, items);
    } else {
      std::istringstream in(text);
      items = CLI::ConfigTOML::from_config(in);
    }
    std::erase_if(items, [](const CLI::ConfigItem& item) {
      if (item.name == "++" || item.name == "--") return false;
      return std::getenv(env_name(item.parents, item.name).c_str()) != nullptr;
    });
    return items;
  }
};

// Gives every long option of `app` and its subcommands an APPSIM_* variable.
inline void attach_env(CLI::App& app, std::vector<std::string>& parents) {
  for (auto* opt : app.get_options()) {
    if (opt->get_lnames().empty()) continue;
    const auto& name = opt->get_lnames().front();
    if (name == "help" || name == "config" || name == "version") continue;
    opt->envname(env_name(parents, name));
  }
  for (auto* sub : app.get_subcommands({})) {
    parents.push_back(sub->get_name());
    attach_env(*sub, parents);
    parents.pop_back();
  }
}

inline void attach_env(CLI::App& app) {
  std::vector<std::string> parents;
  attach_env(app, parents);
}

}  // namespace appsim::cli
