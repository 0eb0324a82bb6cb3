/*
 * Copyright 2026 The coldpath Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// Benchmark scenario metadata (scenario.json) and corpus discovery.

#pragma once

#include <algorithm>
#include <array>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "coldpath/error.hpp"

namespace coldpath::bench {

enum class Category { B1 = 1, B2, B3, B4, B5, B6, B7, B8 };

inline constexpr std::array<Category, 8> kAllCategories = {
    Category::B1, Category::B2, Category::B3, Category::B4,
    Category::B5, Category::B6, Category::B7, Category::B8};

inline std::string to_string(Category c) { return "B" + std::to_string(static_cast<int>(c)); }

inline std::string_view category_title(Category c) {
  switch (c) {
    case Category::B1: return "Import-Graph Indirection";
    case Category::B2: return "Transitive Dependency Dominance";
    case Category::B3: return "Import-Time Side Effects";
    case Category::B4: return "Deferred First-Use Initialization";
    case Category::B5: return "Loader and Packaging Overheads";
    case Category::B6: return "Cross-Language Boundary";
    case Category::B7: return "Framework Discovery Scan";
    case Category::B8: return "Resource Loading Policy";
  }
  return "?";
}

inline std::optional<Category> category_from_string(std::string_view s) {
  for (auto c : kAllCategories) {
    if (to_string(c) == s) return c;
  }
  return std::nullopt;
}

enum class Layer { design, packaging, runtime, environment };
enum class ScenarioPhase { import, first_invocation, per_invocation };
enum class Variant { simulated, native };

inline std::string_view to_string(Layer l) {
  switch (l) {
    case Layer::design: return "design";
    case Layer::packaging: return "packaging";
    case Layer::runtime: return "runtime";
    case Layer::environment: return "environment";
  }
  return "?";
}

inline std::string_view to_string(ScenarioPhase p) {
  switch (p) {
    case ScenarioPhase::import: return "import";
    case ScenarioPhase::first_invocation: return "first_invocation";
    case ScenarioPhase::per_invocation: return "per_invocation";
  }
  return "?";
}

inline std::string_view to_string(Variant v) { return v == Variant::simulated ? "simulated" : "native"; }

struct ScenarioMetadata {
  std::string id;
  Category category = Category::B1;
  Layer layer = Layer::design;
  ScenarioPhase phase = ScenarioPhase::import;
  std::vector<std::string> must_blame;
  std::vector<std::string> must_not_blame;
  nlohmann::json params = nlohmann::json::object();
  Variant variant = Variant::simulated;
  // Taxonomy codes: A1..A6 (anti-patterns), R1..R6 (refactorings),
  // L1..L5 (localization challenges).
  std::vector<std::string> tags;
  // Directory holding scenario.json; empty for in-memory metadata.
  std::filesystem::path dir;

  /// Runner entry locator (`pkg.mod:handler`); `params.entry` or the
  /// corpus default `driver:handler`.
  std::string entry() const {
    auto it = params.find("entry");
    if (it != params.end() && it->is_string()) return it->get<std::string>();
    return "driver:handler";
  }
};

inline bool is_taxonomy_tag(std::string_view tag) {
  if (tag.size() != 2) return false;
  int n = tag[1] - '0';
  switch (tag[0]) {
    case 'A': return n >= 1 && n <= 6;
    case 'R': return n >= 1 && n <= 6;
    case 'L': return n >= 1 && n <= 5;
    default: return false;
  }
}

namespace detail {

template <class Enum, std::size_t N>
Enum parse_enum(const nlohmann::json& j, const char* key, const std::array<Enum, N>& values) {
  const auto& v = j.at(key);
  if (!v.is_string()) throw MetadataInvalid(std::string("'") + key + "' must be a string");
  for (auto e : values) {
    if (to_string(e) == v.get<std::string>()) return e;
  }
  throw MetadataInvalid(std::string("bad value for '") + key + "': " + v.get<std::string>());
}

inline std::vector<std::string> parse_names(const nlohmann::json& j, const char* key) {
  const auto& v = j.at(key);
  if (!v.is_array()) throw MetadataInvalid(std::string("'") + key + "' must be an array");
  std::vector<std::string> out;
  for (const auto& e : v) {
    if (!e.is_string()) throw MetadataInvalid(std::string("'") + key + "' entries must be strings");
    out.push_back(e.get<std::string>());
  }
  std::sort(out.begin(), out.end());
  if (std::adjacent_find(out.begin(), out.end()) != out.end()) {
    throw MetadataInvalid(std::string("duplicate entry in '") + key + "'");
  }
  return out;
}

inline const std::array<const char*, 9> kMetadataFields = {
    "id", "category", "layer", "phase", "must_blame", "must_not_blame", "params", "variant", "tags"};

}  // namespace detail

/// Validates and converts a scenario.json object. Throws MetadataInvalid.
inline ScenarioMetadata scenario_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw MetadataInvalid("scenario metadata must be a JSON object");
  for (const char* f : detail::kMetadataFields) {
    if (!j.contains(f)) throw MetadataInvalid(std::string("missing field '") + f + "'");
  }
  for (const auto& [key, value] : j.items()) {
    if (std::find_if(detail::kMetadataFields.begin(), detail::kMetadataFields.end(),
                     [&](const char* f) { return key == f; }) == detail::kMetadataFields.end()) {
      throw MetadataInvalid("unknown field '" + key + "'");
    }
  }

  ScenarioMetadata m;
  if (!j["id"].is_string() || j["id"].get<std::string>().empty()) {
    throw MetadataInvalid("'id' must be a non-empty string");
  }
  m.id = j["id"].get<std::string>();
  m.category = detail::parse_enum(j, "category", kAllCategories);
  m.layer = detail::parse_enum(
      j, "layer",
      std::array{Layer::design, Layer::packaging, Layer::runtime, Layer::environment});
  m.phase = detail::parse_enum(j, "phase",
                               std::array{ScenarioPhase::import, ScenarioPhase::first_invocation,
                                          ScenarioPhase::per_invocation});
  m.variant = detail::parse_enum(j, "variant", std::array{Variant::simulated, Variant::native});
  m.must_blame = detail::parse_names(j, "must_blame");
  m.must_not_blame = detail::parse_names(j, "must_not_blame");
  if (m.must_blame.empty()) throw MetadataInvalid("'must_blame' must be non-empty");
  std::vector<std::string> overlap;
  std::set_intersection(m.must_blame.begin(), m.must_blame.end(), m.must_not_blame.begin(),
                        m.must_not_blame.end(), std::back_inserter(overlap));
  if (!overlap.empty()) {
    throw MetadataInvalid("must_blame and must_not_blame overlap on '" + overlap.front() + "'");
  }
  if (!j["params"].is_object()) throw MetadataInvalid("'params' must be an object");
  m.params = j["params"];
  m.tags = detail::parse_names(j, "tags");
  for (const auto& t : m.tags) {
    if (!is_taxonomy_tag(t)) throw MetadataInvalid("unknown taxonomy tag '" + t + "'");
  }
  return m;
}

inline nlohmann::ordered_json scenario_to_json(const ScenarioMetadata& m) {
  nlohmann::ordered_json j;
  j["id"] = m.id;
  j["category"] = to_string(m.category);
  j["layer"] = to_string(m.layer);
  j["phase"] = to_string(m.phase);
  j["must_blame"] = m.must_blame;
  j["must_not_blame"] = m.must_not_blame;
  j["params"] = m.params;
  j["variant"] = to_string(m.variant);
  j["tags"] = m.tags;
  return j;
}

inline ScenarioMetadata load_scenario(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw IoError("cannot open " + file.string());
  auto j = nlohmann::json::parse(in, nullptr, false);
  if (j.is_discarded()) throw MetadataInvalid(file.string() + ": invalid JSON");
  try {
    auto m = scenario_from_json(j);
    m.dir = file.parent_path();
    return m;
  } catch (const MetadataInvalid& e) {
    throw MetadataInvalid(file.string() + ": " + e.what());
  }
}

struct DiscoveryProblem {
  std::filesystem::path file;
  std::string reason;
};

struct Discovery {
  std::vector<ScenarioMetadata> scenarios;
  std::vector<DiscoveryProblem> problems;
};

/// Finds every scenario.json below `corpus_dir`. Invalid files are reported
/// in `problems`; MetadataInvalid is thrown only when every file is invalid.
inline Discovery discover_scenarios(const std::filesystem::path& corpus_dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  if (!fs::is_directory(corpus_dir, ec)) {
    throw IoError("corpus directory not found: " + corpus_dir.string());
  }
  std::vector<fs::path> files;
  for (auto it = fs::recursive_directory_iterator(corpus_dir, ec);
       it != fs::recursive_directory_iterator(); it.increment(ec)) {
    if (ec) throw IoError("cannot walk " + corpus_dir.string() + ": " + ec.message());
    if (it->is_regular_file() && it->path().filename() == "scenario.json") files.push_back(it->path());
  }
  std::sort(files.begin(), files.end());

  Discovery out;
  std::set<std::string> ids;
  for (const auto& f : files) {
    try {
      auto m = load_scenario(f);
      if (!ids.insert(m.id).second) {
        out.problems.push_back({f, "duplicate scenario id '" + m.id + "'"});
        continue;
      }
      out.scenarios.push_back(std::move(m));
    } catch (const MetadataInvalid& e) {
      out.problems.push_back({f, e.what()});
    }
  }
  if (!files.empty() && out.scenarios.empty()) {
    std::string msg = "no valid scenario in " + corpus_dir.string() + ":";
    for (const auto& p : out.problems) msg += "\n  " + p.reason;
    throw MetadataInvalid(msg);
  }
  std::sort(out.scenarios.begin(), out.scenarios.end(),
            [](const ScenarioMetadata& a, const ScenarioMetadata& b) { return a.id < b.id; });
  return out;
}

}  // namespace coldpath::bench
