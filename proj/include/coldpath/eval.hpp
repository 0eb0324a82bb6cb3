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

// Blame selection and evaluation against scenario ground truth.

#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "coldpath/error.hpp"
#include "coldpath/scenario.hpp"
#include "coldpath/scorer.hpp"

namespace coldpath::eval {

struct BlameConfig {
  // Relative cutoff against the best combined score.
  double theta = 0.5;
  // Absolute floor on exclusive init time.
  std::int64_t floor_ns = 10'000'000;
};

struct BlameVerdict {
  std::string scenario_id;
  std::set<std::string> blamed;
  std::string tool_id;

  bool operator==(const BlameVerdict&) const = default;
};

// Declared worst to best; the category outcome is the minimum.
enum class Outcome { miss, partial, success };

inline std::string_view to_string(Outcome o) {
  switch (o) {
    case Outcome::miss: return "miss";
    case Outcome::partial: return "partial";
    case Outcome::success: return "success";
  }
  return "?";
}

struct EvalResult {
  std::string scenario_id;
  std::int64_t tp = 0;
  std::int64_t fp = 0;
  std::int64_t fn = 0;
  Outcome outcome = Outcome::miss;

  bool operator==(const EvalResult&) const = default;
};

struct CorpusMetrics {
  std::int64_t tp = 0;
  std::int64_t fp = 0;
  std::int64_t fn = 0;
  // Absent when the ratio is undefined.
  std::optional<double> precision;
  std::optional<double> recall;
  std::optional<double> f1;

  bool operator==(const CorpusMetrics&) const = default;
};

/// Modules whose combined score is at least theta * best and whose exclusive
/// init time clears the floor.
inline std::set<std::string> select_blamed(std::span<const score::ModuleScore> ranked,
                                           const BlameConfig& cfg = {}) {
  std::set<std::string> out;
  if (ranked.empty()) return out;
  double best = 0.0;
  for (const auto& s : ranked) best = std::max(best, s.combined);
  for (const auto& s : ranked) {
    if (s.combined >= cfg.theta * best && s.init_exclusive_ns >= cfg.floor_ns) out.insert(s.module);
  }
  return out;
}

inline Outcome classify(std::int64_t tp, std::int64_t fp, std::int64_t fn) {
  if (tp == 0) return Outcome::miss;
  if (fp == 0 && fn == 0) return Outcome::success;
  return Outcome::partial;
}

/// Counts only modules named by the ground truth; neutral modules are ignored.
inline EvalResult evaluate_scenario(const BlameVerdict& verdict, const bench::ScenarioMetadata& truth) {
  if (verdict.scenario_id != truth.id) {
    throw ScenarioMismatch("verdict for '" + verdict.scenario_id + "' evaluated against '" + truth.id + "'");
  }
  EvalResult r;
  r.scenario_id = truth.id;
  for (const auto& m : truth.must_blame) {
    if (verdict.blamed.count(m)) {
      ++r.tp;
    } else {
      ++r.fn;
    }
  }
  for (const auto& m : truth.must_not_blame) {
    if (verdict.blamed.count(m)) ++r.fp;
  }
  r.outcome = classify(r.tp, r.fp, r.fn);
  return r;
}

/// Harmonic mean 2pr/(p+r); absent when p + r = 0.
inline std::optional<double> f1_score(double precision, double recall) {
  if (precision + recall <= 0.0) return std::nullopt;
  return 2.0 * precision * recall / (precision + recall);
}

inline CorpusMetrics metrics_from_counts(std::int64_t tp, std::int64_t fp, std::int64_t fn) {
  CorpusMetrics m{tp, fp, fn, std::nullopt, std::nullopt, std::nullopt};
  if (tp + fp > 0) m.precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
  if (tp + fn > 0) m.recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
  if (m.precision && m.recall) m.f1 = f1_score(*m.precision, *m.recall);
  return m;
}

inline CorpusMetrics aggregate_metrics(std::span<const EvalResult> results) {
  std::int64_t tp = 0, fp = 0, fn = 0;
  for (const auto& r : results) {
    tp += r.tp;
    fp += r.fp;
    fn += r.fn;
  }
  return metrics_from_counts(tp, fp, fn);
}

// ---------------------------------------------------------------------------
// Verdict files
// ---------------------------------------------------------------------------

struct VerdictFile {
  std::string tool;
  std::vector<BlameVerdict> verdicts;
};

inline VerdictFile verdicts_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("tool") || !j["tool"].is_string() || !j.contains("verdicts") ||
      !j["verdicts"].is_array()) {
    throw MalformedVerdicts("expected {\"tool\": string, \"verdicts\": [...]}");
  }
  VerdictFile vf;
  vf.tool = j["tool"].get<std::string>();
  std::set<std::string> seen;
  for (const auto& v : j["verdicts"]) {
    if (!v.is_object() || !v.contains("scenario") || !v["scenario"].is_string() || !v.contains("blamed") ||
        !v["blamed"].is_array()) {
      throw MalformedVerdicts(vf.tool + ": verdict entries need \"scenario\" and \"blamed\"");
    }
    BlameVerdict bv;
    bv.scenario_id = v["scenario"].get<std::string>();
    bv.tool_id = vf.tool;
    if (!seen.insert(bv.scenario_id).second) {
      throw MalformedVerdicts(vf.tool + ": duplicate verdict for scenario '" + bv.scenario_id + "'");
    }
    for (const auto& m : v["blamed"]) {
      if (!m.is_string()) throw MalformedVerdicts(vf.tool + ": blamed entries must be strings");
      bv.blamed.insert(m.get<std::string>());
    }
    vf.verdicts.push_back(std::move(bv));
  }
  return vf;
}

inline VerdictFile load_verdicts(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open verdict file " + path.string());
  auto j = nlohmann::json::parse(in, nullptr, false);
  if (j.is_discarded()) throw MalformedVerdicts(path.string() + ": invalid JSON");
  return verdicts_from_json(j);
}

inline nlohmann::ordered_json verdicts_to_json(const VerdictFile& vf) {
  nlohmann::ordered_json j;
  j["tool"] = vf.tool;
  auto arr = nlohmann::ordered_json::array();
  for (const auto& v : vf.verdicts) {
    arr.push_back({{"scenario", v.scenario_id}, {"blamed", std::vector<std::string>(v.blamed.begin(), v.blamed.end())}});
  }
  j["verdicts"] = std::move(arr);
  return j;
}

// ---------------------------------------------------------------------------
// Cross-tool comparison
// ---------------------------------------------------------------------------

struct ToolEvaluation {
  std::string tool;
  // One result per corpus scenario, sorted by scenario id. A scenario the
  // tool gave no verdict for counts as an empty blame set.
  std::vector<EvalResult> results;
  CorpusMetrics metrics;
  // Worst outcome among each category's scenarios; categories absent from
  // the corpus are absent here.
  std::map<bench::Category, Outcome> categories;
};

inline ToolEvaluation evaluate_tool(const VerdictFile& vf, std::span<const bench::ScenarioMetadata> corpus) {
  std::map<std::string, const bench::ScenarioMetadata*> by_id;
  for (const auto& s : corpus) by_id[s.id] = &s;
  std::map<std::string, const BlameVerdict*> verdicts;
  for (const auto& v : vf.verdicts) {
    if (!by_id.count(v.scenario_id)) {
      throw UnknownScenarioId(vf.tool + ": verdict references unknown scenario '" + v.scenario_id + "'");
    }
    verdicts[v.scenario_id] = &v;
  }

  ToolEvaluation te;
  te.tool = vf.tool;
  for (const auto& [id, meta] : by_id) {
    auto it = verdicts.find(id);
    BlameVerdict v = it != verdicts.end() ? *it->second : BlameVerdict{id, {}, vf.tool};
    EvalResult r = evaluate_scenario(v, *meta);
    auto [cat, inserted] = te.categories.try_emplace(meta->category, r.outcome);
    if (!inserted) cat->second = std::min(cat->second, r.outcome);
    te.results.push_back(std::move(r));
  }
  te.metrics = aggregate_metrics(te.results);
  return te;
}

inline std::vector<ToolEvaluation> compare_tools(std::span<const VerdictFile> tools,
                                                 std::span<const bench::ScenarioMetadata> corpus) {
  std::vector<ToolEvaluation> out;
  for (const auto& vf : tools) out.push_back(evaluate_tool(vf, corpus));
  return out;
}

}  // namespace coldpath::eval
