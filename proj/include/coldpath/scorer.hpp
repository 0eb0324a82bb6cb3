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

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "coldpath/cct.hpp"
#include "coldpath/error.hpp"

namespace coldpath::score {

enum class TimeBasis { exclusive, inclusive };

inline std::string_view to_string(TimeBasis b) {
  return b == TimeBasis::exclusive ? "exclusive" : "inclusive";
}

// Recorded in report metadata so a combined score can be interpreted.
inline constexpr std::string_view kNormalization =
    "latency=init/max_init, usage=1-usage/max_usage (rarity)";

struct Weights {
  double latency = 0.8;
  double usage = 0.2;

  bool operator==(const Weights&) const = default;
};

inline void check_weights(const Weights& w) {
  if (!(w.latency >= 0.0) || !(w.usage >= 0.0)) {
    throw InvalidWeights("weights must be non-negative");
  }
  if (std::abs(w.latency + w.usage - 1.0) > 1e-9) {
    throw InvalidWeights("weights must sum to 1");
  }
}

struct ScoreConfig {
  Weights weights;
  TimeBasis basis = TimeBasis::exclusive;
};

struct ModuleInput {
  std::int64_t init_ns = 0;
  std::int64_t usage_count = 0;
};

struct ModuleScore {
  std::string module;
  std::int64_t init_exclusive_ns = 0;
  std::int64_t init_inclusive_ns = 0;
  std::int64_t usage_count = 0;
  double u_score = 0.0;
  double combined = 0.0;
  int rank = 0;

  bool operator==(const ModuleScore&) const = default;

  std::int64_t init_ns(TimeBasis b) const {
    return b == TimeBasis::exclusive ? init_exclusive_ns : init_inclusive_ns;
  }
};

/// Usage-normalized inefficiency: initialization time per observed use.
inline double u_score(std::int64_t init_ns, std::int64_t usage_count) {
  return static_cast<double>(init_ns) /
         static_cast<double>(std::max<std::int64_t>(1, usage_count));
}

/// Weighted blend of max-normalized latency and usage rarity, in [0, 1].
inline std::vector<double> combined_score(std::span<const ModuleInput> modules,
                                          const Weights& w = {}) {
  if (modules.empty()) throw EmptyInput("combined_score needs at least one module");
  check_weights(w);
  std::int64_t max_init = 0;
  std::int64_t max_usage = 0;
  for (const auto& m : modules) {
    max_init = std::max(max_init, m.init_ns);
    max_usage = std::max(max_usage, m.usage_count);
  }
  std::vector<double> out;
  out.reserve(modules.size());
  for (const auto& m : modules) {
    double latency = max_init > 0 ? static_cast<double>(m.init_ns) / static_cast<double>(max_init) : 0.0;
    double rarity = max_usage > 0
                        ? 1.0 - static_cast<double>(m.usage_count) / static_cast<double>(max_usage)
                        : 1.0;
    out.push_back(std::clamp(w.latency * latency + w.usage * rarity, 0.0, 1.0));
  }
  return out;
}

/// Sorts by combined score descending, then exclusive init descending, then
/// module name; assigns ranks 1..N.
inline std::vector<ModuleScore> rank_modules(std::vector<ModuleScore> scores) {
  std::sort(scores.begin(), scores.end(), [](const ModuleScore& a, const ModuleScore& b) {
    if (a.combined != b.combined) return a.combined > b.combined;
    if (a.init_exclusive_ns != b.init_exclusive_ns) return a.init_exclusive_ns > b.init_exclusive_ns;
    return a.module < b.module;
  });
  for (std::size_t i = 0; i < scores.size(); ++i) scores[i].rank = static_cast<int>(i + 1);
  return scores;
}

/// Scores and ranks every module in the annotated tree. Returns an empty list
/// for a tree without imports.
inline std::vector<ModuleScore> score_modules(const cct::AnnotatedCct& cct,
                                              const ScoreConfig& cfg = {}) {
  auto totals = cct::module_totals(cct.root);
  if (totals.empty()) return {};
  std::vector<ModuleScore> scores;
  std::vector<ModuleInput> inputs;
  for (const auto& [name, t] : totals) {
    ModuleScore s;
    s.module = name;
    s.init_exclusive_ns = t.exclusive_ns;
    s.init_inclusive_ns = t.inclusive_ns;
    s.usage_count = cct.usage.count(name);
    s.u_score = u_score(s.init_ns(cfg.basis), s.usage_count);
    inputs.push_back(ModuleInput{s.init_ns(cfg.basis), s.usage_count});
    scores.push_back(std::move(s));
  }
  auto combined = combined_score(inputs, cfg.weights);
  for (std::size_t i = 0; i < scores.size(); ++i) scores[i].combined = combined[i];
  return rank_modules(std::move(scores));
}

}  // namespace coldpath::score
