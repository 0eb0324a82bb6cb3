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

// Cross-tool comparison table and the pairwise statistics printed with it.
//
// Tools are compared on per-scenario localization errors (fp + fn). Run
// configurations (bench manifests) are compared on per-scenario grand-median
// cold-start latency. All p-values of one comparison document form a single
// Holm family.

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "coldpath/bench.hpp"
#include "coldpath/eval.hpp"
#include "coldpath/report.hpp"
#include "coldpath/stats.hpp"

namespace coldpath::compare {

struct PairwiseTest {
  std::string measure;  // "errors" or "cold_start_ns"
  std::string a;
  std::string b;
  std::size_t pairs = 0;
  // Absent when every paired difference is zero.
  std::optional<stats::TestResult> wilcoxon;
  stats::TestResult mann_whitney;
  stats::EffectSize delta;
  std::optional<bool> wilcoxon_reject;
  bool mann_whitney_reject = false;
};

struct Comparison {
  std::vector<eval::ToolEvaluation> tools;
  std::vector<PairwiseTest> tests;
  double alpha = 0.05;
  std::uint64_t seed = 0;
  std::size_t bootstrap_reps = 2000;
};

namespace detail {

inline PairwiseTest pairwise(std::string measure, std::string a, std::string b, const std::vector<double>& xa,
                             const std::vector<double>& xb, std::size_t reps, std::uint64_t seed) {
  PairwiseTest t;
  t.measure = std::move(measure);
  t.a = std::move(a);
  t.b = std::move(b);
  t.pairs = xa.size();
  std::vector<double> diffs(xa.size());
  for (std::size_t i = 0; i < xa.size(); ++i) diffs[i] = xa[i] - xb[i];
  try {
    t.wilcoxon = stats::wilcoxon_signed_rank(diffs);
  } catch (const AllZeroDiffs&) {
  }
  t.mann_whitney = stats::mann_whitney_u(xa, xb);
  t.delta = stats::cliffs_delta(xa, xb, reps, seed);
  return t;
}

inline void apply_holm(std::vector<PairwiseTest>& tests, double alpha) {
  std::vector<double> p;
  for (const auto& t : tests) {
    if (t.wilcoxon) p.push_back(t.wilcoxon->p_value);
    p.push_back(t.mann_whitney.p_value);
  }
  auto flags = stats::holm_bonferroni(p, alpha);
  std::size_t k = 0;
  for (auto& t : tests) {
    if (t.wilcoxon) t.wilcoxon_reject = flags[k++];
    t.mann_whitney_reject = flags[k++];
  }
}

}  // namespace detail

/// Evaluates every tool and runs the pairwise tests. `manifests` pairs a label
/// with the per-scenario results of one bench run.
inline Comparison build_comparison(std::span<const eval::VerdictFile> verdicts,
                                   std::span<const bench::ScenarioMetadata> corpus,
                                   const std::vector<std::pair<std::string, std::vector<bench::RunResult>>>& manifests = {},
                                   std::uint64_t seed = 0, double alpha = 0.05, std::size_t bootstrap_reps = 2000) {
  Comparison c;
  c.alpha = alpha;
  c.seed = seed;
  c.bootstrap_reps = bootstrap_reps;
  c.tools = eval::compare_tools(verdicts, corpus);

  if (!corpus.empty()) {
    for (std::size_t i = 0; i < c.tools.size(); ++i) {
      for (std::size_t j = i + 1; j < c.tools.size(); ++j) {
        std::vector<double> ea, eb;
        for (std::size_t s = 0; s < c.tools[i].results.size(); ++s) {
          ea.push_back(static_cast<double>(c.tools[i].results[s].fp + c.tools[i].results[s].fn));
          eb.push_back(static_cast<double>(c.tools[j].results[s].fp + c.tools[j].results[s].fn));
        }
        c.tests.push_back(detail::pairwise("errors", c.tools[i].tool, c.tools[j].tool, ea, eb, bootstrap_reps, seed));
      }
    }
  }

  for (std::size_t i = 0; i < manifests.size(); ++i) {
    for (std::size_t j = i + 1; j < manifests.size(); ++j) {
      std::map<std::string, double> mb;
      for (const auto& r : manifests[j].second) mb[r.scenario_id] = r.grand_median_ns;
      std::vector<double> la, lb;
      for (const auto& r : manifests[i].second) {
        auto it = mb.find(r.scenario_id);
        if (it == mb.end()) continue;
        la.push_back(r.grand_median_ns);
        lb.push_back(it->second);
      }
      if (la.empty()) continue;
      c.tests.push_back(
          detail::pairwise("cold_start_ns", manifests[i].first, manifests[j].first, la, lb, bootstrap_reps, seed));
    }
  }
  detail::apply_holm(c.tests, alpha);
  return c;
}

// ---------------------------------------------------------------------------
// Rendering
// ---------------------------------------------------------------------------

namespace detail {

inline std::string mark(eval::Outcome o) {
  switch (o) {
    case eval::Outcome::success: return "✓";
    case eval::Outcome::partial: return "◐";
    case eval::Outcome::miss: return "×";
  }
  return "?";
}

inline std::string pct(const std::optional<double>& v) {
  return v ? report::detail::fixed(*v * 100.0, 1) + "%" : std::string("n/a");
}

inline nlohmann::ordered_json opt_json(const std::optional<double>& v) {
  return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
}

inline nlohmann::ordered_json test_json(const stats::TestResult& t) {
  return {{"statistic", t.statistic}, {"p_value", t.p_value}, {"method", stats::to_string(t.method)},
          {"n", t.n}, {"m", t.m}};
}

}  // namespace detail

inline nlohmann::ordered_json comparison_to_json(const Comparison& c) {
  using oj = nlohmann::ordered_json;
  oj j;
  j["schema"] = 1;
  j["kind"] = "coldpath-comparison";
  j["alpha"] = c.alpha;
  j["seed"] = c.seed;
  j["bootstrap_reps"] = c.bootstrap_reps;
  oj tools = oj::array();
  for (const auto& t : c.tools) {
    oj e;
    e["tool"] = t.tool;
    e["tp"] = t.metrics.tp;
    e["fp"] = t.metrics.fp;
    e["fn"] = t.metrics.fn;
    e["precision"] = detail::opt_json(t.metrics.precision);
    e["recall"] = detail::opt_json(t.metrics.recall);
    e["f1"] = detail::opt_json(t.metrics.f1);
    oj cats = oj::object();
    for (const auto& [cat, outcome] : t.categories) cats[bench::to_string(cat)] = eval::to_string(outcome);
    e["categories"] = std::move(cats);
    oj results = oj::array();
    for (const auto& r : t.results) {
      results.push_back({{"scenario", r.scenario_id}, {"tp", r.tp}, {"fp", r.fp}, {"fn", r.fn},
                         {"outcome", eval::to_string(r.outcome)}});
    }
    e["scenarios"] = std::move(results);
    tools.push_back(std::move(e));
  }
  j["tools"] = std::move(tools);
  oj tests = oj::array();
  for (const auto& t : c.tests) {
    oj e;
    e["measure"] = t.measure;
    e["a"] = t.a;
    e["b"] = t.b;
    e["pairs"] = t.pairs;
    e["wilcoxon"] = t.wilcoxon ? detail::test_json(*t.wilcoxon) : oj(nullptr);
    e["wilcoxon_holm_reject"] = t.wilcoxon_reject ? oj(*t.wilcoxon_reject) : oj(nullptr);
    e["mann_whitney"] = detail::test_json(t.mann_whitney);
    e["mann_whitney_holm_reject"] = t.mann_whitney_reject;
    e["cliffs_delta"] = {{"delta", t.delta.delta}, {"ci_low", t.delta.ci_low}, {"ci_high", t.delta.ci_high}};
    tests.push_back(std::move(e));
  }
  j["tests"] = std::move(tests);
  return j;
}

inline std::string render_comparison(const Comparison& c, report::Format format) {
  if (format == report::Format::json) return comparison_to_json(c).dump(2) + "\n";

  std::vector<std::string> header{"Benchmark"};
  for (const auto& t : c.tools) header.push_back(t.tool);
  std::vector<std::vector<std::string>> rows;
  for (auto cat : bench::kAllCategories) {
    std::vector<std::string> row{bench::to_string(cat) + " - " + std::string(bench::category_title(cat))};
    bool any = false;
    for (const auto& t : c.tools) {
      auto it = t.categories.find(cat);
      any = any || it != t.categories.end();
      row.push_back(it != t.categories.end() ? detail::mark(it->second) : "-");
    }
    if (any) rows.push_back(std::move(row));
  }
  auto metric_row = [&](std::string label, auto fn) {
    std::vector<std::string> row{std::move(label)};
    for (const auto& t : c.tools) row.push_back(fn(t.metrics));
    rows.push_back(std::move(row));
  };
  metric_row("True positive (TP)", [](const eval::CorpusMetrics& m) { return std::to_string(m.tp); });
  metric_row("False positive (FP)", [](const eval::CorpusMetrics& m) { return std::to_string(m.fp); });
  metric_row("False negative (FN)", [](const eval::CorpusMetrics& m) { return std::to_string(m.fn); });
  metric_row("Precision", [](const eval::CorpusMetrics& m) { return detail::pct(m.precision); });
  metric_row("Recall", [](const eval::CorpusMetrics& m) { return detail::pct(m.recall); });
  metric_row("F1-score", [](const eval::CorpusMetrics& m) { return detail::pct(m.f1); });

  const std::vector<std::string> test_header{"measure", "a vs b", "pairs", "wilcoxon W", "p", "holm",
                                             "mann-whitney U", "p", "holm", "cliff delta", "95% CI"};
  std::vector<std::vector<std::string>> test_rows;
  auto flag = [](bool b) { return std::string(b ? "reject" : "keep"); };
  for (const auto& t : c.tests) {
    using report::detail::fixed;
    test_rows.push_back({t.measure, t.a + " vs " + t.b, std::to_string(t.pairs),
                         t.wilcoxon ? fixed(t.wilcoxon->statistic, 1) : "n/a",
                         t.wilcoxon ? fixed(t.wilcoxon->p_value, 4) : "n/a",
                         t.wilcoxon_reject ? flag(*t.wilcoxon_reject) : "n/a", fixed(t.mann_whitney.statistic, 1),
                         fixed(t.mann_whitney.p_value, 4), flag(t.mann_whitney_reject), fixed(t.delta.delta, 3),
                         "[" + fixed(t.delta.ci_low, 3) + ", " + fixed(t.delta.ci_high, 3) + "]"});
  }

  std::ostringstream o;
  std::string legend = "✓ success, ◐ partial, × miss";
  std::string params = "alpha=" + report::detail::fixed(c.alpha, 3) + " (Holm), bootstrap_reps=" +
                       std::to_string(c.bootstrap_reps) + ", seed=" + std::to_string(c.seed);
  if (format == report::Format::text) {
    o << "coldpath tool comparison\n" << legend << "\n\n" << report::detail::table(header, rows);
    if (!test_rows.empty()) {
      o << "\n== Pairwise tests ==\n" << params << '\n' << report::detail::table(test_header, test_rows);
    }
    return o.str();
  }
  o << report::detail::kHtmlHead << "<h1>coldpath tool comparison</h1>\n<p>" << report::detail::html_escape(legend)
    << "</p>\n"
    << report::detail::html_table("comparison", header, rows);
  if (!test_rows.empty()) {
    o << "<h2>Pairwise tests</h2>\n<p>" << report::detail::html_escape(params) << "</p>\n"
      << report::detail::html_table("tests", test_header, test_rows);
  }
  o << "</body>\n</html>\n";
  return o.str();
}

/// Per-scenario counts for every tool, as a text table.
inline std::string render_scenarios(const Comparison& c) {
  std::ostringstream o;
  for (const auto& t : c.tools) {
    std::vector<std::vector<std::string>> rows;
    for (const auto& r : t.results) {
      rows.push_back({r.scenario_id, std::to_string(r.tp), std::to_string(r.fp), std::to_string(r.fn),
                      std::string(eval::to_string(r.outcome))});
    }
    o << "\n== " << t.tool << " ==\n" << report::detail::table({"scenario", "tp", "fp", "fn", "outcome"}, rows);
  }
  return o.str();
}

}  // namespace coldpath::compare
