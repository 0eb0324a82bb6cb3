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

// Calling-context tree over import nesting. A cold trace yields the tree with
// inclusive/exclusive initialization time per node; a warm trace yields
// per-module usage counts; merge() joins the two by module name.

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "coldpath/error.hpp"
#include "coldpath/trace.hpp"

namespace coldpath::cct {

inline constexpr std::string_view kRootName = "<root>";

struct CctNode {
  std::string module;
  std::optional<std::string> file;
  // Line of the import statement in the parent's file, when the tracer
  // recorded it.
  std::optional<std::int64_t> import_line;
  std::int64_t inclusive_ns = 0;
  std::int64_t exclusive_ns = 0;
  std::vector<CctNode> children;

  bool operator==(const CctNode&) const = default;

  const CctNode* find_child(std::string_view name) const {
    for (const auto& c : children) {
      if (c.module == name) return &c;
    }
    return nullptr;
  }
};

/// Per-module presence counts over warm samples.
struct UsageTable {
  std::map<std::string, std::int64_t> counts;
  // Sum of sample weights seen.
  std::int64_t total_samples = 0;

  std::int64_t count(const std::string& module) const {
    auto it = counts.find(module);
    return it == counts.end() ? 0 : it->second;
  }

  bool operator==(const UsageTable&) const = default;
};

struct AnnotatedCct {
  CctNode root;
  UsageTable usage;
  // Modules seen in warm samples but never imported in the cold trace.
  std::vector<std::string> untraced;
  std::int64_t total_init_ns = 0;

  bool operator==(const AnnotatedCct&) const = default;
};

/// Pre-order walk. `fn(node, parent, depth)`; the root has parent nullptr
/// and depth 0.
template <class Fn>
void walk(const CctNode& node, Fn&& fn, const CctNode* parent = nullptr, int depth = 0) {
  fn(node, parent, depth);
  for (const auto& c : node.children) walk(c, fn, &node, depth + 1);
}

namespace detail {

struct ArenaNode {
  std::string module;
  std::optional<std::string> file;
  std::optional<std::int64_t> import_line;
  std::int64_t inclusive_ns = 0;
  std::vector<std::size_t> children;
};

inline CctNode materialize(const std::vector<ArenaNode>& arena, std::size_t idx) {
  const ArenaNode& a = arena[idx];
  CctNode n;
  n.module = a.module;
  n.file = a.file;
  n.import_line = a.import_line;
  n.inclusive_ns = a.inclusive_ns;
  std::int64_t child_sum = 0;
  n.children.reserve(a.children.size());
  for (std::size_t c : a.children) {
    n.children.push_back(materialize(arena, c));
    child_sum += n.children.back().inclusive_ns;
  }
  if (idx == 0) n.inclusive_ns = child_sum;
  n.exclusive_ns = n.inclusive_ns - child_sum;
  return n;
}

}  // namespace detail

/// Builds the import CCT from a cold trace. Per-thread nesting stacks are
/// merged under one synthetic root; a module imported again under the same
/// parent merges into the existing node and its durations add.
inline CctNode build_cct(const trace::Trace& cold) {
  if (cold.meta.phase != trace::Phase::cold) {
    throw InvalidPhase("build_cct needs a cold trace, got " +
                       std::string(trace::to_string(cold.meta.phase)));
  }
  auto violations = trace::validate_trace(cold);
  if (!violations.empty()) {
    std::string msg = std::to_string(violations.size()) + " violation(s):";
    for (std::size_t i = 0; i < violations.size() && i < 5; ++i) {
      msg += " " + trace::to_string(violations[i]);
    }
    throw UnmatchedImports(msg);
  }

  std::vector<detail::ArenaNode> arena(1);
  arena[0].module = std::string(kRootName);

  struct Open {
    std::size_t node;
    std::int64_t begin_ts;
  };
  std::map<std::int64_t, std::vector<Open>> stacks;

  for (const auto& r : cold.records) {
    if (const auto* b = r.import_begin()) {
      auto& stack = stacks[r.tid];
      std::size_t parent = stack.empty() ? 0 : stack.back().node;
      std::size_t found = arena.size();
      for (std::size_t c : arena[parent].children) {
        if (arena[c].module == b->module) {
          found = c;
          break;
        }
      }
      if (found == arena.size()) {
        detail::ArenaNode n;
        n.module = b->module;
        n.file = b->file;
        n.import_line = b->line;
        arena.push_back(std::move(n));
        arena[parent].children.push_back(found);
      }
      stack.push_back(Open{found, r.ts_ns});
    } else if (r.import_end()) {
      // Validation guarantees the top of this tid's stack is the match.
      auto& stack = stacks[r.tid];
      Open o = stack.back();
      stack.pop_back();
      arena[o.node].inclusive_ns += r.ts_ns - o.begin_ts;
    }
  }
  return detail::materialize(arena, 0);
}

/// Counts, per module, the warm samples whose stack contains at least one
/// frame of that module. A sample of weight w counts w times.
inline UsageTable attribute_usage(const trace::Trace& warm) {
  if (warm.meta.phase != trace::Phase::warm) {
    throw InvalidPhase("attribute_usage needs a warm trace, got " +
                       std::string(trace::to_string(warm.meta.phase)));
  }
  UsageTable table;
  std::set<std::string_view> seen;
  for (const auto& r : warm.records) {
    const auto* s = r.sample();
    if (!s) continue;
    table.total_samples += s->weight;
    seen.clear();
    for (const auto& f : s->frames) seen.insert(f.module);
    for (auto m : seen) table.counts[std::string(m)] += s->weight;
  }
  return table;
}

/// Every module appearing in the tree, excluding the synthetic root.
inline std::set<std::string> module_names(const CctNode& root) {
  std::set<std::string> names;
  walk(root, [&](const CctNode& n, const CctNode* parent, int) {
    if (parent) names.insert(n.module);
  });
  return names;
}

inline AnnotatedCct merge(CctNode root, UsageTable usage) {
  AnnotatedCct out;
  auto names = module_names(root);
  for (const auto& [module, count] : usage.counts) {
    if (!names.count(module)) out.untraced.push_back(module);
  }
  for (const auto& m : names) usage.counts.try_emplace(m, 0);
  out.total_init_ns = root.inclusive_ns;
  out.root = std::move(root);
  out.usage = std::move(usage);
  return out;
}

inline AnnotatedCct build_annotated(const trace::Trace& cold, const trace::Trace& warm) {
  return merge(build_cct(cold), attribute_usage(warm));
}

/// Per-module aggregate over every node carrying that module name.
struct ModuleTotals {
  std::string module;
  std::int64_t inclusive_ns = 0;
  std::int64_t exclusive_ns = 0;
  std::optional<std::string> file;
  // First importer encountered in pre-order; nullopt for top-level imports.
  std::optional<std::string> importer;
  std::optional<std::string> importer_file;
  std::optional<std::int64_t> import_line;
};

inline std::map<std::string, ModuleTotals> module_totals(const CctNode& root) {
  std::map<std::string, ModuleTotals> out;
  walk(root, [&](const CctNode& n, const CctNode* parent, int depth) {
    if (!parent) return;
    auto [it, inserted] = out.try_emplace(n.module);
    ModuleTotals& t = it->second;
    if (inserted) {
      t.module = n.module;
      t.file = n.file;
      t.import_line = n.import_line;
      if (depth > 1) {
        t.importer = parent->module;
        t.importer_file = parent->file;
      }
    }
    t.inclusive_ns += n.inclusive_ns;
    t.exclusive_ns += n.exclusive_ns;
  });
  return out;
}

}  // namespace coldpath::cct
