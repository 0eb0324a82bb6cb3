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

#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "coldpath/cct.hpp"
#include "oracles.hpp"

using namespace coldpath;
using namespace coldpath::trace;
using coldpath::cct::CctNode;

namespace {

struct Builder {
  Trace t;

  explicit Builder(Phase p = Phase::cold) { t.meta = TraceMeta{"t", p, kSchemaVersion, "monotonic", 0, 1}; }

  Builder& begin(const std::string& m, std::int64_t ts, std::optional<std::string> parent = std::nullopt,
                 std::int64_t depth = 0, std::int64_t tid = 1) {
    t.records.push_back({RecordKind::import_begin, ts, tid, ImportBegin{m, parent, depth, m + ".py", std::nullopt}});
    return *this;
  }
  Builder& end(const std::string& m, std::int64_t ts, std::int64_t dur, std::int64_t tid = 1) {
    t.records.push_back({RecordKind::import_end, ts, tid, ImportEnd{m, dur}});
    return *this;
  }
  Builder& sample(std::initializer_list<std::string> mods, std::int64_t weight = 1) {
    auto s = oracle::sample_of(mods);
    s.weight = weight;
    t.records.push_back({RecordKind::sample, static_cast<std::int64_t>(t.records.size()), 1, s});
    return *this;
  }
};

std::int64_t sum_exclusive(const CctNode& root) {
  std::int64_t s = 0;
  cct::walk(root, [&](const CctNode& n, const CctNode* parent, int) {
    if (parent) s += n.exclusive_ns;
  });
  return s;
}

}  // namespace

TEST(BuildCct, NestedPairSplitsInclusiveAndExclusive) {
  Builder b;
  b.begin("A", 0).begin("B", 10, "A", 1).end("B", 40, 30).end("A", 100, 100);
  auto root = cct::build_cct(b.t);
  EXPECT_EQ(root.module, "<root>");
  const CctNode* a = root.find_child("A");
  ASSERT_NE(a, nullptr);
  EXPECT_EQ(a->inclusive_ns, 100);
  EXPECT_EQ(a->exclusive_ns, 70);
  const CctNode* bnode = a->find_child("B");
  ASSERT_NE(bnode, nullptr);
  EXPECT_EQ(bnode->inclusive_ns, 30);
  EXPECT_EQ(bnode->exclusive_ns, 30);
}

TEST(BuildCct, LeafHasEqualInclusiveAndExclusive) {
  Builder b;
  b.begin("solo", 5).end("solo", 47, 42);
  auto root = cct::build_cct(b.t);
  ASSERT_EQ(root.children.size(), 1u);
  EXPECT_EQ(root.children[0].inclusive_ns, 42);
  EXPECT_EQ(root.children[0].exclusive_ns, 42);
}

TEST(BuildCct, SiblingsSumIntoRoot) {
  Builder b;
  b.begin("x", 0).end("x", 40, 40).begin("y", 40).end("y", 100, 60);
  auto root = cct::build_cct(b.t);
  EXPECT_EQ(root.inclusive_ns, 40 + 60);
  EXPECT_EQ(root.children.size(), 2u);
  EXPECT_EQ(root.children[0].module, "x");
}

TEST(BuildCct, DuplicateImportsMerge) {
  Builder b;
  b.begin("a", 0).end("a", 10, 10).begin("a", 20).end("a", 25, 5);
  auto root = cct::build_cct(b.t);
  ASSERT_EQ(root.children.size(), 1u);
  EXPECT_EQ(root.children[0].inclusive_ns, 15);
}

TEST(BuildCct, ThreadsMergeUnderOneRoot) {
  Builder b;
  b.begin("a", 0, std::nullopt, 0, 1).begin("b", 5, std::nullopt, 0, 2).end("a", 10, 10, 1).end("b", 20, 15, 2);
  auto root = cct::build_cct(b.t);
  ASSERT_EQ(root.children.size(), 2u);
  EXPECT_EQ(root.inclusive_ns, 25);
}

TEST(BuildCct, Errors) {
  Builder warm(Phase::warm);
  EXPECT_THROW(cct::build_cct(warm.t), InvalidPhase);
  Builder broken;
  broken.begin("a", 0);
  EXPECT_THROW(cct::build_cct(broken.t), UnmatchedImports);
}

TEST(Usage, PresenceCounting) {
  Builder w(Phase::warm);
  w.sample({"x", "app"}).sample({"app"}).sample({"x"}).sample({"app"}).sample({"y"});
  auto u = cct::attribute_usage(w.t);
  EXPECT_EQ(u.count("x"), 2);
  EXPECT_EQ(u.total_samples, 5);
}

TEST(Usage, RecursiveFramesCountOnce) {
  Builder w(Phase::warm);
  w.sample({"x", "x", "x"});
  EXPECT_EQ(cct::attribute_usage(w.t).count("x"), 1);
}

TEST(Usage, WeightedSampleCountsItsWeight) {
  Builder w(Phase::warm);
  w.sample({"x"}, 3).sample({"y"});
  auto u = cct::attribute_usage(w.t);
  EXPECT_EQ(u.count("x"), 3);
  EXPECT_EQ(u.total_samples, 4);
}

TEST(Usage, ColdOnlyModuleHasZeroUsage) {
  Builder c;
  c.begin("loaded", 0).end("loaded", 10, 10);
  Builder w(Phase::warm);
  w.sample({"app"});
  auto a = cct::build_annotated(c.t, w.t);
  EXPECT_EQ(a.usage.count("loaded"), 0);
  EXPECT_TRUE(a.usage.counts.count("loaded"));
}

TEST(Usage, RejectsColdTrace) {
  Builder c;
  EXPECT_THROW(cct::attribute_usage(c.t), InvalidPhase);
}

TEST(Merge, FillsDefaults) {
  Builder c;
  c.begin("a", 0).end("a", 5, 5).begin("b", 5).end("b", 9, 4);
  cct::UsageTable u;
  u.counts = {{"a", 3}};
  auto m = cct::merge(cct::build_cct(c.t), u);
  EXPECT_EQ(m.usage.count("a"), 3);
  EXPECT_EQ(m.usage.counts.at("b"), 0);
  EXPECT_TRUE(m.untraced.empty());
}

TEST(Merge, KeepsUntracedNames) {
  Builder c;
  c.begin("a", 0).end("a", 5, 5);
  cct::UsageTable u;
  u.counts = {{"c", 1}};
  auto m = cct::merge(cct::build_cct(c.t), u);
  EXPECT_EQ(m.untraced, std::vector<std::string>{"c"});
}

TEST(Merge, EmptyInputs) {
  Builder c;
  auto m = cct::merge(cct::build_cct(c.t), {});
  EXPECT_EQ(m.total_init_ns, 0);
  EXPECT_TRUE(m.root.children.empty());
}

TEST(Totals, ImporterIsParentNode) {
  Builder b;
  b.begin("A", 0).begin("B", 10, "A", 1).end("B", 40, 30).end("A", 100, 100);
  auto totals = cct::module_totals(cct::build_cct(b.t));
  EXPECT_FALSE(totals.at("A").importer.has_value());
  EXPECT_EQ(totals.at("B").importer, "A");
  EXPECT_EQ(totals.at("B").importer_file, "A.py");
}

TEST(Property, ConservationAndIdentityHoldEverywhere) {
  std::mt19937_64 rng(17);
  for (int i = 0; i < 400; ++i) {
    auto t = oracle::random_cold_trace(rng, {.max_imports = 40, .max_threads = 4, .module_pool = 10});
    auto root = cct::build_cct(t);
    EXPECT_EQ(sum_exclusive(root), root.inclusive_ns);
    cct::walk(root, [](const CctNode& n, const CctNode* parent, int) {
      std::int64_t kids = 0;
      for (const auto& c : n.children) kids += c.inclusive_ns;
      if (parent) {
        EXPECT_GE(n.exclusive_ns, 0);
        EXPECT_EQ(n.inclusive_ns, n.exclusive_ns + kids);
      } else {
        EXPECT_EQ(n.inclusive_ns, kids);
      }
    });
  }
}

TEST(Property, MatchesContainmentOracle) {
  std::mt19937_64 rng(23);
  for (int i = 0; i < 500; ++i) {
    auto t = oracle::random_cold_trace(rng, {.max_imports = 8, .max_threads = 2});
    EXPECT_EQ(cct::build_cct(t), oracle::cct_by_containment(t)) << serialize_trace(t);
  }
}

TEST(Property, ShuffledRecordOrderGivesSameTree) {
  std::mt19937_64 rng(29);
  for (int i = 0; i < 200; ++i) {
    auto t = oracle::random_cold_trace(rng, {.max_imports = 15, .max_threads = 3});
    std::string text = serialize_trace(t);
    std::vector<std::string> lines;
    std::istringstream in(text);
    for (std::string l; std::getline(in, l);) lines.push_back(l);
    std::shuffle(lines.begin() + 1, lines.end(), rng);
    std::string shuffled;
    for (const auto& l : lines) shuffled += l + "\n";
    EXPECT_EQ(cct::build_cct(parse_trace_string(shuffled)), cct::build_cct(t));
  }
}

TEST(Property, AppendingSamplesNeverLowersUsage) {
  std::mt19937_64 rng(31);
  std::uniform_int_distribution<int> pick(0, 4), len(1, 4);
  for (int i = 0; i < 100; ++i) {
    Builder w(Phase::warm);
    auto before = cct::attribute_usage(w.t);
    for (int s = 0; s < 20; ++s) {
      trace::StackSample smp;
      for (int f = len(rng); f > 0; --f) smp.frames.push_back({"m" + std::to_string(pick(rng)), "f", std::nullopt, std::nullopt});
      w.t.records.push_back({RecordKind::sample, s, 1, smp});
      auto after = cct::attribute_usage(w.t);
      for (const auto& [m, c] : before.counts) EXPECT_GE(after.count(m), c);
      for (const auto& [m, c] : after.counts) EXPECT_LE(c, after.total_samples);
      before = after;
    }
  }
}
