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

// Trace wire format: one JSON object per line. The first line is a meta
// record; the remaining records are import begin/end pairs, warm-phase stack
// samples and invocation boundaries.
//
//   {"k":"meta","ts_ns":0,"tid":1,"run_id":"r0","phase":"cold","schema":1,"clock":"monotonic"}
//   {"k":"import_begin","ts_ns":10,"tid":1,"mod":"a","parent":null,"depth":0,"file":"a.py"}
//   {"k":"import_end","ts_ns":110,"tid":1,"mod":"a","dur_ns":100}
//   {"k":"sample","ts_ns":200,"tid":1,"stack":[{"mod":"a","fn":"f","file":"a.py","line":3}],"w":1}
//   {"k":"invoke_begin","ts_ns":150,"tid":1,"seq":0}

#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

#include "coldpath/error.hpp"

namespace coldpath::trace {

inline constexpr int kSchemaVersion = 1;

enum class Phase { cold, warm };

enum class RecordKind {
  meta,
  import_begin,
  import_end,
  sample,
  invoke_begin,
  invoke_end
};

inline std::string_view to_string(Phase p) {
  return p == Phase::cold ? "cold" : "warm";
}

inline std::optional<Phase> phase_from_string(std::string_view s) {
  if (s == "cold") return Phase::cold;
  if (s == "warm") return Phase::warm;
  return std::nullopt;
}

inline std::string_view to_string(RecordKind k) {
  switch (k) {
    case RecordKind::meta: return "meta";
    case RecordKind::import_begin: return "import_begin";
    case RecordKind::import_end: return "import_end";
    case RecordKind::sample: return "sample";
    case RecordKind::invoke_begin: return "invoke_begin";
    case RecordKind::invoke_end: return "invoke_end";
  }
  return "?";
}

inline std::optional<RecordKind> kind_from_string(std::string_view s) {
  for (auto k : {RecordKind::meta, RecordKind::import_begin,
                 RecordKind::import_end, RecordKind::sample,
                 RecordKind::invoke_begin, RecordKind::invoke_end}) {
    if (to_string(k) == s) return k;
  }
  return std::nullopt;
}

struct TraceMeta {
  std::string run_id;
  Phase phase = Phase::cold;
  int schema = kSchemaVersion;
  std::string clock = "monotonic";
  // Process-entry marker: the meta record's own timestamp and thread.
  std::int64_t ts_ns = 0;
  std::int64_t tid = 0;

  bool operator==(const TraceMeta&) const = default;
};

struct ImportBegin {
  std::string module;
  std::optional<std::string> parent;
  std::int64_t depth = 0;
  std::optional<std::string> file;
  // Optional line of the import statement in the importer's file. Not part of
  // the required wire fields; emitted only when the tracer knows it.
  std::optional<std::int64_t> line;

  bool operator==(const ImportBegin&) const = default;
};

struct ImportEnd {
  std::string module;
  std::int64_t dur_ns = 0;

  bool operator==(const ImportEnd&) const = default;
};

struct Frame {
  std::string module;
  std::string function;
  std::optional<std::string> file;
  std::optional<std::int64_t> line;

  bool operator==(const Frame&) const = default;
};

/// Warm-phase call stack; frames[0] is the innermost frame.
struct StackSample {
  std::vector<Frame> frames;
  std::int64_t weight = 1;

  bool operator==(const StackSample&) const = default;
};

struct Invocation {
  std::int64_t seq = 0;

  bool operator==(const Invocation&) const = default;
};

using Payload = std::variant<ImportBegin, ImportEnd, StackSample, Invocation>;

struct TraceRecord {
  RecordKind kind = RecordKind::import_begin;
  std::int64_t ts_ns = 0;
  std::int64_t tid = 0;
  Payload payload;

  bool operator==(const TraceRecord&) const = default;

  const ImportBegin* import_begin() const { return std::get_if<ImportBegin>(&payload); }
  const ImportEnd* import_end() const { return std::get_if<ImportEnd>(&payload); }
  const StackSample* sample() const { return std::get_if<StackSample>(&payload); }
  const Invocation* invocation() const { return std::get_if<Invocation>(&payload); }
};

/// A parsed trace. `records` excludes the meta record and is sorted by ts_ns,
/// ties kept in file order.
struct Trace {
  TraceMeta meta;
  std::vector<TraceRecord> records;
  // Records with an unrecognized kind that were skipped during parsing.
  std::size_t skipped_unknown = 0;

  friend bool operator==(const Trace& a, const Trace& b) {
    return a.meta == b.meta && a.records == b.records;
  }
};

// ---------------------------------------------------------------------------
// Parsing
// ---------------------------------------------------------------------------

namespace detail {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

[[noreturn]] inline void malformed(std::size_t line_no, const std::string& msg) {
  throw MalformedTrace("line " + std::to_string(line_no) + ": " + msg);
}

inline const json& field(const json& obj, const char* key, std::size_t line_no) {
  auto it = obj.find(key);
  if (it == obj.end()) malformed(line_no, std::string("missing field '") + key + "'");
  return *it;
}

inline std::int64_t int_field(const json& obj, const char* key, std::size_t line_no) {
  const json& v = field(obj, key, line_no);
  if (!v.is_number_integer()) {
    malformed(line_no, std::string("field '") + key + "' must be an integer");
  }
  if (v.is_number_unsigned() &&
      v.get<std::uint64_t>() > static_cast<std::uint64_t>(INT64_MAX)) {
    malformed(line_no, std::string("field '") + key + "' out of range");
  }
  return v.get<std::int64_t>();
}

inline std::int64_t non_negative(const json& obj, const char* key, std::size_t line_no) {
  std::int64_t v = int_field(obj, key, line_no);
  if (v < 0) malformed(line_no, std::string("field '") + key + "' must be >= 0");
  return v;
}

inline std::string string_field(const json& obj, const char* key, std::size_t line_no) {
  const json& v = field(obj, key, line_no);
  if (!v.is_string()) malformed(line_no, std::string("field '") + key + "' must be a string");
  return v.get<std::string>();
}

inline std::optional<std::string> nullable_string(const json& obj, const char* key,
                                                  std::size_t line_no, bool required) {
  auto it = obj.find(key);
  if (it == obj.end()) {
    if (required) malformed(line_no, std::string("missing field '") + key + "'");
    return std::nullopt;
  }
  if (it->is_null()) return std::nullopt;
  if (!it->is_string()) {
    malformed(line_no, std::string("field '") + key + "' must be a string or null");
  }
  return it->get<std::string>();
}

inline std::optional<std::int64_t> nullable_int(const json& obj, const char* key,
                                                std::size_t line_no) {
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return std::nullopt;
  return int_field(obj, key, line_no);
}

inline TraceMeta parse_meta(const json& obj, std::size_t line_no) {
  TraceMeta meta;
  meta.ts_ns = non_negative(obj, "ts_ns", line_no);
  meta.tid = int_field(obj, "tid", line_no);
  meta.run_id = string_field(obj, "run_id", line_no);
  auto phase = phase_from_string(string_field(obj, "phase", line_no));
  if (!phase) malformed(line_no, "phase must be \"cold\" or \"warm\"");
  meta.phase = *phase;
  std::int64_t schema = int_field(obj, "schema", line_no);
  if (schema != kSchemaVersion) {
    malformed(line_no, "unsupported schema " + std::to_string(schema));
  }
  meta.schema = static_cast<int>(schema);
  meta.clock = string_field(obj, "clock", line_no);
  return meta;
}

inline Frame parse_frame(const json& f, std::size_t line_no) {
  if (!f.is_object()) malformed(line_no, "stack frame must be an object");
  Frame frame;
  frame.module = string_field(f, "mod", line_no);
  frame.function = string_field(f, "fn", line_no);
  frame.file = nullable_string(f, "file", line_no, false);
  frame.line = nullable_int(f, "line", line_no);
  if (frame.file && (!frame.line || *frame.line < 1)) {
    malformed(line_no, "frame with a file needs line >= 1");
  }
  return frame;
}

inline TraceRecord parse_record(RecordKind kind, const json& obj, std::size_t line_no) {
  TraceRecord rec;
  rec.kind = kind;
  rec.ts_ns = non_negative(obj, "ts_ns", line_no);
  rec.tid = int_field(obj, "tid", line_no);
  switch (kind) {
    case RecordKind::import_begin: {
      ImportBegin b;
      b.module = string_field(obj, "mod", line_no);
      b.parent = nullable_string(obj, "parent", line_no, true);
      b.depth = non_negative(obj, "depth", line_no);
      b.file = nullable_string(obj, "file", line_no, true);
      b.line = nullable_int(obj, "line", line_no);
      rec.payload = std::move(b);
      break;
    }
    case RecordKind::import_end: {
      ImportEnd e;
      e.module = string_field(obj, "mod", line_no);
      e.dur_ns = non_negative(obj, "dur_ns", line_no);
      rec.payload = std::move(e);
      break;
    }
    case RecordKind::sample: {
      StackSample s;
      const json& stack = field(obj, "stack", line_no);
      if (!stack.is_array() || stack.empty()) {
        malformed(line_no, "stack must be a non-empty array");
      }
      for (const auto& f : stack) s.frames.push_back(parse_frame(f, line_no));
      if (auto w = nullable_int(obj, "w", line_no)) {
        if (*w < 1) malformed(line_no, "sample weight must be >= 1");
        s.weight = *w;
      }
      rec.payload = std::move(s);
      break;
    }
    case RecordKind::invoke_begin:
    case RecordKind::invoke_end:
      rec.payload = Invocation{int_field(obj, "seq", line_no)};
      break;
    case RecordKind::meta:
      malformed(line_no, "duplicate meta record");
  }
  return rec;
}

}  // namespace detail

/// Parses a trace from a stream. Throws MalformedTrace on missing/duplicate
/// meta, bad field types or an unsupported schema.
inline Trace parse_trace(std::istream& in) {
  Trace trace;
  bool have_meta = false;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto obj = detail::json::parse(line, nullptr, /*allow_exceptions=*/false);
    if (obj.is_discarded()) detail::malformed(line_no, "invalid JSON");
    if (!obj.is_object()) detail::malformed(line_no, "record must be a JSON object");
    std::string k = detail::string_field(obj, "k", line_no);
    auto kind = kind_from_string(k);
    if (!have_meta) {
      if (kind != RecordKind::meta) throw MalformedTrace("missing meta");
      trace.meta = detail::parse_meta(obj, line_no);
      have_meta = true;
      continue;
    }
    if (!kind) {
      ++trace.skipped_unknown;
      continue;
    }
    trace.records.push_back(detail::parse_record(*kind, obj, line_no));
  }
  if (!have_meta) throw MalformedTrace("missing meta");
  std::stable_sort(trace.records.begin(), trace.records.end(),
                   [](const TraceRecord& a, const TraceRecord& b) { return a.ts_ns < b.ts_ns; });
  return trace;
}

inline Trace parse_trace_string(const std::string& text) {
  std::istringstream in(text);
  return parse_trace(in);
}

inline Trace parse_trace(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open trace file " + path.string());
  try {
    return parse_trace(in);
  } catch (const MalformedTrace& e) {
    throw MalformedTrace(path.string() + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

namespace detail {

template <class T>
ordered_json nullable(const std::optional<T>& v) {
  return v ? ordered_json(*v) : ordered_json(nullptr);
}

inline ordered_json to_json(const TraceMeta& m) {
  ordered_json j;
  j["k"] = "meta";
  j["ts_ns"] = m.ts_ns;
  j["tid"] = m.tid;
  j["run_id"] = m.run_id;
  j["phase"] = to_string(m.phase);
  j["schema"] = m.schema;
  j["clock"] = m.clock;
  return j;
}

inline ordered_json to_json(const TraceRecord& r) {
  ordered_json j;
  j["k"] = to_string(r.kind);
  j["ts_ns"] = r.ts_ns;
  j["tid"] = r.tid;
  std::visit(
      [&j](const auto& p) {
        using P = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<P, ImportBegin>) {
          j["mod"] = p.module;
          j["parent"] = nullable(p.parent);
          j["depth"] = p.depth;
          j["file"] = nullable(p.file);
          if (p.line) j["line"] = *p.line;
        } else if constexpr (std::is_same_v<P, ImportEnd>) {
          j["mod"] = p.module;
          j["dur_ns"] = p.dur_ns;
        } else if constexpr (std::is_same_v<P, StackSample>) {
          ordered_json stack = ordered_json::array();
          for (const auto& f : p.frames) {
            ordered_json fj;
            fj["mod"] = f.module;
            fj["fn"] = f.function;
            fj["file"] = nullable(f.file);
            fj["line"] = nullable(f.line);
            stack.push_back(std::move(fj));
          }
          j["stack"] = std::move(stack);
          if (p.weight != 1) j["w"] = p.weight;
        } else {
          j["seq"] = p.seq;
        }
      },
      r.payload);
  return j;
}

}  // namespace detail

inline void write_trace(std::ostream& out, const Trace& trace) {
  out << detail::to_json(trace.meta).dump() << '\n';
  for (const auto& r : trace.records) out << detail::to_json(r).dump() << '\n';
}

inline std::string serialize_trace(const Trace& trace) {
  std::ostringstream out;
  write_trace(out, trace);
  return out.str();
}

inline void write_trace(const std::filesystem::path& path, const Trace& trace) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write trace file " + path.string());
  write_trace(out, trace);
}

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

enum class Rule {
  // Type rules: parse_trace never produces these.
  BadSchema,
  NegativeTimestamp,
  NegativeDepth,
  PayloadKind,
  EmptyStack,
  BadLine,
  BadWeight,
  Unsorted,
  // Semantic rules.
  UnmatchedBegin,
  UnmatchedEnd,
  NestingOrder,
  SelfNesting,
  DepthRule,
  ParentMismatch,
  DurationMismatch,
};

inline std::string_view to_string(Rule r) {
  switch (r) {
    case Rule::BadSchema: return "BadSchema";
    case Rule::NegativeTimestamp: return "NegativeTimestamp";
    case Rule::NegativeDepth: return "NegativeDepth";
    case Rule::PayloadKind: return "PayloadKind";
    case Rule::EmptyStack: return "EmptyStack";
    case Rule::BadLine: return "BadLine";
    case Rule::BadWeight: return "BadWeight";
    case Rule::Unsorted: return "Unsorted";
    case Rule::UnmatchedBegin: return "UnmatchedBegin";
    case Rule::UnmatchedEnd: return "UnmatchedEnd";
    case Rule::NestingOrder: return "NestingOrder";
    case Rule::SelfNesting: return "SelfNesting";
    case Rule::DepthRule: return "DepthRule";
    case Rule::ParentMismatch: return "ParentMismatch";
    case Rule::DurationMismatch: return "DurationMismatch";
  }
  return "?";
}

inline bool is_semantic(Rule r) { return r >= Rule::UnmatchedBegin; }

struct Violation {
  // Offending record index into Trace::records; nullopt for the meta record.
  std::optional<std::size_t> index;
  Rule rule;
  std::string detail;

  bool operator==(const Violation&) const = default;
};

inline std::string to_string(const Violation& v) {
  std::string s(to_string(v.rule));
  s += '@';
  s += v.index ? std::to_string(*v.index) : std::string("meta");
  if (!v.detail.empty()) s += " (" + v.detail + ")";
  return s;
}

/// Checks every type and nesting invariant. Returns an empty list iff the
/// trace is valid; violations are reported in record order per rule pass.
inline std::vector<Violation> validate_trace(const Trace& trace) {
  std::vector<Violation> out;
  auto report = [&out](std::optional<std::size_t> idx, Rule rule, std::string detail = {}) {
    out.push_back(Violation{idx, rule, std::move(detail)});
  };

  if (trace.meta.schema != kSchemaVersion) report(std::nullopt, Rule::BadSchema);
  if (trace.meta.ts_ns < 0) report(std::nullopt, Rule::NegativeTimestamp);

  struct Open {
    std::string module;
    std::int64_t depth;
    std::int64_t ts_ns;
    std::size_t index;
  };
  std::map<std::int64_t, std::vector<Open>> open_by_tid;

  for (std::size_t i = 0; i < trace.records.size(); ++i) {
    const TraceRecord& r = trace.records[i];
    if (r.ts_ns < 0) report(i, Rule::NegativeTimestamp);
    if (i > 0 && r.ts_ns < trace.records[i - 1].ts_ns) report(i, Rule::Unsorted);

    switch (r.kind) {
      case RecordKind::import_begin: {
        const ImportBegin* b = r.import_begin();
        if (!b) {
          report(i, Rule::PayloadKind);
          break;
        }
        if (b->depth < 0) report(i, Rule::NegativeDepth);
        auto& stack = open_by_tid[r.tid];
        for (const auto& o : stack) {
          if (o.module == b->module) {
            report(i, Rule::SelfNesting, b->module);
            break;
          }
        }
        if (stack.empty()) {
          if (b->parent) {
            report(i, Rule::ParentMismatch, "parent " + *b->parent + " is not open");
          } else if (b->depth != 0) {
            report(i, Rule::DepthRule, "top-level import must have depth 0");
          }
        } else {
          const Open& top = stack.back();
          if (!b->parent || *b->parent != top.module) {
            report(i, Rule::ParentMismatch, "expected parent " + top.module);
          } else if (b->depth != top.depth + 1) {
            report(i, Rule::DepthRule,
                   "depth " + std::to_string(b->depth) + " != parent depth + 1");
          }
        }
        stack.push_back(Open{b->module, b->depth, r.ts_ns, i});
        break;
      }
      case RecordKind::import_end: {
        const ImportEnd* e = r.import_end();
        if (!e) {
          report(i, Rule::PayloadKind);
          break;
        }
        auto& stack = open_by_tid[r.tid];
        auto it = std::find_if(stack.rbegin(), stack.rend(),
                               [&](const Open& o) { return o.module == e->module; });
        if (it == stack.rend()) {
          report(i, Rule::UnmatchedEnd, e->module);
          break;
        }
        if (it != stack.rbegin()) report(i, Rule::NestingOrder, e->module);
        if (e->dur_ns != r.ts_ns - it->ts_ns) {
          report(i, Rule::DurationMismatch,
                 "dur_ns " + std::to_string(e->dur_ns) + " != " +
                     std::to_string(r.ts_ns - it->ts_ns));
        }
        stack.erase(std::next(it).base());
        break;
      }
      case RecordKind::sample: {
        const StackSample* s = r.sample();
        if (!s) {
          report(i, Rule::PayloadKind);
          break;
        }
        if (s->frames.empty()) report(i, Rule::EmptyStack);
        if (s->weight < 1) report(i, Rule::BadWeight);
        for (const auto& f : s->frames) {
          if (f.file && (!f.line || *f.line < 1)) {
            report(i, Rule::BadLine, f.module);
            break;
          }
        }
        break;
      }
      case RecordKind::invoke_begin:
      case RecordKind::invoke_end:
        if (!r.invocation()) report(i, Rule::PayloadKind);
        break;
      case RecordKind::meta:
        report(i, Rule::PayloadKind, "meta inside records");
        break;
    }
  }

  std::vector<Violation> unmatched;
  for (const auto& [tid, stack] : open_by_tid) {
    for (const auto& o : stack) unmatched.push_back(Violation{o.index, Rule::UnmatchedBegin, o.module});
  }
  std::sort(unmatched.begin(), unmatched.end(),
            [](const Violation& a, const Violation& b) { return a.index < b.index; });
  out.insert(out.end(), unmatched.begin(), unmatched.end());
  return out;
}

// ---------------------------------------------------------------------------
// Helpers
// ---------------------------------------------------------------------------

/// Cold-start latency as measured by the runner: from the process-entry marker
/// (the meta record) to the first handler return (first invoke_end).
inline std::int64_t cold_start_latency_ns(const Trace& trace) {
  for (const auto& r : trace.records) {
    if (r.kind == RecordKind::invoke_end) return r.ts_ns - trace.meta.ts_ns;
  }
  throw MalformedTrace("trace " + trace.meta.run_id + " has no invoke_end marker");
}

/// Modules with a fresh import_begin anywhere in the trace.
inline std::vector<std::string> imported_modules(const Trace& trace) {
  std::vector<std::string> mods;
  for (const auto& r : trace.records) {
    if (const auto* b = r.import_begin()) mods.push_back(b->module);
  }
  std::sort(mods.begin(), mods.end());
  mods.erase(std::unique(mods.begin(), mods.end()), mods.end());
  return mods;
}

}  // namespace coldpath::trace
