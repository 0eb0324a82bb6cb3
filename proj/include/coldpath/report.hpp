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

// Analysis report with three views over an annotated CCT:
//   overhead  - modules ranked by initialization cost
//   priority  - modules ranked by combined (latency x rarity) score
//   source    - import site of every blamed module
// Rendered as text, static HTML or JSON. Output is a pure function of the
// inputs; no timestamps are embedded.

#pragma once

#include <algorithm>
#include <cstdint>
#include <iomanip>
#include <locale>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "coldpath/cct.hpp"
#include "coldpath/error.hpp"
#include "coldpath/eval.hpp"
#include "coldpath/scorer.hpp"

namespace coldpath::report {

inline constexpr int kReportSchema = 1;

enum class Format { text, html, json };

inline std::optional<Format> format_from_string(std::string_view s) {
  if (s == "text") return Format::text;
  if (s == "html") return Format::html;
  if (s == "json") return Format::json;
  return std::nullopt;
}

struct ReportConfig {
  score::ScoreConfig score;
  eval::BlameConfig blame;
  std::uint64_t seed = 0;
};

struct OverheadRow {
  std::string module;
  std::int64_t inclusive_ns = 0;
  std::int64_t exclusive_ns = 0;
  std::int64_t usage_count = 0;

  bool operator==(const OverheadRow&) const = default;
};

struct SourceRow {
  std::string module;
  std::optional<std::string> file;
  std::optional<std::string> importer;
  std::optional<std::string> importer_file;
  std::optional<std::int64_t> line;

  bool operator==(const SourceRow&) const = default;
};

struct Report {
  score::Weights weights;
  score::TimeBasis basis = score::TimeBasis::exclusive;
  std::string normalization{score::kNormalization};
  double theta = 0.5;
  std::int64_t floor_ns = 0;
  std::uint64_t seed = 0;

  std::int64_t total_init_ns = 0;
  std::int64_t total_samples = 0;
  std::vector<OverheadRow> overhead;
  std::vector<score::ModuleScore> priority;
  std::vector<SourceRow> source;
  std::vector<std::string> blamed;
  std::vector<std::string> untraced;
  cct::CctNode tree;

  bool operator==(const Report&) const = default;
};

/// Assembles the three views. Throws InconsistentInputs when a score names a
/// module the tree does not contain.
inline Report build_report(const cct::AnnotatedCct& annotated, const std::vector<score::ModuleScore>& scores,
                           const ReportConfig& cfg = {}) {
  auto totals = cct::module_totals(annotated.root);
  for (const auto& s : scores) {
    if (!totals.count(s.module)) {
      throw InconsistentInputs("score for '" + s.module + "' has no node in the tree");
    }
  }

  Report r;
  r.weights = cfg.score.weights;
  r.basis = cfg.score.basis;
  r.theta = cfg.blame.theta;
  r.floor_ns = cfg.blame.floor_ns;
  r.seed = cfg.seed;
  r.total_init_ns = annotated.total_init_ns;
  r.total_samples = annotated.usage.total_samples;
  r.untraced = annotated.untraced;
  r.tree = annotated.root;

  for (const auto& [name, t] : totals) {
    r.overhead.push_back(OverheadRow{name, t.inclusive_ns, t.exclusive_ns, annotated.usage.count(name)});
  }
  const bool exclusive = cfg.score.basis == score::TimeBasis::exclusive;
  std::sort(r.overhead.begin(), r.overhead.end(), [exclusive](const OverheadRow& a, const OverheadRow& b) {
    auto ka = exclusive ? a.exclusive_ns : a.inclusive_ns;
    auto kb = exclusive ? b.exclusive_ns : b.inclusive_ns;
    if (ka != kb) return ka > kb;
    return a.module < b.module;
  });

  r.priority = score::rank_modules(scores);
  auto blamed = eval::select_blamed(r.priority, cfg.blame);
  r.blamed.assign(blamed.begin(), blamed.end());
  for (const auto& m : r.blamed) {
    const auto& t = totals.at(m);
    r.source.push_back(SourceRow{m, t.file, t.importer, t.importer_file, t.import_line});
  }
  return r;
}

// ---------------------------------------------------------------------------
// JSON
// ---------------------------------------------------------------------------

namespace detail {

using oj = nlohmann::ordered_json;

template <class T>
oj nullable(const std::optional<T>& v) {
  return v ? oj(*v) : oj(nullptr);
}

template <class T>
std::optional<T> opt(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<T>();
}

inline oj tree_to_json(const cct::CctNode& n) {
  oj j;
  j["module"] = n.module;
  j["file"] = nullable(n.file);
  j["import_line"] = nullable(n.import_line);
  j["inclusive_ns"] = n.inclusive_ns;
  j["exclusive_ns"] = n.exclusive_ns;
  oj kids = oj::array();
  for (const auto& c : n.children) kids.push_back(tree_to_json(c));
  j["children"] = std::move(kids);
  return j;
}

inline cct::CctNode tree_from_json(const nlohmann::json& j) {
  cct::CctNode n;
  n.module = j.at("module").get<std::string>();
  n.file = opt<std::string>(j, "file");
  n.import_line = opt<std::int64_t>(j, "import_line");
  n.inclusive_ns = j.at("inclusive_ns").get<std::int64_t>();
  n.exclusive_ns = j.at("exclusive_ns").get<std::int64_t>();
  for (const auto& c : j.at("children")) n.children.push_back(tree_from_json(c));
  return n;
}

}  // namespace detail

inline nlohmann::ordered_json report_to_json(const Report& r) {
  using detail::oj;
  oj j;
  j["schema"] = kReportSchema;
  j["kind"] = "coldpath-report";
  oj cfg;
  cfg["weights"] = {{"latency", r.weights.latency}, {"usage", r.weights.usage}};
  cfg["basis"] = score::to_string(r.basis);
  cfg["normalization"] = r.normalization;
  cfg["theta"] = r.theta;
  cfg["floor_ns"] = r.floor_ns;
  cfg["seed"] = r.seed;
  j["config"] = std::move(cfg);
  j["totals"] = {{"total_init_ns", r.total_init_ns}, {"total_samples", r.total_samples}};

  oj overhead = oj::array();
  for (const auto& o : r.overhead) {
    overhead.push_back({{"module", o.module},
                        {"inclusive_ns", o.inclusive_ns},
                        {"exclusive_ns", o.exclusive_ns},
                        {"usage_count", o.usage_count}});
  }
  j["overhead"] = std::move(overhead);

  oj priority = oj::array();
  for (const auto& s : r.priority) {
    oj e;
    e["rank"] = s.rank;
    e["module"] = s.module;
    e["combined"] = s.combined;
    e["u_score"] = s.u_score;
    e["init_exclusive_ns"] = s.init_exclusive_ns;
    e["init_inclusive_ns"] = s.init_inclusive_ns;
    e["usage_count"] = s.usage_count;
    priority.push_back(std::move(e));
  }
  j["priority"] = std::move(priority);

  oj source = oj::array();
  for (const auto& s : r.source) {
    oj e;
    e["module"] = s.module;
    e["file"] = detail::nullable(s.file);
    e["importer"] = detail::nullable(s.importer);
    e["importer_file"] = detail::nullable(s.importer_file);
    e["line"] = detail::nullable(s.line);
    source.push_back(std::move(e));
  }
  j["source"] = std::move(source);
  j["blamed"] = r.blamed;
  j["untraced"] = r.untraced;
  j["tree"] = detail::tree_to_json(r.tree);
  return j;
}

/// Re-imports a JSON export. Throws SchemaMismatch on a foreign document or
/// schema version.
inline Report report_from_json(const nlohmann::json& j) {
  if (!j.is_object() || j.value("kind", "") != "coldpath-report") {
    throw SchemaMismatch("not a coldpath report");
  }
  if (!j.contains("schema") || j["schema"] != kReportSchema) {
    throw SchemaMismatch("unsupported report schema " + (j.contains("schema") ? j["schema"].dump() : "(none)"));
  }
  try {
    Report r;
    const auto& cfg = j.at("config");
    r.weights.latency = cfg.at("weights").at("latency").get<double>();
    r.weights.usage = cfg.at("weights").at("usage").get<double>();
    auto basis = cfg.at("basis").get<std::string>();
    if (basis != "exclusive" && basis != "inclusive") throw SchemaMismatch("bad basis " + basis);
    r.basis = basis == "exclusive" ? score::TimeBasis::exclusive : score::TimeBasis::inclusive;
    r.normalization = cfg.at("normalization").get<std::string>();
    r.theta = cfg.at("theta").get<double>();
    r.floor_ns = cfg.at("floor_ns").get<std::int64_t>();
    r.seed = cfg.at("seed").get<std::uint64_t>();
    r.total_init_ns = j.at("totals").at("total_init_ns").get<std::int64_t>();
    r.total_samples = j.at("totals").at("total_samples").get<std::int64_t>();
    for (const auto& o : j.at("overhead")) {
      r.overhead.push_back(OverheadRow{o.at("module").get<std::string>(), o.at("inclusive_ns").get<std::int64_t>(),
                                       o.at("exclusive_ns").get<std::int64_t>(),
                                       o.at("usage_count").get<std::int64_t>()});
    }
    for (const auto& e : j.at("priority")) {
      score::ModuleScore s;
      s.rank = e.at("rank").get<int>();
      s.module = e.at("module").get<std::string>();
      s.combined = e.at("combined").get<double>();
      s.u_score = e.at("u_score").get<double>();
      s.init_exclusive_ns = e.at("init_exclusive_ns").get<std::int64_t>();
      s.init_inclusive_ns = e.at("init_inclusive_ns").get<std::int64_t>();
      s.usage_count = e.at("usage_count").get<std::int64_t>();
      r.priority.push_back(std::move(s));
    }
    for (const auto& e : j.at("source")) {
      r.source.push_back(SourceRow{e.at("module").get<std::string>(), detail::opt<std::string>(e, "file"),
                                   detail::opt<std::string>(e, "importer"),
                                   detail::opt<std::string>(e, "importer_file"),
                                   detail::opt<std::int64_t>(e, "line")});
    }
    r.blamed = j.at("blamed").get<std::vector<std::string>>();
    r.untraced = j.at("untraced").get<std::vector<std::string>>();
    r.tree = detail::tree_from_json(j.at("tree"));
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw SchemaMismatch(std::string("malformed report: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// Text and HTML
// ---------------------------------------------------------------------------

namespace detail {

inline std::string ms(std::int64_t ns) {
  std::ostringstream o;
  o.imbue(std::locale::classic());
  o << std::fixed << std::setprecision(3) << static_cast<double>(ns) / 1e6;
  return o.str();
}

inline std::string fixed(double v, int digits) {
  std::ostringstream o;
  o.imbue(std::locale::classic());
  o << std::fixed << std::setprecision(digits) << v;
  return o.str();
}

inline std::string html_escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&#39;"; break;
      default: out += c;
    }
  }
  return out;
}

// importer_file:line of the import statement; "-" when the tracer had
// neither.
inline std::string site(const SourceRow& s) {
  if (!s.importer_file && !s.line) return "-";
  std::string out = s.importer_file.value_or("?");
  if (s.line) out += ":" + std::to_string(*s.line);
  return out;
}

// Display width in code points; cells may hold UTF-8 marks.
inline std::size_t display_width(std::string_view s) {
  std::size_t n = 0;
  for (unsigned char c : s) n += (c & 0xC0) != 0x80;
  return n;
}

// First two columns left-aligned, the rest right-aligned.
inline std::string table(const std::vector<std::string>& header, const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> width(header.size());
  for (std::size_t c = 0; c < header.size(); ++c) width[c] = display_width(header[c]);
  for (const auto& r : rows) {
    for (std::size_t c = 0; c < r.size(); ++c) width[c] = std::max(width[c], display_width(r[c]));
  }
  // Right-align a column only when every body cell is a number, ratio or
  // interval.
  std::vector<bool> right(header.size(), !rows.empty());
  for (const auto& r : rows) {
    for (std::size_t c = 0; c < r.size(); ++c) {
      bool numeric = !r[c].empty() && r[c].find_first_not_of("0123456789.-+%[], ") == std::string::npos;
      right[c] = right[c] && numeric;
    }
  }
  std::ostringstream o;
  auto line = [&](const std::vector<std::string>& cells) {
    std::string row;
    for (std::size_t c = 0; c < cells.size(); ++c) {
      std::string pad(width[c] - display_width(cells[c]), ' ');
      if (c > 0) row += "  ";
      row += right[c] ? pad + cells[c] : cells[c] + pad;
    }
    while (!row.empty() && row.back() == ' ') row.pop_back();
    o << row << '\n';
  };
  line(header);
  for (const auto& r : rows) line(r);
  return o.str();
}

inline constexpr std::string_view kHtmlHead = R"(<!DOCTYPE html>
<html lang="en">
<head>
<meta charset="utf-8">
<title>coldpath report</title>
<style>
body { font-family: sans-serif; margin: 2em; }
table { border-collapse: collapse; margin-bottom: 2em; }
th, td { border: 1px solid #ccc; padding: 4px 8px; text-align: right; }
th { background: #eee; cursor: pointer; }
td:first-child, td:nth-child(2) { text-align: left; }
</style>
<script>
function sortTable(th) {
  var table = th.closest('table'), idx = Array.prototype.indexOf.call(th.parentNode.children, th);
  var body = table.tBodies[0], rows = Array.prototype.slice.call(body.rows);
  var asc = th.getAttribute('data-dir') !== 'asc';
  rows.sort(function (a, b) {
    var x = a.cells[idx].textContent, y = b.cells[idx].textContent;
    var nx = parseFloat(x), ny = parseFloat(y);
    var c = (!isNaN(nx) && !isNaN(ny)) ? nx - ny : x.localeCompare(y);
    return asc ? c : -c;
  });
  rows.forEach(function (r) { body.appendChild(r); });
  th.setAttribute('data-dir', asc ? 'asc' : 'desc');
}
</script>
</head>
<body>
)";

inline std::string html_table(const std::string& id, const std::vector<std::string>& header,
                              const std::vector<std::vector<std::string>>& rows) {
  std::ostringstream o;
  o << "<table id=\"" << id << "\">\n<thead><tr>";
  for (const auto& h : header) o << "<th onclick=\"sortTable(this)\">" << html_escape(h) << "</th>";
  o << "</tr></thead>\n<tbody>\n";
  for (const auto& r : rows) {
    o << "<tr>";
    for (const auto& c : r) o << "<td>" << html_escape(c) << "</td>";
    o << "</tr>\n";
  }
  o << "</tbody>\n</table>\n";
  return o.str();
}

}  // namespace detail

inline std::string render(const Report& r, Format format) {
  if (format == Format::json) return report_to_json(r).dump(2) + "\n";

  const std::vector<std::string> overhead_header{"#", "module", "inclusive_ms", "exclusive_ms", "usage"};
  std::vector<std::vector<std::string>> overhead_rows;
  for (std::size_t i = 0; i < r.overhead.size(); ++i) {
    const auto& o = r.overhead[i];
    overhead_rows.push_back({std::to_string(i + 1), o.module, detail::ms(o.inclusive_ns),
                             detail::ms(o.exclusive_ns), std::to_string(o.usage_count)});
  }
  const std::vector<std::string> priority_header{"rank", "module", "combined", "u_ms_per_use", "init_ms", "usage"};
  std::vector<std::vector<std::string>> priority_rows;
  for (const auto& s : r.priority) {
    priority_rows.push_back({std::to_string(s.rank), s.module, detail::fixed(s.combined, 4),
                             detail::fixed(s.u_score / 1e6, 3), detail::ms(s.init_ns(r.basis)),
                             std::to_string(s.usage_count)});
  }
  const std::vector<std::string> source_header{"module", "file", "importer", "import site"};
  std::vector<std::vector<std::string>> source_rows;
  for (const auto& s : r.source) {
    source_rows.push_back({s.module, s.file.value_or("-"), s.importer.value_or("(top level)"), detail::site(s)});
  }

  std::ostringstream cfg;
  cfg << "weights latency=" << detail::fixed(r.weights.latency, 2) << " usage=" << detail::fixed(r.weights.usage, 2)
      << "  basis=" << score::to_string(r.basis) << "  theta=" << detail::fixed(r.theta, 2)
      << "  floor_ms=" << detail::ms(r.floor_ns) << "  seed=" << r.seed;
  std::ostringstream totals;
  totals << "total init " << detail::ms(r.total_init_ns) << " ms, " << r.total_samples << " warm samples, "
         << r.blamed.size() << " blamed";

  std::ostringstream o;
  if (format == Format::text) {
    o << "coldpath report\n" << cfg.str() << "\nnormalization: " << r.normalization << '\n' << totals.str() << "\n\n";
    o << "== Initialization Overhead ==\n" << detail::table(overhead_header, overhead_rows) << '\n';
    o << "== Inefficiency Prioritization ==\n" << detail::table(priority_header, priority_rows) << '\n';
    o << "== Source-Level Context ==\n";
    if (source_rows.empty()) {
      o << "(no module blamed)\n";
    } else {
      o << detail::table(source_header, source_rows);
    }
    if (!r.untraced.empty()) {
      o << "\nused but not traced:";
      for (const auto& u : r.untraced) o << ' ' << u;
      o << '\n';
    }
    return o.str();
  }

  o << detail::kHtmlHead;
  o << "<h1>coldpath report</h1>\n<p>" << detail::html_escape(cfg.str()) << "<br>normalization: "
    << detail::html_escape(r.normalization) << "<br>" << detail::html_escape(totals.str()) << "</p>\n";
  o << "<h2>Initialization Overhead</h2>\n" << detail::html_table("overhead", overhead_header, overhead_rows);
  o << "<h2>Inefficiency Prioritization</h2>\n" << detail::html_table("priority", priority_header, priority_rows);
  o << "<h2>Source-Level Context</h2>\n" << detail::html_table("source", source_header, source_rows);
  if (!r.untraced.empty()) {
    o << "<h2>Used but not traced</h2>\n<ul>\n";
    for (const auto& u : r.untraced) o << "<li>" << detail::html_escape(u) << "</li>\n";
    o << "</ul>\n";
  }
  o << "</body>\n</html>\n";
  return o.str();
}

/// Builds and renders in one step.
inline std::string render_report(const cct::AnnotatedCct& annotated, const std::vector<score::ModuleScore>& scores,
                                 Format format, const ReportConfig& cfg = {}) {
  return render(build_report(annotated, scores, cfg), format);
}

}  // namespace coldpath::report
