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

// Stand-in for the Python runner. Speaks the same flags and writes the same
// JSONL wire format, with behavior scripted through the payload file:
//
//   latency_ns     cold latency when instrumented (default 50 ms)
//   baseline_ns    cold latency with --no-instrument (default latency_ns)
//   per_rep_ns     extra latency added for rep R (read from the run dir name)
//   imports        [{module, dur_ns, children: [...]}]
//   samples        [[module, ...], ...]  one warm sample per entry
//   exit, stderr   exit status and message
//   sleep_ms       stall before doing anything
//   check_env      exit 9 unless the harness environment looks right

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <thread>

#include <nlohmann/json.hpp>

using json = nlohmann::ordered_json;
using nlohmann::ordered_json;

namespace {

struct Writer {
  std::ofstream out;
  std::int64_t tid = 7;

  void emit(const ordered_json& j) { out << j.dump() << '\n'; }

  void record(const char* kind, std::int64_t ts, ordered_json extra = ordered_json::object()) {
    ordered_json j;
    j["k"] = kind;
    j["ts_ns"] = ts;
    j["tid"] = tid;
    for (auto& [k, v] : extra.items()) j[k] = v;
    emit(j);
  }
};

// Emits one import subtree starting at `ts`; returns the end timestamp.
std::int64_t emit_import(Writer& w, const json& node, const json& parent, std::int64_t depth, std::int64_t ts) {
  const std::string mod = node.at("module").get<std::string>();
  const std::int64_t own = node.value("dur_ns", std::int64_t{1000});
  w.record("import_begin", ts,
           {{"mod", mod}, {"parent", parent}, {"depth", depth}, {"file", "/fake/" + mod + ".py"}});
  std::int64_t t = ts + own / 2;
  for (const auto& c : node.value("children", json::array())) t = emit_import(w, c, mod, depth + 1, t);
  t += own - own / 2;
  w.record("import_end", t, {{"mod", mod}, {"dur_ns", t - ts}});
  return t;
}

int rep_of(const std::filesystem::path& cold_out) {
  std::string rep = cold_out.parent_path().parent_path().filename().string();
  if (rep.rfind("rep", 0) == 0) return std::atoi(rep.c_str() + 3);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  std::string entry, cold_out, warm_out, payload_path;
  int warm = 0;
  bool instrument = true;
  for (int i = 1; i < argc; ++i) {
    std::string a = argv[i];
    auto next = [&]() -> std::string {
      if (i + 1 >= argc) {
        std::cerr << "missing value for " << a << '\n';
        std::exit(2);
      }
      return argv[++i];
    };
    if (a == "--entry") entry = next();
    else if (a == "--warm") warm = std::stoi(next());
    else if (a == "--interval-ms") next();
    else if (a == "--cold-out") cold_out = next();
    else if (a == "--warm-out") warm_out = next();
    else if (a == "--payload") payload_path = next();
    else if (a == "--no-instrument") instrument = false;
    else {
      std::cerr << "unknown flag " << a << '\n';
      return 2;
    }
  }
  if (entry.empty() || cold_out.empty() || warm_out.empty()) {
    std::cerr << "usage: fake_runner --entry E --cold-out C --warm-out W\n";
    return 2;
  }

  json p = json::object();
  if (!payload_path.empty()) {
    std::ifstream in(payload_path);
    p = json::parse(in, nullptr, false);
    if (p.is_discarded()) {
      std::cerr << "bad payload\n";
      return 3;
    }
    if (!p.is_object()) p = json::object();
  }

  if (auto ms = p.value("sleep_ms", 0); ms > 0) std::this_thread::sleep_for(std::chrono::milliseconds(ms));
  if (p.value("check_env", false)) {
    const char* id = std::getenv("COLDPATH_SCENARIO_ID");
    const char* pp = std::getenv("PYTHONPATH");
    const char* cache = std::getenv("PYTHONPYCACHEPREFIX");
    bool cwd_ok = std::filesystem::current_path().filename() == "work";
    if (!id || !pp || !cache || !cwd_ok) {
      std::cerr << "harness environment missing\n";
      return 9;
    }
  }
  if (int code = p.value("exit", 0); code != 0) {
    std::cerr << p.value("stderr", std::string("fake runner failure")) << '\n';
    return code;
  }

  std::int64_t latency = p.value("latency_ns", std::int64_t{50'000'000});
  if (!instrument) latency = p.value("baseline_ns", latency);
  if (p.contains("per_rep_ns")) {
    const auto& extra = p["per_rep_ns"];
    auto r = static_cast<std::size_t>(rep_of(cold_out));
    if (r < extra.size()) latency += extra[r].get<std::int64_t>();
  }

  const std::int64_t t0 = 1'000'000;
  {
    Writer w{std::ofstream(cold_out)};
    w.emit(ordered_json{{"k", "meta"}, {"ts_ns", t0}, {"tid", w.tid}, {"schema", 1}, {"run_id", entry},
                        {"phase", "cold"}, {"clock", "monotonic"}});
    std::int64_t t = t0 + 10;
    if (instrument) {
      json imports = p.value("imports", json::array({{{"module", "mod_a"}, {"dur_ns", 1000}}}));
      for (const auto& node : imports) t = emit_import(w, node, nullptr, 0, t + 1);
    }
    w.record("invoke_begin", t + 1, {{"seq", 0}});
    w.record("invoke_end", t0 + latency, {{"seq", 0}});
  }
  {
    Writer w{std::ofstream(warm_out)};
    w.emit(ordered_json{{"k", "meta"}, {"ts_ns", t0}, {"tid", w.tid}, {"schema", 1}, {"run_id", entry},
                        {"phase", "warm"}, {"clock", "monotonic"}});
    json samples = p.value("samples", json::array({json::array({"app"})}));
    std::int64_t t = t0;
    for (int i = 0; i < warm; ++i) {
      w.record("invoke_begin", ++t, {{"seq", i + 1}});
      if (instrument) {
        for (const auto& s : samples) {
          ordered_json frames = ordered_json::array();
          for (const auto& m : s) frames.push_back({{"mod", m}, {"fn", "f"}, {"file", nullptr}, {"line", nullptr}});
          w.record("sample", ++t, {{"stack", frames}});
        }
      }
      w.record("invoke_end", ++t, {{"seq", i + 1}});
    }
  }
  return 0;
}
