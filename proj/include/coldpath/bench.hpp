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

// Repetition protocol for benchmark scenarios.
//
// Every cold start is a fresh runner process with an empty scratch working
// directory and an empty bytecode cache. Latency is read from the cold trace
// the runner writes (process-entry marker to first handler return), not from
// wall-clocking the process. Per-repetition medians are reduced by a final
// median.

#pragma once

#include <fcntl.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "coldpath/error.hpp"
#include "coldpath/scenario.hpp"
#include "coldpath/trace.hpp"

namespace coldpath::bench {

inline constexpr double kStabilityThreshold = 0.05;
inline constexpr double kOverheadBound = 0.10;

struct RunConfig {
  int cold_starts_per_rep = 20;
  int repetitions = 5;
  bool randomize_order = true;
  std::uint64_t seed = 0;
  std::chrono::milliseconds timeout{60'000};
  // Runner executable and leading arguments.
  std::vector<std::string> runner_command{"coldpath-runner"};
  int warm_invocations = 5;
  int sample_interval_ms = 10;
  bool instrumented = true;
  // Root for per-run scratch directories; empty means default_scratch_dir().
  std::filesystem::path scratch;

  static RunConfig full_scale() {
    RunConfig cfg;
    cfg.cold_starts_per_rep = 500;
    cfg.repetitions = 5;
    return cfg;
  }

  void validate() const {
    if (repetitions < 1) throw std::invalid_argument("repetitions must be >= 1");
    if (cold_starts_per_rep < 1) throw std::invalid_argument("cold starts per repetition must be >= 1");
    if (runner_command.empty()) throw std::invalid_argument("runner command is empty");
  }
};

/// $COLDPATH_SCRATCH, or <tmp>/coldpath.
inline std::filesystem::path default_scratch_dir() {
  if (const char* env = std::getenv("COLDPATH_SCRATCH"); env && *env) return env;
  return std::filesystem::temp_directory_path() / "coldpath";
}

struct RunTraces {
  int rep = 0;
  int run = 0;
  std::filesystem::path cold;
  std::filesystem::path warm;
};

struct RunResult {
  std::string scenario_id;
  std::vector<double> per_rep_medians;
  double grand_median_ns = 0.0;
  double rel_spread = 0.0;
  std::vector<RunTraces> traces;
  // must_blame modules missing a fresh import in some cold trace.
  std::vector<std::string> reset_violations;
};

inline double median(std::vector<double> v) {
  if (v.empty()) throw std::invalid_argument("median of empty sample");
  std::sort(v.begin(), v.end());
  std::size_t mid = v.size() / 2;
  return v.size() % 2 ? v[mid] : (v[mid - 1] + v[mid]) / 2.0;
}

/// (max − min) / median over per-repetition medians.
inline double relative_spread(std::span<const double> per_rep_medians) {
  auto [lo, hi] = std::minmax_element(per_rep_medians.begin(), per_rep_medians.end());
  double range = *hi - *lo;
  double mid = median({per_rep_medians.begin(), per_rep_medians.end()});
  if (range == 0.0) return 0.0;
  if (mid == 0.0) return std::numeric_limits<double>::infinity();
  return range / mid;
}

/// Median-of-medians over per-repetition latency samples (ns).
inline RunResult aggregate_runs(std::string scenario_id,
                                const std::vector<std::vector<std::int64_t>>& latencies_per_rep) {
  if (latencies_per_rep.empty()) throw std::invalid_argument("no repetitions to aggregate");
  RunResult r;
  r.scenario_id = std::move(scenario_id);
  for (const auto& rep : latencies_per_rep) {
    r.per_rep_medians.push_back(median(std::vector<double>(rep.begin(), rep.end())));
  }
  r.grand_median_ns = median(r.per_rep_medians);
  r.rel_spread = relative_spread(r.per_rep_medians);
  return r;
}

struct Stability {
  bool pass = false;
  double rel_spread = 0.0;
};

inline Stability check_stability(const RunResult& result, double threshold = kStabilityThreshold) {
  if (result.per_rep_medians.size() < 2) {
    throw InsufficientReps("stability check needs >= 2 repetitions, got " +
                           std::to_string(result.per_rep_medians.size()));
  }
  double spread = relative_spread(result.per_rep_medians);
  return {spread <= threshold, spread};
}

struct Overhead {
  double baseline_median_ns = 0.0;
  double instrumented_median_ns = 0.0;
  double ratio = 0.0;
  bool pass = false;
};

inline Overhead overhead_ratio(double baseline_median_ns, double instrumented_median_ns,
                               double bound = kOverheadBound) {
  if (baseline_median_ns == 0.0) throw ZeroBaseline("baseline median is 0");
  Overhead o;
  o.baseline_median_ns = baseline_median_ns;
  o.instrumented_median_ns = instrumented_median_ns;
  o.ratio = (instrumented_median_ns - baseline_median_ns) / baseline_median_ns;
  o.pass = o.ratio <= bound;
  return o;
}

// ---------------------------------------------------------------------------
// Process execution
// ---------------------------------------------------------------------------

namespace detail {

inline std::string read_tail(const std::filesystem::path& p, std::size_t max_bytes = 4096) {
  std::ifstream in(p, std::ios::binary);
  std::string s((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (s.size() > max_bytes) s = "..." + s.substr(s.size() - max_bytes);
  return s;
}

struct ChildSpec {
  std::vector<std::string> argv;
  // Empty: inherit the parent's working directory.
  std::filesystem::path cwd;
  std::vector<std::pair<std::string, std::string>> env;
  // Empty: inherit stdout/stderr.
  std::filesystem::path log;
};

/// Runs a child to completion; returns its exit status. Throws
/// ScenarioTimeout after killing a child that outlives `timeout`.
inline int run_child(const ChildSpec& spec, std::chrono::milliseconds timeout) {
  std::vector<char*> argv;
  for (const auto& a : spec.argv) argv.push_back(const_cast<char*>(a.c_str()));
  argv.push_back(nullptr);

  pid_t pid = fork();
  if (pid < 0) throw RunnerFailure("fork failed");
  if (pid == 0) {
    if (!spec.log.empty()) {
      int fd = ::open(spec.log.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
      if (fd >= 0) {
        dup2(fd, STDOUT_FILENO);
        dup2(fd, STDERR_FILENO);
        close(fd);
      }
    }
    if (!spec.cwd.empty() && chdir(spec.cwd.c_str()) != 0) _exit(126);
    for (const auto& [k, v] : spec.env) setenv(k.c_str(), v.c_str(), 1);
    execvp(argv[0], argv.data());
    _exit(127);
  }

  auto deadline = std::chrono::steady_clock::now() + timeout;
  int status = 0;
  while (true) {
    pid_t r = waitpid(pid, &status, WNOHANG);
    if (r == pid) break;
    if (r < 0) throw RunnerFailure("waitpid failed");
    if (std::chrono::steady_clock::now() >= deadline) {
      kill(pid, SIGKILL);
      waitpid(pid, &status, 0);
      throw ScenarioTimeout("runner exceeded " + std::to_string(timeout.count()) + " ms");
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(2));
  }
  if (WIFEXITED(status)) return WEXITSTATUS(status);
  return 128 + (WIFSIGNALED(status) ? WTERMSIG(status) : 0);
}

struct ColdStart {
  std::int64_t latency_ns = 0;
  RunTraces traces;
  std::vector<std::string> missing_fresh_imports;
};

inline ColdStart run_cold_start(const ScenarioMetadata& meta, const RunConfig& cfg, int rep, int run) {
  namespace fs = std::filesystem;
  fs::path scratch = cfg.scratch.empty() ? default_scratch_dir() : cfg.scratch;
  fs::path dir = scratch / meta.id / (cfg.instrumented ? "traced" : "baseline") /
                 ("rep" + std::to_string(rep)) / ("run" + std::to_string(run));
  fs::remove_all(dir);
  fs::create_directories(dir / "work");

  ColdStart out;
  out.traces = RunTraces{rep, run, dir / "cold.jsonl", dir / "warm.jsonl"};
  fs::path payload = dir / "payload.json";
  {
    std::ofstream p(payload);
    auto it = meta.params.find("payload");
    p << (it != meta.params.end() ? it->dump() : std::string("null")) << '\n';
  }

  ChildSpec spec;
  spec.argv = cfg.runner_command;
  for (const std::string& a :
       {std::string("--entry"), meta.entry(), std::string("--warm"), std::to_string(cfg.warm_invocations),
        std::string("--interval-ms"), std::to_string(cfg.sample_interval_ms), std::string("--cold-out"),
        out.traces.cold.string(), std::string("--warm-out"), out.traces.warm.string(),
        std::string("--payload"), payload.string()}) {
    spec.argv.push_back(a);
  }
  if (!cfg.instrumented) spec.argv.push_back("--no-instrument");
  spec.cwd = dir / "work";
  spec.log = dir / "runner.log";
  fs::path scenario_dir = meta.dir.empty() ? fs::current_path() : fs::absolute(meta.dir);
  spec.env = {{"PYTHONPATH", (scenario_dir / "src").string() + ":" + scenario_dir.string()},
              {"PYTHONDONTWRITEBYTECODE", "1"},
              {"PYTHONPYCACHEPREFIX", (dir / "pycache").string()},
              {"COLDPATH_SCENARIO_DIR", scenario_dir.string()},
              {"COLDPATH_SCENARIO_ID", meta.id}};

  int status = run_child(spec, cfg.timeout);
  if (status != 0) {
    throw RunnerFailure(meta.id + " rep " + std::to_string(rep) + " run " + std::to_string(run) +
                        ": runner exited with status " + std::to_string(status) + "\n" +
                        read_tail(spec.log));
  }
  auto cold = trace::parse_trace(out.traces.cold);
  out.latency_ns = trace::cold_start_latency_ns(cold);
  if (cfg.instrumented) {
    auto imported = trace::imported_modules(cold);
    for (const auto& m : meta.must_blame) {
      if (!std::binary_search(imported.begin(), imported.end(), m)) out.missing_fresh_imports.push_back(m);
    }
  }
  return out;
}

}  // namespace detail

/// Runs every scenario under the repetition protocol. With randomize_order the
/// (scenario, repetition, run) schedule is shuffled by `cfg.seed`; aggregation
/// is by slot, so the schedule never changes the result for equal latencies.
inline std::vector<RunResult> run_corpus(std::span<const ScenarioMetadata> scenarios, const RunConfig& cfg) {
  cfg.validate();
  struct Slot {
    std::size_t scenario;
    int rep;
    int run;
  };
  std::vector<Slot> schedule;
  for (std::size_t s = 0; s < scenarios.size(); ++s) {
    for (int r = 0; r < cfg.repetitions; ++r) {
      for (int i = 0; i < cfg.cold_starts_per_rep; ++i) schedule.push_back({s, r, i});
    }
  }
  if (cfg.randomize_order) {
    std::mt19937_64 rng(cfg.seed);
    std::shuffle(schedule.begin(), schedule.end(), rng);
  }

  using Grid = std::vector<std::vector<std::int64_t>>;
  std::vector<Grid> latencies(scenarios.size(),
                              Grid(cfg.repetitions, std::vector<std::int64_t>(cfg.cold_starts_per_rep)));
  std::vector<std::vector<RunTraces>> traces(scenarios.size());
  std::vector<std::set<std::string>> violations(scenarios.size());
  for (const Slot& slot : schedule) {
    const auto& meta = scenarios[slot.scenario];
    auto cs = detail::run_cold_start(meta, cfg, slot.rep, slot.run);
    latencies[slot.scenario][slot.rep][slot.run] = cs.latency_ns;
    traces[slot.scenario].push_back(cs.traces);
    for (const auto& m : cs.missing_fresh_imports) {
      violations[slot.scenario].insert(m + " not freshly imported in rep " + std::to_string(slot.rep) +
                                       " run " + std::to_string(slot.run));
    }
  }

  std::vector<RunResult> results;
  for (std::size_t s = 0; s < scenarios.size(); ++s) {
    RunResult r = aggregate_runs(scenarios[s].id, latencies[s]);
    std::sort(traces[s].begin(), traces[s].end(), [](const RunTraces& a, const RunTraces& b) {
      return std::tie(a.rep, a.run) < std::tie(b.rep, b.run);
    });
    r.traces = std::move(traces[s]);
    r.reset_violations.assign(violations[s].begin(), violations[s].end());
    results.push_back(std::move(r));
  }
  return results;
}

inline RunResult run_scenario(const ScenarioMetadata& meta, const RunConfig& cfg) {
  return run_corpus(std::span<const ScenarioMetadata>(&meta, 1), cfg).front();
}

/// Runs the scenario without and with instrumentation and compares grand
/// medians against the overhead bound.
inline Overhead measure_overhead(const ScenarioMetadata& meta, RunConfig cfg, double bound = kOverheadBound) {
  cfg.instrumented = false;
  RunResult baseline = run_scenario(meta, cfg);
  cfg.instrumented = true;
  RunResult instrumented = run_scenario(meta, cfg);
  return overhead_ratio(baseline.grand_median_ns, instrumented.grand_median_ns, bound);
}

// ---------------------------------------------------------------------------
// Run manifest
// ---------------------------------------------------------------------------

inline nlohmann::ordered_json manifest_to_json(const RunConfig& cfg, std::span<const RunResult> results) {
  using oj = nlohmann::ordered_json;
  oj j;
  j["schema"] = 1;
  j["kind"] = "coldpath-run-manifest";
  oj c;
  c["cold_starts_per_rep"] = cfg.cold_starts_per_rep;
  c["repetitions"] = cfg.repetitions;
  c["randomize_order"] = cfg.randomize_order;
  c["timeout_ms"] = cfg.timeout.count();
  c["runner"] = cfg.runner_command;
  c["warm_invocations"] = cfg.warm_invocations;
  c["sample_interval_ms"] = cfg.sample_interval_ms;
  c["instrumented"] = cfg.instrumented;
  j["config"] = std::move(c);
  j["seed"] = cfg.seed;
  oj scenarios = oj::array();
  for (const auto& r : results) {
    oj s;
    s["id"] = r.scenario_id;
    s["per_rep_medians_ns"] = r.per_rep_medians;
    s["grand_median_ns"] = r.grand_median_ns;
    s["rel_spread"] = std::isfinite(r.rel_spread) ? oj(r.rel_spread) : oj(nullptr);
    s["stable"] = r.per_rep_medians.size() >= 2 ? oj(r.rel_spread <= kStabilityThreshold) : oj(nullptr);
    oj tr = oj::array();
    for (const auto& t : r.traces) {
      tr.push_back({{"rep", t.rep}, {"run", t.run}, {"cold", t.cold.string()}, {"warm", t.warm.string()}});
    }
    s["traces"] = std::move(tr);
    s["reset_violations"] = r.reset_violations;
    scenarios.push_back(std::move(s));
  }
  j["scenarios"] = std::move(scenarios);
  return j;
}

/// Reads the per-scenario latency summary back from a manifest.
inline std::vector<RunResult> load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest " + path.string());
  auto j = nlohmann::json::parse(in, nullptr, false);
  if (j.is_discarded() || !j.is_object() || j.value("kind", "") != "coldpath-run-manifest") {
    throw SchemaMismatch(path.string() + ": not a run manifest");
  }
  if (j.value("schema", 0) != 1) throw SchemaMismatch(path.string() + ": unsupported manifest schema");
  std::vector<RunResult> out;
  try {
    for (const auto& s : j.at("scenarios")) {
      RunResult r;
      r.scenario_id = s.at("id").get<std::string>();
      r.per_rep_medians = s.at("per_rep_medians_ns").get<std::vector<double>>();
      r.grand_median_ns = s.at("grand_median_ns").get<double>();
      r.rel_spread = s.at("rel_spread").is_null() ? std::numeric_limits<double>::infinity()
                                                  : s.at("rel_spread").get<double>();
      for (const auto& t : s.at("traces")) {
        r.traces.push_back({t.at("rep").get<int>(), t.at("run").get<int>(), t.at("cold").get<std::string>(),
                            t.at("warm").get<std::string>()});
      }
      r.reset_violations = s.at("reset_violations").get<std::vector<std::string>>();
      out.push_back(std::move(r));
    }
  } catch (const nlohmann::json::exception& e) {
    throw SchemaMismatch(path.string() + ": " + e.what());
  }
  return out;
}

}  // namespace coldpath::bench
