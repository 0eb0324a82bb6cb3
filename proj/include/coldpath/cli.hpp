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

// `coldpath` command line. Exit codes: 0 success, 1 domain error, 2 usage.

#pragma once

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "coldpath/bench.hpp"
#include "coldpath/cct.hpp"
#include "coldpath/compare.hpp"
#include "coldpath/error.hpp"
#include "coldpath/eval.hpp"
#include "coldpath/report.hpp"
#include "coldpath/scenario.hpp"
#include "coldpath/scorer.hpp"
#include "coldpath/trace.hpp"

namespace coldpath::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitDomain = 1;
inline constexpr int kExitUsage = 2;

// Thrown for argument values CLI11 cannot check on its own.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

inline score::Weights parse_weights(const std::string& s) {
  auto comma = s.find(',');
  if (comma == std::string::npos) throw UsageError("--weights expects L,U");
  score::Weights w;
  try {
    std::size_t used = 0;
    w.latency = std::stod(s.substr(0, comma), &used);
    if (used != comma) throw UsageError("--weights: bad latency weight");
    std::string rest = s.substr(comma + 1);
    w.usage = std::stod(rest, &used);
    if (used != rest.size()) throw UsageError("--weights: bad usage weight");
  } catch (const std::logic_error&) {
    throw UsageError("--weights expects two numbers L,U");
  }
  try {
    score::check_weights(w);
  } catch (const InvalidWeights& e) {
    throw UsageError(std::string("--weights: ") + e.what());
  }
  return w;
}

inline report::Format resolve_format(const std::string& flag, const std::string& out) {
  if (!flag.empty()) {
    auto f = report::format_from_string(flag);
    if (!f) throw UsageError("--format must be text, html or json");
    return *f;
  }
  auto ext = std::filesystem::path(out).extension().string();
  if (ext == ".html" || ext == ".htm") return report::Format::html;
  if (ext == ".json") return report::Format::json;
  return report::Format::text;
}

inline void emit(const std::string& out_path, const std::string& content, std::ostream& out) {
  if (out_path.empty() || out_path == "-") {
    out << content;
    return;
  }
  std::ofstream f(out_path, std::ios::binary);
  if (!f) throw IoError("cannot write " + out_path);
  f << content;
  if (!f) throw IoError("write failed: " + out_path);
}

inline std::vector<std::string> runner_command(const std::string& flag) {
  std::string cmd = flag;
  if (cmd.empty()) {
    const char* env = std::getenv("COLDPATH_RUNNER");
    cmd = env && *env ? env : "coldpath-runner";
  }
  std::vector<std::string> argv;
  std::istringstream in(cmd);
  for (std::string tok; in >> tok;) argv.push_back(tok);
  if (argv.empty()) throw UsageError("empty runner command");
  return argv;
}

}  // namespace detail

/// Parses argv and runs one subcommand.
inline int dispatch(int argc, const char* const* argv, std::ostream& out = std::cout,
                    std::ostream& err = std::cerr) {
  CLI::App app{"coldpath: cold-start import attribution toolkit", "coldpath"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for every subcommand");

  // Shared analysis flags.
  std::string weights = "0.8,0.2";
  double theta = 0.5;
  double floor_ms = 10.0;
  std::uint64_t seed = 0;
  std::string format;
  std::string out_path;
  std::string basis = "exclusive";

  // trace
  auto* trace_cmd = app.add_subcommand("trace", "Run a target under the tracer runner");
  std::string entry, cold_out, warm_out, payload, runner;
  int warm_n = 20;
  int interval_ms = 10;
  int timeout_ms = 600'000;
  trace_cmd->add_option("--entry", entry, "pkg.mod:handler locator")->required();
  trace_cmd->add_option("--warm", warm_n, "Warm invocations")->check(CLI::NonNegativeNumber);
  trace_cmd->add_option("--interval-ms", interval_ms, "Sampling interval")->check(CLI::PositiveNumber);
  trace_cmd->add_option("--cold-out", cold_out, "Cold trace output")->required();
  trace_cmd->add_option("--warm-out", warm_out, "Warm trace output")->required();
  trace_cmd->add_option("--payload", payload, "Handler payload file");
  trace_cmd->add_option("--runner", runner, "Runner command (default $COLDPATH_RUNNER or coldpath-runner)");
  trace_cmd->add_option("--timeout-ms", timeout_ms, "Kill the runner after this long")->check(CLI::PositiveNumber);

  // analyze
  auto* analyze_cmd = app.add_subcommand("analyze", "Build the annotated CCT and render a report");
  std::string cold_path, warm_path, verdict_out, scenario_id, tool_id = "coldpath";
  analyze_cmd->add_option("--cold", cold_path, "Cold-phase trace")->required()->check(CLI::ExistingFile);
  analyze_cmd->add_option("--warm", warm_path, "Warm-phase trace")->required()->check(CLI::ExistingFile);
  analyze_cmd->add_option("--out", out_path, "Output file (stdout if omitted)");
  analyze_cmd->add_option("--format", format, "text|html|json (default: from --out extension)");
  analyze_cmd->add_option("--weights", weights, "Latency,usage weights");
  analyze_cmd->add_option("--theta", theta, "Relative blame cutoff")->check(CLI::Range(0.0, 1.0));
  analyze_cmd->add_option("--floor-ms", floor_ms, "Absolute blame floor")->check(CLI::NonNegativeNumber);
  analyze_cmd->add_option("--basis", basis, "exclusive|inclusive")->check(CLI::IsMember({"exclusive", "inclusive"}));
  analyze_cmd->add_option("--seed", seed, "Seed echoed into the report");
  analyze_cmd->add_option("--verdict-out", verdict_out, "Also write a verdict file for the blamed set");
  analyze_cmd->add_option("--scenario", scenario_id, "Scenario id for --verdict-out");
  analyze_cmd->add_option("--tool", tool_id, "Tool id for --verdict-out");

  // bench
  auto* bench_cmd = app.add_subcommand("bench", "Run the scenario corpus under the repetition protocol");
  std::string corpus;
  int reps = 5;
  int cold_starts = 20;
  bool full_scale = false;
  bool no_randomize = false;
  bool overhead = false;
  std::vector<std::string> only;
  int bench_warm = 5;
  bench_cmd->add_option("--corpus", corpus, "Corpus directory")->required();
  bench_cmd->add_option("--reps", reps, "Repetitions")->check(CLI::PositiveNumber);
  bench_cmd->add_option("--cold-starts", cold_starts, "Cold starts per repetition")->check(CLI::PositiveNumber);
  bench_cmd->add_flag("--full-scale", full_scale, "500 cold starts x 5 repetitions");
  bench_cmd->add_flag("--no-randomize", no_randomize, "Keep schedule order");
  bench_cmd->add_flag("--overhead", overhead, "Also measure tracer overhead against uninstrumented runs");
  bench_cmd->add_option("--scenario", only, "Only these scenario ids");
  bench_cmd->add_option("--seed", seed, "Schedule shuffle seed");
  bench_cmd->add_option("--runner", runner, "Runner command");
  bench_cmd->add_option("--warm", bench_warm, "Warm invocations per cold start")->check(CLI::NonNegativeNumber);
  bench_cmd->add_option("--interval-ms", interval_ms, "Sampling interval")->check(CLI::PositiveNumber);
  bench_cmd->add_option("--timeout-ms", timeout_ms, "Per cold start timeout")->check(CLI::PositiveNumber);
  bench_cmd->add_option("--out", out_path, "Run manifest path (default <scratch>/manifest.json)");

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "Score verdict files against corpus ground truth");
  std::vector<std::string> verdict_files;
  eval_cmd->add_option("--verdicts", verdict_files, "Verdict files")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--corpus", corpus, "Corpus directory")->required();
  eval_cmd->add_option("--format", format, "text|json");
  eval_cmd->add_option("--out", out_path, "Output file");

  // compare
  auto* compare_cmd = app.add_subcommand("compare", "Cross-tool table with pairwise statistics");
  std::vector<std::string> manifests;
  double alpha = 0.05;
  std::size_t bootstrap = 2000;
  compare_cmd->add_option("--verdicts", verdict_files, "Verdict files")->required()->check(CLI::ExistingFile);
  compare_cmd->add_option("--corpus", corpus, "Corpus directory")->required();
  compare_cmd->add_option("--manifests", manifests, "Bench run manifests to compare latencies")
      ->check(CLI::ExistingFile);
  compare_cmd->add_option("--seed", seed, "Bootstrap seed");
  compare_cmd->add_option("--alpha", alpha, "Family-wise significance level")->check(CLI::Range(0.0, 1.0));
  compare_cmd->add_option("--bootstrap", bootstrap, "Bootstrap replicates");
  compare_cmd->add_option("--format", format, "text|html|json");
  compare_cmd->add_option("--out", out_path, "Output file");

  // report
  auto* report_cmd = app.add_subcommand("report", "Re-render a JSON report export");
  std::string in_path;
  report_cmd->add_option("--in", in_path, "JSON report")->required()->check(CLI::ExistingFile);
  report_cmd->add_option("--format", format, "text|html|json");
  report_cmd->add_option("--out", out_path, "Output file");

  if (argc > 1 && argv[1][0] != '-') {
    std::string name = argv[1];
    if (app.get_subcommand_no_throw(name) == nullptr) {
      err << "coldpath: unknown subcommand '" << name << "'\n\n" << app.help();
      return kExitUsage;
    }
  }

  try {
    std::vector<std::string> args;
    for (int i = argc - 1; i >= 1; --i) args.emplace_back(argv[i]);
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      app.exit(e, out, err);
      return kExitOk;
    }
    err << "coldpath: " << e.what() << "\n\n" << app.help();
    return kExitUsage;
  }

  try {
    if (*trace_cmd) {
      bench::detail::ChildSpec spec;
      spec.argv = detail::runner_command(runner);
      for (const std::string& a : {std::string("--entry"), entry, std::string("--warm"), std::to_string(warm_n),
                                   std::string("--interval-ms"), std::to_string(interval_ms),
                                   std::string("--cold-out"), cold_out, std::string("--warm-out"), warm_out}) {
        spec.argv.push_back(a);
      }
      if (!payload.empty()) {
        spec.argv.push_back("--payload");
        spec.argv.push_back(payload);
      }
      out.flush();
      int status = bench::detail::run_child(spec, std::chrono::milliseconds(timeout_ms));
      if (status != 0) throw RunnerFailure("runner exited with status " + std::to_string(status));
      auto cold = trace::parse_trace(std::filesystem::path(cold_out));
      auto warm = trace::parse_trace(std::filesystem::path(warm_out));
      out << "cold trace: " << cold_out << " (" << cold.records.size() << " records)\n"
          << "warm trace: " << warm_out << " (" << warm.records.size() << " records)\n";
      return kExitOk;
    }

    if (*analyze_cmd) {
      report::ReportConfig cfg;
      cfg.score.weights = detail::parse_weights(weights);
      cfg.score.basis = basis == "inclusive" ? score::TimeBasis::inclusive : score::TimeBasis::exclusive;
      cfg.blame.theta = theta;
      cfg.blame.floor_ns = static_cast<std::int64_t>(floor_ms * 1e6);
      cfg.seed = seed;
      auto fmt = detail::resolve_format(format, out_path);
      if (!verdict_out.empty() && scenario_id.empty()) throw UsageError("--verdict-out needs --scenario");

      auto annotated = cct::build_annotated(trace::parse_trace(std::filesystem::path(cold_path)),
                                            trace::parse_trace(std::filesystem::path(warm_path)));
      auto scores = score::score_modules(annotated, cfg.score);
      auto rep = report::build_report(annotated, scores, cfg);
      detail::emit(out_path, report::render(rep, fmt), out);
      if (!verdict_out.empty()) {
        eval::VerdictFile vf{tool_id, {eval::BlameVerdict{scenario_id, {rep.blamed.begin(), rep.blamed.end()}, tool_id}}};
        detail::emit(verdict_out, eval::verdicts_to_json(vf).dump(2) + "\n", out);
      }
      return kExitOk;
    }

    if (*bench_cmd) {
      bench::RunConfig cfg = full_scale ? bench::RunConfig::full_scale() : bench::RunConfig{};
      if (!full_scale) {
        cfg.repetitions = reps;
        cfg.cold_starts_per_rep = cold_starts;
      }
      cfg.randomize_order = !no_randomize;
      cfg.seed = seed;
      cfg.runner_command = detail::runner_command(runner);
      cfg.warm_invocations = bench_warm;
      cfg.sample_interval_ms = interval_ms;
      cfg.timeout = std::chrono::milliseconds(timeout_ms);
      cfg.scratch = bench::default_scratch_dir();

      auto discovery = bench::discover_scenarios(corpus);
      for (const auto& p : discovery.problems) err << "warning: " << p.reason << '\n';
      std::vector<bench::ScenarioMetadata> selected;
      for (auto& s : discovery.scenarios) {
        if (only.empty() || std::find(only.begin(), only.end(), s.id) != only.end()) selected.push_back(s);
      }
      auto results = bench::run_corpus(selected, cfg);

      std::vector<std::vector<std::string>> rows;
      for (std::size_t i = 0; i < results.size(); ++i) {
        const auto& r = results[i];
        std::string stable = "n/a";
        if (r.per_rep_medians.size() >= 2) stable = bench::check_stability(r).pass ? "pass" : "FAIL";
        std::vector<std::string> row{r.scenario_id, report::detail::ms(static_cast<std::int64_t>(r.grand_median_ns)),
                                     report::detail::fixed(r.rel_spread * 100.0, 2) + "%", stable,
                                     r.reset_violations.empty() ? "ok" : std::to_string(r.reset_violations.size())};
        if (overhead) {
          auto baseline_cfg = cfg;
          baseline_cfg.instrumented = false;
          auto base = bench::run_scenario(selected[i], baseline_cfg);
          auto o = bench::overhead_ratio(base.grand_median_ns, r.grand_median_ns);
          row.push_back(report::detail::fixed(o.ratio * 100.0, 2) + "% " + (o.pass ? "pass" : "FAIL"));
        }
        rows.push_back(std::move(row));
      }
      std::vector<std::string> header{"scenario", "median_ms", "rel_spread", "stable", "reset"};
      if (overhead) header.push_back("overhead");
      out << report::detail::table(header, rows);

      std::filesystem::path manifest = out_path.empty() ? cfg.scratch / "manifest.json" : std::filesystem::path(out_path);
      if (manifest.has_parent_path()) std::filesystem::create_directories(manifest.parent_path());
      detail::emit(manifest.string(), bench::manifest_to_json(cfg, results).dump(2) + "\n", out);
      out << "manifest: " << manifest.string() << '\n';
      return kExitOk;
    }

    if (*eval_cmd || *compare_cmd) {
      auto fmt = detail::resolve_format(format, out_path);
      auto discovery = bench::discover_scenarios(corpus);
      for (const auto& p : discovery.problems) err << "warning: " << p.reason << '\n';
      std::vector<eval::VerdictFile> tools;
      for (const auto& f : verdict_files) tools.push_back(eval::load_verdicts(f));

      compare::Comparison cmp;
      if (*eval_cmd) {
        cmp.tools = eval::compare_tools(tools, discovery.scenarios);
        std::string doc = compare::render_comparison(cmp, fmt);
        if (fmt == report::Format::text) doc += compare::render_scenarios(cmp);
        detail::emit(out_path, doc, out);
        return kExitOk;
      }
      std::vector<std::pair<std::string, std::vector<bench::RunResult>>> runs;
      for (const auto& m : manifests) runs.emplace_back(std::filesystem::path(m).stem().string(), bench::load_manifest(m));
      cmp = compare::build_comparison(tools, discovery.scenarios, runs, seed, alpha, bootstrap);
      detail::emit(out_path, compare::render_comparison(cmp, fmt), out);
      return kExitOk;
    }

    if (*report_cmd) {
      std::ifstream in(in_path);
      auto j = nlohmann::json::parse(in, nullptr, false);
      if (j.is_discarded()) throw SchemaMismatch(in_path + ": invalid JSON");
      auto rep = report::report_from_json(j);
      detail::emit(out_path, report::render(rep, detail::resolve_format(format, out_path)), out);
      return kExitOk;
    }
  } catch (const UsageError& e) {
    err << "coldpath: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::invalid_argument& e) {
    err << "coldpath: " << e.what() << '\n';
    return kExitUsage;
  } catch (const Error& e) {
    err << "coldpath: " << e.what() << '\n';
    return kExitDomain;
  } catch (const std::exception& e) {
    err << "coldpath: " << e.what() << '\n';
    return kExitDomain;
  }
  return kExitUsage;
}

}  // namespace coldpath::cli
