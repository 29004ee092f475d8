#pragma once

// Experiment reports (JSON per run, CSV per task) and A/B comparison.

#include <string>
#include <vector>

#include "json.hpp"
#include "murs/engine.hpp"
#include "murs/workloads.hpp"

namespace murs::harness {

using nlohmann::json;

/// Longest suspension interval of any task.
std::int64_t max_suspension_ns(const engine::RunResult& r);

/// `series` adds the GC timeline and per-task rate histories.
json report_json(const engine::RunResult& r, const workloads::ScenarioSpec& s, bool series = false);
std::string task_csv(const engine::RunResult& r);

struct RunOutput {
  engine::RunResult result;
  std::string report_path;
  std::string csv_path;
};

/// Runs `s` once per policy and writes <out_dir>/<scenario>-<policy>.{json,csv}.
std::vector<RunOutput> run(const workloads::ScenarioSpec& s, const std::vector<sched::Policy>& policies,
                           const std::string& out_dir, bool series = false);

/// (a - b) / a in percent: how much B improves on A. NaN when a is 0 and b is not.
double reduction_pct(double a, double b);
/// 200 (b - a) / (a + b): symmetric relative change, antisymmetric in (a, b).
double sym_delta_pct(double a, double b);

/// Deltas of B against A for total time, GC pause, spills, per-job times and
/// the OME outcome. A "scalability win" is A ending in OME while B completes.
json compare(const json& a, const json& b);
std::string format_comparison(const json& c);

json read_json(const std::string& path);

}  // namespace murs::harness
