#pragma once

// Jobs, scenarios, and the shipped benchmark analogues (SQ, AQ, Sort, PR).

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "murs/apimodel.hpp"
#include "murs/heap.hpp"
#include "murs/kvdata.hpp"
#include "murs/sampler.hpp"
#include "murs/sched.hpp"

namespace murs::workloads {

struct StageSpec {
  std::vector<api::ApiCatalogEntry> pipeline;

  friend bool operator==(const StageSpec&, const StageSpec&) = default;
};

/// A linear chain of stages split at shuffles. With iterations = k > 1 the
/// last stage is repeated k times (PR-style loops).
struct JobSpec {
  std::string name;
  kv::DatasetSpec dataset;
  std::vector<StageSpec> stages;
  std::uint32_t iterations = 1;
  std::optional<std::size_t> cache_after_stage;  // index into the expanded chain
  std::uint32_t tasks_per_stage = 8;

  friend bool operator==(const JobSpec&, const JobSpec&) = default;
};

/// The full stage chain after expanding iterations.
std::vector<StageSpec> expand_stages(const JobSpec& job);

/// Throws SpecError for empty jobs, misplaced shuffle APIs, or a cache
/// index outside the chain.
void validate(const JobSpec& job);

/// Per-stage model sequences of the expanded chain.
std::vector<std::vector<api::MemoryModel>> job_model_sequences(const JobSpec& job);

/// Submit a job when another job's stage becomes ready.
struct StageTrigger {
  std::string job;
  std::size_t stage = 0;

  friend bool operator==(const StageTrigger&, const StageTrigger&) = default;
};

struct JobSubmission {
  JobSpec job;
  std::int64_t submit_time_ns = 0;
  std::optional<StageTrigger> trigger;

  friend bool operator==(const JobSubmission&, const JobSubmission&) = default;
};

struct EngineConfig {
  double compute_ns_per_byte = 1.0;
  double spill_ns_per_byte = 4.0;
  /// Share of the heap the shuffle memory manager hands out to buffers,
  /// before cached blocks are subtracted.
  double exec_memory_fraction = 0.6;
  Bytes buffer_entry_overhead = 32;
  Bytes group_element_overhead = 8;
  Bytes task_context_bytes = 0;
  Bytes job_context_bytes = 0;
  sampler::SamplerConfig sampler;
  std::string scratch_dir;  // spill files are written here when set

  friend bool operator==(const EngineConfig&, const EngineConfig&) = default;
};

void validate(const EngineConfig& c);

struct ScenarioSpec {
  std::string name;
  std::string description;
  std::vector<JobSubmission> jobs;
  heap::HeapConfig heap;
  sched::SchedulerConfig scheduler;
  std::uint32_t slots = 4;
  std::uint64_t seed = 0;
  EngineConfig engine;

  friend bool operator==(const ScenarioSpec&, const ScenarioSpec&) = default;
};

/// Checks every nested spec, unique job names, trigger targets, and that
/// scheduler thresholds mirror the heap's.
void validate(const ScenarioSpec& s);

/// The dataset a job actually runs on: its seed folded with the scenario seed.
kv::DatasetSpec effective_dataset(const ScenarioSpec& s, std::size_t job_index);

struct BuiltinJobs {
  JobSpec sq;
  JobSpec aq;
  JobSpec sort;
  JobSpec pr;
};

/// The four benchmark analogues at their default desk-scale sizes.
BuiltinJobs builtin_jobs();

/// Named shipped scenarios; every one runs under every policy.
std::vector<ScenarioSpec> builtin_scenarios();

/// Throws SpecError if no builtin scenario has this name.
ScenarioSpec builtin_scenario(const std::string& name);

}  // namespace murs::workloads
