#include "murs/workloads.hpp"

#include <set>
#include <string>

#include "murs/error.hpp"

namespace murs::workloads {

std::vector<StageSpec> expand_stages(const JobSpec& job) {
  std::vector<StageSpec> out = job.stages;
  if (!out.empty()) {
    for (std::uint32_t i = 1; i < job.iterations; ++i) out.push_back(job.stages.back());
  }
  return out;
}

void validate(const JobSpec& job) {
  if (job.name.empty()) throw SpecError("job needs a name");
  if (job.stages.empty()) throw SpecError("job '" + job.name + "' has no stages");
  if (job.iterations == 0) throw SpecError("job '" + job.name + "' needs at least one iteration");
  if (job.tasks_per_stage == 0) throw SpecError("job '" + job.name + "' needs at least one task per stage");
  kv::validate(job.dataset);
  const auto chain = expand_stages(job);
  for (std::size_t k = 0; k < chain.size(); ++k) {
    const auto& p = chain[k].pipeline;
    if (p.empty()) throw SpecError("job '" + job.name + "' stage " + std::to_string(k) + " is empty");
    for (const auto& e : p) {
      if (e.phase_affinity == api::Phase::Read && !e.buffers()) {
        throw SpecError("job '" + job.name + "': read-phase API '" + e.name() + "' must be a shuffle API");
      }
      if (e.phase_affinity == api::Phase::Process && e.buffers()) {
        throw SpecError("job '" + job.name + "': shuffle API '" + e.name() + "' cannot run in the process phase");
      }
      if (e.phase_affinity == api::Phase::Read && k == 0) {
        throw SpecError("job '" + job.name + "': the first stage has no upstream shuffle to read");
      }
    }
    (void)api::task_model_sequence(p, job.cache_after_stage && *job.cache_after_stage == k);
  }
  if (job.cache_after_stage && *job.cache_after_stage >= chain.size()) {
    throw SpecError("job '" + job.name + "': cache_after_stage is outside the stage chain");
  }
}

std::vector<std::vector<api::MemoryModel>> job_model_sequences(const JobSpec& job) {
  std::vector<std::vector<api::MemoryModel>> out;
  const auto chain = expand_stages(job);
  for (std::size_t k = 0; k < chain.size(); ++k) {
    out.push_back(api::task_model_sequence(chain[k].pipeline, job.cache_after_stage && *job.cache_after_stage == k));
  }
  return out;
}

void validate(const EngineConfig& c) {
  if (c.compute_ns_per_byte < 0.0 || c.spill_ns_per_byte < 0.0) throw SpecError("engine costs must be non-negative");
  if (!(c.exec_memory_fraction > 0.0 && c.exec_memory_fraction <= 1.0)) {
    throw SpecError("exec_memory_fraction must be in (0, 1]");
  }
  if (c.sampler.period_steps == 0) throw SpecError("sampler period must be at least one step");
  if (c.sampler.window == 0) throw SpecError("sampler window must be at least one interval");
  if (c.sampler.trend_epsilon < 0.0) throw SpecError("trend epsilon must be non-negative");
}

void validate(const ScenarioSpec& s) {
  if (s.jobs.empty()) throw SpecError("scenario '" + s.name + "' has no jobs");
  if (s.slots == 0) throw SpecError("scenario '" + s.name + "' needs at least one slot");
  heap::validate(s.heap);
  sched::validate(s.scheduler);
  if (s.scheduler.yellow != s.heap.yellow || s.scheduler.red != s.heap.red) {
    throw SpecError("scheduler thresholds must mirror the heap thresholds");
  }
  validate(s.engine);

  std::set<std::string> names;
  for (const auto& sub : s.jobs) {
    validate(sub.job);
    if (!names.insert(sub.job.name).second) throw SpecError("duplicate job name '" + sub.job.name + "'");
    if (sub.submit_time_ns < 0) throw SpecError("job '" + sub.job.name + "' has a negative submit time");
  }
  for (const auto& sub : s.jobs) {
    if (!sub.trigger) continue;
    // Follow the trigger chain; it must end at a timed job.
    std::set<std::string> seen{sub.job.name};
    const JobSubmission* cur = &sub;
    while (cur->trigger) {
      const auto& t = *cur->trigger;
      const JobSubmission* target = nullptr;
      for (const auto& other : s.jobs) {
        if (other.job.name == t.job) target = &other;
      }
      if (!target) throw SpecError("job '" + cur->job.name + "' waits on unknown job '" + t.job + "'");
      if (t.stage >= expand_stages(target->job).size()) {
        throw SpecError("job '" + cur->job.name + "' waits on stage " + std::to_string(t.stage) + " of '" + t.job +
                        "', which has fewer stages");
      }
      if (!seen.insert(target->job.name).second) throw SpecError("job triggers form a cycle");
      cur = target;
    }
  }
  for (const auto& [job, w] : s.scheduler.fair_pool_weights) {
    if (job >= s.jobs.size()) throw SpecError("fair pool weight names job " + std::to_string(job) + " out of range");
    (void)w;
  }
}

kv::DatasetSpec effective_dataset(const ScenarioSpec& s, std::size_t job_index) {
  auto d = s.jobs.at(job_index).job.dataset;
  d.seed = kv::hash_combine(d.seed, s.seed);
  return d;
}

namespace {

StageSpec stage(std::initializer_list<const char*> names) {
  StageSpec s;
  for (const auto* n : names) s.pipeline.push_back(api::lookup(n));
  return s;
}

}  // namespace

BuiltinJobs builtin_jobs() {
  BuiltinJobs b;

  b.sq.name = "SQ";
  b.sq.dataset = {40'000, 40'000, kv::KeyPattern::Random, 4000, 11};
  b.sq.stages = {stage({"filter"})};

  b.aq.name = "AQ";
  b.aq.dataset = {40'000, 1'500, kv::KeyPattern::Random, 4000, 23};
  b.aq.stages = {stage({"flatMap", "reduceByKey"}), stage({"reduceByKey@read", "map"})};

  b.sort.name = "Sort";
  b.sort.dataset = {40'000, 40'000, kv::KeyPattern::AllUnique, 4000, 37};
  b.sort.stages = {stage({"map", "distinct"}), stage({"distinct@read", "partitionBy"}), stage({"sortByKey"})};

  b.pr.name = "PR";
  b.pr.dataset = {10'000, 1'000, kv::KeyPattern::Clustered, 4000, 53};
  b.pr.stages = {stage({"map", "groupByKey"}), stage({"groupByKey@read", "map", "groupByKey"})};
  b.pr.iterations = 5;
  b.pr.cache_after_stage = 1;
  return b;
}

namespace {

constexpr Bytes MiB = Bytes{1} << 20;

ScenarioSpec base(std::string name, std::string description, Bytes heap_bytes) {
  ScenarioSpec s;
  s.name = std::move(name);
  s.description = std::move(description);
  s.heap.total_bytes = heap_bytes;
  s.heap.yellow = 0.4;
  s.heap.red = 0.8;
  s.scheduler.yellow = s.heap.yellow;
  s.scheduler.red = s.heap.red;
  s.scheduler.policy = sched::Policy::Murs;
  s.engine.exec_memory_fraction = 0.95;
  s.slots = 4;
  s.seed = 7;
  return s;
}

JobSpec resized(JobSpec j, std::uint64_t records, std::uint64_t keys) {
  j.dataset.record_count = records;
  j.dataset.key_cardinality = keys;
  return j;
}

}  // namespace

// Heap sizes sit where the co-running jobs keep the heap between yellow and
// red for most of the run; see the README on how sensitive that choice is.
std::vector<ScenarioSpec> builtin_scenarios() {
  const auto b = builtin_jobs();
  std::vector<ScenarioSpec> out;

  auto s = base("two-way-sort-sq", "Sort and SQ submitted together", 68 * MiB);
  s.jobs = {{b.sort, 0, {}}, {b.sq, 0, {}}};
  out.push_back(s);

  s = base("two-way-aq-sq", "AQ and SQ submitted together", 38 * MiB);
  s.jobs = {{resized(b.aq, 40'000, 2'500), 0, {}}, {resized(b.sq, 60'000, 60'000), 0, {}}};
  out.push_back(s);

  const auto three = std::vector<JobSubmission>{
      {resized(b.sort, 30'000, 30'000), 0, {}}, {b.aq, 0, {}}, {resized(b.sq, 60'000, 60'000), 0, {}}};
  s = base("three-way", "Sort, AQ and SQ submitted together", 48 * MiB);
  s.jobs = three;
  out.push_back(s);

  s = base("three-way-small-heap", "three-way on a heap too small for fair sharing", 47 * MiB);
  s.jobs = three;
  s.engine.task_context_bytes = 2 * MiB;
  out.push_back(s);

  s = base("cache-co-run", "PR with cached iterations; AQ arrives when PR's second iteration starts", 72 * MiB);
  s.jobs = {{b.pr, 0, {}}, {resized(b.aq, 40'000, 3'000), 0, StageTrigger{"PR", 2}}};
  out.push_back(s);
  return out;
}

ScenarioSpec builtin_scenario(const std::string& name) {
  for (auto& s : builtin_scenarios()) {
    if (s.name == name) return s;
  }
  throw SpecError("no builtin scenario named '" + name + "'");
}

}  // namespace murs::workloads
