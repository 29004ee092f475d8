#pragma once

// Record-at-a-time execution of read/process/write task pipelines against
// the heap model, driven by a deterministic virtual-time event loop over the
// worker's slots.

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "murs/apimodel.hpp"
#include "murs/heap.hpp"
#include "murs/kvdata.hpp"
#include "murs/sampler.hpp"
#include "murs/sched.hpp"
#include "murs/workloads.hpp"

namespace murs::engine {

using TaskId = std::uint32_t;
using JobId = std::uint32_t;
using kv::Record;

enum class StepResult { Progressed, SuspendedAtBoundary, Finished, SpillRequested, OutOfMemory };
enum class TaskState { Pending, Running, Suspended, Spilling, Finished };

std::string_view to_string(StepResult r);
std::string_view to_string(TaskState s);

/// Owner id of a job's context allocation; task ids stay below 2^32.
inline heap::OwnerId job_owner(JobId job) { return (heap::OwnerId{1} << 32) | job; }

/// Per-key (or, for sort, per-record) state held between records of a task.
/// Every byte it holds is a long-living heap allocation of the owning task.
class ShuffleBuffer {
 public:
  /// `merge_side` buffers consume combiners produced by an upstream
  /// shuffle write rather than raw values.
  ShuffleBuffer(api::OpKind op, bool merge_side, const workloads::EngineConfig& cfg, Bytes record_overhead);

  /// Adds one record; returns the growth in accounted bytes.
  Bytes insert(const Record& r);
  Bytes total_bytes() const { return bytes_; }
  std::size_t entries() const;
  bool empty() const { return entries() == 0; }

  /// Moves the contents into `store` (merging combiners) and empties the
  /// buffer. Returns (bytes, records) moved.
  std::pair<Bytes, std::uint64_t> spill_into(ShuffleBuffer& store);

  /// Final records in key order (then payload), merged with `spilled`.
  std::vector<Record> drain(const ShuffleBuffer* spilled) const;

 private:
  struct Combiner {
    std::uint64_t payload = 0;
    Bytes value_bytes = 0;
  };
  void merge(std::uint64_t key, const Combiner& c);

  api::OpKind op_;
  bool merge_side_;
  Bytes entry_overhead_;
  Bytes element_overhead_;
  Bytes record_overhead_;
  Bytes bytes_ = 0;
  std::unordered_map<std::uint64_t, Combiner> combiners_;
  std::vector<Record> records_;  // sortByKey / join
};

struct SpillFile {
  TaskId owner = 0;
  Bytes bytes_spilled = 0;
  std::uint64_t record_count = 0;
  std::string path;
};

/// Splits the shared execution pool among the running tasks holding buffer
/// memory; a task whose buffer outgrows its share (or the pool) must spill.
/// Suspended tasks keep their bytes but do not dilute the share.
class MemoryManager {
 public:
  MemoryManager(Bytes heap_total, double exec_fraction);

  /// Records growth; false means the owner should spill now.
  bool acquire(TaskId task, Bytes delta);
  void release(TaskId task, Bytes bytes);
  void release_all(TaskId task);
  void set_suspended(TaskId task, bool suspended);
  void add_cached(Bytes b) { cached_ += b; }
  void remove_cached(Bytes b) { cached_ -= std::min(cached_, b); }
  Bytes pool() const;
  Bytes held(TaskId task) const;

 private:
  Bytes pool_base_;
  Bytes cached_ = 0;
  Bytes used_ = 0;
  std::map<TaskId, Bytes> held_;
  std::set<TaskId> suspended_;
};

/// Compiled form of one stage's pipeline.
struct StagePlan {
  std::optional<api::ApiCatalogEntry> read;
  std::vector<api::ApiCatalogEntry> process;
  std::optional<api::ApiCatalogEntry> write;
  bool cache_output = false;
  bool read_merges = false;  // read side consumes upstream combiners

  static StagePlan compile(const workloads::StageSpec& stage, bool cache_output, bool upstream_combines);
};

/// Applies one process-phase API to a record.
void apply_process(const api::ApiCatalogEntry& api, const Record& in, Bytes record_overhead,
                   std::vector<Record>& out);

/// One task's execution state. The engine loop owns it; the scheduler only
/// touches the suspend flag.
class TaskExecutor {
 public:
  TaskExecutor(TaskId id, JobId job, std::uint32_t stage, std::uint32_t index, const StagePlan& plan,
               std::vector<Record> input, const workloads::EngineConfig& cfg, Bytes record_overhead,
               heap::Heap& heap, MemoryManager* memory);

  /// Processes exactly one record (or one drained buffer entry). Checks the
  /// suspend flag before touching the next record.
  StepResult step();
  /// Moves the active buffer to disk and frees its heap bytes.
  SpillFile spill();
  /// Frees the task's non-cached memory and returns its output records.
  std::vector<Record> finish();

  void set_suspend_flag(bool f) { suspend_flag_ = f; }
  bool suspend_flag() const { return suspend_flag_; }

  TaskId id() const { return id_; }
  JobId job() const { return job_; }
  std::uint32_t stage() const { return stage_; }
  std::uint32_t index() const { return index_; }
  TaskState state() const { return state_; }
  void set_state(TaskState s) { state_ = s; }

  std::int64_t last_cost_ns() const { return last_cost_ns_; }
  std::uint64_t processed_records() const { return processed_records_; }
  std::uint64_t remaining_records() const { return input_.size() - cursor_; }
  std::uint64_t total_records() const { return input_.size(); }
  Bytes shuffle_buffer_bytes() const;
  Bytes cached_bytes() const { return cached_bytes_; }
  Bytes consumption_bytes() const { return shuffle_buffer_bytes() + cached_bytes_; }
  Bytes peak_consumption() const { return peak_consumption_; }
  std::uint32_t spill_count() const { return spill_count_; }
  Bytes spill_bytes() const { return spill_bytes_; }
  sampler::TaskProbe probe() const;

 private:
  StepResult push(const Record& r);
  bool alloc(heap::AllocKind kind, Bytes bytes, bool cached = false);
  bool grow(ShuffleBuffer& buf, const Record& r);

  TaskId id_;
  JobId job_;
  std::uint32_t stage_;
  std::uint32_t index_;
  const StagePlan& plan_;
  std::vector<Record> input_;
  const workloads::EngineConfig& cfg_;
  Bytes record_overhead_;
  heap::Heap& heap_;
  MemoryManager* memory_;

  TaskState state_ = TaskState::Running;
  bool suspend_flag_ = false;
  bool context_allocated_ = false;
  std::size_t cursor_ = 0;
  Bytes total_bytes_ = 0;
  Bytes processed_bytes_ = 0;
  std::uint64_t processed_records_ = 0;
  std::uint64_t written_records_ = 0;

  std::optional<ShuffleBuffer> read_buf_;
  std::optional<ShuffleBuffer> read_spilled_;
  std::optional<ShuffleBuffer> write_buf_;
  std::optional<ShuffleBuffer> write_spilled_;
  ShuffleBuffer* last_grown_ = nullptr;
  bool draining_ = false;
  std::vector<Record> drained_;
  std::size_t drain_cursor_ = 0;
  std::vector<Record> direct_out_;
  std::vector<Record> scratch_a_;
  std::vector<Record> scratch_b_;

  Bytes cached_bytes_ = 0;
  Bytes peak_consumption_ = 0;
  std::uint32_t spill_count_ = 0;
  Bytes spill_bytes_ = 0;
  double pending_cost_ = 0.0;
  std::int64_t last_cost_ns_ = 0;
};

struct TaskRecord {
  TaskId id = 0;
  JobId job = 0;
  std::uint32_t stage = 0;
  std::uint32_t index = 0;
  std::int64_t start_ns = 0;
  std::int64_t end_ns = -1;
  std::int64_t gc_ns = 0;
  std::uint32_t spills = 0;
  Bytes spill_bytes = 0;
  Bytes peak_consumption = 0;
  std::uint64_t records_in = 0;
  std::vector<std::pair<std::int64_t, std::int64_t>> suspensions;  // [start, end)
  std::vector<std::pair<std::int64_t, double>> rate_history;
};

struct StageRecord {
  JobId job = 0;
  std::uint32_t stage = 0;
  std::uint32_t tasks = 0;
  std::int64_t ready_ns = -1;
  std::int64_t start_ns = -1;
  std::int64_t end_ns = -1;
};

struct JobRecord {
  JobId id = 0;
  std::string name;
  std::int64_t submit_ns = -1;
  std::int64_t end_ns = -1;
  bool completed = false;
  std::vector<Record> output;
};

struct RunResult {
  std::string scenario;
  sched::Policy policy = sched::Policy::Fair;
  bool ome = false;
  std::int64_t total_ns = 0;
  std::int64_t gc_pause_ns = 0;
  std::int64_t gc_task_weighted_ns = 0;  // sum over pauses of pause * running tasks
  std::uint64_t spill_events = 0;
  std::uint32_t spill_tasks = 0;
  std::uint32_t min_active_tasks = 0;
  std::uint64_t steps = 0;
  Bytes peak_heap_used = 0;
  std::vector<TaskRecord> tasks;
  std::vector<StageRecord> stages;
  std::vector<JobRecord> jobs;
  std::vector<heap::GcEvent> gc_log;
  std::vector<std::int64_t> gc_times_ns;  // event time of each gc_log entry
  std::vector<sched::Decision> decisions;
  std::vector<SpillFile> spill_files;
};

/// Runs every job of `scenario` on one worker under `policy`.
RunResult run_scenario(const workloads::ScenarioSpec& scenario, sched::Policy policy);

/// A single job alone on the scenario's worker configuration.
RunResult run_job(const workloads::JobSpec& job, const workloads::ScenarioSpec& worker, sched::Policy policy);

}  // namespace murs::engine
