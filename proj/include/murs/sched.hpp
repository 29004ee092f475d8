#pragma once

// Memory-usage-rate scheduling: yellow/red gating, suspension proposals,
// spill screening, FIFO resume; plus Fair and FIFO slot assignment.

#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string_view>
#include <vector>

#include "murs/heap.hpp"
#include "murs/kvdata.hpp"

namespace murs::sched {

using TaskId = std::uint32_t;
using JobId = std::uint32_t;

enum class Policy { Murs, Fair, Fifo };

std::string_view to_string(Policy p);
Policy policy_from_string(std::string_view s);

struct SchedulerConfig {
  double yellow = 0.4;
  double red = 0.8;
  Policy policy = Policy::Murs;
  std::map<JobId, double> fair_pool_weights;

  friend bool operator==(const SchedulerConfig&, const SchedulerConfig&) = default;
};

void validate(const SchedulerConfig& c);

/// A running task as the scheduler sees it. `rate` is empty until the
/// sampler has measured the task.
struct TaskView {
  TaskId id = 0;
  std::optional<double> rate;
  double consumption = 0.0;
  double percent = 0.0;
};

/// True when the task already holds, or is projected to need, more than an
/// equal share of the heap (total / running_count).
bool compute_spill(double consumption, double percent, double total_memory, std::size_t running_count);

/// Ascending rate; unmeasured tasks first; ties by lower id.
std::vector<TaskView> selection_order(std::span<const TaskView> running);

struct SuspendProposal {
  std::vector<TaskId> suspended;        // in selection order
  std::optional<TaskId> spill_screened;  // set when the loop stopped on a spill screen
};

/// Admits tasks lightest-first, charging each one's remaining need
/// (consumption * (1 - percent)) against `free_memory` while it stays
/// positive; whatever was not admitted is suspended. If the task about to be
/// admitted screens true under compute_spill, it alone is suspended and the
/// loop stops.
SuspendProposal compute_suspend_tasks(std::span<const TaskView> running, double free_memory, double total_memory);

enum class Gate { Idle, SpillScreen, QueueBusy, Suspend };
std::string_view to_string(Gate g);

enum class DecisionKind { Suspend, Resume, TaskComplete, FullGc };
enum class Reason { Yellow, Red, Spill, Complete, Receded, Stall, None };

std::string_view to_string(DecisionKind k);
std::string_view to_string(Reason r);

struct Decision {
  std::int64_t time_ns = 0;
  DecisionKind kind = DecisionKind::Suspend;
  std::vector<TaskId> tasks;
  Reason reason = Reason::None;
  double heap_fraction = 0.0;
};

struct TickResult {
  Gate gate = Gate::Idle;
  std::vector<TaskId> suspended;
};

class Scheduler {
 public:
  Scheduler(SchedulerConfig config, Bytes total_memory);

  const SchedulerConfig& config() const { return config_; }

  /// Runs the four-way gate for one sampler tick over the non-suspended
  /// running tasks. Only the MURS policy ever suspends.
  TickResult schedule_tick(std::int64_t now_ns, const heap::HeapSnapshot& heap, std::span<const TaskView> running);

  /// One-for-one resume of the queue head when a task finishes.
  std::optional<TaskId> on_task_complete(std::int64_t now_ns, TaskId finished);

  /// After a full GC: if the estimate fell below yellow, resume everything.
  std::vector<TaskId> on_full_gc(std::int64_t now_ns, double long_living_fraction);

  /// Every slot holds a suspended task: resume the queue head so the worker
  /// makes progress.
  std::optional<TaskId> resolve_stall(std::int64_t now_ns, double long_living_fraction);

  bool is_suspended(TaskId id) const { return flags_.contains(id); }
  const std::deque<TaskId>& suspend_queue() const { return queue_; }
  const std::vector<Decision>& decision_log() const { return log_; }

 private:
  void suspend(std::int64_t now_ns, std::vector<TaskId> ids, Reason reason, double fraction);

  SchedulerConfig config_;
  double total_memory_;
  std::deque<TaskId> queue_;
  std::set<TaskId> flags_;
  std::vector<Decision> log_;
};

struct PendingTask {
  TaskId id = 0;
  JobId job = 0;
};

/// Picks up to `free_slots` tasks from `pending` (ordered by job submission,
/// then task index). Fair balances occupied slots per job by weight; Fifo
/// takes submission order; MURS places like Fair.
std::vector<TaskId> assign_slots(std::span<const PendingTask> pending, std::size_t free_slots, Policy policy,
                                 const std::map<JobId, std::size_t>& occupied_per_job,
                                 const std::map<JobId, double>& weights);

}  // namespace murs::sched
