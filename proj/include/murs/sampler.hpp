#pragma once

// Periodic per-task metric collection and the memory-usage-rate estimator.

#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include "murs/heap.hpp"
#include "murs/kvdata.hpp"

namespace murs::sampler {

using TaskId = std::uint32_t;

enum class TaskPhase { Read, Process, Write };
/// Flat/Decreasing/Steady/Increasing track Constant/SubLinear/Linear/SuperLinear.
enum class Trend { Flat, Decreasing, Steady, Increasing };

std::string_view to_string(TaskPhase p);
std::string_view to_string(Trend t);

struct SamplerConfig {
  std::uint64_t period_steps = 64;
  std::size_t window = 4;
  double trend_epsilon = 0.05;

  friend bool operator==(const SamplerConfig&, const SamplerConfig&) = default;
};

/// What the engine exposes about a task at a tick.
struct TaskProbe {
  TaskId task_id = 0;
  TaskPhase phase = TaskPhase::Read;
  std::uint64_t processed_records = 0;
  std::uint64_t total_records = 0;
  Bytes processed_bytes = 0;
  Bytes total_bytes = 0;
  Bytes shuffle_buffer_bytes = 0;
  Bytes cached_bytes = 0;
  std::uint64_t written_records = 0;
  std::uint32_t spill_count = 0;
};

struct Sample {
  std::int64_t time_ns = 0;
  Bytes processed_bytes = 0;
  Bytes consumption_bytes = 0;
  std::uint32_t spill_count = 0;
};

struct RateEstimate {
  TaskId task_id = 0;
  double rate = 0.0;  // long-living bytes per input byte
  Trend trend = Trend::Flat;
};

struct TaskMetrics {
  TaskId task_id = 0;
  TaskPhase phase = TaskPhase::Read;
  std::uint64_t processed_records = 0;
  std::uint64_t total_records = 0;
  Bytes processed_bytes = 0;
  Bytes total_bytes = 0;
  Bytes shuffle_buffer_bytes = 0;
  Bytes cached_bytes = 0;
  std::uint64_t written_records = 0;
  Bytes consumption_bytes = 0;
  std::uint32_t spill_count = 0;
  double completion_percent = 0.0;

  std::deque<Sample> samples;  // most recent window + 1
  std::vector<std::pair<std::int64_t, double>> rate_history;
  std::optional<RateEstimate> estimate;
};

/// processed/total input bytes; an empty split counts as complete.
double completion_percent(const TaskMetrics& m);

/// Windowed mean of per-interval rates (delta consumption / delta processed
/// bytes) over the last `window` intervals. Intervals containing a spill or
/// with no input progress are skipped; when none remain the previous
/// estimate carries over. nullopt means not yet measured.
std::optional<RateEstimate> memory_usage_rate(const TaskMetrics& m, std::size_t window, double trend_epsilon);

class Sampler {
 public:
  explicit Sampler(SamplerConfig config = {});

  const SamplerConfig& config() const { return config_; }

  /// Refreshes metrics of the running tasks in `running`; tasks not listed
  /// (suspended or finished) keep their last values.
  void sample_tick(std::int64_t now_ns, std::span<const TaskProbe> running, const heap::HeapSnapshot& heap);

  const TaskMetrics* metrics(TaskId id) const;
  std::optional<RateEstimate> rate(TaskId id) const;
  const heap::HeapSnapshot& heap_snapshot() const { return heap_; }
  std::uint64_t ticks() const { return ticks_; }
  const std::map<TaskId, TaskMetrics>& all() const { return tasks_; }

 private:
  SamplerConfig config_;
  std::map<TaskId, TaskMetrics> tasks_;
  heap::HeapSnapshot heap_;
  std::uint64_t ticks_ = 0;
};

}  // namespace murs::sampler
