#include "murs/sampler.hpp"

#include <algorithm>

namespace murs::sampler {

std::string_view to_string(TaskPhase p) {
  switch (p) {
    case TaskPhase::Read: return "read";
    case TaskPhase::Process: return "process";
    case TaskPhase::Write: return "write";
  }
  return "?";
}

std::string_view to_string(Trend t) {
  switch (t) {
    case Trend::Flat: return "flat";
    case Trend::Decreasing: return "decreasing";
    case Trend::Steady: return "steady";
    case Trend::Increasing: return "increasing";
  }
  return "?";
}

double completion_percent(const TaskMetrics& m) {
  if (m.total_bytes == 0) return 1.0;
  return std::min(1.0, static_cast<double>(m.processed_bytes) / static_cast<double>(m.total_bytes));
}

std::optional<RateEstimate> memory_usage_rate(const TaskMetrics& m, std::size_t window, double eps) {
  if (m.samples.size() < 2) return std::nullopt;
  const std::size_t intervals = std::min(window, m.samples.size() - 1);
  const std::size_t first = m.samples.size() - 1 - intervals;

  double sum = 0.0;
  std::size_t valid = 0;
  for (std::size_t i = first + 1; i < m.samples.size(); ++i) {
    const auto& a = m.samples[i - 1];
    const auto& b = m.samples[i];
    if (a.spill_count != b.spill_count) continue;
    if (b.processed_bytes <= a.processed_bytes) continue;
    const double grown =
        b.consumption_bytes > a.consumption_bytes ? static_cast<double>(b.consumption_bytes - a.consumption_bytes) : 0.0;
    sum += grown / static_cast<double>(b.processed_bytes - a.processed_bytes);
    ++valid;
  }
  if (valid == 0) return m.estimate;

  RateEstimate e{m.task_id, sum / static_cast<double>(valid), Trend::Steady};
  if (e.rate == 0.0) {
    e.trend = Trend::Flat;
  } else if (m.estimate) {
    const double prev = m.estimate->rate;
    if (prev == 0.0 || e.rate > prev * (1.0 + eps)) {
      e.trend = Trend::Increasing;
    } else if (e.rate < prev * (1.0 - eps)) {
      e.trend = Trend::Decreasing;
    }
  }
  return e;
}

Sampler::Sampler(SamplerConfig config) : config_(config) {}

void Sampler::sample_tick(std::int64_t now_ns, std::span<const TaskProbe> running, const heap::HeapSnapshot& heap) {
  ++ticks_;
  heap_ = heap;
  for (const auto& p : running) {
    auto& m = tasks_[p.task_id];
    m.task_id = p.task_id;
    m.phase = p.phase;
    m.processed_records = p.processed_records;
    m.total_records = p.total_records;
    m.processed_bytes = p.processed_bytes;
    m.total_bytes = p.total_bytes;
    m.shuffle_buffer_bytes = p.shuffle_buffer_bytes;
    m.cached_bytes = p.cached_bytes;
    m.written_records = p.written_records;
    m.spill_count = p.spill_count;
    m.consumption_bytes = p.shuffle_buffer_bytes + p.cached_bytes;
    m.completion_percent = completion_percent(m);

    m.samples.push_back(Sample{now_ns, m.processed_bytes, m.consumption_bytes, m.spill_count});
    while (m.samples.size() > config_.window + 1) m.samples.pop_front();

    auto est = memory_usage_rate(m, config_.window, config_.trend_epsilon);
    if (est) {
      m.estimate = est;
      m.rate_history.emplace_back(now_ns, est->rate);
    }
  }
}

const TaskMetrics* Sampler::metrics(TaskId id) const {
  auto it = tasks_.find(id);
  return it == tasks_.end() ? nullptr : &it->second;
}

std::optional<RateEstimate> Sampler::rate(TaskId id) const {
  auto* m = metrics(id);
  return m ? m->estimate : std::nullopt;
}

}  // namespace murs::sampler
