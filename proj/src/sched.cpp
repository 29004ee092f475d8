#include "murs/sched.hpp"

#include <algorithm>
#include <string>

#include "murs/error.hpp"

namespace murs::sched {

std::string_view to_string(Policy p) {
  switch (p) {
    case Policy::Murs: return "murs";
    case Policy::Fair: return "fair";
    case Policy::Fifo: return "fifo";
  }
  return "?";
}

Policy policy_from_string(std::string_view s) {
  if (s == "murs" || s == "MURS") return Policy::Murs;
  if (s == "fair" || s == "Fair" || s == "FAIR") return Policy::Fair;
  if (s == "fifo" || s == "Fifo" || s == "FIFO") return Policy::Fifo;
  throw SpecError("unknown scheduler policy '" + std::string(s) + "'");
}

void validate(const SchedulerConfig& c) {
  if (!(c.yellow > 0.0 && c.yellow < c.red && c.red < 1.0)) throw SpecError("thresholds need 0 < yellow < red < 1");
  for (const auto& [job, w] : c.fair_pool_weights) {
    if (!(w > 0.0)) throw SpecError("fair pool weight of job " + std::to_string(job) + " must be positive");
  }
}

std::string_view to_string(Gate g) {
  switch (g) {
    case Gate::Idle: return "idle";
    case Gate::SpillScreen: return "spill-screen";
    case Gate::QueueBusy: return "queue-busy";
    case Gate::Suspend: return "suspend";
  }
  return "?";
}

std::string_view to_string(DecisionKind k) {
  switch (k) {
    case DecisionKind::Suspend: return "suspend";
    case DecisionKind::Resume: return "resume";
    case DecisionKind::TaskComplete: return "complete";
    case DecisionKind::FullGc: return "full-gc";
  }
  return "?";
}

std::string_view to_string(Reason r) {
  switch (r) {
    case Reason::Yellow: return "yellow";
    case Reason::Red: return "red";
    case Reason::Spill: return "spill";
    case Reason::Complete: return "complete";
    case Reason::Receded: return "receded";
    case Reason::Stall: return "stall";
    case Reason::None: return "none";
  }
  return "?";
}

bool compute_spill(double consumption, double percent, double total_memory, std::size_t running_count) {
  if (running_count == 0) throw SpecError("compute_spill needs at least one running task");
  const double share = total_memory / static_cast<double>(running_count);
  if (consumption > share) return true;
  if (consumption <= 0.0) return false;
  if (percent <= 0.0) return true;  // projection is unbounded
  return consumption / percent > share;
}

std::vector<TaskView> selection_order(std::span<const TaskView> running) {
  std::vector<TaskView> order(running.begin(), running.end());
  std::sort(order.begin(), order.end(), [](const TaskView& a, const TaskView& b) {
    if (a.rate.has_value() != b.rate.has_value()) return !a.rate.has_value();
    if (a.rate && *a.rate != *b.rate) return *a.rate < *b.rate;
    return a.id < b.id;
  });
  return order;
}

SuspendProposal compute_suspend_tasks(std::span<const TaskView> running, double free_memory, double total_memory) {
  SuspendProposal out;
  const auto order = selection_order(running);
  std::size_t admitted = 0;
  while (free_memory > 0.0 && admitted < order.size()) {
    const auto& t = order[admitted];
    if (compute_spill(t.consumption, t.percent, total_memory, running.size())) {
      out.spill_screened = t.id;
      out.suspended = {t.id};
      return out;
    }
    free_memory -= t.consumption * (1.0 - t.percent);
    ++admitted;
  }
  for (std::size_t i = admitted; i < order.size(); ++i) out.suspended.push_back(order[i].id);
  return out;
}

Scheduler::Scheduler(SchedulerConfig config, Bytes total_memory)
    : config_(std::move(config)), total_memory_(static_cast<double>(total_memory)) {
  validate(config_);
}

void Scheduler::suspend(std::int64_t now_ns, std::vector<TaskId> ids, Reason reason, double fraction) {
  if (ids.empty()) return;
  for (auto id : ids) {
    queue_.push_back(id);
    flags_.insert(id);
  }
  log_.push_back(Decision{now_ns, DecisionKind::Suspend, std::move(ids), reason, fraction});
}

TickResult Scheduler::schedule_tick(std::int64_t now_ns, const heap::HeapSnapshot& heap,
                                    std::span<const TaskView> running) {
  TickResult r;
  if (config_.policy != Policy::Murs || running.empty()) return r;
  const double fraction = heap.long_living_fraction;
  if (fraction < config_.yellow) return r;

  // Never suspend every running task: the lightest one keeps the worker moving.
  auto keep_one = [&](std::vector<TaskId>& ids) {
    if (ids.size() == running.size()) ids.erase(ids.begin());
  };

  if (fraction < config_.red) {
    r.gate = Gate::SpillScreen;
    for (const auto& t : selection_order(running)) {
      if (compute_spill(t.consumption, t.percent, total_memory_, running.size())) r.suspended.push_back(t.id);
    }
    keep_one(r.suspended);
    suspend(now_ns, r.suspended, Reason::Yellow, fraction);
    return r;
  }
  if (!queue_.empty()) {
    r.gate = Gate::QueueBusy;
    return r;
  }
  r.gate = Gate::Suspend;
  auto proposal = compute_suspend_tasks(running, static_cast<double>(heap.free_bytes), total_memory_);
  r.suspended = std::move(proposal.suspended);
  keep_one(r.suspended);
  suspend(now_ns, r.suspended, proposal.spill_screened ? Reason::Spill : Reason::Red, fraction);
  return r;
}

std::optional<TaskId> Scheduler::on_task_complete(std::int64_t now_ns, TaskId finished) {
  log_.push_back(Decision{now_ns, DecisionKind::TaskComplete, {finished}, Reason::Complete, 0.0});
  if (queue_.empty()) return std::nullopt;
  const auto id = queue_.front();
  queue_.pop_front();
  flags_.erase(id);
  log_.push_back(Decision{now_ns, DecisionKind::Resume, {id}, Reason::Complete, 0.0});
  return id;
}

std::vector<TaskId> Scheduler::on_full_gc(std::int64_t now_ns, double fraction) {
  if (config_.policy != Policy::Murs) return {};
  log_.push_back(Decision{now_ns, DecisionKind::FullGc, {}, Reason::None, fraction});
  if (fraction >= config_.yellow || queue_.empty()) return {};
  std::vector<TaskId> resumed(queue_.begin(), queue_.end());
  queue_.clear();
  flags_.clear();
  log_.push_back(Decision{now_ns, DecisionKind::Resume, resumed, Reason::Receded, fraction});
  return resumed;
}

std::optional<TaskId> Scheduler::resolve_stall(std::int64_t now_ns, double fraction) {
  if (queue_.empty()) return std::nullopt;
  const auto id = queue_.front();
  queue_.pop_front();
  flags_.erase(id);
  log_.push_back(Decision{now_ns, DecisionKind::Resume, {id}, Reason::Stall, fraction});
  return id;
}

std::vector<TaskId> assign_slots(std::span<const PendingTask> pending, std::size_t free_slots, Policy policy,
                                 const std::map<JobId, std::size_t>& occupied_per_job,
                                 const std::map<JobId, double>& weights) {
  std::vector<TaskId> out;
  if (free_slots == 0 || pending.empty()) return out;
  if (policy == Policy::Fifo) {
    for (std::size_t i = 0; i < pending.size() && out.size() < free_slots; ++i) out.push_back(pending[i].id);
    return out;
  }

  // Per-job queues in first-appearance order (= submission order).
  std::vector<JobId> jobs;
  std::map<JobId, std::deque<TaskId>> queues;
  for (const auto& p : pending) {
    if (!queues.contains(p.job)) jobs.push_back(p.job);
    queues[p.job].push_back(p.id);
  }
  std::map<JobId, std::size_t> occupied = occupied_per_job;
  while (out.size() < free_slots) {
    std::optional<JobId> best;
    double best_load = 0.0;
    for (auto j : jobs) {
      if (queues[j].empty()) continue;
      auto w = weights.find(j);
      const double weight = w == weights.end() ? 1.0 : w->second;
      const double load = static_cast<double>(occupied[j]) / weight;
      if (!best || load < best_load) {
        best = j;
        best_load = load;
      }
    }
    if (!best) break;
    out.push_back(queues[*best].front());
    queues[*best].pop_front();
    ++occupied[*best];
  }
  return out;
}

}  // namespace murs::sched
