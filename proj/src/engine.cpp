#include "murs/engine.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <stdexcept>

#include "murs/error.hpp"

namespace murs::engine {

std::string_view to_string(StepResult r) {
  switch (r) {
    case StepResult::Progressed: return "progressed";
    case StepResult::SuspendedAtBoundary: return "suspended";
    case StepResult::Finished: return "finished";
    case StepResult::SpillRequested: return "spill";
    case StepResult::OutOfMemory: return "out-of-memory";
  }
  return "?";
}

std::string_view to_string(TaskState s) {
  switch (s) {
    case TaskState::Pending: return "pending";
    case TaskState::Running: return "running";
    case TaskState::Suspended: return "suspended";
    case TaskState::Spilling: return "spilling";
    case TaskState::Finished: return "finished";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// ShuffleBuffer

ShuffleBuffer::ShuffleBuffer(api::OpKind op, bool merge_side, const workloads::EngineConfig& cfg,
                             Bytes record_overhead)
    : op_(op),
      merge_side_(merge_side),
      entry_overhead_(cfg.buffer_entry_overhead),
      element_overhead_(cfg.group_element_overhead),
      record_overhead_(record_overhead) {
  switch (op_) {
    case api::OpKind::ReduceByKey:
    case api::OpKind::Distinct:
    case api::OpKind::GroupByKey:
    case api::OpKind::SortByKey:
    case api::OpKind::Join:
      break;
    default:
      throw SpecError("operator does not keep a shuffle buffer");
  }
}

std::size_t ShuffleBuffer::entries() const {
  return (op_ == api::OpKind::SortByKey || op_ == api::OpKind::Join) ? records_.size() : combiners_.size();
}

void ShuffleBuffer::merge(std::uint64_t key, const Combiner& c) {
  auto [it, inserted] = combiners_.try_emplace(key, c);
  if (inserted) return;
  auto& cur = it->second;
  switch (op_) {
    case api::OpKind::ReduceByKey: cur.payload += c.payload; break;
    case api::OpKind::Distinct: cur.payload = std::min(cur.payload, c.payload); break;
    case api::OpKind::GroupByKey:
      cur.payload += c.payload;
      cur.value_bytes += c.value_bytes;
      break;
    default: break;
  }
}

Bytes ShuffleBuffer::insert(const Record& r) {
  const Bytes fixed = kv::kKeyBytes + record_overhead_;
  const Bytes value_len = r.size_bytes > fixed ? r.size_bytes - fixed : 0;
  Bytes growth = 0;
  switch (op_) {
    case api::OpKind::ReduceByKey:
    case api::OpKind::Distinct: {
      auto [it, inserted] = combiners_.try_emplace(r.key, Combiner{r.payload, value_len});
      if (inserted) {
        growth = kv::kKeyBytes + value_len + entry_overhead_;
      } else if (op_ == api::OpKind::ReduceByKey) {
        it->second.payload += r.payload;
      } else {
        it->second.payload = std::min(it->second.payload, r.payload);
      }
      break;
    }
    case api::OpKind::GroupByKey: {
      const std::uint64_t contribution = merge_side_ ? r.payload : kv::mix64(r.payload);
      auto [it, inserted] = combiners_.try_emplace(r.key, Combiner{0, 0});
      it->second.payload += contribution;
      it->second.value_bytes += value_len;
      growth = value_len + element_overhead_ + (inserted ? kv::kKeyBytes + entry_overhead_ : 0);
      break;
    }
    case api::OpKind::SortByKey:
    case api::OpKind::Join:
      records_.push_back(r);
      growth = r.size_bytes + element_overhead_;
      break;
    default: break;
  }
  bytes_ += growth;
  return growth;
}

std::pair<Bytes, std::uint64_t> ShuffleBuffer::spill_into(ShuffleBuffer& store) {
  const Bytes moved = bytes_;
  const std::uint64_t n = entries();
  if (op_ == api::OpKind::SortByKey || op_ == api::OpKind::Join) {
    store.records_.insert(store.records_.end(), records_.begin(), records_.end());
    records_.clear();
    records_.shrink_to_fit();
  } else {
    for (const auto& [k, c] : combiners_) store.merge(k, c);
    combiners_.clear();
  }
  store.bytes_ += moved;
  bytes_ = 0;
  return {moved, n};
}

std::vector<Record> ShuffleBuffer::drain(const ShuffleBuffer* spilled) const {
  std::vector<Record> out;
  if (op_ == api::OpKind::SortByKey || op_ == api::OpKind::Join) {
    out = records_;
    if (spilled) out.insert(out.end(), spilled->records_.begin(), spilled->records_.end());
    std::sort(out.begin(), out.end());
    if (op_ == api::OpKind::Join) {
      // Each record is paired with the smallest payload seen under its key.
      for (std::size_t i = 0; i < out.size();) {
        std::size_t j = i;
        while (j < out.size() && out[j].key == out[i].key) ++j;
        const auto smallest = out[i].payload;
        for (auto k = i; k < j; ++k) out[k].payload = kv::hash_combine(out[k].payload, smallest);
        i = j;
      }
    }
    return out;
  }
  ShuffleBuffer merged = *this;
  if (spilled) {
    for (const auto& [k, c] : spilled->combiners_) merged.merge(k, c);
  }
  out.reserve(merged.combiners_.size());
  for (const auto& [k, c] : merged.combiners_) {
    out.push_back(Record{k, c.payload, kv::record_size(c.value_bytes, record_overhead_)});
  }
  std::sort(out.begin(), out.end());
  return out;
}

// ---------------------------------------------------------------------------
// MemoryManager

MemoryManager::MemoryManager(Bytes heap_total, double exec_fraction)
    : pool_base_(static_cast<Bytes>(static_cast<double>(heap_total) * exec_fraction)) {}

Bytes MemoryManager::pool() const { return pool_base_ > cached_ ? pool_base_ - cached_ : 0; }

Bytes MemoryManager::held(TaskId task) const {
  auto it = held_.find(task);
  return it == held_.end() ? 0 : it->second;
}

bool MemoryManager::acquire(TaskId task, Bytes delta) {
  auto& mine = held_[task];
  mine += delta;
  used_ += delta;
  const Bytes p = pool();
  Bytes holders = 0;
  for (const auto& [t, b] : held_) holders += !suspended_.contains(t);
  return mine <= p / std::max<Bytes>(holders, 1) && used_ <= p;
}

void MemoryManager::set_suspended(TaskId task, bool suspended) {
  if (suspended) {
    suspended_.insert(task);
  } else {
    suspended_.erase(task);
  }
}

void MemoryManager::release(TaskId task, Bytes bytes) {
  auto it = held_.find(task);
  if (it == held_.end()) return;
  const Bytes b = std::min(bytes, it->second);
  it->second -= b;
  used_ -= b;
  if (it->second == 0) held_.erase(it);
}

void MemoryManager::release_all(TaskId task) { release(task, held(task)); }

// ---------------------------------------------------------------------------
// StagePlan

StagePlan StagePlan::compile(const workloads::StageSpec& stage, bool cache_output, bool upstream_combines) {
  // Validates placement of shuffle APIs.
  (void)api::task_model_sequence(stage.pipeline, cache_output);
  StagePlan plan;
  plan.cache_output = cache_output;
  for (const auto& e : stage.pipeline) {
    switch (e.phase_affinity) {
      case api::Phase::Read:
        if (!e.buffers()) throw SpecError("read-phase API '" + e.name() + "' must be a shuffle API");
        plan.read = e;
        break;
      case api::Phase::Process:
        if (e.buffers()) throw SpecError("shuffle API '" + e.name() + "' cannot run in the process phase");
        plan.process.push_back(e);
        break;
      case api::Phase::Write:
        plan.write = e;
        break;
    }
  }
  plan.read_merges = plan.read.has_value() && upstream_combines;
  return plan;
}

void apply_process(const api::ApiCatalogEntry& api, const Record& in, Bytes, std::vector<Record>& out) {
  const auto& p = api.params;
  switch (api.op) {
    case api::OpKind::Map:
      out.push_back(Record{in.key, kv::hash_combine(in.payload, p.salt + 1), in.size_bytes});
      break;
    case api::OpKind::Filter: {
      const auto h = kv::hash_combine(in.key ^ in.payload, p.salt + 7);
      const double u = static_cast<double>(h >> 11) * 0x1.0p-53;
      if (u < p.keep_fraction) out.push_back(in);
      break;
    }
    case api::OpKind::FlatMap:
      for (std::uint32_t j = 0; j < p.fanout; ++j) {
        auto key = in.key * p.fanout + j;
        if (p.key_modulus > 0) key %= p.key_modulus;
        out.push_back(Record{key, kv::hash_combine(in.payload, p.salt + j + 1), in.size_bytes});
      }
      break;
    case api::OpKind::PartitionBy:
      out.push_back(in);
      break;
    default:
      throw SpecError("API '" + api.name() + "' is not a process-phase transform");
  }
}

// ---------------------------------------------------------------------------
// TaskExecutor

namespace {

bool combines(const std::optional<api::ApiCatalogEntry>& write) {
  if (!write) return false;
  return write->op == api::OpKind::ReduceByKey || write->op == api::OpKind::Distinct ||
         write->op == api::OpKind::GroupByKey;
}

}  // namespace

TaskExecutor::TaskExecutor(TaskId id, JobId job, std::uint32_t stage, std::uint32_t index, const StagePlan& plan,
                           std::vector<Record> input, const workloads::EngineConfig& cfg, Bytes record_overhead,
                           heap::Heap& heap, MemoryManager* memory)
    : id_(id),
      job_(job),
      stage_(stage),
      index_(index),
      plan_(plan),
      input_(std::move(input)),
      cfg_(cfg),
      record_overhead_(record_overhead),
      heap_(heap),
      memory_(memory) {
  for (const auto& r : input_) total_bytes_ += r.size_bytes;
  if (plan_.read) read_buf_.emplace(plan_.read->op, plan_.read_merges, cfg_, record_overhead_);
  if (plan_.write && plan_.write->buffers()) write_buf_.emplace(plan_.write->op, false, cfg_, record_overhead_);
}

Bytes TaskExecutor::shuffle_buffer_bytes() const {
  return (read_buf_ ? read_buf_->total_bytes() : 0) + (write_buf_ ? write_buf_->total_bytes() : 0);
}

bool TaskExecutor::alloc(heap::AllocKind kind, Bytes bytes, bool cached) {
  if (bytes == 0) return true;
  return heap_.allocate(heap::Allocation{id_, kind, bytes, cached}) == heap::AllocStatus::Ok;
}

bool TaskExecutor::grow(ShuffleBuffer& buf, const Record& r) {
  const Bytes delta = buf.insert(r);
  if (delta == 0) return true;
  if (!alloc(heap::AllocKind::LongLiving, delta)) return false;
  if (memory_ && !memory_->acquire(id_, delta)) last_grown_ = &buf;
  peak_consumption_ = std::max(peak_consumption_, consumption_bytes());
  return true;
}

StepResult TaskExecutor::push(const Record& r) {
  scratch_a_.clear();
  scratch_a_.push_back(r);
  for (const auto& api : plan_.process) {
    scratch_b_.clear();
    for (const auto& x : scratch_a_) apply_process(api, x, record_overhead_, scratch_b_);
    for (const auto& y : scratch_b_) {
      pending_cost_ += static_cast<double>(y.size_bytes) * cfg_.compute_ns_per_byte;
      if (!alloc(heap::AllocKind::Temporary, y.size_bytes)) return StepResult::OutOfMemory;
      if (api.semantics.caches_result) {
        if (!alloc(heap::AllocKind::LongLiving, y.size_bytes, true)) return StepResult::OutOfMemory;
        cached_bytes_ += y.size_bytes;
        if (memory_) memory_->add_cached(y.size_bytes);
      }
    }
    std::swap(scratch_a_, scratch_b_);
  }
  if (plan_.cache_output) {
    for (const auto& y : scratch_a_) {
      if (!alloc(heap::AllocKind::LongLiving, y.size_bytes, true)) return StepResult::OutOfMemory;
      cached_bytes_ += y.size_bytes;
      if (memory_) memory_->add_cached(y.size_bytes);
    }
    peak_consumption_ = std::max(peak_consumption_, consumption_bytes());
  }
  for (const auto& y : scratch_a_) {
    if (write_buf_) {
      pending_cost_ += static_cast<double>(y.size_bytes) * cfg_.compute_ns_per_byte;
      if (!grow(*write_buf_, y)) return StepResult::OutOfMemory;
    } else {
      direct_out_.push_back(y);
    }
    ++written_records_;
  }
  return StepResult::Progressed;
}

StepResult TaskExecutor::step() {
  last_cost_ns_ = 0;
  pending_cost_ = 0.0;
  if (state_ == TaskState::Finished) return StepResult::Finished;
  if (suspend_flag_) return StepResult::SuspendedAtBoundary;

  auto done = [&] {
    return cursor_ == input_.size() && (!read_buf_ || (draining_ && drain_cursor_ == drained_.size()));
  };
  auto settle = [&](StepResult r) {
    last_cost_ns_ = std::llround(pending_cost_);
    if (r == StepResult::OutOfMemory) return r;
    if (last_grown_) return StepResult::SpillRequested;
    return done() ? StepResult::Finished : r;
  };

  if (!context_allocated_) {
    context_allocated_ = true;
    if (!alloc(heap::AllocKind::LongLiving, cfg_.task_context_bytes)) return settle(StepResult::OutOfMemory);
  }

  if (cursor_ < input_.size()) {
    const Record r = input_[cursor_++];
    ++processed_records_;
    processed_bytes_ += r.size_bytes;
    pending_cost_ += static_cast<double>(r.size_bytes) * cfg_.compute_ns_per_byte;
    if (!alloc(heap::AllocKind::Temporary, r.size_bytes)) return settle(StepResult::OutOfMemory);
    if (read_buf_) {
      if (!grow(*read_buf_, r)) return settle(StepResult::OutOfMemory);
      return settle(StepResult::Progressed);
    }
    return settle(push(r));
  }

  if (read_buf_ && !draining_) {
    drained_ = read_buf_->drain(read_spilled_ ? &*read_spilled_ : nullptr);
    draining_ = true;
    if (read_spilled_) pending_cost_ += static_cast<double>(read_spilled_->total_bytes()) * cfg_.spill_ns_per_byte;
  }
  if (read_buf_ && drain_cursor_ < drained_.size()) {
    return settle(push(drained_[drain_cursor_++]));
  }
  return settle(StepResult::Finished);
}

SpillFile TaskExecutor::spill() {
  last_cost_ns_ = 0;
  ShuffleBuffer* buf = last_grown_;
  last_grown_ = nullptr;
  if (!buf) buf = write_buf_ && !write_buf_->empty() ? &*write_buf_ : (read_buf_ ? &*read_buf_ : nullptr);
  SpillFile file{id_, 0, 0, {}};
  if (!buf || buf->empty()) return file;

  const bool is_read = read_buf_ && buf == &*read_buf_;
  auto& store = is_read ? read_spilled_ : write_spilled_;
  const auto& spec = is_read ? plan_.read : plan_.write;
  if (!store) store.emplace(spec->op, is_read && plan_.read_merges, cfg_, record_overhead_);
  auto [bytes, n] = buf->spill_into(*store);
  heap_.release(id_, bytes);
  if (memory_) memory_->release(id_, bytes);
  ++spill_count_;
  spill_bytes_ += bytes;
  file.bytes_spilled = bytes;
  file.record_count = n;
  last_cost_ns_ = std::llround(static_cast<double>(bytes) * cfg_.spill_ns_per_byte);

  if (!cfg_.scratch_dir.empty()) {
    std::filesystem::create_directories(cfg_.scratch_dir);
    file.path = (std::filesystem::path(cfg_.scratch_dir) /
                 ("spill-" + std::to_string(id_) + "-" + std::to_string(spill_count_) + ".txt"))
                    .string();
    std::ofstream(file.path) << n << ' ' << bytes << '\n';
  }
  return file;
}

std::vector<Record> TaskExecutor::finish() {
  last_cost_ns_ = 0;
  std::vector<Record> out;
  if (write_buf_) {
    out = write_buf_->drain(write_spilled_ ? &*write_spilled_ : nullptr);
    if (write_spilled_) {
      last_cost_ns_ = std::llround(static_cast<double>(write_spilled_->total_bytes()) * cfg_.spill_ns_per_byte);
    }
  } else {
    out = std::move(direct_out_);
  }
  heap_.free_task_memory(id_);
  if (memory_) memory_->release_all(id_);
  read_buf_.reset();
  read_spilled_.reset();
  write_buf_.reset();
  write_spilled_.reset();
  drained_ = {};
  input_ = {};
  state_ = TaskState::Finished;
  return out;
}

sampler::TaskProbe TaskExecutor::probe() const {
  sampler::TaskProbe p;
  p.task_id = id_;
  if (read_buf_ && !draining_) {
    p.phase = sampler::TaskPhase::Read;
  } else if (write_buf_) {
    p.phase = sampler::TaskPhase::Write;
  } else {
    p.phase = sampler::TaskPhase::Process;
  }
  p.processed_records = processed_records_;
  p.total_records = input_.size();
  p.processed_bytes = processed_bytes_;
  p.total_bytes = total_bytes_;
  p.shuffle_buffer_bytes = shuffle_buffer_bytes();
  p.cached_bytes = cached_bytes_;
  p.written_records = written_records_;
  p.spill_count = spill_count_;
  return p;
}

// ---------------------------------------------------------------------------
// Event loop

namespace {

struct JobRuntime {
  JobId id = 0;
  const workloads::JobSubmission* submission = nullptr;
  std::vector<workloads::StageSpec> stages;
  std::vector<StagePlan> plans;
  std::optional<kv::Dataset> dataset;
  std::uint32_t tasks_per_stage = 1;
  bool submitted = false;
  bool done = false;
  std::size_t stage = 0;
  std::uint32_t finished_in_stage = 0;
  std::vector<std::vector<Record>> stage_outputs;  // by task index
  std::vector<std::vector<Record>> next_inputs;    // by partition
  std::vector<TaskId> task_ids;                    // every task ever created
};

struct PendingLaunch {
  TaskId id = 0;
  JobId job = 0;
  std::uint32_t stage = 0;
  std::uint32_t index = 0;
  std::int64_t ready_ns = 0;
};

struct Slot {
  std::int64_t clock = 0;
  std::optional<TaskId> task;
};

class Run {
 public:
  Run(const workloads::ScenarioSpec& s, sched::Policy policy)
      : spec_(s),
        heap_(s.heap),
        memory_(s.heap.total_bytes, s.engine.exec_memory_fraction),
        sampler_(s.engine.sampler),
        scheduler_(with_policy(s.scheduler, policy), s.heap.total_bytes),
        slots_(s.slots) {
    workloads::validate(s);
    result_.scenario = s.name;
    result_.policy = policy;
    jobs_.resize(s.jobs.size());
    for (std::size_t i = 0; i < s.jobs.size(); ++i) {
      auto& j = jobs_[i];
      j.id = static_cast<JobId>(i);
      j.submission = &s.jobs[i];
      j.stages = workloads::expand_stages(s.jobs[i].job);
      j.tasks_per_stage = s.jobs[i].job.tasks_per_stage;
      const auto& cache = s.jobs[i].job.cache_after_stage;
      for (std::size_t k = 0; k < j.stages.size(); ++k) {
        const bool upstream = k > 0 && combines(j.plans[k - 1].write);
        j.plans.push_back(StagePlan::compile(j.stages[k], cache && *cache == k, upstream));
      }
      j.dataset.emplace(workloads::effective_dataset(s, i), static_cast<std::uint32_t>(i));
      JobRecord rec;
      rec.id = j.id;
      rec.name = s.jobs[i].job.name;
      result_.jobs.push_back(std::move(rec));
    }
  }

  RunResult run() {
    for (auto& j : jobs_) {
      if (!j.submission->trigger && j.submission->submit_time_ns == 0) submit(j, 0);
      if (ome_) return finalize();
    }
    while (!ome_) {
      launch_ready();
      if (ome_) break;
      auto slot = next_slot();
      auto sub = next_timed_submission();
      if (sub && (!slot || (*sub)->submission->submit_time_ns <= slots_[*slot].clock)) {
        now_ = std::max(now_, (*sub)->submission->submit_time_ns);
        submit(**sub, now_);
        continue;
      }
      if (!slot) {
        if (std::all_of(jobs_.begin(), jobs_.end(), [](const JobRuntime& j) { return j.done; })) break;
        if (!scheduler_.suspend_queue().empty()) {
          if (auto id = scheduler_.resolve_stall(now_, heap_.long_living_fraction())) resume(*id);
          continue;
        }
        throw std::logic_error("engine stalled with unfinished jobs");
      }
      step_slot(*slot);
    }
    return finalize();
  }

 private:
  static sched::SchedulerConfig with_policy(sched::SchedulerConfig c, sched::Policy p) {
    c.policy = p;
    return c;
  }

  TaskExecutor& exec(TaskId id) { return *executors_.at(id); }

  std::optional<std::size_t> next_slot() const {
    std::optional<std::size_t> best;
    for (std::size_t i = 0; i < slots_.size(); ++i) {
      const auto& s = slots_[i];
      if (!s.task || executors_.at(*s.task)->suspend_flag()) continue;
      if (!best || s.clock < slots_[*best].clock) best = i;
    }
    return best;
  }

  std::optional<JobRuntime*> next_timed_submission() {
    std::optional<JobRuntime*> best;
    for (auto& j : jobs_) {
      if (j.submitted || j.submission->trigger) continue;
      if (!best || j.submission->submit_time_ns < (*best)->submission->submit_time_ns) best = &j;
    }
    return best;
  }

  void submit(JobRuntime& j, std::int64_t at) {
    j.submitted = true;
    result_.jobs[j.id].submit_ns = at;
    if (spec_.engine.job_context_bytes > 0) {
      if (heap_.allocate(heap::Allocation{job_owner(j.id), heap::AllocKind::LongLiving,
                                          spec_.engine.job_context_bytes}) != heap::AllocStatus::Ok) {
        ome_ = true;
        return;
      }
      handle_gc_events();
    }
    make_stage_ready(j, at);
  }

  void make_stage_ready(JobRuntime& j, std::int64_t at) {
    const auto stage = static_cast<std::uint32_t>(j.stage);
    j.finished_in_stage = 0;
    j.stage_outputs.assign(j.tasks_per_stage, {});
    StageRecord sr;
    sr.job = j.id;
    sr.stage = stage;
    sr.tasks = j.tasks_per_stage;
    sr.ready_ns = at;
    stage_index_[{j.id, stage}] = result_.stages.size();
    result_.stages.push_back(sr);
    for (std::uint32_t i = 0; i < j.tasks_per_stage; ++i) {
      const auto id = static_cast<TaskId>(result_.tasks.size());
      TaskRecord tr;
      tr.id = id;
      tr.job = j.id;
      tr.stage = stage;
      tr.index = i;
      result_.tasks.push_back(tr);
      executors_.emplace_back(nullptr);
      j.task_ids.push_back(id);
      pending_.push_back(PendingLaunch{id, j.id, stage, i, at});
    }
    // Jobs waiting on this stage.
    for (auto& other : jobs_) {
      const auto& trig = other.submission->trigger;
      if (other.submitted || !trig) continue;
      if (trig->job == spec_.jobs[j.id].job.name && trig->stage == j.stage) submit(other, at);
    }
  }

  void launch_ready() {
    std::vector<std::size_t> free_slots;
    for (std::size_t i = 0; i < slots_.size(); ++i) {
      if (!slots_[i].task) free_slots.push_back(i);
    }
    if (free_slots.empty() || pending_.empty()) return;

    std::map<JobId, std::size_t> occupied;
    for (const auto& s : slots_) {
      if (s.task) ++occupied[executors_.at(*s.task)->job()];
    }
    std::stable_sort(pending_.begin(), pending_.end(),
                     [](const PendingLaunch& a, const PendingLaunch& b) { return a.job < b.job; });
    std::vector<sched::PendingTask> view;
    view.reserve(pending_.size());
    for (const auto& p : pending_) view.push_back(sched::PendingTask{p.id, p.job});
    const auto chosen = sched::assign_slots(view, free_slots.size(), scheduler_.config().policy, occupied,
                                            spec_.scheduler.fair_pool_weights);
    for (std::size_t n = 0; n < chosen.size(); ++n) {
      auto it = std::find_if(pending_.begin(), pending_.end(), [&](const auto& p) { return p.id == chosen[n]; });
      const PendingLaunch p = *it;
      pending_.erase(it);
      auto& slot = slots_[free_slots[n]];
      slot.clock = std::max({slot.clock, now_, p.ready_ns});
      slot.task = p.id;
      start_task(p, slot.clock);
    }
  }

  void start_task(const PendingLaunch& p, std::int64_t at) {
    auto& j = jobs_[p.job];
    std::vector<Record> input;
    if (p.stage == 0) {
      const auto splits = kv::split_dataset(*j.dataset, j.tasks_per_stage);
      input = j.dataset->materialize(splits[p.index]);
    } else {
      input = std::move(j.next_inputs[p.index]);
    }
    executors_[p.id] = std::make_unique<TaskExecutor>(p.id, p.job, p.stage, p.index, j.plans[p.stage],
                                                      std::move(input), spec_.engine,
                                                      j.dataset->spec().record_overhead, heap_, &memory_);
    auto& tr = result_.tasks[p.id];
    tr.start_ns = at;
    tr.records_in = executors_[p.id]->total_records();
    auto& sr = result_.stages[stage_index_.at({p.job, p.stage})];
    if (sr.start_ns < 0) sr.start_ns = at;
  }

  void step_slot(std::size_t slot_index) {
    auto& slot = slots_[slot_index];
    auto& ex = exec(*slot.task);
    now_ = std::max(now_, slot.clock);
    const auto r = ex.step();
    slot.clock += ex.last_cost_ns();
    ++result_.steps;
    handle_gc_events();

    switch (r) {
      case StepResult::OutOfMemory:
        ome_ = true;
        return;
      case StepResult::SpillRequested: {
        auto file = ex.spill();
        slot.clock += ex.last_cost_ns();
        if (file.bytes_spilled > 0) {
          ++result_.spill_events;
          result_.spill_files.push_back(std::move(file));
        }
        break;
      }
      case StepResult::Finished:
        complete(slot_index);
        break;
      default:
        break;
    }
    if (result_.steps % spec_.engine.sampler.period_steps == 0) tick();
  }

  void handle_gc_events() {
    const auto& log = heap_.gc_log();
    for (; gc_seen_ < log.size(); ++gc_seen_) {
      const auto& e = log[gc_seen_];
      result_.gc_times_ns.push_back(now_);
      std::int64_t running = 0;
      for (auto& s : slots_) {
        if (!s.task || exec(*s.task).suspend_flag()) continue;
        s.clock += e.pause_ns;
        result_.tasks[*s.task].gc_ns += e.pause_ns;
        ++running;
      }
      result_.gc_task_weighted_ns += e.pause_ns * running;
      if (e.kind == heap::GcKind::Full) {
        for (auto id : scheduler_.on_full_gc(now_, e.heap_usage_after)) resume(id);
      }
    }
  }

  void suspend(TaskId id) {
    auto& ex = exec(id);
    ex.set_suspend_flag(true);
    ex.set_state(TaskState::Suspended);
    memory_.set_suspended(id, true);
    result_.tasks[id].suspensions.emplace_back(now_, -1);
  }

  void resume(TaskId id) {
    auto& ex = exec(id);
    ex.set_suspend_flag(false);
    ex.set_state(TaskState::Running);
    memory_.set_suspended(id, false);
    result_.tasks[id].suspensions.back().second = now_;
    for (auto& s : slots_) {
      if (s.task && *s.task == id) s.clock = std::max(s.clock, now_);
    }
  }

  void tick() {
    std::vector<sampler::TaskProbe> probes;
    for (const auto& s : slots_) {
      if (s.task && !exec(*s.task).suspend_flag()) probes.push_back(exec(*s.task).probe());
    }
    const auto snap = heap_.snapshot();
    sampler_.sample_tick(now_, probes, snap);
    // A slot freed by a completion this step is refilled before the next
    // step, so pending work waiting on it counts as active.
    std::size_t free_slots = 0;
    for (const auto& s : slots_) free_slots += !s.task;
    const auto active = static_cast<std::uint32_t>(probes.size() + std::min(free_slots, pending_.size()));
    if (!min_active_ || active < *min_active_) min_active_ = active;

    std::vector<sched::TaskView> views;
    views.reserve(probes.size());
    for (const auto& p : probes) {
      const auto* m = sampler_.metrics(p.task_id);
      sched::TaskView v;
      v.id = p.task_id;
      if (m->estimate) v.rate = m->estimate->rate;
      v.consumption = static_cast<double>(m->consumption_bytes);
      v.percent = m->completion_percent;
      views.push_back(v);
    }
    for (auto id : scheduler_.schedule_tick(now_, snap, views).suspended) suspend(id);
  }

  void complete(std::size_t slot_index) {
    auto& slot = slots_[slot_index];
    const TaskId id = *slot.task;
    auto& ex = exec(id);
    auto out = ex.finish();
    slot.clock += ex.last_cost_ns();
    handle_gc_events();

    auto& tr = result_.tasks[id];
    tr.end_ns = slot.clock;
    tr.spills = ex.spill_count();
    tr.spill_bytes = ex.spill_bytes();
    tr.peak_consumption = ex.peak_consumption();
    if (const auto* m = sampler_.metrics(id)) tr.rate_history = m->rate_history;
    slot.task.reset();

    auto& j = jobs_[ex.job()];
    j.stage_outputs[ex.index()] = std::move(out);
    ++j.finished_in_stage;
    auto& sr = result_.stages[stage_index_.at({j.id, ex.stage()})];
    sr.end_ns = std::max(sr.end_ns, tr.end_ns);

    if (auto resumed = scheduler_.on_task_complete(now_, id)) resume(*resumed);

    if (j.finished_in_stage == j.tasks_per_stage) finish_stage(j, sr.end_ns);
    executors_[id].reset();
  }

  void finish_stage(JobRuntime& j, std::int64_t at) {
    if (j.stage + 1 < j.stages.size()) {
      j.next_inputs.assign(j.tasks_per_stage, {});
      for (auto& out : j.stage_outputs) {
        for (const auto& r : out) j.next_inputs[kv::partition_of(r.key, j.tasks_per_stage)].push_back(r);
        out = {};
      }
      ++j.stage;
      make_stage_ready(j, at);
      return;
    }
    auto& jr = result_.jobs[j.id];
    for (auto& out : j.stage_outputs) {
      jr.output.insert(jr.output.end(), out.begin(), out.end());
      out = {};
    }
    jr.completed = true;
    jr.end_ns = at;
    j.done = true;
    heap_.free_task_memory(job_owner(j.id));
    for (auto id : j.task_ids) {
      memory_.remove_cached(heap_.owner_cached(id));
      heap_.free_cached(id);
    }
  }

  RunResult finalize() {
    result_.ome = ome_;
    std::int64_t end = now_;
    for (const auto& s : slots_) end = std::max(end, s.clock);
    result_.total_ns = end;
    result_.gc_pause_ns = heap_.cumulative_gc_pause_ns();
    result_.gc_log = heap_.gc_log();
    result_.decisions = scheduler_.decision_log();
    result_.peak_heap_used = heap_.peak_used();
    result_.min_active_tasks = min_active_.value_or(0);
    for (auto& t : result_.tasks) {
      if (t.spills > 0) ++result_.spill_tasks;
      if (ome_) {
        // Unfinished tasks still report what they did before the abort.
        if (t.end_ns < 0 && t.id < executors_.size() && executors_[t.id]) {
          const auto& ex = *executors_[t.id];
          t.spills = ex.spill_count();
          t.spill_bytes = ex.spill_bytes();
          t.peak_consumption = ex.peak_consumption();
          if (t.spills > 0) ++result_.spill_tasks;
        }
        for (auto& iv : t.suspensions) {
          if (iv.second < 0) iv.second = end;
        }
      }
    }
    return std::move(result_);
  }

  const workloads::ScenarioSpec& spec_;
  heap::Heap heap_;
  MemoryManager memory_;
  sampler::Sampler sampler_;
  sched::Scheduler scheduler_;
  std::vector<Slot> slots_;
  std::vector<JobRuntime> jobs_;
  std::vector<std::unique_ptr<TaskExecutor>> executors_;
  std::vector<PendingLaunch> pending_;
  std::map<std::pair<JobId, std::uint32_t>, std::size_t> stage_index_;
  std::size_t gc_seen_ = 0;
  std::int64_t now_ = 0;
  bool ome_ = false;
  std::optional<std::uint32_t> min_active_;
  RunResult result_;
};

}  // namespace

RunResult run_scenario(const workloads::ScenarioSpec& scenario, sched::Policy policy) {
  Run run(scenario, policy);
  return run.run();
}

RunResult run_job(const workloads::JobSpec& job, const workloads::ScenarioSpec& worker, sched::Policy policy) {
  auto s = worker;
  s.name = job.name;
  s.jobs = {workloads::JobSubmission{job, 0, std::nullopt}};
  return run_scenario(s, policy);
}

}  // namespace murs::engine
