#include <gtest/gtest.h>

#include "murs/engine.hpp"
#include "murs/error.hpp"
#include "support/reference.hpp"

using namespace murs;
using namespace murs::engine;

namespace {

workloads::StageSpec stage(std::initializer_list<const char*> names) {
  workloads::StageSpec s;
  for (const auto* n : names) s.pipeline.push_back(api::lookup(n));
  return s;
}

std::vector<Record> input(std::uint64_t n, std::uint64_t c, kv::KeyPattern p) {
  return kv::generate(kv::DatasetSpec{n, c, p, 40, 3}).materialize();
}

struct Harness {
  heap::HeapConfig hc;
  workloads::EngineConfig ec;
  heap::Heap heap;
  StagePlan plan;

  Harness(workloads::StageSpec s, Bytes heap_bytes = Bytes{256} << 20, bool cached = false,
          bool upstream = false)
      : hc([&] {
          heap::HeapConfig c;
          c.total_bytes = heap_bytes;
          return c;
        }()),
        heap(hc),
        plan(StagePlan::compile(s, cached, upstream)) {}

  TaskExecutor task(std::vector<Record> in, MemoryManager* mm = nullptr, TaskId id = 1) {
    return TaskExecutor(id, 0, 0, 0, plan, std::move(in), ec, kv::kDefaultRecordOverhead, heap, mm);
  }
};

StepResult run_to_end(TaskExecutor& t, std::vector<Bytes>* trace = nullptr) {
  for (;;) {
    const auto r = t.step();
    if (trace) trace->push_back(t.consumption_bytes());
    if (r == StepResult::SpillRequested) {
      t.spill();
      continue;
    }
    if (r != StepResult::Progressed) return r;
  }
}

workloads::ScenarioSpec worker(Bytes heap_bytes = Bytes{256} << 20) {
  workloads::ScenarioSpec s;
  s.name = "unit";
  s.heap.total_bytes = heap_bytes;
  s.seed = 1;
  return s;
}

}  // namespace

TEST(Engine, FilterHoldsNoBuffer) {
  Harness h(stage({"filter"}));
  auto t = h.task(input(2000, 100, kv::KeyPattern::Random));
  EXPECT_EQ(run_to_end(t), StepResult::Finished);
  EXPECT_EQ(t.peak_consumption(), 0u);
  EXPECT_EQ(h.heap.live_long_living(), 0u);
}

TEST(Engine, GroupingBufferGrowsMonotonically) {
  Harness h(stage({"map", "groupByKey"}));
  auto t = h.task(input(2000, 100, kv::KeyPattern::Random));
  std::vector<Bytes> trace;
  EXPECT_EQ(run_to_end(t, &trace), StepResult::Finished);
  for (std::size_t i = 1; i < trace.size(); ++i) ASSERT_GE(trace[i], trace[i - 1]);
  EXPECT_GT(trace.back(), 2000u * 40);
}

TEST(Engine, ReduceHoldsOneEntryPerKey) {
  Harness h(stage({"reduceByKey"}));
  auto in = input(5000, 50, kv::KeyPattern::Random);
  auto t = h.task(in);
  EXPECT_EQ(run_to_end(t), StepResult::Finished);
  const Bytes per_entry = kv::kKeyBytes + 40 + h.ec.buffer_entry_overhead;
  EXPECT_EQ(t.peak_consumption(), 50 * per_entry);
  const auto out = t.finish();
  EXPECT_EQ(out.size(), 50u);
  EXPECT_EQ(h.heap.live_long_living(), 0u);
}

TEST(Engine, SuspendedTaskKeepsItsFootprint) {
  Harness h(stage({"map", "groupByKey"}));
  auto t = h.task(input(1000, 100, kv::KeyPattern::Random));
  for (int i = 0; i < 300; ++i) ASSERT_EQ(t.step(), StepResult::Progressed);
  const auto held = t.consumption_bytes();
  const auto live = h.heap.live_long_living();
  t.set_suspend_flag(true);
  for (int i = 0; i < 10; ++i) EXPECT_EQ(t.step(), StepResult::SuspendedAtBoundary);
  EXPECT_EQ(t.consumption_bytes(), held);
  EXPECT_EQ(h.heap.live_long_living(), live);
  EXPECT_EQ(t.processed_records(), 300u);
  t.set_suspend_flag(false);
  EXPECT_EQ(run_to_end(t), StepResult::Finished);
}

TEST(Engine, SpillMovesBufferToDisk) {
  Harness h(stage({"map", "groupByKey"}));
  MemoryManager mm(Bytes{1} << 20, 0.1);
  auto in = input(4000, 400, kv::KeyPattern::Random);
  auto t = h.task(in, &mm);
  EXPECT_EQ(run_to_end(t), StepResult::Finished);
  EXPECT_GT(t.spill_count(), 0u);
  EXPECT_GT(t.spill_bytes(), 0u);
  EXPECT_LE(t.consumption_bytes(), mm.pool());

  // Spilling never changes what the task produces.
  Harness g(stage({"map", "groupByKey"}));
  auto u = g.task(in);
  run_to_end(u);
  EXPECT_EQ(u.spill_count(), 0u);
  EXPECT_EQ(t.finish(), u.finish());
}

TEST(Engine, MemoryManagerSharesThePool) {
  MemoryManager mm(1000, 0.5);
  EXPECT_EQ(mm.pool(), 500u);
  EXPECT_TRUE(mm.acquire(1, 200));
  EXPECT_TRUE(mm.acquire(2, 200));
  EXPECT_FALSE(mm.acquire(1, 100));  // 300 > 500 / 2
  mm.set_suspended(2, true);
  EXPECT_TRUE(mm.acquire(1, 0));  // share is now the whole pool
  mm.add_cached(300);
  EXPECT_EQ(mm.pool(), 200u);
  EXPECT_FALSE(mm.acquire(1, 0));
  mm.remove_cached(1000);
  EXPECT_EQ(mm.pool(), 500u);
  mm.release_all(1);
  EXPECT_EQ(mm.held(1), 0u);
  EXPECT_EQ(mm.held(2), 200u);
}

TEST(Engine, StageBarrierOrdersStages) {
  workloads::JobSpec j;
  j.name = "J";
  j.dataset = {4000, 200, kv::KeyPattern::Random, 40, 9};
  j.stages = {stage({"map", "reduceByKey"}), stage({"reduceByKey@read", "map"})};
  j.tasks_per_stage = 4;
  const auto r = run_job(j, worker(), sched::Policy::Fifo);
  ASSERT_EQ(r.stages.size(), 2u);
  std::int64_t first_end = 0;
  for (const auto& t : r.tasks) {
    if (t.stage == 0) first_end = std::max(first_end, t.end_ns);
  }
  for (const auto& t : r.tasks) {
    if (t.stage == 1) EXPECT_GE(t.start_ns, first_end);
  }
  EXPECT_EQ(r.stages[1].ready_ns, first_end);
}

TEST(Engine, IteratedJobRunsEveryStage) {
  const auto pr = workloads::builtin_jobs().pr;
  ASSERT_EQ(pr.iterations, 5u);
  const auto r = run_job(pr, worker(), sched::Policy::Fifo);
  EXPECT_EQ(r.stages.size(), 6u);
  EXPECT_TRUE(r.jobs.at(0).completed);
}

TEST(Engine, OutputMatchesTheUnscheduledReference) {
  workloads::JobSpec j;
  j.name = "J";
  j.dataset = {3000, 150, kv::KeyPattern::Random, 40, 4};
  j.stages = {stage({"flatMap", "reduceByKey"}), stage({"reduceByKey@read", "map", "groupByKey"}),
              stage({"groupByKey@read", "map"})};
  j.tasks_per_stage = 3;
  auto w = worker(Bytes{2} << 20);
  const auto r = run_job(j, w, sched::Policy::Murs);
  ASSERT_FALSE(r.ome);
  const auto want = ref::reference_output(j, workloads::effective_dataset(
                                                 [&] {
                                                   auto s = w;
                                                   s.jobs = {{j, 0, {}}};
                                                   return s;
                                                 }(),
                                                 0));
  EXPECT_EQ(ref::sorted(r.jobs.at(0).output), ref::sorted(want));
}

TEST(Engine, OutOfMemoryIsAnOutcome) {
  workloads::JobSpec j;
  j.name = "J";
  j.dataset = {20000, 20000, kv::KeyPattern::AllUnique, 400, 4};
  j.stages = {stage({"map", "groupByKey"})};
  auto w = worker(Bytes{1} << 20);
  w.engine.exec_memory_fraction = 1.0;
  w.engine.task_context_bytes = Bytes{1} << 18;
  const auto r = run_job(j, w, sched::Policy::Fair);
  EXPECT_TRUE(r.ome);
  EXPECT_FALSE(r.jobs.at(0).completed);
}

TEST(Engine, MalformedStagesAreRejected) {
  EXPECT_THROW(StagePlan::compile(stage({"reduceByKey", "map"}), false, false), SpecError);
  EXPECT_THROW(StagePlan::compile(workloads::StageSpec{{api::lookup("map@read")}}, false, false), SpecError);
}
