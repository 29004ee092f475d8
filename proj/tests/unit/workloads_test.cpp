#include <gtest/gtest.h>

#include "murs/engine.hpp"
#include "murs/error.hpp"
#include "murs/workloads.hpp"

using namespace murs;
using namespace murs::workloads;
using api::ModelKind;

namespace {

ScenarioSpec ample() {
  ScenarioSpec s;
  s.name = "solo";
  s.heap.total_bytes = Bytes{1} << 30;
  s.seed = 7;
  return s;
}

std::vector<ModelKind> kinds(const std::vector<api::MemoryModel>& v) {
  std::vector<ModelKind> out;
  for (const auto& m : v) out.push_back(m.kind);
  return out;
}

std::size_t suspensions(const engine::RunResult& r) {
  std::size_t n = 0;
  for (const auto& d : r.decisions) n += d.kind == sched::DecisionKind::Suspend ? d.tasks.size() : 0;
  return n;
}

}  // namespace

TEST(Workloads, BuiltinModelSequences) {
  const auto b = builtin_jobs();
  EXPECT_EQ(kinds(job_model_sequences(b.sq).at(0)), std::vector{ModelKind::Constant});
  const auto aq = job_model_sequences(b.aq);
  EXPECT_EQ(kinds(aq.at(0)), std::vector{ModelKind::SubLinear});
  const auto sort = job_model_sequences(b.sort);
  ASSERT_EQ(sort.size(), 3u);
  EXPECT_EQ(kinds(sort.at(2)), std::vector{ModelKind::Linear});
  const auto pr = job_model_sequences(b.pr);
  EXPECT_EQ(kinds(pr.at(0)), std::vector{ModelKind::Linear});
}

TEST(Workloads, IterationsExpandTheLastStage) {
  const auto pr = builtin_jobs().pr;
  const auto chain = expand_stages(pr);
  ASSERT_EQ(chain.size(), 6u);
  for (std::size_t k = 2; k < chain.size(); ++k) EXPECT_EQ(chain[k], pr.stages.back());
}

TEST(Workloads, EveryJobAloneUnderFifoNeverSuspendsOrSpills) {
  const auto b = builtin_jobs();
  for (const auto& j : {b.sq, b.aq, b.sort, b.pr}) {
    const auto r = engine::run_job(j, ample(), sched::Policy::Fifo);
    EXPECT_FALSE(r.ome) << j.name;
    EXPECT_EQ(suspensions(r), 0u) << j.name;
    EXPECT_EQ(r.spill_events, 0u) << j.name;
    EXPECT_TRUE(r.jobs.at(0).completed) << j.name;
  }
}

TEST(Workloads, ScanAloneUnderMursNeverSuspends) {
  for (const auto& s : builtin_scenarios()) {
    const auto r = engine::run_job(builtin_jobs().sq, s, sched::Policy::Murs);
    EXPECT_EQ(suspensions(r), 0u) << s.name;
    EXPECT_FALSE(r.ome) << s.name;
  }
}

TEST(Workloads, CoRunSubmitsAqWhenPrStageTwoIsReady) {
  const auto s = builtin_scenario("cache-co-run");
  for (auto p : {sched::Policy::Fair, sched::Policy::Murs}) {
    const auto r = engine::run_scenario(s, p);
    std::int64_t ready = -1;
    for (const auto& st : r.stages) {
      if (r.jobs.at(st.job).name == "PR" && st.stage == 2) ready = st.ready_ns;
    }
    ASSERT_GE(ready, 0);
    for (const auto& j : r.jobs) {
      if (j.name == "AQ") EXPECT_EQ(j.submit_ns, ready);
    }
  }
}

TEST(Workloads, ValidationRejectsBadSpecs) {
  auto j = builtin_jobs().aq;
  j.stages.clear();
  EXPECT_THROW(validate(j), SpecError);

  j = builtin_jobs().aq;
  j.stages[0].pipeline = {api::lookup("reduceByKey@read")};
  EXPECT_THROW(validate(j), SpecError);

  j = builtin_jobs().pr;
  j.cache_after_stage = 6;
  EXPECT_THROW(validate(j), SpecError);

  auto s = builtin_scenario("three-way");
  s.jobs[1].job.name = s.jobs[0].job.name;
  EXPECT_THROW(validate(s), SpecError);

  s = builtin_scenario("cache-co-run");
  s.jobs[1].trigger->stage = 99;
  EXPECT_THROW(validate(s), SpecError);

  s = builtin_scenario("three-way");
  s.scheduler.yellow = 0.3;
  EXPECT_THROW(validate(s), SpecError);

  EXPECT_THROW(builtin_scenario("nope"), SpecError);
}

TEST(Workloads, EveryBuiltinValidates) {
  const auto all = builtin_scenarios();
  EXPECT_GE(all.size(), 5u);
  for (const auto& s : all) EXPECT_NO_THROW(validate(s)) << s.name;
}

TEST(Workloads, ScenarioSeedChangesTheData) {
  auto s = builtin_scenario("two-way-aq-sq");
  const auto a = effective_dataset(s, 0);
  s.seed += 1;
  EXPECT_NE(effective_dataset(s, 0).seed, a.seed);
  EXPECT_EQ(effective_dataset(s, 0).record_count, a.record_count);
}
