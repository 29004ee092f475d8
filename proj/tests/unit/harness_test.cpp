#include <gtest/gtest.h>

#include <sys/wait.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "murs/harness.hpp"
#include "murs/scenario_io.hpp"

using namespace murs;
using harness::json;

namespace {

workloads::ScenarioSpec tiny() {
  return io::parse_scenario(R"(name: tiny
seed: 3
slots: 2
heap: {total_bytes: 262144}
jobs:
  - name: Agg
    tasks_per_stage: 2
    dataset: {record_count: 600, key_cardinality: 60, value_size_bytes: 64}
    stages:
      - [map, reduceByKey]
      - [reduceByKey@read, map]
  - name: Scan
    tasks_per_stage: 2
    dataset: {record_count: 600, key_cardinality: 600, key_pattern: all_unique, value_size_bytes: 64}
    stages:
      - [filter]
)");
}

std::string type_of(const json& v) {
  if (v.is_boolean()) return "boolean";
  if (v.is_number_integer()) return "integer";
  if (v.is_number()) return "number";
  if (v.is_string()) return "string";
  if (v.is_null()) return "null";
  return "?";
}

// Every key present with the golden type; arrays are checked element-wise
// against the golden element.
void match(const json& want, const json& got, const std::string& path) {
  if (want.is_object()) {
    ASSERT_TRUE(got.is_object()) << path;
    for (const auto& [k, v] : want.items()) {
      ASSERT_TRUE(got.contains(k)) << path << "." << k;
      match(v, got.at(k), path + "." + k);
    }
    for (const auto& [k, v] : got.items()) EXPECT_TRUE(want.contains(k)) << "unexpected " << path << "." << k;
  } else if (want.is_array()) {
    ASSERT_TRUE(got.is_array()) << path;
    for (const auto& e : got) match(want.at(0), e, path + "[]");
  } else {
    EXPECT_EQ(want.get<std::string>(), type_of(got)) << path;
  }
}

json report(const engine::RunResult& r, const workloads::ScenarioSpec& s) { return harness::report_json(r, s); }

std::string slurp(const std::string& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int bench(const std::string& args) {
  const auto cmd = std::string(MURS_BENCH) + " " + args + " >/dev/null 2>&1";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

json fake(double total, double gc, double spills, bool ome = false) {
  return json{{"scenario", "x"}, {"policy", "p"}, {"total_ns", total}, {"gc_pause_ns", gc},
              {"spill_tasks", spills}, {"spill_events", spills}, {"spill_bytes", spills * 10}, {"ome", ome},
              {"jobs", json::array({json{{"name", "J"}, {"completed", !ome}, {"exec_ns", total}}})}};
}

}  // namespace

TEST(Harness, ReportMatchesTheGoldenSchema) {
  const auto s = tiny();
  const json golden = json::parse(slurp(std::string(MURS_SOURCE_DIR) + "/tests/golden/report_schema.json"));
  for (auto p : {sched::Policy::Murs, sched::Policy::Fair}) {
    const auto j = report(engine::run_scenario(s, p), s);
    match(golden, j, "report");
    EXPECT_FALSE(j.at("tasks").empty());
    EXPECT_FALSE(j.at("decisions").empty());
  }
}

TEST(Harness, SameSeedSameBytes) {
  const auto dir = std::filesystem::temp_directory_path() / "murs-harness-det";
  std::filesystem::remove_all(dir);
  const auto s = tiny();
  const auto a = harness::run(s, {sched::Policy::Murs}, (dir / "a").string());
  const auto b = harness::run(s, {sched::Policy::Murs}, (dir / "b").string());
  EXPECT_EQ(slurp(a[0].report_path), slurp(b[0].report_path));
  EXPECT_EQ(slurp(a[0].csv_path), slurp(b[0].csv_path));
  std::filesystem::remove_all(dir);
}

TEST(Harness, TaskCsvHasOneRowPerTask) {
  const auto s = tiny();
  const auto r = engine::run_scenario(s, sched::Policy::Fair);
  const auto csv = harness::task_csv(r);
  EXPECT_EQ(static_cast<std::size_t>(std::count(csv.begin(), csv.end(), '\n')), r.tasks.size() + 1);
  EXPECT_EQ(csv.rfind("scenario,policy,job,", 0), 0u);
}

TEST(Harness, ReductionExamples) {
  EXPECT_DOUBLE_EQ(harness::reduction_pct(100, 10), 90.0);
  EXPECT_DOUBLE_EQ(harness::reduction_pct(5, 5), 0.0);
  EXPECT_DOUBLE_EQ(harness::reduction_pct(0, 0), 0.0);
  EXPECT_TRUE(std::isnan(harness::reduction_pct(0, 3)));
}

TEST(Harness, IdenticalReportsCompareToZero) {
  const auto c = harness::compare(fake(10, 5, 3), fake(10, 5, 3));
  for (const auto& [k, m] : c.at("metrics").items()) {
    EXPECT_EQ(m.at("reduction_pct").get<double>(), 0.0) << k;
    EXPECT_EQ(m.at("sym_delta_pct").get<double>(), 0.0) << k;
  }
  EXPECT_FALSE(c.at("scalability_win").get<bool>());
}

TEST(Harness, SpillReductionExample) {
  const auto c = harness::compare(fake(10, 5, 100), fake(10, 5, 10));
  EXPECT_DOUBLE_EQ(c.at("metrics").at("spill_tasks").at("reduction_pct").get<double>(), 90.0);
}

TEST(Harness, CompareIsAntisymmetric) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0, 1e9);
  for (int i = 0; i < 200; ++i) {
    const auto a = fake(u(rng), u(rng), std::floor(u(rng) / 1e7));
    const auto b = fake(u(rng), u(rng), std::floor(u(rng) / 1e7));
    const auto ab = harness::compare(a, b).at("metrics");
    const auto ba = harness::compare(b, a).at("metrics");
    for (const auto& [k, m] : ab.items()) {
      EXPECT_DOUBLE_EQ(m.at("sym_delta_pct").get<double>(), -ba.at(k).at("sym_delta_pct").get<double>()) << k;
    }
  }
}

TEST(Harness, OmeOnlyInTheBaselineIsAScalabilityWin) {
  const auto c = harness::compare(fake(10, 5, 3, true), fake(20, 5, 3));
  EXPECT_TRUE(c.at("scalability_win").get<bool>());
  EXPECT_FALSE(c.at("metrics").contains("job:J:exec_ns"));
  EXPECT_TRUE(harness::compare(fake(20, 5, 3), fake(10, 5, 3, true)).at("scalability_loss").get<bool>());
  EXPECT_FALSE(harness::format_comparison(c).empty());
}

TEST(Harness, CliExitCodes) {
  const auto dir = std::filesystem::temp_directory_path() / "murs-cli";
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  const auto yaml = (dir / "tiny.yaml").string();
  std::ofstream(yaml) << io::dump_scenario(tiny());

  EXPECT_EQ(bench("list-scenarios"), 0);
  EXPECT_EQ(bench("run --scenario " + yaml + " --policy fair,murs --out " + (dir / "out").string()), 0);
  EXPECT_EQ(bench("compare " + (dir / "out" / "tiny-fair.json").string() + " " +
                  (dir / "out" / "tiny-murs.json").string()),
            0);

  // An out-of-memory outcome is a result, not a failure.
  auto big = tiny();
  big.engine.task_context_bytes = 8192;
  const auto big_yaml = (dir / "big.yaml").string();
  std::ofstream(big_yaml) << io::dump_scenario(big);
  EXPECT_EQ(bench("run --scenario " + big_yaml + " --heap-bytes 4096 --out " + (dir / "ome").string()), 0);
  EXPECT_TRUE(harness::read_json((dir / "ome" / "tiny-fair.json").string()).at("ome").get<bool>());

  EXPECT_NE(bench("run --scenario no-such-scenario"), 0);
  EXPECT_NE(bench("run --scenario " + yaml + " --yellow 0.9"), 0);
  EXPECT_NE(bench("run --scenario " + yaml + " --policy lottery"), 0);
  std::ofstream(dir / "bad.yaml") << "name: bad\nheap: {total_bytes: -1}\njobs: []\n";
  EXPECT_NE(bench("run --scenario " + (dir / "bad.yaml").string()), 0);
  EXPECT_NE(bench("frobnicate"), 0);
  std::filesystem::remove_all(dir);
}
