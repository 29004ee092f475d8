#include "murs/harness.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

#include "murs/error.hpp"

namespace murs::harness {

std::int64_t max_suspension_ns(const engine::RunResult& r) {
  std::int64_t m = 0;
  for (const auto& t : r.tasks) {
    for (const auto& [s, e] : t.suspensions) m = std::max(m, e - s);
  }
  return m;
}

namespace {

std::int64_t suspended_ns(const engine::TaskRecord& t) {
  std::int64_t sum = 0;
  for (const auto& [s, e] : t.suspensions) sum += e - s;
  return sum;
}

json number_or_null(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

}  // namespace

json report_json(const engine::RunResult& r, const workloads::ScenarioSpec& s, bool series) {
  json j;
  j["scenario"] = r.scenario;
  j["policy"] = std::string(sched::to_string(r.policy));
  j["seed"] = s.seed;
  j["heap_bytes"] = s.heap.total_bytes;
  j["yellow"] = s.heap.yellow;
  j["red"] = s.heap.red;
  j["slots"] = s.slots;
  j["ome"] = r.ome;
  j["total_ns"] = r.total_ns;
  j["gc_pause_ns"] = r.gc_pause_ns;
  j["gc_task_weighted_ns"] = r.gc_task_weighted_ns;
  j["spill_events"] = r.spill_events;
  j["spill_tasks"] = r.spill_tasks;
  j["min_active_tasks"] = r.min_active_tasks;
  j["max_suspension_ns"] = max_suspension_ns(r);
  j["peak_heap_used"] = r.peak_heap_used;
  j["steps"] = r.steps;

  std::size_t minor = 0;
  for (const auto& e : r.gc_log) minor += e.kind == heap::GcKind::Minor;
  j["gc"] = {{"minor", minor}, {"full", r.gc_log.size() - minor}};

  Bytes spill_bytes = 0;
  j["jobs"] = json::array();
  for (const auto& jr : r.jobs) {
    j["jobs"].push_back({{"name", jr.name},
                         {"submit_ns", jr.submit_ns},
                         {"end_ns", jr.end_ns},
                         {"exec_ns", jr.completed ? jr.end_ns - jr.submit_ns : -1},
                         {"completed", jr.completed},
                         {"output_records", jr.output.size()}});
  }
  j["stages"] = json::array();
  for (const auto& st : r.stages) {
    j["stages"].push_back({{"job", r.jobs.at(st.job).name},
                           {"stage", st.stage},
                           {"tasks", st.tasks},
                           {"ready_ns", st.ready_ns},
                           {"start_ns", st.start_ns},
                           {"end_ns", st.end_ns}});
  }
  j["tasks"] = json::array();
  for (const auto& t : r.tasks) {
    spill_bytes += t.spill_bytes;
    json susp = json::array();
    for (const auto& [a, b] : t.suspensions) susp.push_back({a, b});
    j["tasks"].push_back({{"id", t.id},
                          {"job", r.jobs.at(t.job).name},
                          {"stage", t.stage},
                          {"index", t.index},
                          {"start_ns", t.start_ns},
                          {"end_ns", t.end_ns},
                          {"exec_ns", t.end_ns >= 0 ? t.end_ns - t.start_ns : -1},
                          {"gc_ns", t.gc_ns},
                          {"spills", t.spills},
                          {"spill_bytes", t.spill_bytes},
                          {"peak_consumption", t.peak_consumption},
                          {"records_in", t.records_in},
                          {"suspensions", susp}});
  }
  j["spill_bytes"] = spill_bytes;
  j["decisions"] = json::array();
  for (const auto& d : r.decisions) {
    j["decisions"].push_back({{"time_ns", d.time_ns},
                              {"action", std::string(sched::to_string(d.kind))},
                              {"tasks", d.tasks},
                              {"reason", std::string(sched::to_string(d.reason))},
                              {"heap_fraction", d.heap_fraction}});
  }
  if (series) {
    json gc = json::array();
    for (std::size_t i = 0; i < r.gc_log.size(); ++i) {
      const auto& e = r.gc_log[i];
      gc.push_back({{"time_ns", r.gc_times_ns.at(i)},
                    {"kind", std::string(heap::to_string(e.kind))},
                    {"pause_ns", e.pause_ns},
                    {"reclaimed_bytes", e.reclaimed_bytes},
                    {"surviving_bytes", e.surviving_bytes},
                    {"heap_usage_after", e.heap_usage_after}});
    }
    json rates = json::object();
    for (const auto& t : r.tasks) {
      if (t.rate_history.empty()) continue;
      json h = json::array();
      for (const auto& [time, rate] : t.rate_history) h.push_back({time, rate});
      rates[std::to_string(t.id)] = h;
    }
    j["series"] = {{"gc", gc}, {"rates", rates}};
  }
  return j;
}

std::string task_csv(const engine::RunResult& r) {
  std::ostringstream out;
  out << "scenario,policy,job,stage,task,index,start_ns,end_ns,exec_ns,gc_ns,spills,spill_bytes,"
         "peak_consumption,suspensions,suspended_ns\n";
  for (const auto& t : r.tasks) {
    out << r.scenario << ',' << sched::to_string(r.policy) << ',' << r.jobs.at(t.job).name << ',' << t.stage << ','
        << t.id << ',' << t.index << ',' << t.start_ns << ',' << t.end_ns << ','
        << (t.end_ns >= 0 ? t.end_ns - t.start_ns : -1) << ',' << t.gc_ns << ',' << t.spills << ',' << t.spill_bytes
        << ',' << t.peak_consumption << ',' << t.suspensions.size() << ',' << suspended_ns(t) << '\n';
  }
  return out.str();
}

std::vector<RunOutput> run(const workloads::ScenarioSpec& s, const std::vector<sched::Policy>& policies,
                           const std::string& out_dir, bool series) {
  std::filesystem::create_directories(out_dir);
  std::vector<RunOutput> outs;
  for (auto p : policies) {
    RunOutput o;
    o.result = engine::run_scenario(s, p);
    const auto stem = std::filesystem::path(out_dir) / (s.name + "-" + std::string(sched::to_string(p)));
    o.report_path = stem.string() + ".json";
    o.csv_path = stem.string() + ".csv";
    std::ofstream(o.report_path) << report_json(o.result, s, series).dump(2) << '\n';
    std::ofstream(o.csv_path) << task_csv(o.result);
    outs.push_back(std::move(o));
  }
  return outs;
}

double reduction_pct(double a, double b) {
  if (a == b) return 0.0;
  if (a == 0.0) return std::numeric_limits<double>::quiet_NaN();
  return (a - b) / a * 100.0;
}

double sym_delta_pct(double a, double b) {
  if (a == b) return 0.0;
  return 200.0 * (b - a) / (std::abs(a) + std::abs(b));
}

json compare(const json& a, const json& b) {
  json c;
  c["a"] = {{"scenario", a.at("scenario")}, {"policy", a.at("policy")}};
  c["b"] = {{"scenario", b.at("scenario")}, {"policy", b.at("policy")}};
  json metrics = json::object();
  auto add = [&](const std::string& name, double x, double y) {
    metrics[name] = {{"a", x},
                     {"b", y},
                     {"reduction_pct", number_or_null(reduction_pct(x, y))},
                     {"sym_delta_pct", sym_delta_pct(x, y)}};
  };
  for (const char* k : {"total_ns", "gc_pause_ns", "spill_tasks", "spill_events", "spill_bytes"}) {
    add(k, a.at(k).get<double>(), b.at(k).get<double>());
  }
  for (const auto& ja : a.at("jobs")) {
    for (const auto& jb : b.at("jobs")) {
      if (ja.at("name") != jb.at("name")) continue;
      if (!ja.at("completed").get<bool>() || !jb.at("completed").get<bool>()) continue;
      add("job:" + ja.at("name").get<std::string>() + ":exec_ns", ja.at("exec_ns").get<double>(),
          jb.at("exec_ns").get<double>());
    }
  }
  c["metrics"] = metrics;
  const bool ome_a = a.at("ome").get<bool>();
  const bool ome_b = b.at("ome").get<bool>();
  c["ome"] = {{"a", ome_a}, {"b", ome_b}};
  c["scalability_win"] = ome_a && !ome_b;
  c["scalability_loss"] = ome_b && !ome_a;
  return c;
}

std::string format_comparison(const json& c) {
  std::ostringstream out;
  out << "A: " << c["a"]["scenario"].get<std::string>() << " / " << c["a"]["policy"].get<std::string>() << '\n'
      << "B: " << c["b"]["scenario"].get<std::string>() << " / " << c["b"]["policy"].get<std::string>() << "\n\n";
  out << std::left << std::setw(28) << "metric" << std::right << std::setw(16) << "A" << std::setw(16) << "B"
      << std::setw(12) << "reduction%" << std::setw(12) << "sym%" << '\n';
  out << std::fixed << std::setprecision(1);
  for (const auto& [name, m] : c["metrics"].items()) {
    out << std::left << std::setw(28) << name << std::right << std::setw(16) << m["a"].get<double>() << std::setw(16)
        << m["b"].get<double>() << std::setw(12);
    if (m["reduction_pct"].is_null()) {
      out << "n/a";
    } else {
      out << m["reduction_pct"].get<double>();
    }
    out << std::setw(12) << m["sym_delta_pct"].get<double>() << '\n';
  }
  out << "\nOME: A=" << (c["ome"]["a"].get<bool>() ? "yes" : "no") << " B=" << (c["ome"]["b"].get<bool>() ? "yes" : "no")
      << '\n';
  if (c["scalability_win"].get<bool>()) out << "scalability win: B completes where A ran out of memory\n";
  if (c["scalability_loss"].get<bool>()) out << "scalability loss: B ran out of memory where A completes\n";
  return out.str();
}

json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read report '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("report '" + path + "' is not valid JSON: " + e.what());
  }
}

}  // namespace murs::harness
