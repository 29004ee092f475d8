#include "murs/scenario_io.hpp"

#include <yaml-cpp/yaml.h>

#include <charconv>
#include <fstream>
#include <initializer_list>
#include <sstream>
#include <string_view>

#include "murs/error.hpp"

namespace murs::io {

using workloads::JobSpec;
using workloads::JobSubmission;
using workloads::ScenarioSpec;

namespace {

int line_of(const YAML::Node& n) { return n.Mark().line >= 0 ? n.Mark().line + 1 : 0; }

void only_keys(const YAML::Node& n, std::initializer_list<std::string_view> keys, std::string_view where) {
  if (!n.IsMap()) throw ConfigError(std::string(where) + " must be a mapping", line_of(n));
  for (const auto& kv : n) {
    const auto k = kv.first.as<std::string>();
    bool known = false;
    for (auto allowed : keys) known = known || allowed == k;
    if (!known) throw ConfigError("unknown key '" + k + "' in " + std::string(where), line_of(kv.first));
  }
}

YAML::Node require(const YAML::Node& n, const char* key, std::string_view where) {
  auto v = n[key];
  if (!v) throw ConfigError(std::string(where) + " is missing '" + key + "'", line_of(n));
  return v;
}

template <class T>
T scalar(const YAML::Node& n, const char* key) {
  if (!n.IsScalar()) throw ConfigError(std::string("'") + key + "' must be a scalar", line_of(n));
  if constexpr (std::is_unsigned_v<T>) {
    if (!n.Scalar().empty() && n.Scalar().front() == '-') {
      throw ConfigError(std::string("'") + key + "' must be non-negative", line_of(n));
    }
  }
  try {
    return n.as<T>();
  } catch (const YAML::Exception&) {
    throw ConfigError(std::string("bad value '") + n.Scalar() + "' for '" + key + "'", line_of(n));
  }
}

template <class T>
void read_opt(const YAML::Node& n, const char* key, T& out) {
  if (auto v = n[key]) out = scalar<T>(v, key);
}

template <class F>
auto with_line(const YAML::Node& n, F&& f) {
  try {
    return f();
  } catch (const SpecError& e) {
    throw ConfigError(e.what(), line_of(n));
  }
}

kv::DatasetSpec parse_dataset(const YAML::Node& n) {
  only_keys(n, {"record_count", "key_cardinality", "key_pattern", "value_size_bytes", "seed", "record_overhead"},
            "dataset");
  kv::DatasetSpec d;
  d.record_count = scalar<std::uint64_t>(require(n, "record_count", "dataset"), "record_count");
  d.key_cardinality = scalar<std::uint64_t>(require(n, "key_cardinality", "dataset"), "key_cardinality");
  if (auto p = n["key_pattern"]) {
    d.key_pattern = with_line(p, [&] { return kv::key_pattern_from_string(scalar<std::string>(p, "key_pattern")); });
  }
  read_opt(n, "value_size_bytes", d.value_size_bytes);
  read_opt(n, "seed", d.seed);
  read_opt(n, "record_overhead", d.record_overhead);
  with_line(n, [&] { kv::validate(d); });
  return d;
}

api::ApiCatalogEntry parse_api(const YAML::Node& n) {
  if (n.IsScalar()) return with_line(n, [&] { return api::lookup(n.Scalar()); });
  only_keys(n, {"api", "keep_fraction", "fanout", "key_modulus", "salt"}, "pipeline entry");
  auto name = require(n, "api", "pipeline entry");
  auto e = with_line(name, [&] { return api::lookup(scalar<std::string>(name, "api")); });
  read_opt(n, "keep_fraction", e.params.keep_fraction);
  read_opt(n, "fanout", e.params.fanout);
  read_opt(n, "key_modulus", e.params.key_modulus);
  read_opt(n, "salt", e.params.salt);
  if (e.params.keep_fraction < 0.0 || e.params.keep_fraction > 1.0) {
    throw ConfigError("keep_fraction must be in [0, 1]", line_of(n["keep_fraction"]));
  }
  if (e.params.fanout == 0) throw ConfigError("fanout must be positive", line_of(n["fanout"]));
  return e;
}

JobSubmission parse_job(const YAML::Node& n) {
  only_keys(n,
            {"name", "dataset", "stages", "iterations", "cache_after_stage", "tasks_per_stage", "submit_time_ns",
             "after"},
            "job");
  JobSubmission sub;
  auto& j = sub.job;
  j.name = scalar<std::string>(require(n, "name", "job"), "name");
  j.dataset = parse_dataset(require(n, "dataset", "job"));
  auto stages = require(n, "stages", "job");
  if (!stages.IsSequence()) throw ConfigError("'stages' must be a list of pipelines", line_of(stages));
  for (const auto& st : stages) {
    if (!st.IsSequence()) throw ConfigError("each stage must be a list of APIs", line_of(st));
    workloads::StageSpec spec;
    for (const auto& e : st) spec.pipeline.push_back(parse_api(e));
    j.stages.push_back(std::move(spec));
  }
  read_opt(n, "iterations", j.iterations);
  read_opt(n, "tasks_per_stage", j.tasks_per_stage);
  if (auto c = n["cache_after_stage"]) j.cache_after_stage = scalar<std::size_t>(c, "cache_after_stage");
  read_opt(n, "submit_time_ns", sub.submit_time_ns);
  if (auto a = n["after"]) {
    only_keys(a, {"job", "stage"}, "after");
    sub.trigger = workloads::StageTrigger{scalar<std::string>(require(a, "job", "after"), "job"),
                                          scalar<std::size_t>(require(a, "stage", "after"), "stage")};
  }
  with_line(n, [&] { workloads::validate(j); });
  return sub;
}

ScenarioSpec parse_root(const YAML::Node& root) {
  only_keys(root, {"name", "description", "seed", "slots", "heap", "scheduler", "engine", "jobs"}, "scenario");
  ScenarioSpec s;
  s.name = scalar<std::string>(require(root, "name", "scenario"), "name");
  read_opt(root, "description", s.description);
  read_opt(root, "seed", s.seed);
  read_opt(root, "slots", s.slots);

  if (auto h = root["heap"]) {
    only_keys(h,
              {"total_bytes", "young_fraction", "yellow", "red", "minor_pause_ns_per_surviving_byte",
               "full_pause_ns_per_live_byte"},
              "heap");
    read_opt(h, "total_bytes", s.heap.total_bytes);
    read_opt(h, "young_fraction", s.heap.young_fraction);
    read_opt(h, "yellow", s.heap.yellow);
    read_opt(h, "red", s.heap.red);
    read_opt(h, "minor_pause_ns_per_surviving_byte", s.heap.minor_pause_ns_per_surviving_byte);
    read_opt(h, "full_pause_ns_per_live_byte", s.heap.full_pause_ns_per_live_byte);
    with_line(h, [&] { heap::validate(s.heap); });
  }
  s.scheduler.yellow = s.heap.yellow;
  s.scheduler.red = s.heap.red;

  auto jobs = require(root, "jobs", "scenario");
  if (!jobs.IsSequence() || jobs.size() == 0) throw ConfigError("'jobs' must be a non-empty list", line_of(jobs));
  for (const auto& j : jobs) s.jobs.push_back(parse_job(j));

  if (auto sc = root["scheduler"]) {
    only_keys(sc, {"policy", "fair_pool_weights"}, "scheduler");
    if (auto p = sc["policy"]) {
      s.scheduler.policy = with_line(p, [&] { return sched::policy_from_string(scalar<std::string>(p, "policy")); });
    }
    if (auto w = sc["fair_pool_weights"]) {
      if (!w.IsMap()) throw ConfigError("'fair_pool_weights' maps job names to weights", line_of(w));
      for (const auto& kv : w) {
        const auto name = kv.first.as<std::string>();
        std::optional<sched::JobId> id;
        for (std::size_t i = 0; i < s.jobs.size(); ++i) {
          if (s.jobs[i].job.name == name) id = static_cast<sched::JobId>(i);
        }
        if (!id) throw ConfigError("fair pool weight for unknown job '" + name + "'", line_of(kv.first));
        s.scheduler.fair_pool_weights[*id] = scalar<double>(kv.second, "weight");
      }
    }
  }

  if (auto e = root["engine"]) {
    only_keys(e,
              {"compute_ns_per_byte", "spill_ns_per_byte", "exec_memory_fraction", "buffer_entry_overhead",
               "group_element_overhead", "task_context_bytes", "job_context_bytes", "sampler", "scratch_dir"},
              "engine");
    auto& c = s.engine;
    read_opt(e, "compute_ns_per_byte", c.compute_ns_per_byte);
    read_opt(e, "spill_ns_per_byte", c.spill_ns_per_byte);
    read_opt(e, "exec_memory_fraction", c.exec_memory_fraction);
    read_opt(e, "buffer_entry_overhead", c.buffer_entry_overhead);
    read_opt(e, "group_element_overhead", c.group_element_overhead);
    read_opt(e, "task_context_bytes", c.task_context_bytes);
    read_opt(e, "job_context_bytes", c.job_context_bytes);
    read_opt(e, "scratch_dir", c.scratch_dir);
    if (auto sm = e["sampler"]) {
      only_keys(sm, {"period_steps", "window", "trend_epsilon"}, "sampler");
      read_opt(sm, "period_steps", c.sampler.period_steps);
      read_opt(sm, "window", c.sampler.window);
      read_opt(sm, "trend_epsilon", c.sampler.trend_epsilon);
    }
    with_line(e, [&] { workloads::validate(c); });
  }

  with_line(jobs, [&] { workloads::validate(s); });
  return s;
}

// Shortest decimal that reads back to the same double.
std::string num(double x) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, x);
  (void)ec;
  return std::string(buf, end);
}

void emit_api(YAML::Emitter& out, const api::ApiCatalogEntry& e) {
  const auto base = api::lookup(e.name());
  std::string name = e.name();
  if (e.phase_affinity != base.phase_affinity) name += "@" + std::string(api::to_string(e.phase_affinity));
  if (e.params == base.params) {
    out << name;
    return;
  }
  out << YAML::Flow << YAML::BeginMap << YAML::Key << "api" << YAML::Value << name;
  const api::OpParams d;
  if (e.params.keep_fraction != d.keep_fraction) out << YAML::Key << "keep_fraction" << YAML::Value << num(e.params.keep_fraction);
  if (e.params.fanout != d.fanout) out << YAML::Key << "fanout" << YAML::Value << e.params.fanout;
  if (e.params.key_modulus != d.key_modulus) out << YAML::Key << "key_modulus" << YAML::Value << e.params.key_modulus;
  if (e.params.salt != d.salt) out << YAML::Key << "salt" << YAML::Value << e.params.salt;
  out << YAML::EndMap;
}

}  // namespace

ScenarioSpec parse_scenario(const std::string& text) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    throw ConfigError(e.msg, e.mark.line + 1);
  }
  if (!root || !root.IsMap()) throw ConfigError("scenario file must be a mapping", 1);
  return parse_root(root);
}

ScenarioSpec load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read scenario file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_scenario(ss.str());
}

std::string dump_scenario(const ScenarioSpec& s) {
  YAML::Emitter out;
  out << YAML::BeginMap;
  out << YAML::Key << "name" << YAML::Value << s.name;
  if (!s.description.empty()) out << YAML::Key << "description" << YAML::Value << s.description;
  out << YAML::Key << "seed" << YAML::Value << s.seed;
  out << YAML::Key << "slots" << YAML::Value << s.slots;

  out << YAML::Key << "heap" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "total_bytes" << YAML::Value << s.heap.total_bytes;
  out << YAML::Key << "young_fraction" << YAML::Value << num(s.heap.young_fraction);
  out << YAML::Key << "yellow" << YAML::Value << num(s.heap.yellow);
  out << YAML::Key << "red" << YAML::Value << num(s.heap.red);
  out << YAML::Key << "minor_pause_ns_per_surviving_byte" << YAML::Value
      << num(s.heap.minor_pause_ns_per_surviving_byte);
  out << YAML::Key << "full_pause_ns_per_live_byte" << YAML::Value << num(s.heap.full_pause_ns_per_live_byte);
  out << YAML::EndMap;

  out << YAML::Key << "scheduler" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "policy" << YAML::Value << std::string(sched::to_string(s.scheduler.policy));
  if (!s.scheduler.fair_pool_weights.empty()) {
    out << YAML::Key << "fair_pool_weights" << YAML::Value << YAML::BeginMap;
    for (const auto& [id, w] : s.scheduler.fair_pool_weights) {
      out << YAML::Key << s.jobs.at(id).job.name << YAML::Value << num(w);
    }
    out << YAML::EndMap;
  }
  out << YAML::EndMap;

  const auto& c = s.engine;
  out << YAML::Key << "engine" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "compute_ns_per_byte" << YAML::Value << num(c.compute_ns_per_byte);
  out << YAML::Key << "spill_ns_per_byte" << YAML::Value << num(c.spill_ns_per_byte);
  out << YAML::Key << "exec_memory_fraction" << YAML::Value << num(c.exec_memory_fraction);
  out << YAML::Key << "buffer_entry_overhead" << YAML::Value << c.buffer_entry_overhead;
  out << YAML::Key << "group_element_overhead" << YAML::Value << c.group_element_overhead;
  out << YAML::Key << "task_context_bytes" << YAML::Value << c.task_context_bytes;
  out << YAML::Key << "job_context_bytes" << YAML::Value << c.job_context_bytes;
  if (!c.scratch_dir.empty()) out << YAML::Key << "scratch_dir" << YAML::Value << c.scratch_dir;
  out << YAML::Key << "sampler" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "period_steps" << YAML::Value << c.sampler.period_steps;
  out << YAML::Key << "window" << YAML::Value << c.sampler.window;
  out << YAML::Key << "trend_epsilon" << YAML::Value << num(c.sampler.trend_epsilon);
  out << YAML::EndMap << YAML::EndMap;

  out << YAML::Key << "jobs" << YAML::Value << YAML::BeginSeq;
  for (const auto& sub : s.jobs) {
    const auto& j = sub.job;
    out << YAML::BeginMap;
    out << YAML::Key << "name" << YAML::Value << j.name;
    if (sub.trigger) {
      out << YAML::Key << "after" << YAML::Value << YAML::Flow << YAML::BeginMap << YAML::Key << "job" << YAML::Value
          << sub.trigger->job << YAML::Key << "stage" << YAML::Value << sub.trigger->stage << YAML::EndMap;
    } else {
      out << YAML::Key << "submit_time_ns" << YAML::Value << sub.submit_time_ns;
    }
    out << YAML::Key << "tasks_per_stage" << YAML::Value << j.tasks_per_stage;
    if (j.iterations != 1) out << YAML::Key << "iterations" << YAML::Value << j.iterations;
    if (j.cache_after_stage) out << YAML::Key << "cache_after_stage" << YAML::Value << *j.cache_after_stage;
    out << YAML::Key << "dataset" << YAML::Value << YAML::BeginMap;
    out << YAML::Key << "record_count" << YAML::Value << j.dataset.record_count;
    out << YAML::Key << "key_cardinality" << YAML::Value << j.dataset.key_cardinality;
    out << YAML::Key << "key_pattern" << YAML::Value << std::string(kv::to_string(j.dataset.key_pattern));
    out << YAML::Key << "value_size_bytes" << YAML::Value << j.dataset.value_size_bytes;
    out << YAML::Key << "seed" << YAML::Value << j.dataset.seed;
    out << YAML::Key << "record_overhead" << YAML::Value << j.dataset.record_overhead;
    out << YAML::EndMap;
    out << YAML::Key << "stages" << YAML::Value << YAML::BeginSeq;
    for (const auto& st : j.stages) {
      out << YAML::Flow << YAML::BeginSeq;
      for (const auto& e : st.pipeline) emit_api(out, e);
      out << YAML::EndSeq;
    }
    out << YAML::EndSeq << YAML::EndMap;
  }
  out << YAML::EndSeq << YAML::EndMap;
  return std::string(out.c_str()) + "\n";
}

}  // namespace murs::io
