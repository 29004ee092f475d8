#include "murs/apimodel.hpp"

#include <algorithm>
#include <optional>

#include "murs/error.hpp"

namespace murs::api {

std::string_view to_string(ModelKind k) {
  switch (k) {
    case ModelKind::Constant: return "constant";
    case ModelKind::SubLinear: return "sub-linear";
    case ModelKind::Linear: return "linear";
    case ModelKind::SuperLinear: return "super-linear";
  }
  return "?";
}

std::string_view to_string(Phase p) {
  switch (p) {
    case Phase::Read: return "read";
    case Phase::Process: return "process";
    case Phase::Write: return "write";
  }
  return "?";
}

std::string_view to_string(OutputGrowth g) {
  switch (g) {
    case OutputGrowth::Shrinking: return "shrinking";
    case OutputGrowth::SameSize: return "same_size";
    case OutputGrowth::Growing: return "growing";
  }
  return "?";
}

OutputGrowth output_growth_from_string(std::string_view s) {
  if (s == "shrinking") return OutputGrowth::Shrinking;
  if (s == "same_size") return OutputGrowth::SameSize;
  if (s == "growing") return OutputGrowth::Growing;
  throw SpecError("unknown output growth '" + std::string(s) + "'");
}

Phase phase_from_string(std::string_view s) {
  if (s == "read") return Phase::Read;
  if (s == "process") return Phase::Process;
  if (s == "write") return Phase::Write;
  throw SpecError("unknown phase '" + std::string(s) + "'");
}

void validate(const ApiSemantics& s) {
  if (s.aggregates_value && !s.distinguishes_key) {
    throw SpecError("API '" + s.name + "' aggregates values without distinguishing keys");
  }
}

MemoryModel classify(const ApiSemantics& s, kv::KeyPattern key_pattern) {
  validate(s);
  auto model = [](ModelKind k) {
    return MemoryModel{k, k == ModelKind::Linear ? kDefaultLinearSlope : 0.0};
  };
  if (!s.distinguishes_key) {
    if (!s.caches_result) return model(ModelKind::Constant);
    switch (s.output_growth) {
      case OutputGrowth::Shrinking: return model(ModelKind::SubLinear);
      case OutputGrowth::SameSize: return model(ModelKind::Linear);
      case OutputGrowth::Growing: return model(ModelKind::SuperLinear);
    }
  }
  if (!s.aggregates_value) return model(ModelKind::Linear);
  // Aggregation only saturates when keys recur at random positions.
  return key_pattern == kv::KeyPattern::Random ? model(ModelKind::SubLinear) : model(ModelKind::Linear);
}

namespace {

ApiCatalogEntry entry(std::string name, bool dk, bool agg, bool cache, OutputGrowth growth, Phase phase,
                      OpKind op) {
  ApiSemantics s{std::move(name), dk, agg, cache, growth};
  auto m = classify(s, kv::KeyPattern::Random);
  return ApiCatalogEntry{std::move(s), m, phase, op, OpParams{}};
}

std::vector<ApiCatalogEntry> make_catalog() {
  using enum OutputGrowth;
  std::vector<ApiCatalogEntry> c;
  c.push_back(entry("map", false, false, false, SameSize, Phase::Process, OpKind::Map));
  c.push_back(entry("filter", false, false, false, Shrinking, Phase::Process, OpKind::Filter));
  c.push_back(entry("flatMap", false, false, false, Growing, Phase::Process, OpKind::FlatMap));
  c.push_back(entry("partitionBy", false, false, false, SameSize, Phase::Write, OpKind::PartitionBy));
  c.push_back(entry("reduceByKey", true, true, false, Shrinking, Phase::Write, OpKind::ReduceByKey));
  c.push_back(entry("distinct", true, true, false, Shrinking, Phase::Write, OpKind::Distinct));
  c.push_back(entry("groupByKey", true, false, false, SameSize, Phase::Write, OpKind::GroupByKey));
  c.push_back(entry("sortByKey", true, false, false, SameSize, Phase::Read, OpKind::SortByKey));
  c.push_back(entry("join", true, false, false, Growing, Phase::Read, OpKind::Join));
  // Cached variants: the result of the API is held in memory until the job ends.
  c.push_back(entry("mapCached", false, false, true, SameSize, Phase::Process, OpKind::Map));
  c.push_back(entry("filterCached", false, false, true, Shrinking, Phase::Process, OpKind::Filter));
  c.push_back(entry("flatMapCached", false, false, true, Growing, Phase::Process, OpKind::FlatMap));
  return c;
}

}  // namespace

const std::vector<ApiCatalogEntry>& builtin_catalog() {
  static const std::vector<ApiCatalogEntry> catalog = make_catalog();
  return catalog;
}

const std::vector<std::pair<std::string, std::string>>& catalog_aliases() {
  static const std::vector<std::pair<std::string, std::string>> aliases = {
      {"reduce", "reduceByKey"},         // Hadoop MapReduce, Dryad
      {"where", "filter"},               // Flink
      {"parallelDo", "map"},             // FlumeJava
      {"combineValues", "reduceByKey"},  // FlumeJava
  };
  return aliases;
}

ApiCatalogEntry lookup(std::string_view name) {
  std::string base(name);
  std::optional<Phase> phase;
  if (auto at = base.find('@'); at != std::string::npos) {
    phase = phase_from_string(base.substr(at + 1));
    base.resize(at);
  }
  for (const auto& [alias, target] : catalog_aliases()) {
    if (alias == base) {
      base = target;
      break;
    }
  }
  const auto& cat = builtin_catalog();
  auto it = std::find_if(cat.begin(), cat.end(), [&](const auto& e) { return e.name() == base; });
  if (it == cat.end()) throw SpecError("unknown API '" + std::string(name) + "'");
  auto e = *it;
  if (phase) e.phase_affinity = *phase;
  return e;
}

std::vector<MemoryModel> task_model_sequence(std::span<const ApiCatalogEntry> pipeline, bool caches) {
  if (pipeline.empty()) throw SpecError("pipeline is empty");
  std::size_t first_process = 0;
  std::size_t end_process = pipeline.size();
  if (pipeline.front().phase_affinity == Phase::Read) first_process = 1;
  if (pipeline.size() > first_process && pipeline.back().phase_affinity == Phase::Write) --end_process;
  for (std::size_t i = first_process; i < end_process; ++i) {
    if (pipeline[i].phase_affinity != Phase::Process) {
      throw SpecError("API '" + pipeline[i].name() + "' with " + std::string(to_string(pipeline[i].phase_affinity)) +
                      " affinity in the middle of a pipeline");
    }
  }

  std::vector<MemoryModel> process;
  for (std::size_t i = first_process; i < end_process; ++i) process.push_back(pipeline[i].model);
  if (caches && !process.empty()) {
    auto s = pipeline[end_process - 1].semantics;
    s.caches_result = true;
    process.back() = classify(s, kv::KeyPattern::Random);
  }

  std::optional<MemoryModel> write;
  if (end_process < pipeline.size()) write = pipeline.back().model;
  if (write && write->kind != ModelKind::Constant) {
    std::erase_if(process, [](const MemoryModel& m) { return m.kind == ModelKind::Constant; });
  }

  std::vector<MemoryModel> out;
  if (first_process == 1) out.push_back(pipeline.front().model);
  out.insert(out.end(), process.begin(), process.end());
  if (write) out.push_back(*write);
  return out;
}

}  // namespace murs::api
