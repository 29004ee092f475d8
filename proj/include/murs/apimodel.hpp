#pragma once

// Function APIs described by their key/value semantics, and the classification
// of each into one of four memory-usage models.

#include <compare>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "murs/kvdata.hpp"

namespace murs::api {

enum class ModelKind { Constant, SubLinear, Linear, SuperLinear };
enum class OutputGrowth { Shrinking, SameSize, Growing };
enum class Phase { Read, Process, Write };

/// Concrete record transform the engine runs for an API.
enum class OpKind { Map, Filter, FlatMap, ReduceByKey, Distinct, GroupByKey, SortByKey, Join, PartitionBy };

std::string_view to_string(ModelKind k);
std::string_view to_string(Phase p);
std::string_view to_string(OutputGrowth g);
OutputGrowth output_growth_from_string(std::string_view s);
Phase phase_from_string(std::string_view s);

struct ApiSemantics {
  std::string name;
  bool distinguishes_key = false;
  bool aggregates_value = false;
  bool caches_result = false;
  OutputGrowth output_growth = OutputGrowth::SameSize;

  friend bool operator==(const ApiSemantics&, const ApiSemantics&) = default;
};

/// Aggregation is only defined over values sharing a key.
void validate(const ApiSemantics& s);

struct MemoryModel {
  ModelKind kind = ModelKind::Constant;
  double slope_hint = 0.0;  // long-living bytes per input byte; meaningful for Linear

  friend bool operator==(const MemoryModel&, const MemoryModel&) = default;
};

/// Heaviness order: by kind, then (within a kind) by slope.
inline std::partial_ordering heaviness(const MemoryModel& a, const MemoryModel& b) {
  if (a.kind != b.kind) return a.kind <=> b.kind;
  return a.slope_hint <=> b.slope_hint;
}

inline constexpr double kDefaultLinearSlope = 1.0;

struct OpParams {
  double keep_fraction = 0.5;     // filter
  std::uint32_t fanout = 2;       // flatMap
  std::uint64_t key_modulus = 0;  // flatMap output key space; 0 = unbounded
  std::uint64_t salt = 0;         // map / flatMap payload transform

  friend bool operator==(const OpParams&, const OpParams&) = default;
};

struct ApiCatalogEntry {
  ApiSemantics semantics;
  MemoryModel model;
  Phase phase_affinity = Phase::Process;
  OpKind op = OpKind::Map;
  OpParams params;

  const std::string& name() const { return semantics.name; }
  /// Shuffle APIs keep a per-key buffer alive until the task finishes.
  bool buffers() const { return semantics.distinguishes_key; }

  friend bool operator==(const ApiCatalogEntry&, const ApiCatalogEntry&) = default;
};

/// Memory-usage model of an API under the given key-appearance pattern.
/// Throws SpecError if `s` aggregates without distinguishing keys.
MemoryModel classify(const ApiSemantics& s, kv::KeyPattern key_pattern);

/// Spark-named entries plus cached variants; every model is classify(..., Random).
const std::vector<ApiCatalogEntry>& builtin_catalog();

/// (alias, catalog name) pairs for the other systems' API names.
const std::vector<std::pair<std::string, std::string>>& catalog_aliases();

/// Finds an entry by name or alias. A trailing "@read" / "@write" / "@process"
/// overrides the phase affinity. Throws SpecError for unknown names.
ApiCatalogEntry lookup(std::string_view name);

/// Per-phase models in read -> process -> write order. Constant process
/// models are elided when the write phase holds a non-constant shuffle; with
/// `caches` the process phase contributes the redefined (cached) model of its
/// final API. Throws SpecError for empty or malformed pipelines.
std::vector<MemoryModel> task_model_sequence(std::span<const ApiCatalogEntry> pipeline, bool caches);

}  // namespace murs::api
