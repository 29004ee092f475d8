#include "murs/kvdata.hpp"

#include <string>

#include "murs/error.hpp"

namespace murs::kv {

std::string_view to_string(KeyPattern p) {
  switch (p) {
    case KeyPattern::Random: return "random";
    case KeyPattern::Clustered: return "clustered";
    case KeyPattern::AllUnique: return "all_unique";
  }
  return "?";
}

KeyPattern key_pattern_from_string(std::string_view s) {
  if (s == "random") return KeyPattern::Random;
  if (s == "clustered") return KeyPattern::Clustered;
  if (s == "all_unique") return KeyPattern::AllUnique;
  throw SpecError("unknown key pattern '" + std::string(s) + "'");
}

std::vector<std::uint8_t> key_bytes(const Record& r) {
  std::vector<std::uint8_t> out(kKeyBytes);
  for (std::size_t i = 0; i < kKeyBytes; ++i) {
    out[i] = static_cast<std::uint8_t>(r.key >> (8 * (kKeyBytes - 1 - i)));
  }
  return out;
}

std::vector<std::uint8_t> value_bytes(const Record& r, Bytes overhead) {
  const Bytes fixed = kKeyBytes + overhead;
  const Bytes len = r.size_bytes > fixed ? r.size_bytes - fixed : 0;
  std::vector<std::uint8_t> out(len);
  std::uint64_t word = 0;
  for (Bytes i = 0; i < len; ++i) {
    if (i % 8 == 0) word = hash_combine(r.payload, i / 8);
    out[i] = static_cast<std::uint8_t>(word >> (8 * (i % 8)));
  }
  return out;
}

void validate(const DatasetSpec& spec) {
  if (spec.record_count == 0) throw SpecError("dataset record_count must be positive");
  if (spec.key_cardinality == 0) throw SpecError("dataset key_cardinality must be positive");
  if (spec.value_size_bytes == 0) throw SpecError("dataset value_size_bytes must be positive");
  if (spec.key_pattern == KeyPattern::AllUnique && spec.key_cardinality != spec.record_count) {
    throw SpecError("all_unique datasets need key_cardinality == record_count");
  }
}

Dataset::Dataset(DatasetSpec spec, std::uint32_t id) : spec_(spec), id_(id) { validate(spec_); }

std::uint64_t Dataset::key_at(std::uint64_t index) const {
  const auto n = spec_.record_count;
  const auto c = spec_.key_cardinality;
  switch (spec_.key_pattern) {
    case KeyPattern::Random:
      return bounded(hash_combine(spec_.seed, index), c);
    case KeyPattern::Clustered: {
      // Runs of equal keys; with c > n every record gets its own run.
      if (c >= n) return index;
      return static_cast<std::uint64_t>((static_cast<unsigned __int128>(index) * c) / n);
    }
    case KeyPattern::AllUnique:
      return index;
  }
  return index;
}

Record Dataset::record(std::uint64_t index) const {
  return Record{key_at(index), hash_combine(spec_.seed ^ 0xa5a5a5a5ULL, index), record_bytes()};
}

std::vector<Record> Dataset::materialize(const Split& split) const {
  std::vector<Record> out;
  out.reserve(split.count());
  for (auto i = split.start; i < split.end; ++i) out.push_back(record(i));
  return out;
}

std::vector<Record> Dataset::materialize() const {
  return materialize(Split{id_, 0, size(), total_bytes()});
}

Dataset generate(const DatasetSpec& spec, std::uint32_t id) { return Dataset(spec, id); }

std::vector<Split> split_dataset(const Dataset& d, std::size_t n) {
  if (n == 0) throw SpecError("split count must be positive");
  std::vector<Split> splits;
  splits.reserve(n);
  const auto base = d.size() / n;
  const auto extra = d.size() % n;
  std::uint64_t start = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto count = base + (i < extra ? 1 : 0);
    splits.push_back(Split{d.id(), start, start + count, count * d.record_bytes()});
    start += count;
  }
  return splits;
}

}  // namespace murs::kv
