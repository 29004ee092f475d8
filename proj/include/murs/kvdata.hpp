#pragma once

// Synthetic key-value datasets and the byte-accounting primitives that the
// heap model, engine and sampler all measure against.

#include <compare>
#include <cstdint>
#include <string_view>
#include <vector>

namespace murs {

using Bytes = std::uint64_t;

namespace kv {

inline constexpr Bytes kKeyBytes = 8;
inline constexpr Bytes kDefaultRecordOverhead = 16;

enum class KeyPattern { Random, Clustered, AllUnique };

std::string_view to_string(KeyPattern p);
KeyPattern key_pattern_from_string(std::string_view s);

/// One key-value pair. The key is an 8-byte integer encoding; the value is a
/// byte string expanded deterministically from `payload`. `size_bytes` is
/// key + value + the per-record overhead of the run.
struct Record {
  std::uint64_t key = 0;
  std::uint64_t payload = 0;
  Bytes size_bytes = 0;

  friend auto operator<=>(const Record&, const Record&) = default;
};

inline Bytes record_size(Bytes value_bytes, Bytes overhead) {
  return kKeyBytes + value_bytes + overhead;
}

/// Big-endian encoding of the key.
std::vector<std::uint8_t> key_bytes(const Record& r);

/// The value bytes of `r`; length is size_bytes - key - overhead.
std::vector<std::uint8_t> value_bytes(const Record& r, Bytes overhead);

struct DatasetSpec {
  std::uint64_t record_count = 0;
  std::uint64_t key_cardinality = 0;
  KeyPattern key_pattern = KeyPattern::Random;
  Bytes value_size_bytes = 0;
  std::uint64_t seed = 0;
  Bytes record_overhead = kDefaultRecordOverhead;

  friend bool operator==(const DatasetSpec&, const DatasetSpec&) = default;
};

/// Throws SpecError on zero counts, or AllUnique with cardinality != count.
void validate(const DatasetSpec& spec);

/// Contiguous record range [start, end) of one dataset.
struct Split {
  std::uint32_t dataset_id = 0;
  std::uint64_t start = 0;
  std::uint64_t end = 0;
  Bytes total_bytes = 0;

  std::uint64_t count() const { return end - start; }
  friend bool operator==(const Split&, const Split&) = default;
};

/// A dataset is a pure function of its spec: records are produced on demand,
/// so nothing is held in memory until a split is materialized.
class Dataset {
 public:
  explicit Dataset(DatasetSpec spec, std::uint32_t id = 0);

  const DatasetSpec& spec() const { return spec_; }
  std::uint32_t id() const { return id_; }
  std::uint64_t size() const { return spec_.record_count; }
  Bytes record_bytes() const { return record_size(spec_.value_size_bytes, spec_.record_overhead); }
  Bytes total_bytes() const { return record_bytes() * size(); }

  Record record(std::uint64_t index) const;
  std::vector<Record> materialize(const Split& split) const;
  std::vector<Record> materialize() const;

 private:
  std::uint64_t key_at(std::uint64_t index) const;

  DatasetSpec spec_;
  std::uint32_t id_;
};

Dataset generate(const DatasetSpec& spec, std::uint32_t id = 0);

/// n balanced splits: counts differ by at most one, earlier splits larger.
std::vector<Split> split_dataset(const Dataset& d, std::size_t n);

// Hashing shared by generation, partitioning and operator transforms.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t hash_combine(std::uint64_t a, std::uint64_t b) {
  return mix64(a ^ (mix64(b) + 0x632be59bd9b4e019ULL));
}

/// Uniform draw in [0, bound) from a 64-bit hash (multiply-shift).
inline std::uint64_t bounded(std::uint64_t h, std::uint64_t bound) {
  return static_cast<std::uint64_t>((static_cast<unsigned __int128>(h) * bound) >> 64);
}

/// Shuffle partition of a key among `partitions` downstream tasks.
inline std::uint32_t partition_of(std::uint64_t key, std::uint32_t partitions) {
  return static_cast<std::uint32_t>(mix64(key ^ 0x5bd1e995ULL) % partitions);
}

}  // namespace kv
}  // namespace murs
