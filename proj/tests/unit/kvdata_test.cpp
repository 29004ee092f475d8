#include <gtest/gtest.h>

#include <map>
#include <set>

#include "murs/error.hpp"
#include "murs/kvdata.hpp"

using namespace murs;
using namespace murs::kv;

namespace {

// Upper 0.001 point of chi-square with 999 degrees of freedom, computed
// offline with an independent statistics package and frozen here.
constexpr double kChiSquare999At0001 = 1142.8479838910355;

DatasetSpec spec(std::uint64_t n, std::uint64_t c, KeyPattern p, std::uint64_t seed = 1) {
  return DatasetSpec{n, c, p, 24, seed};
}

}  // namespace

TEST(KvData, ZeroRecordCountIsRejected) {
  EXPECT_THROW(generate(spec(0, 1, KeyPattern::Random)), SpecError);
  EXPECT_THROW(generate(spec(10, 0, KeyPattern::Random)), SpecError);
  EXPECT_THROW(generate(spec(10, 5, KeyPattern::AllUnique)), SpecError);
  auto s = spec(10, 10, KeyPattern::Random);
  s.value_size_bytes = 0;
  EXPECT_THROW(generate(s), SpecError);
}

TEST(KvData, AllUniqueHasOneKeyPerRecord) {
  const auto d = generate(spec(4, 4, KeyPattern::AllUnique));
  std::set<std::uint64_t> keys;
  for (const auto& r : d.materialize()) keys.insert(r.key);
  EXPECT_EQ(keys.size(), 4u);
}

TEST(KvData, RandomKeysCoverTheUniverseUniformly) {
  const auto d = generate(spec(100'000, 1'000, KeyPattern::Random, 7));
  std::map<std::uint64_t, std::uint64_t> freq;
  for (const auto& r : d.materialize()) ++freq[r.key];
  ASSERT_EQ(freq.size(), 1000u);
  const double expected = 100.0;
  double chi2 = 0.0;
  for (const auto& [k, n] : freq) {
    EXPECT_LT(k, 1000u);
    chi2 += (static_cast<double>(n) - expected) * (static_cast<double>(n) - expected) / expected;
  }
  EXPECT_LT(chi2, kChiSquare999At0001);
}

TEST(KvData, ClusteredKeysFormContiguousRuns) {
  const auto d = generate(spec(1000, 37, KeyPattern::Clustered));
  const auto recs = d.materialize();
  std::set<std::uint64_t> keys;
  std::size_t boundaries = 0;
  for (std::size_t i = 0; i < recs.size(); ++i) {
    keys.insert(recs[i].key);
    if (i > 0 && recs[i].key != recs[i - 1].key) ++boundaries;
  }
  EXPECT_EQ(keys.size(), 37u);
  EXPECT_EQ(boundaries, keys.size() - 1);
}

TEST(KvData, GenerationIsDeterministic) {
  const auto s = spec(5000, 300, KeyPattern::Random, 99);
  const auto a = generate(s).materialize();
  const auto b = generate(s).materialize();
  ASSERT_EQ(a, b);
  for (std::size_t i = 0; i < a.size(); i += 97) {
    EXPECT_EQ(value_bytes(a[i], s.record_overhead), value_bytes(b[i], s.record_overhead));
  }
  auto other = s;
  other.seed = 100;
  EXPECT_NE(generate(other).materialize(), a);
}

TEST(KvData, RecordSizeIsKeyPlusValuePlusOverhead) {
  const auto d = generate(spec(10, 10, KeyPattern::AllUnique));
  for (const auto& r : d.materialize()) {
    EXPECT_EQ(r.size_bytes, key_bytes(r).size() + value_bytes(r, kDefaultRecordOverhead).size() + kDefaultRecordOverhead);
    EXPECT_GT(r.size_bytes, 0u);
  }
  const Record r{0x0102030405060708ULL, 0, 0};
  EXPECT_EQ(key_bytes(r), (std::vector<std::uint8_t>{1, 2, 3, 4, 5, 6, 7, 8}));
}

TEST(KvData, SplitsAreBalanced) {
  const auto d = generate(spec(10, 10, KeyPattern::AllUnique));
  EXPECT_THROW(split_dataset(d, 0), SpecError);

  const auto one = split_dataset(d, 1);
  ASSERT_EQ(one.size(), 1u);
  EXPECT_EQ(one[0].start, 0u);
  EXPECT_EQ(one[0].end, 10u);

  const auto three = split_dataset(d, 3);
  ASSERT_EQ(three.size(), 3u);
  EXPECT_EQ(three[0].count(), 4u);
  EXPECT_EQ(three[1].count(), 3u);
  EXPECT_EQ(three[2].count(), 3u);
}

TEST(KvData, SplitsPartitionTheDataset) {
  const auto d = generate(spec(100'000, 1000, KeyPattern::Random, 3));
  for (std::size_t n : {1, 7, 16, 64}) {
    const auto splits = split_dataset(d, n);
    Bytes total = 0;
    std::uint64_t next = 0;
    std::vector<Record> joined;
    for (const auto& s : splits) {
      EXPECT_EQ(s.start, next);
      next = s.end;
      total += s.total_bytes;
      const auto part = d.materialize(s);
      joined.insert(joined.end(), part.begin(), part.end());
    }
    EXPECT_EQ(next, d.size());
    EXPECT_EQ(total, d.total_bytes());
    EXPECT_EQ(joined, d.materialize());
  }
}

TEST(KvData, PartitionOfIsStableAndInRange) {
  for (std::uint64_t k = 0; k < 1000; ++k) {
    EXPECT_LT(partition_of(k, 8), 8u);
    EXPECT_EQ(partition_of(k, 8), partition_of(k, 8));
  }
}
