#include <gtest/gtest.h>

#include "murs/apimodel.hpp"
#include "murs/error.hpp"
#include "support/reference.hpp"

using namespace murs;
using namespace murs::api;
using kv::KeyPattern;

TEST(ApiModel, ClassifyMatchesTheTruthTable) {
  const auto table = ref::classify_table();
  EXPECT_EQ(table.size(), 54u);
  for (const auto& c : table) {
    const ApiSemantics s{"x", c.dk, c.agg, c.cache, c.growth};
    EXPECT_EQ(classify(s, c.pattern).kind, c.expected)
        << "dk=" << c.dk << " agg=" << c.agg << " cache=" << c.cache << " growth=" << to_string(c.growth)
        << " pattern=" << kv::to_string(c.pattern);
  }
}

TEST(ApiModel, AggregationWithoutKeysIsInvalid) {
  for (bool cache : {false, true}) {
    EXPECT_THROW(classify(ApiSemantics{"bad", false, true, cache, OutputGrowth::SameSize}, KeyPattern::Random),
                 SpecError);
  }
}

TEST(ApiModel, ExamplesFromTheCatalog) {
  EXPECT_EQ(lookup("map").model.kind, ModelKind::Constant);
  EXPECT_EQ(lookup("reduceByKey").model.kind, ModelKind::SubLinear);
  EXPECT_EQ(lookup("groupByKey").model.kind, ModelKind::Linear);
  EXPECT_EQ(lookup("distinct").model.kind, ModelKind::SubLinear);
  EXPECT_EQ(lookup("flatMapCached").model.kind, ModelKind::SuperLinear);
  const auto reduce = lookup("reduceByKey").semantics;
  EXPECT_EQ(classify(reduce, KeyPattern::AllUnique).kind, ModelKind::Linear);
}

TEST(ApiModel, CatalogSurvivesReclassification) {
  for (const auto& e : builtin_catalog()) {
    EXPECT_EQ(classify(e.semantics, KeyPattern::Random), e.model) << e.name();
    EXPECT_EQ(lookup(e.name()), e);
  }
  for (const char* n : {"map", "filter", "flatMap", "reduceByKey", "distinct", "groupByKey", "sortByKey", "join"}) {
    EXPECT_NO_THROW(lookup(n)) << n;
  }
}

TEST(ApiModel, ClusteringNeverMakesAnApiLighter) {
  for (const auto& c : ref::classify_table()) {
    if (c.pattern != KeyPattern::Random) continue;
    const ApiSemantics s{"x", c.dk, c.agg, c.cache, c.growth};
    EXPECT_GE(classify(s, KeyPattern::Clustered).kind, classify(s, KeyPattern::Random).kind);
  }
}

TEST(ApiModel, HeavinessOrdersKindThenSlope) {
  EXPECT_TRUE(heaviness({ModelKind::Constant, 0}, {ModelKind::SubLinear, 0}) < 0);
  EXPECT_TRUE(heaviness({ModelKind::SubLinear, 0}, {ModelKind::Linear, 0.1}) < 0);
  EXPECT_TRUE(heaviness({ModelKind::Linear, 1}, {ModelKind::Linear, 2}) < 0);
  EXPECT_TRUE(heaviness({ModelKind::Linear, 5}, {ModelKind::SuperLinear, 0}) < 0);
}

TEST(ApiModel, AliasesAndPhaseOverrides) {
  EXPECT_EQ(lookup("reduce").name(), "reduceByKey");
  EXPECT_EQ(lookup("where").name(), "filter");
  EXPECT_EQ(lookup("distinct@read").phase_affinity, Phase::Read);
  EXPECT_EQ(lookup("distinct").phase_affinity, Phase::Write);
  EXPECT_THROW(lookup("nope"), SpecError);
  EXPECT_THROW(lookup("map@sideways"), SpecError);
}

TEST(ApiModel, TaskModelSequences) {
  using V = std::vector<ApiCatalogEntry>;
  const V aq{lookup("flatMap"), lookup("reduceByKey")};
  EXPECT_EQ(task_model_sequence(aq, false), (std::vector<MemoryModel>{lookup("reduceByKey").model}));

  const V sorted{lookup("sortByKey"), lookup("map")};
  const auto seq = task_model_sequence(sorted, false);
  ASSERT_EQ(seq.size(), 2u);
  EXPECT_EQ(seq[0].kind, ModelKind::Linear);
  EXPECT_EQ(seq[1].kind, ModelKind::Constant);

  const V single{lookup("map")};
  EXPECT_EQ(task_model_sequence(single, false), (std::vector<MemoryModel>{lookup("map").model}));

  // Caching redefines the process phase by its output growth.
  const V cached{lookup("flatMap")};
  EXPECT_EQ(task_model_sequence(cached, true)[0].kind, ModelKind::SuperLinear);
  const V cached_then_shuffle{lookup("map"), lookup("groupByKey")};
  const auto both = task_model_sequence(cached_then_shuffle, true);
  ASSERT_EQ(both.size(), 2u);
  EXPECT_EQ(both[0].kind, ModelKind::Linear);
  EXPECT_EQ(both[1].kind, ModelKind::Linear);
}

TEST(ApiModel, MalformedPipelinesAreRejected) {
  using V = std::vector<ApiCatalogEntry>;
  EXPECT_THROW(task_model_sequence(V{}, false), SpecError);
  EXPECT_THROW(task_model_sequence(V{lookup("map"), lookup("reduceByKey"), lookup("map")}, false), SpecError);
  EXPECT_THROW(task_model_sequence(V{lookup("map"), lookup("sortByKey")}, false), SpecError);
}
