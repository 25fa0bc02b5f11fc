#include <set>

#include <gtest/gtest.h>

#include "aps/forge.hpp"
#include "aps/sim.hpp"
#include "fakes.hpp"

using aps::testing::ScriptedBackend;
using aps::testing::fast_retry;

namespace {

std::vector<aps::QAExample> examples(std::size_t n) {
  std::vector<aps::QAExample> xs;
  for (std::size_t i = 0; i < n; ++i)
    xs.push_back({"e" + std::to_string(i), "question " + std::to_string(i), "", "", std::to_string(i),
                  aps::AnswerType::FreeFormNumeric, aps::Split::Train});
  return xs;
}

}  // namespace

TEST(ParsePromptList, NumberedPreferred) {
  const auto out = aps::parse_prompt_list("Here you go:\n1. First one\n2) \"Second one\"\n\n3. Third\n");
  EXPECT_EQ(out, (std::vector<std::string>{"First one", "Second one", "Third"}));
}

TEST(ParsePromptList, PlainLinesWithBullets) {
  EXPECT_EQ(aps::parse_prompt_list("- alpha\n* beta\ngamma\n"), (std::vector<std::string>{"alpha", "beta", "gamma"}));
  EXPECT_TRUE(aps::parse_prompt_list("\n  \n").empty());
}

TEST(Dedup, CaseAndWhitespaceInsensitiveFirstWins) {
  std::vector<aps::Prompt> ps{{"a", "Solve  it", 0}, {"b", "solve it ", 1}, {"c", "Other", 1}};
  const auto out = aps::dedup(ps);
  ASSERT_EQ(out.size(), 2u);
  EXPECT_EQ(out[0].id, "a");
  EXPECT_EQ(out[1].id, "c");
}

TEST(MetaPrompt, SaturatesAtClusterSizeAndIsDeterministic) {
  const auto xs = examples(4);
  const auto meta = aps::build_meta_prompt(xs, 10, 1, 0, 3);
  EXPECT_EQ(meta.demonstrations.size(), 4u);
  const auto big = examples(30);
  const auto a = aps::build_meta_prompt(big, 10, 5, 2, 3);
  EXPECT_EQ(a.demonstrations.size(), 10u);
  EXPECT_EQ(a, aps::build_meta_prompt(big, 10, 5, 2, 3));
  EXPECT_NE(a.demonstrations, aps::build_meta_prompt(big, 10, 6, 2, 3).demonstrations);
  EXPECT_NE(a.render().find("exactly 3"), std::string::npos);
  EXPECT_THROW(aps::build_meta_prompt(std::vector<aps::QAExample>{}, 10, 1, 0, 3), aps::Error);
}

TEST(GeneratePrompts, RetriesWhenShortThenStops) {
  auto backend = std::make_shared<ScriptedBackend>([](const aps::ChatRequest&, std::size_t call) {
    return call == 0 ? std::string("1. only one") : std::string("1. only one\n2. a second");
  });
  aps::Gateway gw(backend, fast_retry());
  const auto meta = aps::build_meta_prompt(examples(3), 10, 1, 4, 3);
  const auto ps = aps::generate_prompts(gw, meta, 3, {});
  EXPECT_EQ(ps.size(), 2u);
  EXPECT_EQ(backend->seen().size(), 1u + aps::kForgeRetryCap);
  EXPECT_EQ(ps[0].origin_cluster, 4);
  EXPECT_EQ(gw.ledger().snapshot().forge, 1u + aps::kForgeRetryCap);
}

TEST(GeneratePrompts, NothingParsableNamesCluster) {
  auto backend = std::make_shared<ScriptedBackend>([](const aps::ChatRequest&, std::size_t) { return std::string("  "); });
  aps::Gateway gw(backend, fast_retry());
  try {
    aps::generate_prompts(gw, aps::build_meta_prompt(examples(3), 10, 1, 7, 3), 3, {});
    FAIL();
  } catch (const aps::Error& e) {
    EXPECT_EQ(e.kind(), aps::ErrorKind::Forge);
    EXPECT_NE(std::string(e.what()).find("cluster 7"), std::string::npos);
  }
}

TEST(BuildDatabase, SimWorldCoversEveryTopic) {
  auto world = std::make_shared<aps::SimWorld>(aps::default_sim_topics(4), 7);
  const auto corpus = aps::make_sim_corpus(*world, 200, 0, 7);
  aps::Gateway gw(std::make_shared<aps::SimBackend>(world), fast_retry());
  aps::PipelineConfig cfg;
  cfg.clusters = 4;
  cfg.top_k = 3;
  aps::HashEmbedder embedder;
  std::vector<std::string> texts, ids;
  for (const auto& ex : corpus.train) {
    texts.push_back(aps::clustering_text(ex));
    ids.push_back(ex.id);
  }
  const auto clusters = aps::kmeans(aps::embed(embedder, texts), 4, 1, ids);
  const auto db = aps::build_database(corpus.train, clusters, gw, cfg);
  EXPECT_LE(db.size(), cfg.max_database_size());
  EXPECT_EQ(gw.ledger().snapshot().forge, 4u);
  std::set<std::size_t> topics;
  for (const auto& p : db.prompts) {
    if (auto t = world->prompt_topic(p.text)) topics.insert(*t);
    EXPECT_GE(p.origin_cluster, 0);
  }
  EXPECT_EQ(topics.size(), 4u);
  EXPECT_EQ(db.prompts.front().id, "p000");
  EXPECT_EQ(db, aps::build_database(corpus.train, clusters, gw, cfg));
}

TEST(BuildDatabase, UnclusteredTagsNoCluster) {
  auto world = std::make_shared<aps::SimWorld>(aps::default_sim_topics(4), 7);
  const auto corpus = aps::make_sim_corpus(*world, 40, 0, 7);
  aps::Gateway gw(std::make_shared<aps::SimBackend>(world), fast_retry());
  aps::PipelineConfig cfg;
  cfg.clusters = 3;
  cfg.top_k = 1;
  cfg.clustering = false;
  const auto db = aps::build_database(corpus.train, aps::ClusterModel{}, gw, cfg);
  EXPECT_EQ(gw.ledger().snapshot().forge, 3u);
  for (const auto& p : db.prompts) EXPECT_EQ(p.origin_cluster, aps::kNoCluster);
}

TEST(PromptId, WidthGrowsWithDatabase) {
  EXPECT_EQ(aps::prompt_id(7, 30), "p007");
  EXPECT_EQ(aps::prompt_id(7, 2000), "p0007");
}
