#include <gtest/gtest.h>

#include "aps/answer.hpp"
#include "aps/sim.hpp"

namespace {

struct World {
  std::shared_ptr<aps::SimWorld> world = std::make_shared<aps::SimWorld>(aps::default_sim_topics(4), 7);
  aps::SimCorpus corpus = aps::make_sim_corpus(*world, 200, 80, 7);
  World() {
    world->add_all(corpus.train);
    world->add_all(corpus.test);
  }
};

std::string prompt_for(const aps::SimWorld& w, std::size_t topic) {
  return "Use your " + w.topics()[topic].keyword + " knowledge.";
}

}  // namespace

TEST(Sim, CorpusShape) {
  World w;
  EXPECT_EQ(w.corpus.train.size(), 200u);
  EXPECT_EQ(w.corpus.test.size(), 80u);
  std::vector<std::size_t> per_topic(4, 0);
  std::set<std::string> questions;
  for (const auto* split : {&w.corpus.train, &w.corpus.test})
    for (const auto& ex : *split) {
      ++per_topic[w.world->question_topic(ex)];
      questions.insert(ex.question);
    }
  EXPECT_EQ(questions.size(), 280u);
  for (auto n : per_topic) EXPECT_EQ(n, 70u);
}

// Exhaustive: every question against every topic prompt and the empty prompt.
TEST(Sim, CorrectExactlyWhenTopicsMatch) {
  World w;
  aps::SimBackend backend(w.world);
  for (const auto* split : {&w.corpus.train, &w.corpus.test})
    for (const auto& ex : *split) {
      const std::size_t topic = w.world->question_topic(ex);
      for (std::size_t t = 0; t <= 4; ++t) {
        const std::string prompt = t < 4 ? prompt_for(*w.world, t) : "";
        const auto out = backend.complete(aps::make_solve_request(prompt, ex, {}, aps::Stage::Solve));
        const auto ans = aps::canonical_answer(out, ex.answer_type);
        ASSERT_TRUE(ans.has_value());
        EXPECT_EQ(*ans == ex.gold_answer, t == topic) << ex.id << " prompt topic " << t;
      }
    }
}

TEST(Sim, MultipleChoiceWrongAnswerIsNextLetter) {
  auto world = std::make_shared<aps::SimWorld>(aps::default_sim_topics(2), 1);
  aps::QAExample ex{"m", "What percent discount on the price?", "A)1 B)2 C)3 D)4 E)5", "", "E",
                    aps::AnswerType::MultipleChoice, aps::Split::Test};
  world->add(ex);
  aps::SimBackend backend(world);
  const auto wrong = backend.complete(aps::make_solve_request("geometry hint", ex, {}, aps::Stage::Solve));
  const auto right = backend.complete(aps::make_solve_request("percent hint", ex, {}, aps::Stage::Solve));
  EXPECT_EQ(aps::canonical_answer(wrong, ex.answer_type), "A");
  EXPECT_EQ(aps::canonical_answer(right, ex.answer_type), "E");
}

TEST(Sim, UnregisteredQuestionIsHarnessError) {
  World w;
  aps::QAExample ex{"x", "Who knows?", "", "", "1", aps::AnswerType::FreeFormNumeric, aps::Split::Test};
  try {
    aps::sim_complete(*w.world, aps::make_solve_request("", ex, {}, aps::Stage::Solve));
    FAIL();
  } catch (const aps::Error& e) {
    EXPECT_EQ(e.kind(), aps::ErrorKind::Harness);
  }
}

TEST(Sim, DeterministicCorpus) {
  aps::SimWorld w(aps::default_sim_topics(4), 3);
  EXPECT_EQ(aps::make_sim_corpus(w, 20, 5, 3).train, aps::make_sim_corpus(w, 20, 5, 3).train);
  EXPECT_THROW(aps::default_sim_topics(9), aps::Error);
}
