#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "aps/answer.hpp"
#include "aps/gateway.hpp"
#include "aps/hash.hpp"
#include "aps/prompt_templates.hpp"
#include "aps/rng.hpp"
#include "aps/text.hpp"

namespace aps {

struct SimTopic {
  std::string keyword;
  std::vector<std::string> vocabulary;  // includes the keyword
};

// Offline stand-in for the LLM. Each question belongs to one topic (by
// vocabulary), each prompt to at most one topic (by keyword), and the solver
// answers correctly exactly when the two agree.
class SimWorld {
 public:
  struct Entry {
    std::string example_id;
    std::string gold;
    AnswerType answer_type = AnswerType::FreeFormNumeric;
  };

  SimWorld(std::vector<SimTopic> topics, std::uint64_t sim_seed) : topics_(std::move(topics)), sim_seed_(sim_seed) {
    if (topics_.empty()) throw Error(ErrorKind::Config, "sim world needs at least one topic");
  }

  std::size_t topic_count() const { return topics_.size(); }
  const std::vector<SimTopic>& topics() const { return topics_; }
  std::uint64_t sim_seed() const { return sim_seed_; }

  /// Topic with the most vocabulary hits; ties go to the lower index.
  std::size_t question_topic(std::string_view question) const {
    const auto tokens = text::tokenize(question);
    std::size_t best = 0;
    std::size_t best_hits = 0;
    for (std::size_t t = 0; t < topics_.size(); ++t) {
      std::size_t hits = 0;
      for (const auto& tok : tokens)
        hits += static_cast<std::size_t>(std::count(topics_[t].vocabulary.begin(), topics_[t].vocabulary.end(), tok));
      if (hits > best_hits) {
        best_hits = hits;
        best = t;
      }
    }
    return best;
  }

  std::size_t question_topic(const QAExample& ex) const { return question_topic(ex.question); }

  /// First topic whose keyword occurs as a token of the prompt.
  std::optional<std::size_t> prompt_topic(std::string_view prompt) const {
    for (const auto& tok : text::tokenize(prompt))
      for (std::size_t t = 0; t < topics_.size(); ++t)
        if (topics_[t].keyword == tok) return t;
    return std::nullopt;
  }

  void add(const QAExample& ex) { registry_[ex.question] = {ex.id, ex.gold_answer, ex.answer_type}; }

  void add_all(const std::vector<QAExample>& examples) {
    for (const auto& ex : examples) add(ex);
  }

  const Entry* lookup(const std::string& question) const {
    const auto it = registry_.find(question);
    return it == registry_.end() ? nullptr : &it->second;
  }

 private:
  std::vector<SimTopic> topics_;
  std::uint64_t sim_seed_;
  std::map<std::string, Entry> registry_;
};

inline std::vector<SimTopic> default_sim_topics(std::size_t count) {
  static const std::vector<SimTopic> kAll = {
      {"percent", {"percent", "discount", "price", "sale", "interest", "tax", "store", "rate"}},
      {"geometry", {"geometry", "rectangle", "area", "perimeter", "width", "garden", "fence", "square"}},
      {"speed", {"speed", "train", "miles", "hour", "distance", "travels", "car", "trip"}},
      {"fractions", {"fractions", "pie", "share", "equally", "slices", "cake", "friends", "portion"}},
      {"ages", {"ages", "older", "years", "younger", "brother", "sister", "born", "twice"}},
      {"money", {"money", "coins", "dollars", "saves", "earns", "week", "allowance", "wallet"}},
      {"inventory", {"inventory", "boxes", "crates", "apples", "warehouse", "stock", "shelves", "packs"}},
      {"time", {"time", "minutes", "clock", "schedule", "starts", "finishes", "shift", "lunch"}},
  };
  if (count < 1 || count > kAll.size())
    throw Error(ErrorKind::Config, "sim topic count must lie in [1, " + std::to_string(kAll.size()) + "]");
  return {kAll.begin(), kAll.begin() + static_cast<std::ptrdiff_t>(count)};
}

struct SimCorpus {
  std::vector<QAExample> train;
  std::vector<QAExample> test;
};

/// Topic-structured free-form word problems. Questions are unique; topics
/// are assigned round-robin so every topic is equally represented.
inline SimCorpus make_sim_corpus(const SimWorld& world, std::size_t n_train, std::size_t n_test, std::uint64_t seed) {
  static const char* kFillers[] = {"total", "many", "each", "more", "left", "some", "after", "before"};
  CounterRng rng(seed, 0x51u);
  SimCorpus corpus;
  std::map<std::string, bool> seen;
  const auto pick = [&](const std::vector<std::string>& words) -> const std::string& {
    return words[rng.below(words.size())];
  };
  const auto make = [&](std::size_t index, Split split) {
    const auto& topic = world.topics()[index % world.topic_count()];
    QAExample ex;
    do {
      const long a = 2 + static_cast<long>(rng.below(98));
      const long b = 2 + static_cast<long>(rng.below(98));
      ex.question = "The " + pick(topic.vocabulary) + " and " + pick(topic.vocabulary) + " come with " +
                    std::to_string(a) + " " + pick(topic.vocabulary) + ", then " + std::to_string(b) + " " +
                    pick(topic.vocabulary) + " join the " + pick(topic.vocabulary) + ". How " +
                    kFillers[rng.below(8)] + " " + kFillers[rng.below(8)] + " are there in all?";
      ex.gold_answer = std::to_string(a + b);
    } while (seen.contains(ex.question));
    seen[ex.question] = true;
    ex.id = std::string("sim-") + std::string(to_string(split)) + "-" + text::zero_pad(index, 5);
    ex.answer_type = AnswerType::FreeFormNumeric;
    ex.split = split;
    return ex;
  };
  for (std::size_t i = 0; i < n_train; ++i) corpus.train.push_back(make(i, Split::Train));
  for (std::size_t i = 0; i < n_test; ++i) corpus.test.push_back(make(i, Split::Test));
  return corpus;
}

namespace detail {

inline std::string perturb_answer(const std::string& gold, AnswerType type) {
  if (type == AnswerType::MultipleChoice) {
    const char letter = gold.empty() ? 'A' : gold[0];
    return std::string(1, letter >= 'E' ? 'A' : static_cast<char>(letter + 1));
  }
  if (gold.find('.') == std::string::npos && gold.size() < 18) return std::to_string(std::stoll(gold) + 1);
  const Answer shifted = canonical_answer(std::to_string(std::stod(gold) + 1.0), AnswerType::FreeFormNumeric);
  return shifted ? *shifted : gold + "1";
}

inline constexpr std::string_view kSimPromptPool[] = {
    "Solve this {kw} problem step by step and state the final number.",
    "You are an expert in {kw} questions. List the known quantities, then compute the answer.",
    "Read the {kw} scenario carefully, set up an equation, and solve it.",
    "Break the {kw} word problem into smaller steps and check each calculation.",
    "Identify what the {kw} question asks, write the relevant formula, and evaluate it.",
    "Think like a {kw} tutor: explain the reasoning briefly, then give the result.",
    "Translate the {kw} story into arithmetic operations and carry them out in order.",
    "Estimate first, then compute the {kw} answer exactly and compare both values.",
};

inline std::string sim_forge(const SimWorld& world, const ChatRequest& request) {
  const std::string& meta = request.messages.back().content;
  std::vector<std::size_t> votes(world.topic_count(), 0);
  for (auto line : text::split_lines(meta)) {
    if (line.starts_with(templates::kDemoQuestion))
      ++votes[world.question_topic(line.substr(templates::kDemoQuestion.size()))];
  }
  const std::size_t topic =
      static_cast<std::size_t>(std::max_element(votes.begin(), votes.end()) - votes.begin());

  std::size_t n = 0;
  const std::size_t at = meta.find("exactly ");
  if (at != std::string::npos) n = std::strtoul(meta.c_str() + at + 8, nullptr, 10);
  if (n == 0) throw Error(ErrorKind::Harness, "forge request does not state how many prompts to write");

  constexpr std::size_t kPool = std::size(kSimPromptPool);
  const std::size_t start = Fnv1a{}.update(std::to_string(world.sim_seed())).update(meta).digest() % kPool;
  std::string out;
  for (std::size_t i = 0; i < n; ++i) {
    std::string line(kSimPromptPool[(start + i) % kPool]);
    line.replace(line.find("{kw}"), 4, world.topics()[topic].keyword);
    out += std::to_string(i + 1) + ". " + line + "\n";
  }
  return out;
}

}  // namespace detail

/// Pure and deterministic. Solve/Synthesize requests must follow
/// make_solve_request's layout and name a registered question.
inline std::string sim_complete(const SimWorld& world, const ChatRequest& request) {
  request.validate();
  if (request.stage == Stage::Forge) return detail::sim_forge(world, request);

  std::string prompt;
  const std::string* user = nullptr;
  for (const auto& msg : request.messages) {
    if (msg.role == Role::System)
      prompt = msg.content;
    else
      user = &msg.content;
  }
  if (user == nullptr || !user->starts_with(kQuestionTag))
    throw Error(ErrorKind::Harness, "solve request lacks a question");
  std::string_view body(*user);
  body.remove_prefix(kQuestionTag.size());
  const std::size_t end = std::min(body.find(kContextTag), body.find(kAnswerCue));
  const std::string question(body.substr(0, end));
  const SimWorld::Entry* entry = world.lookup(question);
  if (entry == nullptr) throw Error(ErrorKind::Harness, "question is not registered in the sim world");

  const auto p_topic = world.prompt_topic(prompt);
  const bool correct = p_topic && *p_topic == world.question_topic(question);
  const std::string answer = correct ? entry->gold : detail::perturb_answer(entry->gold, entry->answer_type);
  return "Working through the problem one step at a time.\nThe answer is " + answer + ".";
}

class SimBackend final : public ChatBackend {
 public:
  explicit SimBackend(std::shared_ptr<const SimWorld> world) : world_(std::move(world)) {}
  std::string id() const override { return "sim/" + std::to_string(world_->sim_seed()); }
  std::string complete(const ChatRequest& request) override { return sim_complete(*world_, request); }

 private:
  std::shared_ptr<const SimWorld> world_;
};

}  // namespace aps
