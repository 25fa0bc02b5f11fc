#pragma once

#include <algorithm>
#include <cstddef>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "aps/answer.hpp"
#include "aps/artifact.hpp"
#include "aps/evaluator.hpp"
#include "aps/gateway.hpp"

namespace aps {

struct RankedEntry {
  std::string prompt_id;
  double score = 0.0;

  friend bool operator==(const RankedEntry&, const RankedEntry&) = default;
};

// Whole database, descending score, ties by ascending prompt id.
struct RankedPrompts {
  std::vector<RankedEntry> entries;

  const RankedEntry& best() const { return entries.front(); }
};

using PromptScorer = std::function<double(const QAExample&, const Prompt&)>;

/// Scores every prompt for `ex` without calling any LLM.
inline RankedPrompts rank_prompts(const PromptScorer& scorer, const QAExample& ex, const PromptDatabase& db) {
  if (db.empty()) throw Error(ErrorKind::Precondition, "cannot rank an empty prompt database");
  RankedPrompts ranked;
  ranked.entries.reserve(db.size());
  for (const auto& p : db.prompts) ranked.entries.push_back({p.id, scorer(ex, p)});
  std::sort(ranked.entries.begin(), ranked.entries.end(), [](const RankedEntry& a, const RankedEntry& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.prompt_id < b.prompt_id;
  });
  return ranked;
}

/// Scorer backed by a trained checkpoint. The checkpoint's feature recipe
/// must match the featurizer's.
inline PromptScorer checkpoint_scorer(const Checkpoint& ckpt, const Featurizer& featurizer) {
  if (ckpt.feature_recipe != featurizer.recipe())
    throw Error(ErrorKind::CheckpointCompat, "checkpoint was trained with features '" + ckpt.feature_recipe +
                                                 "' but the provider yields '" + featurizer.recipe() + "'");
  return [&ckpt, &featurizer](const QAExample& ex, const Prompt& p) {
    return score(ckpt.model, featurizer.featurize(ex, p));
  };
}

inline RankedPrompts rank_prompts(const Checkpoint& ckpt, const Featurizer& featurizer, const QAExample& ex,
                                  const PromptDatabase& db) {
  return rank_prompts(checkpoint_scorer(ckpt, featurizer), ex, db);
}

/// Most frequent answer among `answers` (given in rank order). Ties go to
/// the tied answer that appears first. NoAnswer entries are ignored unless
/// nothing else is present.
inline Answer mode_vote(const std::vector<Answer>& answers) {
  if (answers.empty()) throw Error(ErrorKind::Precondition, "cannot vote over no answers");
  std::map<std::string, std::size_t> counts;
  for (const auto& a : answers)
    if (a) ++counts[*a];
  if (counts.empty()) return std::nullopt;
  Answer best;
  std::size_t best_count = 0;
  for (const auto& a : answers) {
    if (!a) continue;
    const std::size_t c = counts[*a];
    if (c > best_count) {
      best = a;
      best_count = c;
    }
  }
  return best;
}

struct AnswerTrace {
  std::string example_id;
  std::string mode;
  std::vector<RankedEntry> ranking;  // empty for baselines
  std::size_t k = 0;
  std::vector<std::string> prompts_used;
  std::vector<std::string> raw_outputs;
  std::vector<Answer> canonical_answers;
  std::vector<std::pair<std::string, std::size_t>> tally;  // first-seen order
  std::size_t no_answers_excluded = 0;
  Answer final_answer;
  std::string gold_answer;
  bool correct = false;
};

namespace detail {

inline void finish_trace(AnswerTrace& trace, const QAExample& ex) {
  std::map<std::string, std::size_t> counts;
  for (const auto& a : trace.canonical_answers) {
    if (!a) {
      ++trace.no_answers_excluded;
      continue;
    }
    if (counts[*a]++ == 0) trace.tally.emplace_back(*a, 0);
  }
  for (auto& [a, c] : trace.tally) c = counts[a];
  if (counts.empty()) trace.no_answers_excluded = 0;  // nothing was outvoted
  trace.final_answer = mode_vote(trace.canonical_answers);
  trace.gold_answer = ex.gold_answer;
  trace.correct = trace.final_answer && *trace.final_answer == ex.gold_answer;
}

}  // namespace detail

/// Solves `ex` with the top-k prompts of the ranking and votes. k = 1 makes
/// a single solver call with the best prompt. Issues exactly k Solve calls.
inline AnswerTrace answer(const QAExample& ex, const PromptScorer& scorer, const PromptDatabase& db, Gateway& gateway,
                          std::size_t k, const GenerationParams& params = {}) {
  if (k < 1) throw Error(ErrorKind::Config, "k must be >= 1");
  if (k > db.size())
    throw Error(ErrorKind::Config,
                "k = " + std::to_string(k) + " exceeds the database size " + std::to_string(db.size()));
  AnswerTrace trace;
  trace.example_id = ex.id;
  trace.k = k;
  trace.mode = k == 1 ? "aps-novote" : "aps-vote-" + std::to_string(k);
  trace.ranking = rank_prompts(scorer, ex, db).entries;

  std::vector<ChatRequest> requests;
  for (std::size_t i = 0; i < k; ++i) {
    trace.prompts_used.push_back(trace.ranking[i].prompt_id);
    requests.push_back(make_solve_request(db.find(trace.ranking[i].prompt_id).text, ex, params, Stage::Solve));
  }
  try {
    trace.raw_outputs = gateway.complete_all(requests);
  } catch (const Error& e) {
    throw Error(e.kind(), "partial trace for " + ex.id + " (ranking done, solving failed): " + e.message());
  }
  for (const auto& raw : trace.raw_outputs) trace.canonical_answers.push_back(canonical_answer(raw, ex.answer_type));
  detail::finish_trace(trace, ex);
  return trace;
}

/// Baseline: one Solve call with a fixed prompt, or none at all when
/// `prompt` is null.
inline AnswerTrace answer_with_prompt(const QAExample& ex, const Prompt* prompt, Gateway& gateway,
                                      const GenerationParams& params = {}) {
  AnswerTrace trace;
  trace.example_id = ex.id;
  trace.k = 1;
  trace.mode = prompt ? "fixed-prompt" : "no-prompt";
  if (prompt) trace.prompts_used.push_back(prompt->id);
  trace.raw_outputs.push_back(
      gateway.complete(make_solve_request(prompt ? prompt->text : std::string(), ex, params, Stage::Solve)));
  trace.canonical_answers.push_back(canonical_answer(trace.raw_outputs.front(), ex.answer_type));
  detail::finish_trace(trace, ex);
  return trace;
}

template <>
struct ArtifactCodec<std::vector<AnswerTrace>> {
  static constexpr std::string_view kind = "answer-traces";
  static ojson meta(const std::vector<AnswerTrace>&) { return ojson::object(); }
  static ojson answer_json(const Answer& a) { return a ? ojson(*a) : ojson(nullptr); }
  static Answer answer_from(const ojson& j) { return j.is_null() ? Answer{} : Answer{j.get<std::string>()}; }

  static std::vector<ojson> records(const std::vector<AnswerTrace>& traces) {
    std::vector<ojson> out;
    for (const auto& t : traces) {
      ojson r;
      r["example_id"] = t.example_id;
      r["mode"] = t.mode;
      r["k"] = t.k;
      ojson ranking = ojson::array();
      for (const auto& e : t.ranking) ranking.push_back({{"prompt_id", e.prompt_id}, {"score", e.score}});
      r["ranking"] = std::move(ranking);
      r["prompts_used"] = t.prompts_used;
      r["raw_outputs"] = t.raw_outputs;
      ojson canon = ojson::array();
      for (const auto& a : t.canonical_answers) canon.push_back(answer_json(a));
      r["canonical_answers"] = std::move(canon);
      ojson tally = ojson::array();
      for (const auto& [a, c] : t.tally) tally.push_back({{"answer", a}, {"count", c}});
      r["tally"] = std::move(tally);
      r["no_answers_excluded"] = t.no_answers_excluded;
      r["final_answer"] = answer_json(t.final_answer);
      r["gold_answer"] = t.gold_answer;
      r["correct"] = t.correct;
      out.push_back(std::move(r));
    }
    return out;
  }
  static std::vector<AnswerTrace> decode(const ojson&, const std::vector<ojson>& rs) {
    std::vector<AnswerTrace> out;
    for (const auto& r : rs) {
      AnswerTrace t;
      t.example_id = r.at("example_id").get<std::string>();
      t.mode = r.at("mode").get<std::string>();
      t.k = r.at("k").get<std::size_t>();
      for (const auto& e : r.at("ranking"))
        t.ranking.push_back({e.at("prompt_id").get<std::string>(), e.at("score").get<double>()});
      t.prompts_used = r.at("prompts_used").get<std::vector<std::string>>();
      t.raw_outputs = r.at("raw_outputs").get<std::vector<std::string>>();
      for (const auto& a : r.at("canonical_answers")) t.canonical_answers.push_back(answer_from(a));
      for (const auto& e : r.at("tally"))
        t.tally.emplace_back(e.at("answer").get<std::string>(), e.at("count").get<std::size_t>());
      t.no_answers_excluded = r.at("no_answers_excluded").get<std::size_t>();
      t.final_answer = answer_from(r.at("final_answer"));
      t.gold_answer = r.at("gold_answer").get<std::string>();
      t.correct = r.at("correct").get<bool>();
      out.push_back(std::move(t));
    }
    return out;
  }
};

}  // namespace aps
