#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "aps/error.hpp"

namespace aps {

enum class AnswerType { FreeFormNumeric, MultipleChoice };
enum class Split { Train, Test };
enum class DatasetFormat { GSM8K, MultiArith, AQuA };
enum class LossMode { Literal, Logistic };
enum class PairingMode { FullDatabase, WithinCluster };

inline std::string_view to_string(AnswerType t) {
  return t == AnswerType::FreeFormNumeric ? "free-form" : "multiple-choice";
}
inline std::string_view to_string(Split s) { return s == Split::Train ? "train" : "test"; }
inline std::string_view to_string(DatasetFormat f) {
  switch (f) {
    case DatasetFormat::GSM8K: return "gsm8k";
    case DatasetFormat::MultiArith: return "multiarith";
    case DatasetFormat::AQuA: return "aqua";
  }
  return "?";
}
inline std::string_view to_string(LossMode m) { return m == LossMode::Literal ? "literal" : "logistic"; }
inline std::string_view to_string(PairingMode m) {
  return m == PairingMode::FullDatabase ? "full-db" : "within-cluster";
}

inline AnswerType parse_answer_type(std::string_view s) {
  if (s == "free-form") return AnswerType::FreeFormNumeric;
  if (s == "multiple-choice") return AnswerType::MultipleChoice;
  throw Error(ErrorKind::Parse, "unknown answer type '" + std::string(s) + "'");
}
inline Split parse_split(std::string_view s) {
  if (s == "train") return Split::Train;
  if (s == "test") return Split::Test;
  throw Error(ErrorKind::Parse, "unknown split '" + std::string(s) + "'");
}
inline DatasetFormat parse_format(std::string_view s) {
  if (s == "gsm8k" || s == "GSM8K") return DatasetFormat::GSM8K;
  if (s == "multiarith" || s == "MultiArith") return DatasetFormat::MultiArith;
  if (s == "aqua" || s == "AQuA") return DatasetFormat::AQuA;
  throw Error(ErrorKind::Config, "unknown corpus format '" + std::string(s) + "'");
}
inline LossMode parse_loss_mode(std::string_view s) {
  if (s == "literal") return LossMode::Literal;
  if (s == "logistic") return LossMode::Logistic;
  throw Error(ErrorKind::Config, "unknown loss mode '" + std::string(s) + "'");
}
inline PairingMode parse_pairing_mode(std::string_view s) {
  if (s == "full-db") return PairingMode::FullDatabase;
  if (s == "within-cluster") return PairingMode::WithinCluster;
  throw Error(ErrorKind::Config, "unknown pairing mode '" + std::string(s) + "'");
}

// A canonical final answer; std::nullopt is the NoAnswer sentinel and never
// compares equal to a gold answer under fitness.
using Answer = std::optional<std::string>;

inline std::string display(const Answer& a) { return a ? *a : std::string("<no answer>"); }

struct QAExample {
  std::string id;
  std::string question;
  std::string context;
  std::string rationale;
  std::string gold_answer;
  AnswerType answer_type = AnswerType::FreeFormNumeric;
  Split split = Split::Train;

  friend bool operator==(const QAExample&, const QAExample&) = default;
};

// Sentinel origin for prompts forged with clustering disabled.
inline constexpr int kNoCluster = -1;

struct Prompt {
  std::string id;
  std::string text;
  int origin_cluster = kNoCluster;

  friend bool operator==(const Prompt&, const Prompt&) = default;
};

struct PromptDatabase {
  std::vector<Prompt> prompts;
  std::string config_fingerprint;

  std::size_t size() const { return prompts.size(); }
  bool empty() const { return prompts.empty(); }

  const Prompt& find(std::string_view id) const {
    for (const auto& p : prompts)
      if (p.id == id) return p;
    throw Error(ErrorKind::Index, "prompt '" + std::string(id) + "' is not in the database");
  }

  friend bool operator==(const PromptDatabase&, const PromptDatabase&) = default;
};

struct PreferenceTuple {
  std::string example_id;
  std::string good_prompt_id;
  std::string bad_prompt_id;
  double good_fitness = 0.0;
  double bad_fitness = 0.0;
  double lambda = 0.0;

  friend bool operator==(const PreferenceTuple&, const PreferenceTuple&) = default;
};

struct GenerationParams {
  double temperature = 0.0;
  double top_p = 1.0;
  int max_tokens = 1000;

  friend bool operator==(const GenerationParams&, const GenerationParams&) = default;
};

// Evaluator optimisation settings (AdamW).
struct TrainConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.95;
  double adam_epsilon = 1e-8;
  double weight_decay = 0.1;
  std::size_t batch_size = 16;
  std::size_t epochs = 30;
  std::size_t hidden = 64;
  double margin = 0.1;
  LossMode loss_mode = LossMode::Logistic;

  void validate() const {
    if (!(learning_rate > 0) || !(beta1 > 0 && beta1 < 1) || !(beta2 > 0 && beta2 < 1) || !(adam_epsilon > 0) ||
        weight_decay < 0 || batch_size == 0 || epochs == 0 || hidden == 0 || margin < 0)
      throw Error(ErrorKind::Config, "invalid training configuration");
  }

  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

struct PipelineConfig {
  std::size_t clusters = 10;         // c
  std::size_t prompts_per_cluster = 3;  // n_p
  std::size_t demo_count = 10;       // |D_demo|
  std::size_t examples_per_cluster = 10;  // m
  std::size_t top_k = 5;             // k
  double epsilon = 0.1;
  std::uint64_t seed = 1;
  LossMode loss_mode = LossMode::Logistic;
  PairingMode pairing = PairingMode::FullDatabase;
  bool clustering = true;
  GenerationParams generation;
  TrainConfig train;

  std::size_t max_database_size() const { return clusters * prompts_per_cluster; }

  // k is checked against the realised database size at answer time.
  void validate() const {
    if (clusters < 1) throw Error(ErrorKind::Config, "c must be >= 1");
    if (prompts_per_cluster < 1) throw Error(ErrorKind::Config, "n_p must be >= 1");
    if (demo_count < 1) throw Error(ErrorKind::Config, "demo_count must be >= 1");
    if (examples_per_cluster < 1) throw Error(ErrorKind::Config, "m must be >= 1");
    if (top_k < 1 || top_k > max_database_size()) throw Error(ErrorKind::Config, "k must lie in [1, c * n_p]");
    if (!(epsilon >= 0)) throw Error(ErrorKind::Config, "epsilon must be >= 0");
    if (generation.temperature < 0 || generation.temperature > 2 || !(generation.top_p > 0) ||
        generation.top_p > 1 || generation.max_tokens <= 0)
      throw Error(ErrorKind::Config, "generation parameters out of range");
    train.validate();
  }

  // The trainer reads margin and loss mode from the pipeline-level settings.
  TrainConfig effective_train() const {
    TrainConfig t = train;
    t.margin = epsilon;
    t.loss_mode = loss_mode;
    return t;
  }

  friend bool operator==(const PipelineConfig&, const PipelineConfig&) = default;
};

}  // namespace aps
