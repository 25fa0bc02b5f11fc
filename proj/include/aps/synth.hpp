#pragma once

#include <algorithm>
#include <cstddef>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "aps/answer.hpp"
#include "aps/artifact.hpp"
#include "aps/gateway.hpp"
#include "aps/kmeans.hpp"

namespace aps {

struct FitnessRecord {
  std::string example_id;
  std::string prompt_id;
  std::string raw_output;
  double fitness = 0.0;

  friend bool operator==(const FitnessRecord&, const FitnessRecord&) = default;
};

struct PartitionedPrompts {
  std::string example_id;
  double lambda = 0.0;
  std::vector<std::string> good;  // database order
  std::vector<std::string> bad;

  bool degenerate() const { return good.empty() || bad.empty(); }
};

/// Binary exact match. NoAnswer never scores.
inline double fitness(const Answer& predicted, const std::string& gold) {
  return predicted && *predicted == gold ? 1.0 : 0.0;
}

/// lambda = (max f - min f) / 2.
inline double decision_threshold(std::span<const double> scores) {
  if (scores.empty()) throw Error(ErrorKind::Precondition, "decision threshold of an empty score list");
  const auto [lo, hi] = std::minmax_element(scores.begin(), scores.end());
  return (*hi - *lo) / 2.0;
}

namespace detail {

inline PartitionedPrompts partition_from(const QAExample& ex, std::span<const Prompt* const> prompts,
                                         std::span<const std::string> outputs, std::vector<FitnessRecord>& records) {
  std::vector<double> scores;
  scores.reserve(prompts.size());
  for (std::size_t i = 0; i < prompts.size(); ++i) {
    const double f = fitness(canonical_answer(outputs[i], ex.answer_type), ex.gold_answer);
    scores.push_back(f);
    records.push_back({ex.id, prompts[i]->id, outputs[i], f});
  }
  PartitionedPrompts part;
  part.example_id = ex.id;
  part.lambda = decision_threshold(scores);
  for (std::size_t i = 0; i < prompts.size(); ++i)
    (scores[i] >= part.lambda ? part.good : part.bad).push_back(prompts[i]->id);
  return part;
}

}  // namespace detail

struct PartitionResult {
  PartitionedPrompts partition;
  std::vector<FitnessRecord> records;
};

/// Queries the synthesiser once per prompt in `db` with the example and
/// splits the prompts at lambda: good = {f >= lambda}, bad = {f < lambda}.
/// When all scores tie, lambda = 0 and every prompt is good.
inline PartitionResult partition_prompts(const QAExample& ex, const PromptDatabase& db, Gateway& gateway,
                                         const GenerationParams& params = {}) {
  if (db.empty()) throw Error(ErrorKind::Precondition, "prompt database is empty");
  std::vector<const Prompt*> prompts;
  std::vector<ChatRequest> requests;
  for (const auto& p : db.prompts) {
    prompts.push_back(&p);
    requests.push_back(make_solve_request(p.text, ex, params, Stage::Synthesize));
  }
  std::vector<std::string> outputs;
  try {
    outputs = gateway.complete_all(requests);
  } catch (const Error& e) {
    throw Error(e.kind(), "example " + ex.id + ": " + e.message());
  }
  PartitionResult result;
  result.partition = detail::partition_from(ex, prompts, outputs, result.records);
  return result;
}

struct PreferenceDataset {
  std::vector<PreferenceTuple> tuples;
  std::vector<FitnessRecord> fitness;
  std::vector<std::string> processed_examples;  // (cluster, rank) order
  std::vector<std::string> degenerate_examples;
};

/// For every cluster, partitions the prompts for its m examples nearest the
/// centroid and emits every (good, bad) pair. Degenerate partitions yield no
/// tuples. Output order: cluster, example rank, good id, bad id.
inline PreferenceDataset build_preference_dataset(std::span<const QAExample> train, const ClusterModel& clusters,
                                                  const PromptDatabase& db, Gateway& gateway,
                                                  const PipelineConfig& config) {
  if (db.empty()) throw Error(ErrorKind::PipelineOrder, "prompt database is empty; run forge first");
  if (clusters.cluster_count() == 0) throw Error(ErrorKind::PipelineOrder, "cluster model is empty; run cluster first");
  std::unordered_map<std::string, const QAExample*> by_id;
  for (const auto& ex : train) by_id.emplace(ex.id, &ex);

  struct Job {
    const QAExample* example;
    std::vector<const Prompt*> prompts;
  };
  std::vector<Job> jobs;
  for (std::size_t g = 0; g < clusters.cluster_count(); ++g) {
    for (const auto& id : nearest_to_centroid(clusters, g, config.examples_per_cluster)) {
      const auto it = by_id.find(id);
      if (it == by_id.end()) throw Error(ErrorKind::StaleArtifact, "cluster model names unknown example '" + id + "'");
      Job job{it->second, {}};
      for (const auto& p : db.prompts) {
        const bool in_scope = config.pairing == PairingMode::FullDatabase || p.origin_cluster == kNoCluster ||
                              p.origin_cluster == static_cast<int>(g);
        if (in_scope) job.prompts.push_back(&p);
      }
      jobs.push_back(std::move(job));
    }
  }

  std::vector<ChatRequest> requests;
  for (const auto& job : jobs)
    for (const Prompt* p : job.prompts)
      requests.push_back(make_solve_request(p->text, *job.example, config.generation, Stage::Synthesize));
  const auto outputs = gateway.complete_all(requests);

  PreferenceDataset out;
  std::size_t offset = 0;
  for (const auto& job : jobs) {
    out.processed_examples.push_back(job.example->id);
    if (job.prompts.empty()) {
      out.degenerate_examples.push_back(job.example->id);
      continue;
    }
    const std::span<const std::string> slice(outputs.data() + offset, job.prompts.size());
    offset += job.prompts.size();
    const auto part = detail::partition_from(*job.example, job.prompts, slice, out.fitness);
    if (part.degenerate()) {
      out.degenerate_examples.push_back(job.example->id);
      continue;
    }
    const auto fitness_of = [&](const std::string& prompt_id) {
      for (auto it = out.fitness.rbegin(); it != out.fitness.rend(); ++it)
        if (it->example_id == job.example->id && it->prompt_id == prompt_id) return it->fitness;
      return 0.0;
    };
    for (const auto& g : part.good)
      for (const auto& b : part.bad)
        out.tuples.push_back({job.example->id, g, b, fitness_of(g), fitness_of(b), part.lambda});
  }
  return out;
}

template <>
struct ArtifactCodec<std::vector<FitnessRecord>> {
  static constexpr std::string_view kind = "fitness-records";
  static ojson meta(const std::vector<FitnessRecord>&) { return ojson::object(); }
  static std::vector<ojson> records(const std::vector<FitnessRecord>& rs) {
    std::vector<ojson> out;
    for (const auto& r : rs) {
      ojson j;
      j["example_id"] = r.example_id;
      j["prompt_id"] = r.prompt_id;
      j["raw_output"] = r.raw_output;
      j["fitness"] = r.fitness;
      out.push_back(std::move(j));
    }
    return out;
  }
  static std::vector<FitnessRecord> decode(const ojson&, const std::vector<ojson>& rs) {
    std::vector<FitnessRecord> out;
    for (const auto& r : rs)
      out.push_back({r.at("example_id").get<std::string>(), r.at("prompt_id").get<std::string>(),
                     r.at("raw_output").get<std::string>(), r.at("fitness").get<double>()});
    return out;
  }
};

}  // namespace aps
