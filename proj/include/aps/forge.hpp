#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "aps/answer.hpp"
#include "aps/gateway.hpp"
#include "aps/hash.hpp"
#include "aps/kmeans.hpp"
#include "aps/prompt_templates.hpp"
#include "aps/rng.hpp"
#include "aps/text.hpp"

namespace aps {

struct Demonstration {
  std::string question;
  std::string context;
  std::string answer;

  friend bool operator==(const Demonstration&, const Demonstration&) = default;
};

struct MetaPrompt {
  std::vector<Demonstration> demonstrations;
  std::size_t prompts_requested = 0;
  int cluster = kNoCluster;

  std::string render() const {
    std::string out(templates::kMetaPreamble);
    for (const auto& d : demonstrations) {
      out += std::string(templates::kDemoQuestion) + d.question + "\n";
      out += std::string(templates::kDemoContext) + d.context + "\n";
      out += std::string(templates::kDemoAnswer) + d.answer + "\n\n";
    }
    std::string instruction(templates::kMetaInstruction);
    instruction.replace(instruction.find("{n}"), 3, std::to_string(prompts_requested));
    return out + instruction;
  }

  friend bool operator==(const MetaPrompt&, const MetaPrompt&) = default;
};

/// Samples min(demo_count, |members|) demonstrations without replacement.
/// The sample depends only on (members, demo_count, seed, cluster).
inline MetaPrompt build_meta_prompt(std::span<const QAExample> members, std::size_t demo_count, std::uint64_t seed,
                                    int cluster, std::size_t prompts_requested) {
  if (members.empty()) throw Error(ErrorKind::Precondition, "cannot build a meta-prompt from an empty cluster");
  std::vector<std::size_t> order(members.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  CounterRng rng(seed, 0xde70ULL + static_cast<std::uint64_t>(cluster + 1));
  rng.shuffle(order);
  order.resize(std::min(demo_count, members.size()));

  MetaPrompt meta;
  meta.cluster = cluster;
  meta.prompts_requested = prompts_requested;
  for (std::size_t i : order) {
    // Multiple-choice demonstrations show the options and the correct letter only.
    meta.demonstrations.push_back({members[i].question, members[i].context, members[i].gold_answer});
  }
  return meta;
}

/// Numbered items ("1. ...", "2) ...") when present, otherwise every
/// non-empty line with bullet markers removed.
inline std::vector<std::string> parse_prompt_list(std::string_view completion) {
  const auto clean = [](std::string_view s) {
    s = text::trim(s);
    if (s.size() >= 2 && (s.front() == '"' || s.front() == '\'') && s.back() == s.front()) s = text::trim(s.substr(1, s.size() - 2));
    return std::string(s);
  };
  std::vector<std::string> numbered;
  std::vector<std::string> plain;
  for (auto line : text::split_lines(completion)) {
    const auto t = text::trim(line);
    if (t.empty()) continue;
    std::size_t i = 0;
    while (i < t.size() && text::is_digit(t[i])) ++i;
    if (i > 0 && i < t.size() && (t[i] == '.' || t[i] == ')')) {
      if (auto item = clean(t.substr(i + 1)); !item.empty()) numbered.push_back(std::move(item));
      continue;
    }
    auto body = t;
    if (body.starts_with("- ") || body.starts_with("* ") || body.starts_with("• ")) body = body.substr(body.find(' ') + 1);
    if (auto item = clean(body); !item.empty()) plain.push_back(std::move(item));
  }
  return numbered.empty() ? plain : numbered;
}

inline constexpr std::size_t kForgeRetryCap = 3;

/// Asks the generator for `n_p` prompts. If fewer than n_p distinct prompts
/// come back, issues up to kForgeRetryCap further completions and returns
/// what it has. Ids are provisional ("c<cluster>-<i>").
inline std::vector<Prompt> generate_prompts(Gateway& gateway, const MetaPrompt& meta, std::size_t n_p,
                                            const GenerationParams& params) {
  ChatRequest req;
  req.stage = Stage::Forge;
  req.params = params;
  req.messages.push_back({Role::User, meta.render()});

  std::vector<Prompt> out;
  std::unordered_set<std::string> seen;
  for (std::size_t call = 0; call <= kForgeRetryCap && out.size() < n_p; ++call) {
    for (auto& candidate : parse_prompt_list(gateway.complete(req))) {
      if (out.size() >= n_p) break;
      if (!seen.insert(text::normalize(candidate)).second) continue;
      out.push_back({"c" + std::to_string(meta.cluster) + "-" + std::to_string(out.size()), std::move(candidate),
                     meta.cluster});
    }
  }
  if (out.empty())
    throw Error(ErrorKind::Forge, "no parsable prompts for cluster " +
                                      (meta.cluster == kNoCluster ? std::string("none") : std::to_string(meta.cluster)));
  return out;
}

/// Drops prompts equal to an earlier one after trimming, whitespace
/// collapsing and case folding.
inline std::vector<Prompt> dedup(std::vector<Prompt> prompts) {
  std::unordered_set<std::string> seen;
  std::vector<Prompt> out;
  out.reserve(prompts.size());
  for (auto& p : prompts)
    if (seen.insert(text::normalize(p.text)).second) out.push_back(std::move(p));
  return out;
}

inline std::string prompt_id(std::size_t index, std::size_t total) {
  const std::size_t width = std::max<std::size_t>(3, std::to_string(total == 0 ? 0 : total - 1).size());
  return "p" + text::zero_pad(index, width);
}

inline std::string database_fingerprint(const PipelineConfig& config, const std::string& generator_id,
                                        const std::string& parent) {
  Fnv1a h;
  h.field("prompt-database").field(parent).field(generator_id).field(templates::kMetaPromptVersion);
  h.field(std::to_string(config.clusters)).field(std::to_string(config.prompts_per_cluster));
  h.field(std::to_string(config.demo_count)).field(std::to_string(config.seed));
  h.field(config.clustering ? "clustered" : "unclustered");
  h.field(std::to_string(config.generation.temperature)).field(std::to_string(config.generation.top_p));
  h.field(std::to_string(config.generation.max_tokens));
  return to_hex(h.digest());
}

/// Forges the prompt database group by group, in cluster order, then
/// deduplicates the union and assigns final ids p000, p001, ...
///
/// With clustering disabled the whole training split is one group, sampled
/// c times (one meta-prompt per draw) for c * n_p prompts, all tagged with
/// the no-cluster origin.
inline PromptDatabase build_database(std::span<const QAExample> train, const ClusterModel& clusters, Gateway& gateway,
                                     const PipelineConfig& config, const std::string& parent_fingerprint = {}) {
  config.validate();
  std::vector<Prompt> pool;
  if (config.clustering) {
    std::unordered_map<std::string, const QAExample*> by_id;
    for (const auto& ex : train) by_id.emplace(ex.id, &ex);
    std::vector<std::vector<QAExample>> groups(clusters.cluster_count());
    for (const auto& m : clusters.members) {
      const auto it = by_id.find(m.example_id);
      if (it == by_id.end())
        throw Error(ErrorKind::StaleArtifact, "cluster model names unknown example '" + m.example_id + "'");
      groups[m.cluster].push_back(*it->second);
    }
    if (groups.size() != config.clusters)
      throw Error(ErrorKind::StaleArtifact, "cluster model has " + std::to_string(groups.size()) +
                                                " clusters but the config asks for " + std::to_string(config.clusters));
    for (std::size_t g = 0; g < groups.size(); ++g) {
      const auto meta = build_meta_prompt(groups[g], config.demo_count, config.seed, static_cast<int>(g),
                                          config.prompts_per_cluster);
      for (auto& p : generate_prompts(gateway, meta, config.prompts_per_cluster, config.generation))
        pool.push_back(std::move(p));
    }
  } else {
    if (train.empty()) throw Error(ErrorKind::Precondition, "training split is empty");
    for (std::size_t draw = 0; draw < config.clusters; ++draw) {
      auto meta = build_meta_prompt(train, config.demo_count, config.seed + draw, kNoCluster,
                                    config.prompts_per_cluster);
      for (auto& p : generate_prompts(gateway, meta, config.prompts_per_cluster, config.generation))
        pool.push_back(std::move(p));
    }
  }

  PromptDatabase db;
  db.prompts = dedup(std::move(pool));
  for (std::size_t i = 0; i < db.prompts.size(); ++i) db.prompts[i].id = prompt_id(i, db.prompts.size());
  db.config_fingerprint = database_fingerprint(config, gateway.model_id(), parent_fingerprint);
  return db;
}

}  // namespace aps
