#pragma once

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "aps/remote.hpp"
#include "aps/types.hpp"

namespace aps {

enum class Backend { Remote, Sim };

inline Backend parse_backend(std::string_view s) {
  if (s == "remote") return Backend::Remote;
  if (s == "sim") return Backend::Sim;
  throw Error(ErrorKind::Config, "unknown backend '" + std::string(s) + "' (expected remote or sim)");
}
inline std::string_view to_string(Backend b) { return b == Backend::Remote ? "remote" : "sim"; }

struct SimSettings {
  std::size_t topics = 4;
  std::size_t train_size = 200;
  std::size_t test_size = 80;
  std::size_t embedding_dim = 32;
  std::uint64_t sim_seed = 7;
};

struct DatasetSettings {
  std::string format = "gsm8k";
  std::string train;  // empty with the sim backend -> synthetic corpus
  std::string test;
};

// Everything one pipeline run depends on.
struct RunSettings {
  PipelineConfig pipeline;
  Backend backend = Backend::Sim;
  SimSettings sim;
  DatasetSettings dataset;
  EndpointConfig endpoint;
  std::size_t max_in_flight = 4;
  std::size_t max_attempts = 5;
  std::size_t backoff_ms = 500;
  std::optional<std::size_t> limit;  // unset: whole split (sim) or 50 (remote)
  bool full = false;

  RetryPolicy retry() const { return {max_attempts, std::chrono::milliseconds(backoff_ms), std::chrono::milliseconds(30000)}; }

  std::optional<std::size_t> effective_limit() const {
    if (limit) return limit;
    if (backend == Backend::Remote && !full) return 50;
    return std::nullopt;
  }
};

/// Expands ${VAR} and ${VAR:-fallback} from the environment.
inline std::string interpolate_env(const std::string& s) {
  std::string out;
  std::size_t i = 0;
  while (i < s.size()) {
    if (s.compare(i, 2, "${") != 0) {
      out.push_back(s[i++]);
      continue;
    }
    const std::size_t close = s.find('}', i + 2);
    if (close == std::string::npos) throw Error(ErrorKind::Config, "unterminated ${ in '" + s + "'");
    std::string name = s.substr(i + 2, close - i - 2);
    std::optional<std::string> fallback;
    if (const auto sep = name.find(":-"); sep != std::string::npos) {
      fallback = name.substr(sep + 2);
      name.resize(sep);
    }
    const char* value = std::getenv(name.c_str());
    if (value && *value)
      out += value;
    else if (fallback)
      out += *fallback;
    else
      throw Error(ErrorKind::Config, "environment variable " + name + " is not set");
    i = close + 1;
  }
  return out;
}

namespace detail {

inline void interpolate_tree(nlohmann::json& j) {
  if (j.is_string())
    j = interpolate_env(j.get<std::string>());
  else if (j.is_structured())
    for (auto& child : j) interpolate_tree(child);
}

template <typename T>
void read(const nlohmann::json& j, const char* key, T& out) {
  if (const auto it = j.find(key); it != j.end() && !it->is_null()) {
    try {
      out = it->get<T>();
    } catch (const nlohmann::json::exception&) {
      throw Error(ErrorKind::Config, std::string("config key '") + key + "' has the wrong type");
    }
  }
}

inline const nlohmann::json& section(const nlohmann::json& j, const char* key) {
  static const nlohmann::json kEmpty = nlohmann::json::object();
  const auto it = j.find(key);
  return it == j.end() ? kEmpty : *it;
}

}  // namespace detail

inline RunSettings settings_from_json(nlohmann::json j) {
  detail::interpolate_tree(j);
  RunSettings s;
  auto& p = s.pipeline;
  detail::read(j, "c", p.clusters);
  detail::read(j, "n_p", p.prompts_per_cluster);
  detail::read(j, "demo_count", p.demo_count);
  detail::read(j, "m", p.examples_per_cluster);
  detail::read(j, "k", p.top_k);
  detail::read(j, "epsilon", p.epsilon);
  detail::read(j, "seed", p.seed);
  detail::read(j, "clustering", p.clustering);
  std::string loss(to_string(p.loss_mode)), pairs(to_string(p.pairing)), backend(to_string(s.backend));
  detail::read(j, "loss", loss);
  detail::read(j, "pairs", pairs);
  detail::read(j, "backend", backend);
  p.loss_mode = parse_loss_mode(loss);
  p.pairing = parse_pairing_mode(pairs);
  s.backend = parse_backend(backend);

  const auto& gen = detail::section(j, "generation");
  detail::read(gen, "temperature", p.generation.temperature);
  detail::read(gen, "top_p", p.generation.top_p);
  detail::read(gen, "max_tokens", p.generation.max_tokens);

  const auto& tr = detail::section(j, "train");
  detail::read(tr, "learning_rate", p.train.learning_rate);
  detail::read(tr, "beta1", p.train.beta1);
  detail::read(tr, "beta2", p.train.beta2);
  detail::read(tr, "weight_decay", p.train.weight_decay);
  detail::read(tr, "batch_size", p.train.batch_size);
  detail::read(tr, "epochs", p.train.epochs);
  detail::read(tr, "hidden", p.train.hidden);

  const auto& ds = detail::section(j, "dataset");
  detail::read(ds, "format", s.dataset.format);
  detail::read(ds, "train", s.dataset.train);
  detail::read(ds, "test", s.dataset.test);

  const auto& sim = detail::section(j, "sim");
  detail::read(sim, "topics", s.sim.topics);
  detail::read(sim, "train_size", s.sim.train_size);
  detail::read(sim, "test_size", s.sim.test_size);
  detail::read(sim, "embedding_dim", s.sim.embedding_dim);
  detail::read(sim, "sim_seed", s.sim.sim_seed);

  const auto& ep = detail::section(j, "endpoint");
  s.endpoint.base_url = interpolate_env("${APS_BASE_URL:-" + s.endpoint.base_url + "}");
  detail::read(ep, "base_url", s.endpoint.base_url);
  detail::read(ep, "model", s.endpoint.model);
  detail::read(ep, "embedding_model", s.endpoint.embedding_model);
  detail::read(ep, "api_key_env", s.endpoint.api_key_env);
  detail::read(ep, "timeout_seconds", s.endpoint.timeout_seconds);
  detail::read(ep, "max_in_flight", s.max_in_flight);
  detail::read(ep, "max_attempts", s.max_attempts);
  detail::read(ep, "backoff_ms", s.backoff_ms);

  if (const auto it = j.find("limit"); it != j.end() && !it->is_null()) s.limit = it->get<std::size_t>();
  detail::read(j, "full", s.full);
  return s;
}

/// "default" (or empty) yields the built-in defaults.
inline RunSettings load_settings(const std::string& path_or_default) {
  if (path_or_default.empty() || path_or_default == "default") return settings_from_json(nlohmann::json::object());
  std::ifstream in(path_or_default);
  if (!in) throw Error(ErrorKind::Io, "cannot open config " + path_or_default);
  try {
    return settings_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorKind::Config, path_or_default + ": " + e.what());
  }
}

/// Resolved settings as written beside the artifacts. The auth token itself
/// never appears, only the name of the variable holding it.
inline nlohmann::ordered_json settings_to_json(const RunSettings& s) {
  const auto& p = s.pipeline;
  nlohmann::ordered_json j;
  j["backend"] = std::string(to_string(s.backend));
  j["c"] = p.clusters;
  j["n_p"] = p.prompts_per_cluster;
  j["demo_count"] = p.demo_count;
  j["m"] = p.examples_per_cluster;
  j["k"] = p.top_k;
  j["epsilon"] = p.epsilon;
  j["seed"] = p.seed;
  j["loss"] = std::string(to_string(p.loss_mode));
  j["pairs"] = std::string(to_string(p.pairing));
  j["clustering"] = p.clustering;
  j["generation"] = {{"temperature", p.generation.temperature},
                     {"top_p", p.generation.top_p},
                     {"max_tokens", p.generation.max_tokens}};
  j["train"] = {{"learning_rate", p.train.learning_rate}, {"beta1", p.train.beta1},
                {"beta2", p.train.beta2},                 {"weight_decay", p.train.weight_decay},
                {"batch_size", p.train.batch_size},       {"epochs", p.train.epochs},
                {"hidden", p.train.hidden}};
  j["dataset"] = {{"format", s.dataset.format}, {"train", s.dataset.train}, {"test", s.dataset.test}};
  j["sim"] = {{"topics", s.sim.topics},
              {"train_size", s.sim.train_size},
              {"test_size", s.sim.test_size},
              {"embedding_dim", s.sim.embedding_dim},
              {"sim_seed", s.sim.sim_seed}};
  j["endpoint"] = {{"base_url", s.endpoint.base_url},
                   {"model", s.endpoint.model},
                   {"embedding_model", s.endpoint.embedding_model},
                   {"api_key_env", s.endpoint.api_key_env},
                   {"timeout_seconds", s.endpoint.timeout_seconds},
                   {"max_in_flight", s.max_in_flight},
                   {"max_attempts", s.max_attempts},
                   {"backoff_ms", s.backoff_ms}};
  j["limit"] = s.limit ? nlohmann::ordered_json(*s.limit) : nlohmann::ordered_json(nullptr);
  j["full"] = s.full;
  return j;
}

}  // namespace aps
