#pragma once

#include <filesystem>
#include <functional>
#include <iomanip>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "aps/artifact.hpp"
#include "aps/config.hpp"
#include "aps/corpus.hpp"
#include "aps/embed.hpp"
#include "aps/evaluator.hpp"
#include "aps/forge.hpp"
#include "aps/gateway.hpp"
#include "aps/kmeans.hpp"
#include "aps/rank_vote.hpp"
#include "aps/remote.hpp"
#include "aps/sim.hpp"
#include "aps/synth.hpp"

namespace aps {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Evaluation modes and reports.

struct EvalMode {
  enum class Kind { NoPrompt, FixedPrompt, Aps };
  Kind kind = Kind::Aps;
  std::size_t k = 1;
  std::string fixed_prompt_id;  // empty: best accuracy on the training representatives

  std::string name() const {
    switch (kind) {
      case Kind::NoPrompt: return "no-prompt";
      case Kind::FixedPrompt: return "fixed-prompt";
      case Kind::Aps: return k == 1 ? "aps-novote" : "aps-vote-" + std::to_string(k);
    }
    return "?";
  }
};

/// "no-prompt", "fixed-prompt", "aps-novote", "aps-vote" (uses default_k) or
/// "aps-vote-<k>".
inline EvalMode parse_eval_mode(const std::string& s, std::size_t default_k) {
  if (s == "no-prompt") return {EvalMode::Kind::NoPrompt, 1, {}};
  if (s == "fixed-prompt") return {EvalMode::Kind::FixedPrompt, 1, {}};
  if (s == "aps-novote") return {EvalMode::Kind::Aps, 1, {}};
  if (s == "aps-vote") return {EvalMode::Kind::Aps, default_k, {}};
  if (s.starts_with("aps-vote-")) {
    const std::string digits = s.substr(9);
    if (!digits.empty() && std::all_of(digits.begin(), digits.end(), text::is_digit)) {
      const auto k = static_cast<std::size_t>(std::stoul(digits));
      if (k >= 1) return {EvalMode::Kind::Aps, k, {}};
    }
  }
  throw Error(ErrorKind::Config, "unknown eval mode '" + s + "'");
}

struct EvalReport {
  std::string dataset;
  std::string mode;
  std::size_t n_evaluated = 0;
  std::size_t n_correct = 0;
  double accuracy = 0.0;
  LedgerSnapshot ledger;  // calls spent by this evaluation
  std::string fingerprint;
  bool complete = true;
  std::string note;

  friend bool operator==(const EvalReport&, const EvalReport&) = default;
};

template <>
struct ArtifactCodec<EvalReport> {
  static constexpr std::string_view kind = "eval-report";
  static ojson meta(const EvalReport&) { return ojson::object(); }
  static std::vector<ojson> records(const EvalReport& r) {
    ojson j;
    j["dataset"] = r.dataset;
    j["mode"] = r.mode;
    j["n_evaluated"] = r.n_evaluated;
    j["n_correct"] = r.n_correct;
    j["accuracy"] = r.accuracy;
    j["ledger"] = {{"forge", r.ledger.forge}, {"synthesize", r.ledger.synthesize}, {"solve", r.ledger.solve},
                   {"total", r.ledger.total()}};
    j["fingerprint"] = r.fingerprint;
    j["complete"] = r.complete;
    j["note"] = r.note;
    return {j};
  }
  static EvalReport decode(const ojson&, const std::vector<ojson>& rs) {
    if (rs.size() != 1) throw Error(ErrorKind::StaleArtifact, "report artifact must hold one record");
    const auto& j = rs.front();
    EvalReport r;
    r.dataset = j.at("dataset").get<std::string>();
    r.mode = j.at("mode").get<std::string>();
    r.n_evaluated = j.at("n_evaluated").get<std::size_t>();
    r.n_correct = j.at("n_correct").get<std::size_t>();
    r.accuracy = j.at("accuracy").get<double>();
    const auto& l = j.at("ledger");
    r.ledger = {l.at("forge").get<std::uint64_t>(), l.at("synthesize").get<std::uint64_t>(),
                l.at("solve").get<std::uint64_t>()};
    r.fingerprint = j.at("fingerprint").get<std::string>();
    r.complete = j.at("complete").get<bool>();
    r.note = j.at("note").get<std::string>();
    return r;
  }
};

inline std::string format_ledger(const LedgerSnapshot& l) {
  return "forge=" + std::to_string(l.forge) + " synthesize=" + std::to_string(l.synthesize) +
         " solve=" + std::to_string(l.solve) + " total=" + std::to_string(l.total());
}

inline std::string format_report_table(const std::vector<std::pair<std::string, EvalReport>>& rows) {
  std::ostringstream out;
  out << std::left << std::setw(28) << "config" << std::setw(16) << "mode" << std::right << std::setw(8) << "n"
      << std::setw(9) << "correct" << std::setw(10) << "accuracy" << std::setw(8) << "solve" << "  status\n";
  for (const auto& [label, r] : rows) {
    out << std::left << std::setw(28) << label << std::setw(16) << r.mode << std::right << std::setw(8)
        << r.n_evaluated << std::setw(9) << r.n_correct << std::setw(9) << std::fixed << std::setprecision(2)
        << 100.0 * r.accuracy << "%" << std::setw(8) << r.ledger.solve << "  "
        << (r.complete ? "ok" : "INCOMPLETE") << (r.note.empty() ? "" : " (" + r.note + ")") << "\n";
  }
  return out.str();
}

/// Highest exact-match accuracy over the stored training fitness records;
/// ties go to the lower prompt id.
inline std::string best_training_prompt(const std::vector<FitnessRecord>& records, const PromptDatabase& db) {
  std::map<std::string, std::pair<double, std::size_t>> acc;
  for (const auto& r : records) {
    auto& [sum, n] = acc[r.prompt_id];
    sum += r.fitness;
    ++n;
  }
  std::string best;
  double best_acc = -1.0;
  for (const auto& p : db.prompts) {
    const auto it = acc.find(p.id);
    if (it == acc.end() || it->second.second == 0) continue;
    const double a = it->second.first / static_cast<double>(it->second.second);
    if (a > best_acc || (a == best_acc && p.id < best)) {
      best_acc = a;
      best = p.id;
    }
  }
  if (best.empty()) throw Error(ErrorKind::PipelineOrder, "no training fitness records to pick a fixed prompt from");
  return best;
}

struct EvalOutcome {
  EvalReport report;
  std::vector<AnswerTrace> traces;
};

/// Answers up to `limit` test questions in split order and scores them by
/// exact match. A gateway failure ends the run with an incomplete report.
inline EvalOutcome evaluate(std::span<const QAExample> test, const EvalMode& mode, std::optional<std::size_t> limit,
                            Gateway& gateway, const PromptDatabase* db, const PromptScorer* scorer,
                            const GenerationParams& params, const std::string& dataset = {}) {
  if (limit && *limit == 0) throw Error(ErrorKind::Precondition, "refusing an empty evaluation (limit = 0)");
  if (test.empty()) throw Error(ErrorKind::Precondition, "test split is empty");
  const Prompt* fixed = nullptr;
  if (mode.kind != EvalMode::Kind::NoPrompt && db == nullptr)
    throw Error(ErrorKind::PipelineOrder, "mode " + mode.name() + " needs a prompt database");
  if (mode.kind == EvalMode::Kind::FixedPrompt) fixed = &db->find(mode.fixed_prompt_id);
  if (mode.kind == EvalMode::Kind::Aps) {
    if (scorer == nullptr) throw Error(ErrorKind::PipelineOrder, "mode " + mode.name() + " needs a trained evaluator");
    if (mode.k > db->size())
      throw Error(ErrorKind::Config, "k = " + std::to_string(mode.k) + " exceeds the database size " +
                                         std::to_string(db->size()));
  }

  EvalOutcome out;
  out.report.dataset = dataset;
  out.report.mode = mode.name();
  if (fixed) out.report.note = "prompt " + fixed->id;
  const auto before = gateway.ledger().snapshot();
  const std::size_t n = limit ? std::min(*limit, test.size()) : test.size();
  for (std::size_t i = 0; i < n; ++i) {
    try {
      out.traces.push_back(mode.kind == EvalMode::Kind::Aps
                               ? answer(test[i], *scorer, *db, gateway, mode.k, params)
                               : answer_with_prompt(test[i], fixed, gateway, params));
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::Gateway) throw;
      out.report.complete = false;
      out.report.note += (out.report.note.empty() ? "" : "; ") + std::string("stopped: ") + e.what();
      break;
    }
    ++out.report.n_evaluated;
    if (out.traces.back().correct) ++out.report.n_correct;
  }
  out.report.accuracy =
      out.report.n_evaluated == 0 ? 0.0
                                  : static_cast<double>(out.report.n_correct) / static_cast<double>(out.report.n_evaluated);
  out.report.ledger = gateway.ledger().snapshot() - before;
  return out;
}

// ---------------------------------------------------------------------------
// Staged pipeline over a workspace directory.

struct StageResult {
  std::string stage;
  LedgerSnapshot ledger_delta;
  std::vector<std::string> lines;
};

struct ArtifactPaths {
  fs::path dir;

  fs::path train_corpus() const { return dir / "train.jsonl"; }
  fs::path test_corpus() const { return dir / "test.jsonl"; }
  fs::path resolved_config() const { return dir / "config.resolved.json"; }
  fs::path clusters() const { return dir / "cluster.jsonl"; }
  fs::path prompts() const { return dir / "prompts.jsonl"; }
  fs::path preferences() const { return dir / "preferences.jsonl"; }
  fs::path fitness() const { return dir / "fitness.jsonl"; }
  fs::path checkpoint() const { return dir / "checkpoint.jsonl"; }
  fs::path embeddings() const { return dir / "embeddings.jsonl"; }
  fs::path report(const std::string& mode) const { return dir / ("report-" + mode + ".jsonl"); }
  fs::path traces(const std::string& mode) const { return dir / ("traces-" + mode + ".jsonl"); }
  fs::path report_table() const { return dir / "reports.txt"; }
};

class Pipeline {
 public:
  // `shared_cache` lets several pipelines (an ablation sweep) reuse embeddings.
  Pipeline(RunSettings settings, fs::path dir, std::shared_ptr<CachingEmbedder> shared_cache = nullptr)
      : settings_(std::move(settings)), paths_{std::move(dir)}, cache_(std::move(shared_cache)) {
    settings_.pipeline.validate();
    fs::create_directories(paths_.dir);
    build_backend();
  }

  const RunSettings& settings() const { return settings_; }
  const ArtifactPaths& paths() const { return paths_; }
  Gateway& gateway() { return *gateway_; }
  const Featurizer& featurizer() const { return *featurizer_; }
  const std::vector<QAExample>& train_split() const { return train_; }
  const std::vector<QAExample>& test_split() const { return test_; }
  const SimWorld* sim_world() const { return world_.get(); }

  // Fingerprint chain, recomputed from settings and corpus.
  std::string cluster_fingerprint() const {
    const auto& p = settings_.pipeline;
    return to_hex(Fnv1a{}
                      .field("cluster")
                      .field(corpus_fingerprint(train_))
                      .field(cache_->id())
                      .field(std::to_string(p.clusters))
                      .field(std::to_string(p.seed))
                      .digest());
  }
  std::string database_fingerprint_value() const {
    return database_fingerprint(settings_.pipeline, gateway_->model_id(), cluster_fingerprint());
  }
  std::string preference_fingerprint() const {
    const auto& p = settings_.pipeline;
    return to_hex(Fnv1a{}
                      .field("preferences")
                      .field(database_fingerprint_value())
                      .field(std::to_string(p.examples_per_cluster))
                      .field(to_string(p.pairing))
                      .digest());
  }
  std::string checkpoint_fingerprint() const {
    const auto t = settings_.pipeline.effective_train();
    std::ostringstream cfg;
    cfg << std::setprecision(17) << t.learning_rate << '|' << t.beta1 << '|' << t.beta2 << '|' << t.weight_decay
        << '|' << t.batch_size << '|' << t.epochs << '|' << t.hidden << '|' << t.margin << '|'
        << to_string(t.loss_mode) << '|' << settings_.pipeline.seed;
    return to_hex(
        Fnv1a{}.field("checkpoint").field(preference_fingerprint()).field(cfg.str()).field(featurizer_->recipe()).digest());
  }
  std::string report_fingerprint(const EvalMode& mode, std::optional<std::size_t> limit) const {
    return to_hex(Fnv1a{}
                      .field("report")
                      .field(mode.kind == EvalMode::Kind::Aps ? checkpoint_fingerprint() : preference_fingerprint())
                      .field(corpus_fingerprint(test_))
                      .field(mode.name())
                      .field(mode.fixed_prompt_id)
                      .field(limit ? std::to_string(*limit) : "all")
                      .digest());
  }

  StageResult run_cluster() {
    const auto before = ledger();
    const auto model = cluster_now();
    store_artifact(model, paths_.clusters(), {cluster_fingerprint(), corpus_fingerprint(train_)});
    persist_embeddings();
    StageResult r{"cluster", ledger() - before, {}};
    const auto sizes = model.sizes();
    std::string line = "clusters: " + std::to_string(sizes.size()) + " sizes:";
    for (auto s : sizes) line += " " + std::to_string(s);
    r.lines.push_back(line);
    r.lines.push_back("inertia: " + std::to_string(model.inertia));
    return r;
  }

  StageResult run_forge() {
    const auto clusters = require<ClusterModel>(paths_.clusters(), "cluster", cluster_fingerprint());
    const auto before = ledger();
    const auto db = build_database(train_, clusters, *gateway_, settings_.pipeline, cluster_fingerprint());
    store_artifact(db, paths_.prompts(), {db.config_fingerprint, cluster_fingerprint()});
    StageResult r{"forge", ledger() - before, {}};
    r.lines.push_back("prompt database: " + std::to_string(db.size()) + " prompts (max " +
                      std::to_string(settings_.pipeline.max_database_size()) + ")");
    return r;
  }

  StageResult run_synth() {
    const auto clusters = require<ClusterModel>(paths_.clusters(), "cluster", cluster_fingerprint());
    const auto db = require<PromptDatabase>(paths_.prompts(), "forge", database_fingerprint_value());
    const auto before = ledger();
    const auto data = build_preference_dataset(train_, clusters, db, *gateway_, settings_.pipeline);
    store_artifact(data.tuples, paths_.preferences(), {preference_fingerprint(), db.config_fingerprint});
    store_artifact(data.fitness, paths_.fitness(), {preference_fingerprint(), db.config_fingerprint});
    StageResult r{"synth", ledger() - before, {}};
    r.lines.push_back("examples processed: " + std::to_string(data.processed_examples.size()) +
                      ", preference tuples: " + std::to_string(data.tuples.size()));
    if (!data.degenerate_examples.empty()) {
      std::string line = "degenerate partitions (no tuples): " + std::to_string(data.degenerate_examples.size()) + " [";
      for (std::size_t i = 0; i < data.degenerate_examples.size(); ++i)
        line += (i ? " " : "") + data.degenerate_examples[i];
      r.lines.push_back(line + "]");
    }
    return r;
  }

  StageResult run_train() {
    const auto db = require<PromptDatabase>(paths_.prompts(), "forge", database_fingerprint_value());
    const auto tuples = require<std::vector<PreferenceTuple>>(paths_.preferences(), "synth", preference_fingerprint());
    const auto before = ledger();
    const auto ckpt = train(tuples, train_, db, *featurizer_, settings_.pipeline.effective_train(),
                            settings_.pipeline.seed);
    store_artifact(ckpt, paths_.checkpoint(), {checkpoint_fingerprint(), preference_fingerprint()});
    persist_embeddings();
    StageResult r{"train", ledger() - before, {}};
    std::ostringstream line;
    line << "trained on " << tuples.size() << " tuples, " << ckpt.loss_curve.size() << " epochs, loss "
         << ckpt.loss_curve.front() << " -> " << ckpt.loss_curve.back();
    r.lines.push_back(line.str());
    return r;
  }

  EvalOutcome run_eval(EvalMode mode) {
    const auto limit = settings_.effective_limit();
    std::optional<PromptDatabase> db;
    std::optional<Checkpoint> ckpt;
    if (mode.kind != EvalMode::Kind::NoPrompt)
      db = require<PromptDatabase>(paths_.prompts(), "forge", database_fingerprint_value());
    const bool auto_fixed = mode.kind == EvalMode::Kind::FixedPrompt && mode.fixed_prompt_id.empty();
    if (auto_fixed) {
      const auto fitness = require<std::vector<FitnessRecord>>(paths_.fitness(), "synth", preference_fingerprint());
      mode.fixed_prompt_id = best_training_prompt(fitness, *db);
    }
    PromptScorer scorer;
    if (mode.kind == EvalMode::Kind::Aps) {
      require<std::vector<PreferenceTuple>>(paths_.preferences(), "synth", preference_fingerprint());
      ckpt = require<Checkpoint>(paths_.checkpoint(), "train", checkpoint_fingerprint());
      scorer = checkpoint_scorer(*ckpt, *featurizer_);
    }
    auto outcome = evaluate(test_, mode, limit, *gateway_, db ? &*db : nullptr, scorer ? &scorer : nullptr,
                            settings_.pipeline.generation, dataset_name());
    outcome.report.fingerprint = report_fingerprint(mode, limit);
    if (auto_fixed) outcome.report.note += ", best on the m-nearest training representatives";
    store_artifact(outcome.report, paths_.report(mode.name()), {outcome.report.fingerprint, mode.kind == EvalMode::Kind::Aps ? checkpoint_fingerprint() : preference_fingerprint()});
    store_artifact(outcome.traces, paths_.traces(mode.name()), {outcome.report.fingerprint, outcome.report.fingerprint});
    persist_embeddings();
    return outcome;
  }

  /// Single-question inference with the trained evaluator.
  AnswerTrace run_answer(const QAExample& ex, std::size_t k) {
    const auto db = require<PromptDatabase>(paths_.prompts(), "forge", database_fingerprint_value());
    const auto ckpt = require<Checkpoint>(paths_.checkpoint(), "train", checkpoint_fingerprint());
    const auto scorer = checkpoint_scorer(ckpt, *featurizer_);
    return answer(ex, scorer, db, *gateway_, k, settings_.pipeline.generation);
  }

  /// cluster -> forge -> synth -> train -> eval in every mode.
  std::vector<StageResult> run_all(std::vector<EvalOutcome>* evals = nullptr) {
    std::vector<StageResult> results{run_cluster(), run_forge(), run_synth(), run_train()};
    const std::vector<EvalMode> modes = {{EvalMode::Kind::NoPrompt, 1, {}},
                                         {EvalMode::Kind::FixedPrompt, 1, {}},
                                         {EvalMode::Kind::Aps, 1, {}},
                                         {EvalMode::Kind::Aps, settings_.pipeline.top_k, {}}};
    std::vector<std::pair<std::string, EvalReport>> rows;
    for (const auto& mode : modes) {
      const auto before = ledger();
      auto outcome = run_eval(mode);
      StageResult r{"eval " + mode.name(), ledger() - before, {}};
      std::ostringstream line;
      line << "accuracy " << outcome.report.n_correct << "/" << outcome.report.n_evaluated << " = "
           << outcome.report.accuracy;
      r.lines.push_back(line.str());
      results.push_back(std::move(r));
      rows.emplace_back(dataset_name(), outcome.report);
      if (evals) evals->push_back(std::move(outcome));
    }
    detail::write_atomically(paths_.report_table(), format_report_table(rows));
    return results;
  }

  LedgerSnapshot ledger() const { return gateway_->ledger().snapshot(); }

  std::string dataset_name() const {
    return settings_.dataset.train.empty() && settings_.backend == Backend::Sim
               ? "sim-" + std::to_string(settings_.sim.topics) + "-topics"
               : settings_.dataset.format;
  }

  const QAExample& find_example(const std::string& id) const {
    for (const auto* split : {&test_, &train_})
      for (const auto& ex : *split)
        if (ex.id == id) return ex;
    throw Error(ErrorKind::Index, "no example with id '" + id + "'");
  }

 private:
  template <typename T>
  T require(const fs::path& path, const std::string& stage, const std::string& fingerprint) const {
    if (!fs::exists(path))
      throw Error(ErrorKind::PipelineOrder,
                  "stage '" + stage + "' has not been run (missing " + path.filename().string() + ")");
    try {
      return load_artifact<T>(path, fingerprint).value;
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::StaleArtifact) throw;
      throw Error(ErrorKind::StaleArtifact,
                  e.message() + " (inputs changed since it was built; re-run stage '" + stage + "')");
    }
  }

  ClusterModel cluster_now() {
    std::vector<std::string> texts;
    std::vector<std::string> ids;
    for (const auto& ex : train_) {
      texts.push_back(clustering_text(ex));
      ids.push_back(ex.id);
    }
    if (texts.empty()) throw Error(ErrorKind::Precondition, "training split is empty");
    const auto vectors = embed(*cache_, texts);
    return kmeans(vectors, settings_.pipeline.clusters, settings_.pipeline.seed, ids);
  }

  void build_backend() {
    const auto& s = settings_;
    const bool synthetic = s.backend == Backend::Sim && s.dataset.train.empty();
    if (synthetic) {
      world_ = std::make_shared<SimWorld>(default_sim_topics(s.sim.topics), s.sim.sim_seed);
      const auto corpus = make_sim_corpus(*world_, s.sim.train_size, s.sim.test_size, s.sim.sim_seed);
      train_ = corpus.train;
      test_ = corpus.test;
      write_corpus(paths_.train_corpus(), train_);
      write_corpus(paths_.test_corpus(), test_);
    } else {
      if (s.dataset.train.empty() || s.dataset.test.empty())
        throw Error(ErrorKind::Config, "dataset.train and dataset.test are required with the remote backend");
      train_ = load_corpus(s.dataset.train, s.dataset.format, Split::Train);
      test_ = load_corpus(s.dataset.test, s.dataset.format, Split::Test);
    }

    if (s.backend == Backend::Sim) {
      if (!world_) world_ = std::make_shared<SimWorld>(default_sim_topics(s.sim.topics), s.sim.sim_seed);
      world_->add_all(train_);
      world_->add_all(test_);
      gateway_ = std::make_unique<Gateway>(std::make_shared<SimBackend>(world_), s.retry(), s.max_in_flight);
      if (!cache_) cache_ = std::make_shared<CachingEmbedder>(std::make_shared<HashEmbedder>(s.sim.embedding_dim));
    } else {
      gateway_ = std::make_unique<Gateway>(std::make_shared<RemoteChatBackend>(s.endpoint), s.retry(), s.max_in_flight);
      if (!cache_)
        cache_ = std::make_shared<CachingEmbedder>(std::make_shared<RemoteEmbeddingProvider>(s.endpoint, s.retry()));
      if (fs::exists(paths_.embeddings()))
        cache_->preload(load_artifact<EmbeddingCacheEntries>(paths_.embeddings()).value);
    }
    featurizer_ = std::make_unique<Featurizer>(cache_);
    detail::write_atomically(paths_.resolved_config(), settings_to_json(s).dump(2) + "\n");
  }

  // Remote embeddings cost money; keep them across invocations.
  void persist_embeddings() const {
    if (settings_.backend == Backend::Remote) store_artifact(cache_->snapshot(), paths_.embeddings());
  }

  RunSettings settings_;
  ArtifactPaths paths_;
  std::shared_ptr<CachingEmbedder> cache_;
  std::shared_ptr<SimWorld> world_;
  std::unique_ptr<Gateway> gateway_;
  std::unique_ptr<Featurizer> featurizer_;
  std::vector<QAExample> train_;
  std::vector<QAExample> test_;
};

// ---------------------------------------------------------------------------
// Ablation sweeps.

struct AblationVariant {
  std::string label;
  std::optional<std::size_t> clusters;
  std::optional<std::size_t> prompts_per_cluster;
  std::optional<bool> clustering;
  std::string mode = "aps-vote";
};

struct AblationRow {
  std::string label;
  std::optional<EvalReport> report;
  std::string error;
};

/// Clustering on/off x voting on/off.
inline std::vector<AblationVariant> cluster_vote_grid() {
  return {{"cluster=off vote=off", std::nullopt, std::nullopt, false, "aps-novote"},
          {"cluster=off vote=on", std::nullopt, std::nullopt, false, "aps-vote"},
          {"cluster=on vote=off", std::nullopt, std::nullopt, true, "aps-novote"},
          {"cluster=on vote=on", std::nullopt, std::nullopt, true, "aps-vote"}};
}

/// One variant per (c, n_p) cell.
inline std::vector<AblationVariant> size_grid(const std::vector<std::pair<std::size_t, std::size_t>>& cells) {
  std::vector<AblationVariant> out;
  for (const auto& [c, np] : cells)
    out.push_back({"c/n_p=" + std::to_string(c) + "/" + std::to_string(np), c, np, std::nullopt, "aps-vote"});
  return out;
}

/// Runs the full pipeline once per distinct configuration (variants that
/// differ only in eval mode share a run) and evaluates every variant. One
/// failing variant does not stop the others.
inline std::vector<AblationRow> ablation_sweep(const RunSettings& base, const std::vector<AblationVariant>& variants,
                                               const fs::path& dir) {
  if (variants.empty()) throw Error(ErrorKind::Precondition, "ablation sweep needs at least one configuration");
  std::shared_ptr<CachingEmbedder> cache;
  if (base.backend == Backend::Sim)
    cache = std::make_shared<CachingEmbedder>(std::make_shared<HashEmbedder>(base.sim.embedding_dim));
  std::map<std::string, std::unique_ptr<Pipeline>> runs;
  std::map<std::string, std::string> run_errors;
  std::vector<AblationRow> rows;
  for (const auto& v : variants) {
    AblationRow row{v.label, std::nullopt, {}};
    try {
      RunSettings s = base;
      if (v.clusters) s.pipeline.clusters = *v.clusters;
      if (v.prompts_per_cluster) s.pipeline.prompts_per_cluster = *v.prompts_per_cluster;
      if (v.clustering) s.pipeline.clustering = *v.clustering;
      s.pipeline.top_k = std::min(s.pipeline.top_k, s.pipeline.max_database_size());
      const std::string key = "c" + std::to_string(s.pipeline.clusters) + "-np" +
                              std::to_string(s.pipeline.prompts_per_cluster) +
                              (s.pipeline.clustering ? "-clustered" : "-unclustered");
      if (const auto e = run_errors.find(key); e != run_errors.end()) throw Error(ErrorKind::Config, e->second);
      auto it = runs.find(key);
      if (it == runs.end()) {
        try {
          auto pipeline = std::make_unique<Pipeline>(s, dir / key, cache);
          pipeline->run_cluster();
          pipeline->run_forge();
          pipeline->run_synth();
          pipeline->run_train();
          it = runs.emplace(key, std::move(pipeline)).first;
        } catch (const std::exception& e) {
          run_errors[key] = e.what();
          throw;
        }
      }
      row.report = it->second->run_eval(parse_eval_mode(v.mode, s.pipeline.top_k)).report;
    } catch (const std::exception& e) {
      row.error = e.what();
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace aps
