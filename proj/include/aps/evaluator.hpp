#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <iterator>
#include <memory>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "aps/artifact.hpp"
#include "aps/embed.hpp"
#include "aps/rng.hpp"
#include "aps/types.hpp"

namespace aps {

struct FeatureVector {
  std::vector<double> values;

  std::size_t size() const { return values.size(); }
  friend bool operator==(const FeatureVector&, const FeatureVector&) = default;
};

inline constexpr std::string_view kFeatureRecipe = "input|prompt|product|absdiff/v1";

/// Builds evaluator inputs [u, v, u*v, |u-v|] from the input embedding u =
/// embed(q [+ " " + c]) and the prompt embedding v. Embeddings go through a
/// shared cache, so repeated texts never reach the provider twice.
class Featurizer {
 public:
  explicit Featurizer(std::shared_ptr<CachingEmbedder> cache) : cache_(std::move(cache)) {}

  static std::string input_text(const QAExample& ex) {
    return ex.context.empty() ? ex.question : ex.question + " " + ex.context;
  }

  std::string recipe() const { return std::string(kFeatureRecipe) + ":" + cache_->id(); }

  FeatureVector featurize(const QAExample& ex, const Prompt& prompt) const {
    const std::string texts[] = {input_text(ex), prompt.text};
    const auto vecs = cache_->embed_batch(texts);
    return combine(vecs[0], vecs[1]);
  }

  static FeatureVector combine(const EmbeddingVector& u, const EmbeddingVector& v) {
    if (u.dim() != v.dim()) throw Error(ErrorKind::Shape, "input and prompt embeddings differ in dimension");
    const std::size_t d = u.dim();
    FeatureVector f{std::vector<double>(4 * d)};
    for (std::size_t i = 0; i < d; ++i) {
      f.values[i] = u[i];
      f.values[d + i] = v[i];
      f.values[2 * d + i] = u[i] * v[i];
      f.values[3 * d + i] = std::abs(u[i] - v[i]);
    }
    return f;
  }

  // Embeds many texts in one provider round trip ahead of featurisation.
  void warm(std::span<const std::string> texts) const {
    if (!texts.empty()) cache_->embed_batch(texts);
  }

  CachingEmbedder& cache() const { return *cache_; }

 private:
  std::shared_ptr<CachingEmbedder> cache_;
};

/// Two-layer scorer s = w2 . tanh(W1 x + b1) + b2 with parameters stored flat
/// as [W1 (row-major, hidden x input), b1, w2, b2].
class ScoringModel {
 public:
  ScoringModel() = default;
  ScoringModel(std::size_t input_dim, std::size_t hidden)
      : input_dim_(input_dim), hidden_(hidden), params_(parameter_count(input_dim, hidden), 0.0) {}

  static std::size_t parameter_count(std::size_t input_dim, std::size_t hidden) {
    return hidden * input_dim + 2 * hidden + 1;
  }

  // Glorot-uniform weights, zero biases.
  static ScoringModel initialize(std::size_t input_dim, std::size_t hidden, std::uint64_t seed) {
    ScoringModel m(input_dim, hidden);
    m.init_seed_ = seed;
    CounterRng rng(seed, 0x1417ULL);
    const double a1 = std::sqrt(6.0 / static_cast<double>(input_dim + hidden));
    for (std::size_t i = 0; i < hidden * input_dim; ++i) m.params_[i] = rng.uniform(-a1, a1);
    const double a2 = std::sqrt(6.0 / static_cast<double>(hidden + 1));
    for (std::size_t i = 0; i < hidden; ++i) m.params_[m.w2_offset() + i] = rng.uniform(-a2, a2);
    return m;
  }

  static ScoringModel from_parameters(std::size_t input_dim, std::size_t hidden, std::vector<double> params,
                                      std::uint64_t init_seed = 0) {
    if (params.size() != parameter_count(input_dim, hidden))
      throw Error(ErrorKind::Shape, "parameter array has " + std::to_string(params.size()) + " entries, expected " +
                                        std::to_string(parameter_count(input_dim, hidden)));
    ScoringModel m(input_dim, hidden);
    m.params_ = std::move(params);
    m.init_seed_ = init_seed;
    return m;
  }

  std::size_t input_dim() const { return input_dim_; }
  std::size_t hidden() const { return hidden_; }
  std::uint64_t init_seed() const { return init_seed_; }
  std::span<double> parameters() { return params_; }
  std::span<const double> parameters() const { return params_; }

  std::size_t b1_offset() const { return hidden_ * input_dim_; }
  std::size_t w2_offset() const { return b1_offset() + hidden_; }
  std::size_t b2_offset() const { return w2_offset() + hidden_; }

  // Weights get decoupled decay; biases do not.
  bool is_weight(std::size_t index) const { return index < b1_offset() || (index >= w2_offset() && index < b2_offset()); }

  /// Forward pass; `hidden_out` receives tanh activations when non-null.
  double forward(std::span<const double> x, std::vector<double>* hidden_out = nullptr) const {
    if (x.size() != input_dim_)
      throw Error(ErrorKind::Shape, "feature length " + std::to_string(x.size()) + " does not match model input " +
                                        std::to_string(input_dim_));
    if (hidden_out) hidden_out->resize(hidden_);
    double s = params_[b2_offset()];
    for (std::size_t h = 0; h < hidden_; ++h) {
      const double* row = params_.data() + h * input_dim_;
      double a = params_[b1_offset() + h];
      for (std::size_t i = 0; i < input_dim_; ++i) a += row[i] * x[i];
      const double act = std::tanh(a);
      if (hidden_out) (*hidden_out)[h] = act;
      s += params_[w2_offset() + h] * act;
    }
    return s;
  }

  /// grad += upstream * d score / d params, given the activations from forward().
  void accumulate_gradient(std::span<const double> x, std::span<const double> act, double upstream,
                           std::span<double> grad) const {
    grad[b2_offset()] += upstream;
    for (std::size_t h = 0; h < hidden_; ++h) {
      grad[w2_offset() + h] += upstream * act[h];
      const double da = upstream * params_[w2_offset() + h] * (1.0 - act[h] * act[h]);
      if (da == 0.0) continue;
      grad[b1_offset() + h] += da;
      double* row = grad.data() + h * input_dim_;
      for (std::size_t i = 0; i < input_dim_; ++i) row[i] += da * x[i];
    }
  }

  friend bool operator==(const ScoringModel&, const ScoringModel&) = default;

 private:
  std::size_t input_dim_ = 0;
  std::size_t hidden_ = 0;
  std::uint64_t init_seed_ = 0;
  std::vector<double> params_;
};

inline double score(const ScoringModel& model, const FeatureVector& features) { return model.forward(features.values); }

struct PairLoss {
  double loss = 0.0;
  double d_good = 0.0;  // d loss / d s_good
  double d_bad = 0.0;   // d loss / d s_bad
};

inline constexpr double kLiteralFloor = 1e-8;

/// Logistic: -log sigmoid(s_good - s_bad - margin).
/// Literal:  -log(max(s_good - s_bad + margin, 1e-8)); zero gradient where floored.
inline PairLoss preference_loss(double s_good, double s_bad, double margin, LossMode mode) {
  const double diff = s_good - s_bad;
  if (mode == LossMode::Literal) {
    const double arg = diff + margin;
    if (arg <= kLiteralFloor) return {-std::log(kLiteralFloor), 0.0, 0.0};
    return {-std::log(arg), -1.0 / arg, 1.0 / arg};
  }
  const double z = diff - margin;
  // softplus(-z) and sigmoid(-z), both overflow-safe.
  const double loss = z > 0 ? std::log1p(std::exp(-z)) : -z + std::log1p(std::exp(z));
  const double sig_neg = z >= 0 ? std::exp(-z) / (1.0 + std::exp(-z)) : 1.0 / (1.0 + std::exp(z));
  return {loss, -sig_neg, sig_neg};
}

struct TrainingPair {
  FeatureVector good;
  FeatureVector bad;
};

namespace detail {

inline const TrainingPair& deref(const TrainingPair& p) { return p; }
inline const TrainingPair& deref(const TrainingPair* p) { return *p; }

}  // namespace detail

/// Mean pair loss over `batch` and its gradient with respect to every model
/// parameter. `batch` holds TrainingPair values or pointers.
template <typename Batch>
double batch_loss_and_gradient(const ScoringModel& model, const Batch& batch, double margin, LossMode mode,
                               std::vector<double>& grad) {
  grad.assign(model.parameters().size(), 0.0);
  if (std::size(batch) == 0) return 0.0;
  const double scale = 1.0 / static_cast<double>(std::size(batch));
  std::vector<double> act_good;
  std::vector<double> act_bad;
  double total = 0.0;
  for (const auto& item : batch) {
    const TrainingPair& pair = detail::deref(item);
    const double sg = model.forward(pair.good.values, &act_good);
    const double sb = model.forward(pair.bad.values, &act_bad);
    const auto l = preference_loss(sg, sb, margin, mode);
    total += l.loss;
    model.accumulate_gradient(pair.good.values, act_good, scale * l.d_good, grad);
    model.accumulate_gradient(pair.bad.values, act_bad, scale * l.d_bad, grad);
  }
  return total * scale;
}

struct Checkpoint {
  ScoringModel model;
  TrainConfig config;
  std::string feature_recipe;
  std::vector<double> loss_curve;  // mean loss per epoch
  std::uint64_t seed = 0;

  friend bool operator==(const Checkpoint&, const Checkpoint&) = default;
};

/// Mini-batch AdamW on the preference loss. Pairs are reshuffled every epoch
/// from (seed, epoch); the result is a pure function of the inputs.
inline Checkpoint train(std::span<const TrainingPair> pairs, const TrainConfig& config, std::uint64_t seed,
                        std::string feature_recipe = {}) {
  config.validate();
  if (pairs.empty())
    throw Error(ErrorKind::Training,
                "no preference tuples to train on; check the synthesis log for degenerate examples");
  const std::size_t input_dim = pairs.front().good.size();
  for (const auto& p : pairs)
    if (p.good.size() != input_dim || p.bad.size() != input_dim)
      throw Error(ErrorKind::Shape, "training pairs differ in feature length");

  Checkpoint ckpt;
  ckpt.config = config;
  ckpt.seed = seed;
  ckpt.feature_recipe = std::move(feature_recipe);
  ckpt.model = ScoringModel::initialize(input_dim, config.hidden, seed);

  auto params = ckpt.model.parameters();
  std::vector<double> m(params.size(), 0.0);
  std::vector<double> v(params.size(), 0.0);
  std::vector<double> grad;
  std::vector<std::size_t> order(pairs.size());
  std::vector<const TrainingPair*> batch;
  std::uint64_t step = 0;

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    CounterRng(seed, 0xe90c0000ULL + epoch).shuffle(order);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      batch.clear();
      for (std::size_t i = start; i < end; ++i) batch.push_back(&pairs[order[i]]);
      epoch_loss += batch_loss_and_gradient(ckpt.model, batch, config.margin, config.loss_mode, grad) *
                    static_cast<double>(batch.size());

      ++step;
      const double bc1 = 1.0 - std::pow(config.beta1, static_cast<double>(step));
      const double bc2 = 1.0 - std::pow(config.beta2, static_cast<double>(step));
      for (std::size_t k = 0; k < params.size(); ++k) {
        m[k] = config.beta1 * m[k] + (1.0 - config.beta1) * grad[k];
        v[k] = config.beta2 * v[k] + (1.0 - config.beta2) * grad[k] * grad[k];
        if (ckpt.model.is_weight(k)) params[k] -= config.learning_rate * config.weight_decay * params[k];
        params[k] -= config.learning_rate * (m[k] / bc1) / (std::sqrt(v[k] / bc2) + config.adam_epsilon);
      }
    }
    ckpt.loss_curve.push_back(epoch_loss / static_cast<double>(pairs.size()));
  }
  return ckpt;
}

/// Fraction of pairs scored good > bad; exact ties count one half.
inline double pairwise_accuracy(const ScoringModel& model, std::span<const TrainingPair> pairs) {
  if (pairs.empty()) throw Error(ErrorKind::Precondition, "pairwise accuracy of an empty set");
  double hits = 0.0;
  for (const auto& p : pairs) {
    const double sg = model.forward(p.good.values);
    const double sb = model.forward(p.bad.values);
    hits += sg > sb ? 1.0 : (sg == sb ? 0.5 : 0.0);
  }
  return hits / static_cast<double>(pairs.size());
}

inline std::vector<TrainingPair> materialize_pairs(std::span<const PreferenceTuple> tuples,
                                                   std::span<const QAExample> examples, const PromptDatabase& db,
                                                   const Featurizer& featurizer) {
  std::unordered_map<std::string, const QAExample*> by_id;
  for (const auto& ex : examples) by_id.emplace(ex.id, &ex);
  std::vector<std::string> texts;
  for (const auto& p : db.prompts) texts.push_back(p.text);
  for (const auto& t : tuples)
    if (const auto it = by_id.find(t.example_id); it != by_id.end()) texts.push_back(Featurizer::input_text(*it->second));
  featurizer.warm(texts);

  std::vector<TrainingPair> pairs;
  pairs.reserve(tuples.size());
  for (const auto& t : tuples) {
    const auto it = by_id.find(t.example_id);
    if (it == by_id.end()) throw Error(ErrorKind::StaleArtifact, "tuple names unknown example '" + t.example_id + "'");
    pairs.push_back({featurizer.featurize(*it->second, db.find(t.good_prompt_id)),
                     featurizer.featurize(*it->second, db.find(t.bad_prompt_id))});
  }
  return pairs;
}

inline Checkpoint train(std::span<const PreferenceTuple> tuples, std::span<const QAExample> examples,
                        const PromptDatabase& db, const Featurizer& featurizer, const TrainConfig& config,
                        std::uint64_t seed) {
  if (tuples.empty())
    throw Error(ErrorKind::Training,
                "no preference tuples to train on; check the synthesis log for degenerate examples");
  const auto pairs = materialize_pairs(tuples, examples, db, featurizer);
  return train(std::span<const TrainingPair>(pairs), config, seed, featurizer.recipe());
}

template <>
struct ArtifactCodec<Checkpoint> {
  static constexpr std::string_view kind = "evaluator-checkpoint";
  static ojson meta(const Checkpoint& c) {
    ojson out;
    out["feature_recipe"] = c.feature_recipe;
    out["input_dim"] = c.model.input_dim();
    out["hidden"] = c.model.hidden();
    out["init_seed"] = c.model.init_seed();
    out["seed"] = c.seed;
    ojson t;
    t["learning_rate"] = c.config.learning_rate;
    t["beta1"] = c.config.beta1;
    t["beta2"] = c.config.beta2;
    t["adam_epsilon"] = c.config.adam_epsilon;
    t["weight_decay"] = c.config.weight_decay;
    t["batch_size"] = c.config.batch_size;
    t["epochs"] = c.config.epochs;
    t["hidden"] = c.config.hidden;
    t["margin"] = c.config.margin;
    t["loss_mode"] = std::string(to_string(c.config.loss_mode));
    out["train_config"] = std::move(t);
    out["loss_curve"] = c.loss_curve;
    return out;
  }
  // Parameters in fixed order, one chunk of at most 256 values per record.
  static std::vector<ojson> records(const Checkpoint& c) {
    std::vector<ojson> out;
    const auto params = c.model.parameters();
    for (std::size_t start = 0; start < params.size(); start += 256) {
      const std::size_t end = std::min(params.size(), start + 256);
      ojson r;
      r["offset"] = start;
      r["values"] = std::vector<double>(params.begin() + static_cast<std::ptrdiff_t>(start),
                                        params.begin() + static_cast<std::ptrdiff_t>(end));
      out.push_back(std::move(r));
    }
    return out;
  }
  static Checkpoint decode(const ojson& meta, const std::vector<ojson>& rs) {
    Checkpoint c;
    c.feature_recipe = meta.at("feature_recipe").get<std::string>();
    c.seed = meta.at("seed").get<std::uint64_t>();
    c.loss_curve = meta.at("loss_curve").get<std::vector<double>>();
    const auto& t = meta.at("train_config");
    c.config.learning_rate = t.at("learning_rate").get<double>();
    c.config.beta1 = t.at("beta1").get<double>();
    c.config.beta2 = t.at("beta2").get<double>();
    c.config.adam_epsilon = t.at("adam_epsilon").get<double>();
    c.config.weight_decay = t.at("weight_decay").get<double>();
    c.config.batch_size = t.at("batch_size").get<std::size_t>();
    c.config.epochs = t.at("epochs").get<std::size_t>();
    c.config.hidden = t.at("hidden").get<std::size_t>();
    c.config.margin = t.at("margin").get<double>();
    c.config.loss_mode = parse_loss_mode(t.at("loss_mode").get<std::string>());
    std::vector<double> params;
    for (const auto& r : rs) {
      if (r.at("offset").get<std::size_t>() != params.size())
        throw Error(ErrorKind::StaleArtifact, "checkpoint parameter chunks out of order");
      for (const auto& x : r.at("values")) params.push_back(x.get<double>());
    }
    c.model = ScoringModel::from_parameters(meta.at("input_dim").get<std::size_t>(),
                                            meta.at("hidden").get<std::size_t>(), std::move(params),
                                            meta.at("init_seed").get<std::uint64_t>());
    return c;
  }
};

}  // namespace aps
