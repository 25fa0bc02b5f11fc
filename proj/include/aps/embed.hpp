#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "aps/artifact.hpp"
#include "aps/hash.hpp"
#include "aps/text.hpp"
#include "aps/types.hpp"

namespace aps {

struct EmbeddingVector {
  std::vector<double> values;

  std::size_t dim() const { return values.size(); }
  double operator[](std::size_t i) const { return values[i]; }

  friend bool operator==(const EmbeddingVector&, const EmbeddingVector&) = default;
};

inline double squared_distance(const EmbeddingVector& a, const EmbeddingVector& b) {
  double sum = 0.0;
  for (std::size_t i = 0; i < a.dim(); ++i) {
    const double d = a.values[i] - b.values[i];
    sum += d * d;
  }
  return sum;
}

class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;
  // Identifies the model; recorded in checkpoints as part of the feature recipe.
  virtual std::string id() const = 0;
  virtual std::vector<EmbeddingVector> embed_batch(std::span<const std::string> texts) = 0;
};

/// Deterministic offline embedder: signed feature hashing of lowercased
/// alphanumeric tokens into `dim` buckets, then L2 normalisation.
class HashEmbedder final : public EmbeddingProvider {
 public:
  explicit HashEmbedder(std::size_t dim = 32, std::uint64_t salt = 0) : dim_(dim), salt_(salt) {
    if (dim_ == 0) throw Error(ErrorKind::Config, "embedding dimension must be positive");
  }

  std::string id() const override { return "hash-embedder/d" + std::to_string(dim_) + "/s" + std::to_string(salt_); }

  EmbeddingVector embed_one(std::string_view s) const {
    EmbeddingVector v{std::vector<double>(dim_, 0.0)};
    for (const auto& token : text::tokenize(s)) {
      const std::uint64_t h = Fnv1a{}.update(std::to_string(salt_)).update("|").update(token).digest();
      v.values[h % dim_] += ((h >> 63) != 0U) ? 1.0 : -1.0;
    }
    double norm = 0.0;
    for (double x : v.values) norm += x * x;
    if (norm > 0.0) {
      norm = std::sqrt(norm);
      for (double& x : v.values) x /= norm;
    }
    return v;
  }

  std::vector<EmbeddingVector> embed_batch(std::span<const std::string> texts) override {
    std::vector<EmbeddingVector> out;
    out.reserve(texts.size());
    for (const auto& t : texts) out.push_back(embed_one(t));
    return out;
  }

  std::size_t dim() const { return dim_; }

 private:
  std::size_t dim_;
  std::uint64_t salt_;
};

/// Embeds a batch through `provider`, enforcing the provider contract: one
/// finite vector per text, in order, all of the same dimension.
inline std::vector<EmbeddingVector> embed(EmbeddingProvider& provider, std::span<const std::string> texts) {
  if (texts.empty()) throw Error(ErrorKind::Precondition, "embed called with no texts");
  auto vectors = provider.embed_batch(texts);
  if (vectors.size() != texts.size())
    throw Error(ErrorKind::ProviderContract, "provider returned " + std::to_string(vectors.size()) +
                                                 " vectors for " + std::to_string(texts.size()) + " texts");
  const std::size_t dim = vectors.front().dim();
  for (const auto& v : vectors) {
    if (v.dim() == 0 || v.dim() != dim) throw Error(ErrorKind::ProviderContract, "embedding dimension mismatch in batch");
    for (double x : v.values)
      if (!std::isfinite(x)) throw Error(ErrorKind::ProviderContract, "non-finite embedding entry");
  }
  return vectors;
}

/// Memoising wrapper. Thread-safe; only texts not yet seen reach the
/// underlying provider.
class CachingEmbedder final : public EmbeddingProvider {
 public:
  explicit CachingEmbedder(std::shared_ptr<EmbeddingProvider> inner) : inner_(std::move(inner)) {}

  std::string id() const override { return inner_->id(); }

  std::vector<EmbeddingVector> embed_batch(std::span<const std::string> texts) override {
    std::lock_guard lock(mutex_);
    std::vector<std::string> missing;
    for (const auto& t : texts)
      if (!cache_.contains(t) && std::find(missing.begin(), missing.end(), t) == missing.end()) missing.push_back(t);
    if (!missing.empty()) {
      auto fresh = embed(*inner_, missing);
      provider_calls_ += missing.size();
      for (std::size_t i = 0; i < missing.size(); ++i) cache_.emplace(missing[i], std::move(fresh[i]));
    }
    std::vector<EmbeddingVector> out;
    out.reserve(texts.size());
    for (const auto& t : texts) out.push_back(cache_.at(t));
    return out;
  }

  EmbeddingVector embed_one(const std::string& s) {
    std::string texts[] = {s};
    return embed_batch(texts).front();
  }

  // Number of texts forwarded to the wrapped provider.
  std::size_t provider_calls() const {
    std::lock_guard lock(mutex_);
    return provider_calls_;
  }

  std::size_t size() const {
    std::lock_guard lock(mutex_);
    return cache_.size();
  }

  // Sorted snapshot for persistence.
  std::map<std::string, EmbeddingVector> snapshot() const {
    std::lock_guard lock(mutex_);
    return {cache_.begin(), cache_.end()};
  }

  void preload(const std::map<std::string, EmbeddingVector>& entries) {
    std::lock_guard lock(mutex_);
    for (const auto& [k, v] : entries) cache_.emplace(k, v);
  }

 private:
  std::shared_ptr<EmbeddingProvider> inner_;
  mutable std::mutex mutex_;
  std::unordered_map<std::string, EmbeddingVector> cache_;
  std::size_t provider_calls_ = 0;
};

using EmbeddingCacheEntries = std::map<std::string, EmbeddingVector>;

template <>
struct ArtifactCodec<EmbeddingCacheEntries> {
  static constexpr std::string_view kind = "embedding-cache";
  static ojson meta(const EmbeddingCacheEntries&) { return ojson::object(); }
  static std::vector<ojson> records(const EmbeddingCacheEntries& entries) {
    std::vector<ojson> out;
    for (const auto& [text, v] : entries) {
      ojson r;
      r["text"] = text;
      r["values"] = v.values;
      out.push_back(std::move(r));
    }
    return out;
  }
  static EmbeddingCacheEntries decode(const ojson&, const std::vector<ojson>& rs) {
    EmbeddingCacheEntries out;
    for (const auto& r : rs) out.emplace(r.at("text").get<std::string>(), EmbeddingVector{r.at("values").get<std::vector<double>>()});
    return out;
  }
};

/// Text used to place an example in embedding space: the question and its
/// context; AQuA examples also contribute their options and rationale.
inline std::string clustering_text(const QAExample& ex) {
  std::string out = ex.question;
  const auto append = [&out](const std::string& part) {
    if (part.empty()) return;
    if (!out.empty()) out += ' ';
    out += part;
  };
  append(ex.context);
  if (ex.answer_type == AnswerType::MultipleChoice) append(ex.rationale);
  return out;
}

}  // namespace aps
