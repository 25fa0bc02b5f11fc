#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "aps/artifact.hpp"
#include "aps/embed.hpp"
#include "aps/rng.hpp"

namespace aps {

struct ClusterMember {
  std::string example_id;
  std::size_t cluster = 0;
  double sq_distance = 0.0;  // to the assigned centroid

  friend bool operator==(const ClusterMember&, const ClusterMember&) = default;
};

struct ClusterModel {
  std::vector<EmbeddingVector> centroids;
  std::vector<ClusterMember> members;  // input order
  double inertia = 0.0;
  std::uint64_t seed = 0;
  std::vector<double> inertia_trace;  // after each assignment step of the returned run

  std::size_t cluster_count() const { return centroids.size(); }

  std::vector<std::size_t> sizes() const {
    std::vector<std::size_t> out(centroids.size(), 0);
    for (const auto& m : members) ++out[m.cluster];
    return out;
  }

  friend bool operator==(const ClusterModel&, const ClusterModel&) = default;
};

struct KMeansOptions {
  std::size_t max_iterations = 300;
  // Independent k-means++ seedings drawn from the same seed; the
  // lowest-inertia run is kept.
  std::size_t restarts = 10;
};

namespace detail {

inline std::size_t nearest_centroid(const EmbeddingVector& v, const std::vector<EmbeddingVector>& centroids,
                                    double* sq_distance = nullptr) {
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < centroids.size(); ++j) {
    const double d = squared_distance(v, centroids[j]);
    if (d < best_d) {
      best_d = d;
      best = j;
    }
  }
  if (sq_distance) *sq_distance = best_d;
  return best;
}

inline std::vector<EmbeddingVector> kmeans_pp_seed(std::span<const EmbeddingVector> points, std::size_t c,
                                                   CounterRng& rng) {
  std::vector<EmbeddingVector> centroids;
  centroids.push_back(points[rng.below(points.size())]);
  std::vector<double> d2(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) d2[i] = squared_distance(points[i], centroids[0]);
  while (centroids.size() < c) {
    double total = 0.0;
    for (double d : d2) total += d;
    std::size_t pick = 0;
    if (total > 0.0) {
      double target = rng.uniform() * total;
      pick = points.size() - 1;
      for (std::size_t i = 0; i < points.size(); ++i) {
        target -= d2[i];
        if (target < 0.0 && d2[i] > 0.0) {
          pick = i;
          break;
        }
      }
    } else {
      pick = rng.below(points.size());
    }
    centroids.push_back(points[pick]);
    for (std::size_t i = 0; i < points.size(); ++i) d2[i] = std::min(d2[i], squared_distance(points[i], centroids.back()));
  }
  return centroids;
}

struct LloydRun {
  std::vector<EmbeddingVector> centroids;
  std::vector<std::size_t> assignment;
  std::vector<double> sq_distance;
  double inertia = 0.0;
  std::vector<double> trace;
};

inline LloydRun lloyd(std::span<const EmbeddingVector> points, std::vector<EmbeddingVector> centroids,
                      std::size_t max_iterations) {
  const std::size_t n = points.size();
  const std::size_t c = centroids.size();
  const std::size_t dim = points.front().dim();
  LloydRun run;
  run.assignment.assign(n, std::numeric_limits<std::size_t>::max());
  run.sq_distance.assign(n, 0.0);

  const auto assign = [&]() {
    bool changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t j = nearest_centroid(points[i], centroids, &run.sq_distance[i]);
      changed |= j != run.assignment[i];
      run.assignment[i] = j;
    }
    return changed;
  };
  // Moves the point farthest from its centroid (taken from a cluster with at
  // least two members) into each empty cluster.
  const auto repair_empty = [&]() {
    bool repaired = false;
    for (std::size_t j = 0; j < c; ++j) {
      std::vector<std::size_t> sizes(c, 0);
      for (std::size_t a : run.assignment) ++sizes[a];
      if (sizes[j] != 0) continue;
      std::size_t far = n;
      for (std::size_t i = 0; i < n; ++i) {
        if (sizes[run.assignment[i]] < 2) continue;
        if (far == n || run.sq_distance[i] > run.sq_distance[far]) far = i;
      }
      if (far == n) break;
      run.assignment[far] = j;
      run.sq_distance[far] = 0.0;
      centroids[j] = points[far];
      repaired = true;
    }
    return repaired;
  };
  const auto inertia = [&]() {
    double s = 0.0;
    for (double d : run.sq_distance) s += d;
    return s;
  };

  for (std::size_t iter = 0; iter < max_iterations; ++iter) {
    const bool changed = assign();
    const bool repaired = repair_empty();
    run.trace.push_back(inertia());
    if (!changed && !repaired && iter > 0) break;

    // Fixed accumulation order by point index.
    std::vector<std::vector<double>> sums(c, std::vector<double>(dim, 0.0));
    std::vector<std::size_t> counts(c, 0);
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t j = run.assignment[i];
      ++counts[j];
      for (std::size_t d = 0; d < dim; ++d) sums[j][d] += points[i].values[d];
    }
    for (std::size_t j = 0; j < c; ++j) {
      if (counts[j] == 0) continue;
      for (std::size_t d = 0; d < dim; ++d) centroids[j].values[d] = sums[j][d] / static_cast<double>(counts[j]);
    }
  }
  // Distances against the final centroids.
  for (std::size_t i = 0; i < n; ++i) run.sq_distance[i] = squared_distance(points[i], centroids[run.assignment[i]]);
  run.inertia = inertia();
  run.centroids = std::move(centroids);
  return run;
}

}  // namespace detail

/// Lloyd's algorithm with k-means++ seeding drawn from `seed`. Stops when the
/// assignment is stable or after `max_iterations`. Empty clusters are refilled
/// with the point farthest from its centroid, so every cluster is non-empty.
/// Member ids default to the point index when `ids` is empty.
inline ClusterModel kmeans(std::span<const EmbeddingVector> vectors, std::size_t c, std::uint64_t seed,
                           std::span<const std::string> ids = {}, const KMeansOptions& options = {}) {
  if (vectors.empty()) throw Error(ErrorKind::Precondition, "kmeans needs at least one vector");
  if (c < 1 || c > vectors.size())
    throw Error(ErrorKind::Config, "cluster count " + std::to_string(c) + " must lie in [1, " +
                                       std::to_string(vectors.size()) + "]");
  if (!ids.empty() && ids.size() != vectors.size()) throw Error(ErrorKind::Shape, "ids and vectors differ in length");
  const std::size_t dim = vectors.front().dim();
  for (const auto& v : vectors)
    if (v.dim() != dim) throw Error(ErrorKind::Shape, "vectors differ in dimension");

  detail::LloydRun best;
  bool have_best = false;
  for (std::size_t r = 0; r < std::max<std::size_t>(options.restarts, 1); ++r) {
    CounterRng rng(seed, r);
    auto run = detail::lloyd(vectors, detail::kmeans_pp_seed(vectors, c, rng), options.max_iterations);
    if (!have_best || run.inertia < best.inertia) {
      best = std::move(run);
      have_best = true;
    }
  }

  ClusterModel model;
  model.centroids = std::move(best.centroids);
  model.inertia = best.inertia;
  model.seed = seed;
  model.inertia_trace = std::move(best.trace);
  model.members.reserve(vectors.size());
  for (std::size_t i = 0; i < vectors.size(); ++i)
    model.members.push_back({ids.empty() ? std::to_string(i) : ids[i], best.assignment[i], best.sq_distance[i]});
  return model;
}

/// The min(m, |cluster|) members closest to the centroid, nearest first; ties
/// keep input order.
inline std::vector<std::string> nearest_to_centroid(const ClusterModel& model, std::size_t cluster, std::size_t m) {
  if (cluster >= model.cluster_count())
    throw Error(ErrorKind::Index, "cluster " + std::to_string(cluster) + " out of range [0, " +
                                      std::to_string(model.cluster_count()) + ")");
  if (m < 1) throw Error(ErrorKind::Precondition, "m must be >= 1");
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < model.members.size(); ++i)
    if (model.members[i].cluster == cluster) idx.push_back(i);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return model.members[a].sq_distance < model.members[b].sq_distance;
  });
  if (idx.size() > m) idx.resize(m);
  std::vector<std::string> out;
  out.reserve(idx.size());
  for (std::size_t i : idx) out.push_back(model.members[i].example_id);
  return out;
}

template <>
struct ArtifactCodec<ClusterModel> {
  static constexpr std::string_view kind = "cluster-model";
  static ojson meta(const ClusterModel& m) {
    ojson out;
    out["clusters"] = m.cluster_count();
    out["seed"] = m.seed;
    out["inertia"] = m.inertia;
    out["inertia_trace"] = m.inertia_trace;
    ojson cs = ojson::array();
    for (const auto& c : m.centroids) cs.push_back(c.values);
    out["centroids"] = std::move(cs);
    return out;
  }
  static std::vector<ojson> records(const ClusterModel& m) {
    std::vector<ojson> out;
    for (const auto& mem : m.members) {
      ojson r;
      r["example_id"] = mem.example_id;
      r["cluster"] = mem.cluster;
      r["sq_distance"] = mem.sq_distance;
      out.push_back(std::move(r));
    }
    return out;
  }
  static ClusterModel decode(const ojson& meta, const std::vector<ojson>& rs) {
    ClusterModel m;
    m.seed = meta.at("seed").get<std::uint64_t>();
    m.inertia = meta.at("inertia").get<double>();
    m.inertia_trace = meta.at("inertia_trace").get<std::vector<double>>();
    for (const auto& c : meta.at("centroids")) m.centroids.push_back({c.get<std::vector<double>>()});
    for (const auto& r : rs)
      m.members.push_back({r.at("example_id").get<std::string>(), r.at("cluster").get<std::size_t>(),
                           r.at("sq_distance").get<double>()});
    return m;
  }
};

}  // namespace aps
