#include <random>

#include <gtest/gtest.h>

#include "aps/kmeans.hpp"
#include "oracles.hpp"

namespace {

std::vector<aps::EmbeddingVector> to_vectors(const std::vector<aps::oracle::Point>& pts) {
  std::vector<aps::EmbeddingVector> out;
  for (const auto& p : pts) out.push_back({p});
  return out;
}

std::vector<aps::oracle::Point> random_points(std::mt19937_64& gen, std::size_t n, std::size_t d) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<aps::oracle::Point> pts(n, aps::oracle::Point(d));
  for (auto& p : pts)
    for (auto& x : p) x = u(gen);
  return pts;
}

std::vector<std::size_t> labels(const aps::ClusterModel& m) {
  std::vector<std::size_t> out;
  for (const auto& member : m.members) out.push_back(member.cluster);
  return out;
}

}  // namespace

TEST(KMeans, SingleClusterCentroidIsTheMean) {
  const std::vector<aps::oracle::Point> pts{{0, 0}, {2, 0}, {4, 6}};
  const auto model = aps::kmeans(to_vectors(pts), 1, 3);
  ASSERT_EQ(model.cluster_count(), 1u);
  EXPECT_NEAR(model.centroids[0][0], 2.0, 1e-12);
  EXPECT_NEAR(model.centroids[0][1], 2.0, 1e-12);
  EXPECT_NEAR(model.inertia, aps::oracle::sse_of_assignment(pts, {0, 0, 0}, 1), 1e-12);
}

TEST(KMeans, FourPointsMatchBruteForce) {
  const std::vector<aps::oracle::Point> pts{{0, 0}, {0, 1}, {5, 0}, {5, 1}};
  const auto model = aps::kmeans(to_vectors(pts), 2, 11);
  EXPECT_NEAR(model.inertia, aps::oracle::brute_force_kmeans(pts, 2), 1e-9);
  EXPECT_NEAR(model.inertia, 1.0, 1e-12);
}

TEST(KMeans, SeparatedBlobsRecoveredExactly) {
  std::mt19937_64 gen(5);
  std::normal_distribution<double> noise(0.0, 0.05);
  std::vector<aps::oracle::Point> pts;
  std::vector<std::size_t> truth;
  const std::vector<aps::oracle::Point> centres{{0, 0, 0}, {3, 0, 0}, {0, 3, 0}, {0, 0, 3}};
  for (std::size_t k = 0; k < centres.size(); ++k)
    for (int i = 0; i < 25; ++i) {
      auto p = centres[k];
      for (auto& x : p) x += noise(gen);
      pts.push_back(p);
      truth.push_back(k);
    }
  const auto model = aps::kmeans(to_vectors(pts), 4, 2);
  EXPECT_DOUBLE_EQ(aps::oracle::adjusted_rand_index(labels(model), truth), 1.0);
}

TEST(KMeans, InertiaTraceIsMonotoneAndEveryClusterNonEmpty) {
  std::mt19937_64 gen(17);
  for (int trial = 0; trial < 40; ++trial) {
    const auto pts = random_points(gen, 30, 3);
    const auto model = aps::kmeans(to_vectors(pts), 5, trial);
    ASSERT_FALSE(model.inertia_trace.empty());
    for (std::size_t i = 1; i < model.inertia_trace.size(); ++i)
      EXPECT_LE(model.inertia_trace[i], model.inertia_trace[i - 1] + 1e-12);
    for (auto s : model.sizes()) EXPECT_GT(s, 0u);
    EXPECT_NEAR(model.inertia, aps::oracle::sse_of_assignment(pts, labels(model), 5), 1e-9);
  }
}

TEST(KMeans, DuplicatePointsStillFillEveryCluster) {
  const std::vector<aps::oracle::Point> pts{{1, 1}, {1, 1}, {1, 1}, {2, 2}};
  const auto model = aps::kmeans(to_vectors(pts), 3, 1);
  for (auto s : model.sizes()) EXPECT_GT(s, 0u);
}

TEST(KMeans, SameSeedSameModel) {
  std::mt19937_64 gen(3);
  const auto v = to_vectors(random_points(gen, 40, 4));
  EXPECT_EQ(aps::kmeans(v, 6, 99), aps::kmeans(v, 6, 99));
}

TEST(KMeans, ClusterCountOutOfRange) {
  const auto v = to_vectors({{0.0}, {1.0}});
  EXPECT_THROW(aps::kmeans(v, 0, 1), aps::Error);
  EXPECT_THROW(aps::kmeans(v, 3, 1), aps::Error);
  EXPECT_THROW(aps::kmeans(std::vector<aps::EmbeddingVector>{}, 1, 1), aps::Error);
}

TEST(KMeans, NearestToCentroidSaturatesAndOrdersByDistance) {
  const std::vector<aps::oracle::Point> pts{{0.0}, {0.4}, {-0.1}, {10.0}};
  const std::vector<std::string> ids{"a", "b", "c", "d"};
  const auto model = aps::kmeans(to_vectors(pts), 2, 1, ids);
  const std::size_t big = model.members[0].cluster;
  const auto near = aps::nearest_to_centroid(model, big, 10);
  ASSERT_EQ(near.size(), 3u);
  EXPECT_EQ(near.front(), "a");  // centroid 0.1
  EXPECT_EQ(aps::nearest_to_centroid(model, big, 1), std::vector<std::string>{"a"});
  EXPECT_THROW(aps::nearest_to_centroid(model, 2, 1), aps::Error);
}
