#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "aps/evaluator.hpp"
#include "oracles.hpp"

using aps::FeatureVector;
using aps::LossMode;
using aps::ScoringModel;
using aps::TrainingPair;

namespace {

FeatureVector random_features(std::mt19937_64& gen, std::size_t n) {
  std::normal_distribution<double> g(0.0, 1.0);
  FeatureVector f{std::vector<double>(n)};
  for (auto& x : f.values) x = g(gen);
  return f;
}

ScoringModel random_model(std::mt19937_64& gen, std::size_t in, std::size_t hidden, double scale) {
  std::normal_distribution<double> g(0.0, scale);
  std::vector<double> p(ScoringModel::parameter_count(in, hidden));
  for (auto& x : p) x = g(gen);
  return ScoringModel::from_parameters(in, hidden, p);
}

double relative_error(const std::vector<double>& a, const std::vector<double>& b) {
  double diff = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - b[i]) * (a[i] - b[i]);
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  const double denom = std::max({std::sqrt(na), std::sqrt(nb), 1e-12});
  return std::sqrt(diff) / denom;
}

std::shared_ptr<aps::CachingEmbedder> hash_cache(std::size_t dim = 16) {
  return std::make_shared<aps::CachingEmbedder>(std::make_shared<aps::HashEmbedder>(dim));
}

}  // namespace

TEST(Score, ZeroModelScoresZero) {
  const ScoringModel m(8, 4);
  EXPECT_EQ(m.forward(std::vector<double>(8, 3.0)), 0.0);
}

TEST(Score, HandComputedTinyModel) {
  // W1 = [0.5, -1], b1 = 0.25, w2 = 2, b2 = -0.5; x = [1, 2]
  // a = 0.5 - 2 + 0.25 = -1.25, s = 2 tanh(-1.25) - 0.5
  const auto m = ScoringModel::from_parameters(2, 1, {0.5, -1.0, 0.25, 2.0, -0.5});
  EXPECT_NEAR(m.forward(std::vector<double>{1.0, 2.0}), -2.1965672799150258, 1e-14);
}

TEST(Score, ShapeMismatch) {
  const ScoringModel m(4, 2);
  EXPECT_THROW(m.forward(std::vector<double>(3, 0.0)), aps::Error);
  EXPECT_THROW(ScoringModel::from_parameters(2, 1, {1.0}), aps::Error);
  EXPECT_EQ(ScoringModel::parameter_count(128, 64), 128u * 64u + 64u + 64u + 1u);
}

TEST(PreferenceLoss, ReferenceValues) {
  EXPECT_NEAR(aps::preference_loss(0.3, 0.3, 0.0, LossMode::Logistic).loss, std::log(2.0), 1e-15);
  EXPECT_NEAR(aps::preference_loss(1.5, 0.5, 0.1, LossMode::Literal).loss, -std::log(1.1), 1e-15);
  const auto floored = aps::preference_loss(0.0, 1.0, 0.1, LossMode::Literal);
  EXPECT_NEAR(floored.loss, -std::log(1e-8), 1e-9);
  EXPECT_EQ(floored.d_good, 0.0);
  EXPECT_EQ(floored.d_bad, 0.0);
  EXPECT_TRUE(std::isfinite(aps::preference_loss(-800.0, 800.0, 0.1, LossMode::Logistic).loss));
  EXPECT_TRUE(std::isfinite(aps::preference_loss(800.0, -800.0, 0.1, LossMode::Logistic).loss));
}

TEST(PreferenceLoss, PartialsMatchFiniteDifferences) {
  std::mt19937_64 gen(2);
  std::uniform_real_distribution<double> u(-3, 3);
  for (auto mode : {LossMode::Logistic, LossMode::Literal}) {
    for (int i = 0; i < 200; ++i) {
      const double sg = u(gen), sb = u(gen), eps = 0.1;
      if (mode == LossMode::Literal && sg - sb + eps < 1e-3) continue;
      const auto l = aps::preference_loss(sg, sb, eps, mode);
      const auto g = aps::oracle::numeric_gradient(
          [&](const std::vector<double>& s) { return aps::preference_loss(s[0], s[1], eps, mode).loss; }, {sg, sb}, 1e-5);
      EXPECT_LE(relative_error({l.d_good, l.d_bad}, g), 1e-6);
    }
  }
}

TEST(PreferenceLoss, LogisticTranslationInvariant) {
  std::mt19937_64 gen(4);
  std::uniform_real_distribution<double> u(-5, 5);
  for (int i = 0; i < 100; ++i) {
    const double sg = u(gen), sb = u(gen), t = u(gen);
    EXPECT_NEAR(aps::preference_loss(sg, sb, 0.1, LossMode::Logistic).loss,
                aps::preference_loss(sg + t, sb + t, 0.1, LossMode::Logistic).loss, 1e-12);
  }
}

TEST(BatchGradient, MatchesFiniteDifferences) {
  std::mt19937_64 gen(8);
  for (int draw = 0; draw < 20; ++draw) {
    const std::size_t in = 6, hidden = 4;
    const auto model = random_model(gen, in, hidden, 0.4);
    std::vector<TrainingPair> batch;
    for (int i = 0; i < 5; ++i) batch.push_back({random_features(gen, in), random_features(gen, in)});
    for (auto mode : {LossMode::Logistic, LossMode::Literal}) {
      const double margin = mode == LossMode::Literal ? 8.0 : 0.1;  // keep Literal off its floor
      std::vector<double> grad;
      aps::batch_loss_and_gradient(model, batch, margin, mode, grad);
      const auto p = model.parameters();
      const auto numeric = aps::oracle::numeric_gradient(
          [&](const std::vector<double>& theta) {
            std::vector<double> unused;
            return aps::batch_loss_and_gradient(ScoringModel::from_parameters(in, hidden, theta), batch, margin, mode,
                                                unused);
          },
          {p.begin(), p.end()});
      EXPECT_LE(relative_error(grad, numeric), 1e-4);
    }
  }
}

TEST(Train, SinglePairGetsSeparated) {
  std::mt19937_64 gen(1);
  std::vector<TrainingPair> pairs{{random_features(gen, 8), random_features(gen, 8)}};
  aps::TrainConfig cfg;
  cfg.margin = 0.0;
  cfg.hidden = 8;
  // One pair means one optimizer step per epoch.
  cfg.epochs = 500;
  const auto ckpt = aps::train(pairs, cfg, 3);
  EXPECT_EQ(ckpt.loss_curve.size(), 500u);
  EXPECT_LT(ckpt.loss_curve.back(), ckpt.loss_curve.front());
  const auto final_loss = aps::preference_loss(aps::score(ckpt.model, pairs[0].good), aps::score(ckpt.model, pairs[0].bad),
                                               0.0, LossMode::Logistic).loss;
  EXPECT_LT(final_loss, std::log(2.0));
  EXPECT_DOUBLE_EQ(aps::pairwise_accuracy(ckpt.model, pairs), 1.0);
}

TEST(Train, DeterministicForSameSeed) {
  std::mt19937_64 gen(6);
  std::vector<TrainingPair> pairs;
  for (int i = 0; i < 40; ++i) pairs.push_back({random_features(gen, 8), random_features(gen, 8)});
  aps::TrainConfig cfg;
  cfg.epochs = 5;
  EXPECT_EQ(aps::train(pairs, cfg, 11), aps::train(pairs, cfg, 11));
  EXPECT_NE(aps::train(pairs, cfg, 11).model, aps::train(pairs, cfg, 12).model);
}

TEST(Train, EmptyInputIsTrainingError) {
  try {
    aps::train(std::span<const TrainingPair>{}, aps::TrainConfig{}, 1);
    FAIL();
  } catch (const aps::Error& e) {
    EXPECT_EQ(e.kind(), aps::ErrorKind::Training);
  }
}

TEST(PairwiseAccuracy, RandomModelNearChance) {
  std::mt19937_64 gen(10);
  const auto model = ScoringModel::initialize(12, 16, 5);
  std::vector<TrainingPair> pairs;
  for (int i = 0; i < 2000; ++i) pairs.push_back({random_features(gen, 12), random_features(gen, 12)});
  EXPECT_NEAR(aps::pairwise_accuracy(model, pairs), 0.5, 0.1);
  EXPECT_DOUBLE_EQ(aps::pairwise_accuracy(ScoringModel(12, 4), pairs), 0.5);  // all ties
}

TEST(Featurizer, LayoutAndCaching) {
  auto cache = hash_cache(16);
  const aps::Featurizer f(cache);
  const aps::QAExample ex{"e", "How many apples?", "", "", "3", aps::AnswerType::FreeFormNumeric, aps::Split::Train};
  const aps::Prompt p{"p0", "Count carefully.", 0};
  const auto a = f.featurize(ex, p);
  const auto b = f.featurize(ex, p);
  EXPECT_EQ(a, b);
  EXPECT_EQ(a.size(), 64u);
  EXPECT_EQ(cache->provider_calls(), 2u);  // one input text, one prompt text
  EXPECT_NE(a, f.featurize(ex, {"p1", "Count twice.", 0}));
  for (std::size_t i = 0; i < 16; ++i) {
    EXPECT_DOUBLE_EQ(a.values[32 + i], a.values[i] * a.values[16 + i]);
    EXPECT_DOUBLE_EQ(a.values[48 + i], std::abs(a.values[i] - a.values[16 + i]));
  }
  EXPECT_EQ(aps::Featurizer::input_text(ex), "How many apples?");
}

TEST(Checkpoint, RoundTripIsExact) {
  std::mt19937_64 gen(12);
  std::vector<TrainingPair> pairs;
  for (int i = 0; i < 20; ++i) pairs.push_back({random_features(gen, 10), random_features(gen, 10)});
  aps::TrainConfig cfg;
  cfg.epochs = 3;
  const auto ckpt = aps::train(pairs, cfg, 2, "recipe-x");
  const auto body = aps::encode_artifact(ckpt);
  const auto path = std::filesystem::temp_directory_path() / "aps-ckpt-roundtrip.jsonl";
  aps::store_artifact(ckpt, path);
  EXPECT_EQ(aps::load_artifact<aps::Checkpoint>(path).value, ckpt);
  std::filesystem::remove(path);
}
