#include <gtest/gtest.h>

#include "aps/artifact.hpp"
#include "test_util.hpp"

using aps::ErrorKind;
using aps::testing::TempDir;

namespace {

aps::PromptDatabase sample_db() {
  aps::PromptDatabase db;
  db.prompts = {{"p000", "Solve it carefully.", 0}, {"p001", "Think about percentages.", aps::kNoCluster}};
  db.config_fingerprint = "abc";
  return db;
}

ErrorKind load_kind(const std::filesystem::path& p, std::optional<std::string> fp = std::nullopt) {
  try {
    aps::load_artifact<aps::PromptDatabase>(p, fp);
  } catch (const aps::Error& e) {
    return e.kind();
  }
  return ErrorKind::Harness;
}

}  // namespace

TEST(Artifact, RoundTripKeepsValueAndStamp) {
  TempDir dir;
  const auto db = sample_db();
  aps::store_artifact(db, dir / "db.jsonl", {"fp1", "parent0"});
  const auto loaded = aps::load_artifact<aps::PromptDatabase>(dir / "db.jsonl", std::string("fp1"));
  EXPECT_EQ(loaded.value, db);
  EXPECT_EQ(loaded.stamp, (aps::ArtifactStamp{"fp1", "parent0"}));
  EXPECT_EQ(aps::peek_stamp(dir / "db.jsonl").parent, "parent0");
}

TEST(Artifact, EncodingIsDeterministic) {
  EXPECT_EQ(aps::encode_artifact(sample_db(), {"f", "p"}), aps::encode_artifact(sample_db(), {"f", "p"}));
}

TEST(Artifact, TruncationIsStale) {
  TempDir dir;
  aps::store_artifact(sample_db(), dir / "db.jsonl", {"fp1", ""});
  const auto body = aps::testing::read_file(dir / "db.jsonl");
  for (std::size_t cut : {body.size() - 1, body.size() - 10, body.find('\n') + 1, std::size_t{5}}) {
    aps::testing::write_file(dir / "cut.jsonl", body.substr(0, cut));
    EXPECT_EQ(load_kind(dir / "cut.jsonl"), ErrorKind::StaleArtifact) << "cut at " << cut;
  }
  aps::testing::write_file(dir / "empty.jsonl", "");
  EXPECT_EQ(load_kind(dir / "empty.jsonl"), ErrorKind::StaleArtifact);
}

TEST(Artifact, EditedRecordFailsChecksum) {
  TempDir dir;
  aps::store_artifact(sample_db(), dir / "db.jsonl", {"fp1", ""});
  auto body = aps::testing::read_file(dir / "db.jsonl");
  body.replace(body.find("carefully"), 9, "CAREFULLY");
  aps::testing::write_file(dir / "db.jsonl", body);
  EXPECT_EQ(load_kind(dir / "db.jsonl"), ErrorKind::StaleArtifact);
}

TEST(Artifact, FingerprintMismatchAndWrongKindAreStale) {
  TempDir dir;
  aps::store_artifact(sample_db(), dir / "db.jsonl", {"fp1", ""});
  EXPECT_EQ(load_kind(dir / "db.jsonl", "other"), ErrorKind::StaleArtifact);
  aps::store_artifact(std::vector<aps::PreferenceTuple>{{"x", "p0", "p1", 1.0, 0.0, 0.5}}, dir / "t.jsonl");
  EXPECT_EQ(load_kind(dir / "t.jsonl"), ErrorKind::StaleArtifact);
  EXPECT_EQ(load_kind(dir / "absent.jsonl"), ErrorKind::Io);
}

TEST(Artifact, MissingParentDirectoryIsIoError) {
  TempDir dir;
  try {
    aps::store_artifact(sample_db(), dir / "nope" / "db.jsonl");
    FAIL();
  } catch (const aps::Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Io);
  }
}

TEST(Artifact, ExamplesAndTuplesRoundTrip) {
  TempDir dir;
  std::vector<aps::QAExample> xs{{"a", "q?", "A)1 B)2", "why", "B", aps::AnswerType::MultipleChoice, aps::Split::Test}};
  aps::store_artifact(xs, dir / "x.jsonl");
  EXPECT_EQ(aps::load_artifact<std::vector<aps::QAExample>>(dir / "x.jsonl").value, xs);
  std::vector<aps::PreferenceTuple> ts{{"a", "p0", "p1", 1.0, 0.0, 0.5}, {"b", "p2", "p1", 1.0, 0.0, 0.25}};
  aps::store_artifact(ts, dir / "t.jsonl");
  EXPECT_EQ(aps::load_artifact<std::vector<aps::PreferenceTuple>>(dir / "t.jsonl").value, ts);
}
