#pragma once

#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "aps/hash.hpp"
#include "aps/types.hpp"

namespace aps {

using ojson = nlohmann::ordered_json;

inline constexpr int kArtifactVersion = 1;

// Identity of a stored artifact: its own fingerprint and the fingerprint of
// the artifact it was derived from.
struct ArtifactStamp {
  std::string fingerprint;
  std::string parent;

  friend bool operator==(const ArtifactStamp&, const ArtifactStamp&) = default;
};

template <typename T>
struct Loaded {
  T value;
  ArtifactStamp stamp;
};

// Specialise per artifact type:
//   static constexpr std::string_view kind;
//   static ojson meta(const T&);
//   static std::vector<ojson> records(const T&);
//   static T decode(const ojson& meta, const std::vector<ojson>& records);
template <typename T>
struct ArtifactCodec;

namespace detail {

inline std::string checksum(const std::vector<std::string>& lines) {
  Fnv1a h;
  for (const auto& line : lines) h.update(line).update("\n");
  return to_hex(h.digest());
}

// Writes to a sibling temp file and renames over the target.
inline void write_atomically(const std::filesystem::path& path, const std::string& body) {
  const auto parent = path.parent_path();
  if (!parent.empty() && !std::filesystem::is_directory(parent))
    throw Error(ErrorKind::Io, "directory does not exist for " + path.string());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::Io, "cannot open " + tmp.string() + " for writing");
    out << body;
    out.flush();
    if (!out) throw Error(ErrorKind::Io, "write failed for " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw Error(ErrorKind::Io, "cannot rename " + tmp.string() + " to " + path.string() + ": " + ec.message());
}

}  // namespace detail

template <typename T>
std::string encode_artifact(const T& value, const ArtifactStamp& stamp = {}) {
  using Codec = ArtifactCodec<T>;
  std::vector<std::string> lines;
  for (const auto& record : Codec::records(value)) lines.push_back(record.dump());
  ojson header;
  header["artifact"] = std::string(Codec::kind);
  header["version"] = kArtifactVersion;
  header["fingerprint"] = stamp.fingerprint;
  header["parent"] = stamp.parent;
  header["records"] = lines.size();
  header["checksum"] = detail::checksum(lines);
  header["meta"] = Codec::meta(value);
  std::string body = header.dump() + "\n";
  for (const auto& line : lines) body += line + "\n";
  return body;
}

template <typename T>
void store_artifact(const T& value, const std::filesystem::path& path, const ArtifactStamp& stamp = {}) {
  detail::write_atomically(path, encode_artifact(value, stamp));
}

/// Loads an artifact written by store_artifact. Any header, count or checksum
/// inconsistency (including truncation) is a stale-artifact error, as is a
/// fingerprint that differs from `expected_fingerprint` when one is given.
template <typename T>
Loaded<T> load_artifact(const std::filesystem::path& path,
                        const std::optional<std::string>& expected_fingerprint = std::nullopt) {
  using Codec = ArtifactCodec<T>;
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open artifact " + path.string());
  const auto stale = [&](const std::string& why) {
    return Error(ErrorKind::StaleArtifact, path.string() + ": " + why);
  };

  std::string line;
  if (!std::getline(in, line)) throw stale("empty file");
  ojson header;
  try {
    header = ojson::parse(line);
  } catch (const ojson::parse_error&) {
    throw stale("unreadable header");
  }
  if (!header.is_object() || header.value("artifact", "") != Codec::kind)
    throw stale("expected a '" + std::string(Codec::kind) + "' artifact");
  if (header.value("version", -1) != kArtifactVersion) throw stale("artifact format version mismatch");

  ArtifactStamp stamp{header.value("fingerprint", ""), header.value("parent", "")};
  if (expected_fingerprint && *expected_fingerprint != stamp.fingerprint)
    throw stale("fingerprint " + stamp.fingerprint + " does not match expected " + *expected_fingerprint);

  std::vector<std::string> lines;
  bool last_line_terminated = true;
  while (std::getline(in, line)) {
    last_line_terminated = !in.eof();
    lines.push_back(line);
  }
  if (!last_line_terminated) throw stale("truncated record");
  if (lines.size() != header.value("records", std::size_t{0})) throw stale("record count mismatch (truncated?)");
  if (detail::checksum(lines) != header.value("checksum", "")) throw stale("checksum mismatch");

  std::vector<ojson> records;
  records.reserve(lines.size());
  try {
    for (const auto& l : lines) records.push_back(ojson::parse(l));
    return Loaded<T>{Codec::decode(header["meta"], records), std::move(stamp)};
  } catch (const ojson::exception& e) {
    throw stale(std::string("malformed record: ") + e.what());
  }
}

// Reads only the stamp, for fingerprint-chain checks.
inline ArtifactStamp peek_stamp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open artifact " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorKind::StaleArtifact, path.string() + ": empty file");
  try {
    const auto header = ojson::parse(line);
    return {header.value("fingerprint", ""), header.value("parent", "")};
  } catch (const ojson::exception&) {
    throw Error(ErrorKind::StaleArtifact, path.string() + ": unreadable header");
  }
}

// ---------------------------------------------------------------------------
// Codecs for the shared domain values.

template <>
struct ArtifactCodec<std::vector<QAExample>> {
  static constexpr std::string_view kind = "examples";
  static ojson meta(const std::vector<QAExample>&) { return ojson::object(); }
  static std::vector<ojson> records(const std::vector<QAExample>& xs) {
    std::vector<ojson> out;
    for (const auto& x : xs) {
      ojson r;
      r["id"] = x.id;
      r["question"] = x.question;
      r["context"] = x.context;
      r["rationale"] = x.rationale;
      r["gold_answer"] = x.gold_answer;
      r["answer_type"] = std::string(to_string(x.answer_type));
      r["split"] = std::string(to_string(x.split));
      out.push_back(std::move(r));
    }
    return out;
  }
  static std::vector<QAExample> decode(const ojson&, const std::vector<ojson>& rs) {
    std::vector<QAExample> out;
    for (const auto& r : rs) {
      out.push_back({r.at("id").get<std::string>(), r.at("question").get<std::string>(),
                     r.at("context").get<std::string>(), r.at("rationale").get<std::string>(),
                     r.at("gold_answer").get<std::string>(), parse_answer_type(r.at("answer_type").get<std::string>()),
                     parse_split(r.at("split").get<std::string>())});
    }
    return out;
  }
};

template <>
struct ArtifactCodec<PromptDatabase> {
  static constexpr std::string_view kind = "prompt-database";
  static ojson meta(const PromptDatabase& db) {
    ojson m;
    m["config_fingerprint"] = db.config_fingerprint;
    return m;
  }
  static std::vector<ojson> records(const PromptDatabase& db) {
    std::vector<ojson> out;
    for (const auto& p : db.prompts) {
      ojson r;
      r["id"] = p.id;
      r["text"] = p.text;
      if (p.origin_cluster == kNoCluster)
        r["origin_cluster"] = "none";
      else
        r["origin_cluster"] = p.origin_cluster;
      out.push_back(std::move(r));
    }
    return out;
  }
  static PromptDatabase decode(const ojson& meta, const std::vector<ojson>& rs) {
    PromptDatabase db;
    db.config_fingerprint = meta.at("config_fingerprint").get<std::string>();
    for (const auto& r : rs) {
      const auto& origin = r.at("origin_cluster");
      db.prompts.push_back({r.at("id").get<std::string>(), r.at("text").get<std::string>(),
                            origin.is_string() ? kNoCluster : origin.get<int>()});
    }
    return db;
  }
};

template <>
struct ArtifactCodec<std::vector<PreferenceTuple>> {
  static constexpr std::string_view kind = "preference-dataset";
  static ojson meta(const std::vector<PreferenceTuple>&) { return ojson::object(); }
  static std::vector<ojson> records(const std::vector<PreferenceTuple>& ts) {
    std::vector<ojson> out;
    for (const auto& t : ts) {
      ojson r;
      r["example_id"] = t.example_id;
      r["good_prompt_id"] = t.good_prompt_id;
      r["bad_prompt_id"] = t.bad_prompt_id;
      r["good_fitness"] = t.good_fitness;
      r["bad_fitness"] = t.bad_fitness;
      r["lambda"] = t.lambda;
      out.push_back(std::move(r));
    }
    return out;
  }
  static std::vector<PreferenceTuple> decode(const ojson&, const std::vector<ojson>& rs) {
    std::vector<PreferenceTuple> out;
    out.reserve(rs.size());
    for (const auto& r : rs) {
      out.push_back({r.at("example_id").get<std::string>(), r.at("good_prompt_id").get<std::string>(),
                     r.at("bad_prompt_id").get<std::string>(), r.at("good_fitness").get<double>(),
                     r.at("bad_fitness").get<double>(), r.at("lambda").get<double>()});
    }
    return out;
  }
};

}  // namespace aps
