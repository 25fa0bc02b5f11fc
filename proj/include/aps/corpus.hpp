#pragma once

#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "aps/answer.hpp"
#include "aps/hash.hpp"
#include "aps/text.hpp"
#include "aps/types.hpp"

namespace aps {

namespace detail {

inline std::string string_field(const nlohmann::json& record, const char* name, bool required, std::size_t line) {
  const auto it = record.find(name);
  if (it == record.end() || it->is_null()) {
    if (required) throw Error(ErrorKind::Parse, "line " + std::to_string(line) + ": missing field '" + name + "'");
    return {};
  }
  if (it->is_string()) return it->get<std::string>();
  if (it->is_number()) return it->dump();
  throw Error(ErrorKind::Parse, "line " + std::to_string(line) + ": field '" + name + "' has the wrong type");
}

inline QAExample parse_record(const nlohmann::json& record, DatasetFormat format, Split split, std::size_t index,
                              std::size_t line) {
  if (!record.is_object()) throw Error(ErrorKind::Parse, "line " + std::to_string(line) + ": record is not an object");
  QAExample ex;
  ex.split = split;
  ex.id = string_field(record, "id", false, line);
  if (ex.id.empty())
    ex.id = std::string(to_string(format)) + "-" + std::string(to_string(split)) + "-" + text::zero_pad(index, 5);
  ex.question = string_field(record, "question", true, line);

  if (format == DatasetFormat::AQuA) {
    ex.answer_type = AnswerType::MultipleChoice;
    const auto options = record.find("options");
    if (options == record.end() || !options->is_array() || options->empty())
      throw Error(ErrorKind::Parse, "line " + std::to_string(line) + ": AQuA record needs a non-empty 'options' list");
    for (const auto& opt : *options) {
      if (!opt.is_string()) throw Error(ErrorKind::Parse, "line " + std::to_string(line) + ": option is not a string");
      if (!ex.context.empty()) ex.context += ' ';
      ex.context += opt.get<std::string>();
    }
    ex.rationale = string_field(record, "rationale", false, line);
    const std::string correct{text::trim(string_field(record, "correct", true, line))};
    if (correct.size() != 1 || !detail::is_option_letter(correct[0]))
      throw Error(ErrorKind::Parse, "line " + std::to_string(line) + ": 'correct' must be a single option letter");
    ex.gold_answer = std::string(1, static_cast<char>(std::toupper(static_cast<unsigned char>(correct[0]))));
  } else {
    ex.answer_type = AnswerType::FreeFormNumeric;
    ex.context = string_field(record, "context", false, line);
    const Answer gold = canonical_answer(string_field(record, "answer", true, line), AnswerType::FreeFormNumeric);
    if (!gold) throw Error(ErrorKind::Parse, "line " + std::to_string(line) + ": answer holds no number");
    ex.gold_answer = *gold;
  }
  return ex;
}

}  // namespace detail

/// Reads a line-delimited corpus file. Blank lines are skipped; record order
/// is preserved. GSM8K and MultiArith records carry {question, answer};
/// AQuA records carry {question, options, rationale, correct}. An optional
/// "id" field overrides the positional identifier.
inline std::vector<QAExample> load_corpus(const std::filesystem::path& path, DatasetFormat format,
                                          Split split = Split::Train) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open corpus " + path.string());
  std::vector<QAExample> examples;
  std::set<std::string> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    nlohmann::json record;
    try {
      record = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw Error(ErrorKind::Parse, path.string() + " line " + std::to_string(line_no) + ": " + e.what());
    }
    QAExample ex = detail::parse_record(record, format, split, examples.size(), line_no);
    if (!seen.insert(ex.id).second)
      throw Error(ErrorKind::Parse, "line " + std::to_string(line_no) + ": duplicate id '" + ex.id + "'");
    examples.push_back(std::move(ex));
  }
  return examples;
}

inline std::vector<QAExample> load_corpus(const std::filesystem::path& path, std::string_view format_tag,
                                          Split split = Split::Train) {
  return load_corpus(path, parse_format(format_tag), split);
}

// GSM8K-shaped record for free-form examples, AQuA-shaped otherwise.
inline nlohmann::ordered_json to_corpus_record(const QAExample& ex) {
  nlohmann::ordered_json record;
  record["id"] = ex.id;
  record["question"] = ex.question;
  if (ex.answer_type == AnswerType::MultipleChoice) {
    nlohmann::ordered_json options = nlohmann::ordered_json::array();
    std::size_t start = 0;
    while (start < ex.context.size()) {
      std::size_t next = ex.context.find(' ', start);
      // Options are "A)..." tokens; a space followed by a new letter+')' starts the next one.
      while (next != std::string::npos && !(next + 2 < ex.context.size() && ex.context[next + 2] == ')'))
        next = ex.context.find(' ', next + 1);
      options.push_back(ex.context.substr(start, next == std::string::npos ? std::string::npos : next - start));
      if (next == std::string::npos) break;
      start = next + 1;
    }
    record["options"] = options;
    record["rationale"] = ex.rationale;
    record["correct"] = ex.gold_answer;
  } else {
    if (!ex.context.empty()) record["context"] = ex.context;
    record["answer"] = ex.rationale.empty() ? "#### " + ex.gold_answer : ex.rationale + "\n#### " + ex.gold_answer;
  }
  return record;
}

inline void write_corpus(const std::filesystem::path& path, const std::vector<QAExample>& examples) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::Io, "cannot write corpus " + path.string());
  for (const auto& ex : examples) out << to_corpus_record(ex).dump() << '\n';
  if (!out) throw Error(ErrorKind::Io, "write failed for " + path.string());
}

inline std::string corpus_fingerprint(const std::vector<QAExample>& examples) {
  Fnv1a h;
  for (const auto& ex : examples) {
    h.field(ex.id).field(ex.question).field(ex.context).field(ex.rationale).field(ex.gold_answer);
    h.field(to_string(ex.answer_type)).field(to_string(ex.split));
  }
  return to_hex(h.digest());
}

}  // namespace aps
