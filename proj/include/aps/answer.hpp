#pragma once

#include <cctype>
#include <string>
#include <string_view>

#include "aps/text.hpp"
#include "aps/types.hpp"

namespace aps {

namespace detail {

// "-001,250.500" -> "-1250.5"; digits only, no exponent.
inline std::string normalize_decimal(bool negative, std::string_view integer_digits, std::string_view fraction) {
  std::string integer;
  for (char ch : integer_digits)
    if (ch != ',') integer.push_back(ch);
  std::size_t lead = 0;
  while (lead + 1 < integer.size() && integer[lead] == '0') ++lead;
  integer.erase(0, lead);
  if (integer.empty()) integer = "0";

  std::string frac(fraction);
  while (!frac.empty() && frac.back() == '0') frac.pop_back();

  std::string out = integer;
  if (!frac.empty()) out += "." + frac;
  if (negative && out != "0") out.insert(0, "-");
  return out;
}

inline Answer last_number(std::string_view raw) {
  Answer found;
  std::size_t i = 0;
  const std::size_t n = raw.size();
  while (i < n) {
    const bool starts_fraction = raw[i] == '.' && i + 1 < n && text::is_digit(raw[i + 1]) &&
                                 (i == 0 || !text::is_digit(raw[i - 1]));
    if (!text::is_digit(raw[i]) && !starts_fraction) {
      ++i;
      continue;
    }
    const bool negative = i > 0 && raw[i - 1] == '-' && (i == 1 || !text::is_alnum(raw[i - 2]));
    const std::size_t int_begin = i;
    while (i < n && (text::is_digit(raw[i]) ||
                     (raw[i] == ',' && i + 1 < n && text::is_digit(raw[i + 1]) && i > int_begin))) {
      ++i;
    }
    const std::string_view integer = raw.substr(int_begin, i - int_begin);
    std::string_view fraction;
    if (i + 1 < n && raw[i] == '.' && text::is_digit(raw[i + 1])) {
      const std::size_t frac_begin = ++i;
      while (i < n && text::is_digit(raw[i])) ++i;
      fraction = raw.substr(frac_begin, i - frac_begin);
    }
    found = normalize_decimal(negative, integer, fraction);
  }
  return found;
}

inline bool is_option_letter(char ch) {
  const char up = static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
  return up >= 'A' && up <= 'E';
}

// Option letter nearest the end of the text in one of the recognised forms:
// "E)", "(E", "answer is E", "answer: E", "option E", or a bare letter.
inline Answer last_option_letter(std::string_view raw) {
  const std::string_view trimmed = text::trim(raw);
  if (trimmed.size() == 1 && is_option_letter(trimmed[0]))
    return std::string(1, static_cast<char>(std::toupper(static_cast<unsigned char>(trimmed[0]))));

  std::size_t best_pos = std::string_view::npos;
  const auto consider = [&](std::size_t pos) {
    if (best_pos == std::string_view::npos || pos > best_pos) best_pos = pos;
  };
  const auto boundary_before = [&](std::size_t pos) { return pos == 0 || !text::is_alnum(raw[pos - 1]); };
  const auto boundary_after = [&](std::size_t pos) { return pos + 1 >= raw.size() || !text::is_alnum(raw[pos + 1]); };

  for (std::size_t i = 0; i < raw.size(); ++i) {
    if (!is_option_letter(raw[i]) || !boundary_before(i)) continue;
    const bool paren_after = i + 1 < raw.size() && raw[i + 1] == ')';
    const bool paren_before = i > 0 && raw[i - 1] == '(' && boundary_after(i);
    if (paren_after || paren_before) consider(i);
  }

  static constexpr std::string_view kCues[] = {"answer is", "answer:", "option", "choice"};
  const std::string folded = text::lower(raw);
  for (std::string_view cue : kCues) {
    for (std::size_t at = folded.find(cue); at != std::string::npos; at = folded.find(cue, at + 1)) {
      std::size_t j = at + cue.size();
      while (j < raw.size() && (text::is_space(raw[j]) || raw[j] == '(' || raw[j] == ':')) ++j;
      if (j < raw.size() && is_option_letter(raw[j]) && boundary_after(j)) consider(j);
    }
  }

  if (best_pos == std::string_view::npos) return std::nullopt;
  return std::string(1, static_cast<char>(std::toupper(static_cast<unsigned char>(raw[best_pos]))));
}

}  // namespace detail

/// Extracts the final answer from model output or a gold field.
///
/// Free-form: the last number in the text with commas, currency symbols and
/// trailing periods dropped and trailing fractional zeros removed.
/// Multiple choice: the last option letter A-E appearing in a recognised form.
/// Returns std::nullopt (NoAnswer) when nothing is found.
inline Answer canonical_answer(std::string_view raw, AnswerType type) {
  return type == AnswerType::FreeFormNumeric ? detail::last_number(raw) : detail::last_option_letter(raw);
}

}  // namespace aps
