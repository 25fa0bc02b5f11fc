#pragma once

#include <string_view>

namespace aps::templates {

// Bump kMetaPromptVersion whenever the wording below changes; it is folded
// into the prompt-database fingerprint so downstream artifacts go stale.
inline constexpr std::string_view kMetaPromptVersion = "meta-v1";

inline constexpr std::string_view kMetaPreamble =
    "Below are example problems from one group of similar questions, each with its question (Q), "
    "context (C) and correct answer (A).\n\n";

inline constexpr std::string_view kDemoQuestion = "Q: ";
inline constexpr std::string_view kDemoContext = "C: ";
inline constexpr std::string_view kDemoAnswer = "A: ";

// {n} is replaced by the number of prompts requested.
inline constexpr std::string_view kMetaInstruction =
    "Write exactly {n} different instructions that would guide a language model to solve problems like "
    "these correctly. Each instruction must stand on its own. Return them as a numbered list with one "
    "instruction per line and nothing else.";

}  // namespace aps::templates
