#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "divr/reward.hpp"

namespace divr {

enum class AnswerPattern {
    BoldLetter,  // **X. answer**
    BoldParen,   // **(X) answer**
    BoldWord,    // **Yes** / **No**
    BoldBare,    // **X**
};

struct AnswerFormat {
    AnswerPattern kind = AnswerPattern::BoldLetter;
    std::vector<std::string> alphabet{"A", "B", "C"};

    static AnswerFormat letters(AnswerPattern kind, std::size_t count);
    static AnswerFormat yes_no() { return {AnswerPattern::BoldWord, {"Yes", "No"}}; }

    void validate() const;
    /// Sentence telling a model how to format its answer; the simulated
    /// model and the extractor both key off it.
    std::string instruction() const;
    /// `token` written in this format, e.g. "**B. label**" or "**Yes**".
    /// The label defaults to the token itself.
    std::string marker(const std::string& token, std::string_view label = {}) const;
};

std::string_view to_string(AnswerPattern kind) noexcept;
AnswerPattern parse_answer_pattern(std::string_view s);
nlohmann::json to_json(const AnswerFormat& f);
AnswerFormat answer_format_from_json(const nlohmann::json& j);

/// Last occurrence of the format's pattern after the final end-of-thinking
/// delimiter (the whole text when there is none), normalized to the
/// alphabet's spelling. Matches outside the alphabet are ignored.
std::optional<std::string> extract_answer(std::string_view text, const AnswerFormat& format,
                                          std::string_view end_think = "</think>");

/// Per-role answers for divergent outputs: for each role, the last line of
/// the answer region that names the role (case-insensitive) and carries a
/// marker. Roles without such a line are left out.
RoleAnswers extract_role_answers(std::string_view text, const std::vector<std::string>& roles,
                                 const AnswerFormat& format, std::string_view end_think = "</think>");

}  // namespace divr
