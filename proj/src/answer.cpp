#include "divr/answer.hpp"

#include <algorithm>
#include <cctype>

#include "divr/error.hpp"

namespace divr {

namespace {

std::string lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

std::string_view trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::optional<std::string> in_alphabet(std::string_view token, const AnswerFormat& format) {
    const auto t = lower(token);
    for (const auto& a : format.alphabet)
        if (lower(a) == t) return a;
    return std::nullopt;
}

/// Parses the inside of one **...** span.
std::optional<std::string> parse_span(std::string_view content, const AnswerFormat& format) {
    content = trim(content);
    if (content.empty()) return std::nullopt;
    switch (format.kind) {
        case AnswerPattern::BoldLetter: {
            const auto dot = content.find('.');
            if (dot == std::string_view::npos || dot == 0) return std::nullopt;
            if (dot + 1 < content.size() && !std::isspace(static_cast<unsigned char>(content[dot + 1])))
                return std::nullopt;
            return in_alphabet(trim(content.substr(0, dot)), format);
        }
        case AnswerPattern::BoldParen: {
            if (content.front() != '(') return std::nullopt;
            const auto close = content.find(')');
            if (close == std::string_view::npos) return std::nullopt;
            return in_alphabet(trim(content.substr(1, close - 1)), format);
        }
        case AnswerPattern::BoldWord:
        case AnswerPattern::BoldBare: {
            while (!content.empty() && (content.back() == '.' || content.back() == '!' || content.back() == ','))
                content.remove_suffix(1);
            return in_alphabet(trim(content), format);
        }
    }
    return std::nullopt;
}

std::string_view answer_region(std::string_view text, std::string_view end_think) {
    if (end_think.empty()) return text;
    const auto at = text.rfind(end_think);
    return at == std::string_view::npos ? text : text.substr(at + end_think.size());
}

std::optional<std::string> last_marker(std::string_view region, const AnswerFormat& format) {
    std::optional<std::string> found;
    std::size_t pos = 0;
    while (true) {
        const auto open = region.find("**", pos);
        if (open == std::string_view::npos) break;
        const auto close = region.find("**", open + 2);
        if (close == std::string_view::npos) break;
        if (auto hit = parse_span(region.substr(open + 2, close - open - 2), format)) found = std::move(hit);
        pos = close + 2;
    }
    return found;
}

}  // namespace

AnswerFormat AnswerFormat::letters(AnswerPattern kind, std::size_t count) {
    if (count == 0 || count > 26) fail(ErrorKind::InvalidParameter, "letter alphabet size must be 1..26");
    AnswerFormat f;
    f.kind = kind;
    f.alphabet.clear();
    for (std::size_t i = 0; i < count; ++i) f.alphabet.emplace_back(1, static_cast<char>('A' + i));
    return f;
}

void AnswerFormat::validate() const {
    if (alphabet.empty()) fail(ErrorKind::InvalidParameter, "answer alphabet is empty");
    for (const auto& a : alphabet)
        if (a.empty() || a.find("**") != std::string::npos) fail(ErrorKind::InvalidParameter, "bad alphabet entry");
}

std::string AnswerFormat::instruction() const {
    std::string choices;
    for (std::size_t i = 0; i < alphabet.size(); ++i) {
        if (i) choices += (i + 1 == alphabet.size()) ? ", or " : ", ";
        choices += "\"" + alphabet[i] + "\"";
    }
    switch (kind) {
        case AnswerPattern::BoldLetter: return "Your answer should be in the format **X. answer** where X is " + choices + ".";
        case AnswerPattern::BoldParen: return "Your answer should be in the format **(X) answer** where X is " + choices + ".";
        case AnswerPattern::BoldWord: {
            std::string words;
            for (std::size_t i = 0; i < alphabet.size(); ++i) {
                if (i) words += (i + 1 == alphabet.size()) ? " or " : ", ";
                words += "**" + alphabet[i] + "**";
            }
            return "Please answer with " + words + ".";
        }
        case AnswerPattern::BoldBare: return "Format your answer as **X** where X is " + choices + ".";
    }
    return {};
}

std::string AnswerFormat::marker(const std::string& token, std::string_view label) const {
    const std::string text = label.empty() ? token : std::string(label);
    switch (kind) {
        case AnswerPattern::BoldLetter: return "**" + token + ". " + text + "**";
        case AnswerPattern::BoldParen: return "**(" + token + ") " + text + "**";
        case AnswerPattern::BoldWord:
        case AnswerPattern::BoldBare: return "**" + token + "**";
    }
    return "**" + token + "**";
}

std::string_view to_string(AnswerPattern kind) noexcept {
    switch (kind) {
        case AnswerPattern::BoldLetter: return "bold_letter";
        case AnswerPattern::BoldParen: return "bold_paren";
        case AnswerPattern::BoldWord: return "bold_word";
        case AnswerPattern::BoldBare: return "bold_bare";
    }
    return "bold_letter";
}

AnswerPattern parse_answer_pattern(std::string_view s) {
    if (s == "bold_letter") return AnswerPattern::BoldLetter;
    if (s == "bold_paren") return AnswerPattern::BoldParen;
    if (s == "bold_word") return AnswerPattern::BoldWord;
    if (s == "bold_bare") return AnswerPattern::BoldBare;
    fail(ErrorKind::ParseError, "unknown answer format '" + std::string(s) + "'");
}

nlohmann::json to_json(const AnswerFormat& f) {
    return {{"kind", std::string(to_string(f.kind))}, {"alphabet", f.alphabet}};
}

AnswerFormat answer_format_from_json(const nlohmann::json& j) {
    if (!j.is_object()) fail(ErrorKind::ParseError, "answer_format must be an object");
    AnswerFormat f;
    try {
        f.kind = parse_answer_pattern(j.value("kind", std::string("bold_letter")));
        if (j.contains("alphabet")) f.alphabet = j["alphabet"].get<std::vector<std::string>>();
        else if (f.kind == AnswerPattern::BoldWord) f.alphabet = {"Yes", "No"};
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::ParseError, std::string("answer_format: ") + e.what());
    }
    f.validate();
    return f;
}

std::optional<std::string> extract_answer(std::string_view text, const AnswerFormat& format, std::string_view end_think) {
    return last_marker(answer_region(text, end_think), format);
}

RoleAnswers extract_role_answers(std::string_view text, const std::vector<std::string>& roles,
                                 const AnswerFormat& format, std::string_view end_think) {
    const auto region = answer_region(text, end_think);
    std::vector<std::string_view> lines;
    std::size_t pos = 0;
    while (pos <= region.size()) {
        const auto nl = region.find('\n', pos);
        lines.push_back(region.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos));
        if (nl == std::string_view::npos) break;
        pos = nl + 1;
    }

    RoleAnswers out;
    for (const auto& role : roles) {
        const auto needle = lower(role);
        std::optional<std::string> found;
        for (const auto line : lines) {
            const auto l = lower(line);
            const auto at = l.find(needle);
            if (at == std::string::npos) continue;
            if (auto hit = last_marker(line, format)) {
                found = std::move(hit);
                continue;
            }
            // Plain "role: X" lines.
            const auto colon = line.find(':', at + needle.size());
            if (colon == std::string_view::npos) continue;
            auto rest = trim(line.substr(colon + 1));
            while (!rest.empty() && (rest.back() == '.' || rest.back() == ',')) rest.remove_suffix(1);
            if (auto hit = in_alphabet(rest, format)) found = std::move(hit);
        }
        if (found) out.emplace_back(role, std::move(*found));
    }
    return out;
}

}  // namespace divr
