#include "divr/simulated.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <vector>

#include <nlohmann/json.hpp>

namespace divr {

namespace {

constexpr std::array<std::string_view, 24> kRolePool = {
    "Emergency room doctor", "Police officer",      "Accident analyst",      "Critic",
    "Psychological counselor", "Fashion blogger",   "Marathon runner",       "Exercise physiologist",
    "Show director",         "Enthusiastic fan",    "Wildlife protector",    "Comedy researcher",
    "Color psychologist",    "Early childhood educator", "Sports psychologist", "Golf commentator",
    "Parent",                "Student",             "Employer",              "Economist",
    "Ethicist",              "Historian",           "Local resident",        "Policy maker",
};

constexpr std::array<std::string_view, 28> kSentencePool = {
    "Let me look at the question carefully.",
    "The context gives a few hints about who is involved.",
    "From this point of view the stakes are different.",
    "Is there any evidence that points one way or the other?",
    "Someone in this position would care about safety first.",
    "Costs and benefits do not fall on everyone equally.",
    "I should not assume more than the text actually says.",
    "What would a reasonable person expect here?",
    "Experience suggests that first impressions can mislead.",
    "The wording of the options matters.",
    "One option seems to follow directly from the premise.",
    "Another reading is possible, though less likely.",
    "People with different backgrounds weigh this differently!",
    "That tension is worth keeping in mind.",
    "Long term effects might outweigh short term convenience.",
    "Hmm, the question hinges on a single detail.",
    "Could the answer simply be undetermined?",
    "A cautious reader would check each option in turn.",
    "The most natural interpretation favors one choice.",
    "Social norms shape how this situation is judged.",
    "There is no clear reason to reject the obvious reading.",
    "Still, a skeptic would ask for stronger support.",
    "Practical constraints limit what anyone can do.",
    "So the balance of considerations is fairly clear.",
    "Each perspective adds something the others miss.",
    "Why would anyone choose otherwise?",
    "Fairness requires looking at all sides.",
    "In short, the evidence leans in one direction.",
};

enum class Format { Letter, Paren, Word, Bare };

bool contains(std::string_view hay, std::string_view needle) { return hay.find(needle) != std::string_view::npos; }

Format detect_format(std::string_view prompt) {
    if (contains(prompt, "**Yes**")) return Format::Word;
    if (contains(prompt, "**(X)")) return Format::Paren;
    if (contains(prompt, "**X.")) return Format::Letter;
    return Format::Bare;
}

std::vector<std::string> detect_letters(std::string_view prompt) {
    std::vector<std::string> letters;
    // Explicit choices: where X is "a", "b", or "c".
    if (const auto at = prompt.find("where X is "); at != std::string_view::npos) {
        auto rest = prompt.substr(at);
        rest = rest.substr(0, rest.find('\n'));
        std::size_t pos = 0;
        while (true) {
            const auto open = rest.find('"', pos);
            if (open == std::string_view::npos) break;
            const auto close = rest.find('"', open + 1);
            if (close == std::string_view::npos) break;
            letters.emplace_back(rest.substr(open + 1, close - open - 1));
            pos = close + 1;
        }
        if (!letters.empty()) return letters;
    }
    for (char c = 'A'; c <= 'J'; ++c) {
        const std::string marker = std::string("(") + c + ")";
        if (contains(prompt, marker)) letters.emplace_back(1, c);
    }
    if (letters.size() < 2) letters = {"A", "B", "C"};
    return letters;
}

std::string format_answer(Format f, const std::string& token) {
    switch (f) {
        case Format::Letter: return "**" + token + ". choice**";
        case Format::Paren: return "**(" + token + ") choice**";
        case Format::Word:
        case Format::Bare: return "**" + token + "**";
    }
    return "**" + token + "**";
}

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n.");
    return std::string(s.substr(b, e - b + 1));
}

/// Roles listed after "following roles:" up to the end of that line.
std::vector<std::string> listed_roles(std::string_view prompt) {
    static constexpr std::string_view kMarker = "following roles:";
    const auto at = prompt.find(kMarker);
    if (at == std::string_view::npos) return {};
    auto rest = prompt.substr(at + kMarker.size());
    rest = rest.substr(0, rest.find('\n'));
    std::vector<std::string> out;
    std::size_t pos = 0;
    while (pos <= rest.size()) {
        const auto comma = rest.find(',', pos);
        auto item = trim(rest.substr(pos, comma == std::string_view::npos ? std::string_view::npos : comma - pos));
        if (!item.empty()) out.push_back(std::move(item));
        if (comma == std::string_view::npos) break;
        pos = comma + 1;
    }
    return out;
}

}  // namespace

std::uint64_t fnv1a64(std::string_view data, std::uint64_t seed) noexcept {
    std::uint64_t h = seed;
    for (unsigned char c : data) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::vector<double> SimulatedTransport::embed_text(std::string_view text) {
    std::vector<double> v(kEmbeddingDim, 0.0);
    std::string word;
    auto flush = [&] {
        if (word.empty()) return;
        const auto h = fnv1a64(word);
        v[h % kEmbeddingDim] += (h >> 63) ? -1.0 : 1.0;
        word.clear();
    };
    for (char c : text) {
        if (std::isalnum(static_cast<unsigned char>(c))) word.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
        else flush();
    }
    flush();
    double norm = 0.0;
    for (double x : v) norm += x * x;
    if (norm == 0.0) {
        v[0] = 1.0;
        return v;
    }
    norm = std::sqrt(norm);
    for (double& x : v) x /= norm;
    return v;
}

std::string SimulatedTransport::chat(const std::string& prompt, const std::string& prefix, std::uint64_t seed) const {
    const auto h_prompt = fnv1a64(prompt);

    if (contains(prompt, "role perspective")) {
        // Only the question after the final "Input:" decides the roles.
        const auto at = prompt.rfind("Input:");
        const auto h = fnv1a64(at == std::string::npos ? std::string_view(prompt) : std::string_view(prompt).substr(at));
        const std::size_t count = 2 + h % 3;
        std::vector<std::string_view> chosen;
        std::uint64_t state = h;
        while (chosen.size() < count) {
            state = fnv1a64("next", state);
            const auto role = kRolePool[state % kRolePool.size()];
            if (std::find(chosen.begin(), chosen.end(), role) == chosen.end()) chosen.push_back(role);
        }
        std::string out = "[";
        for (std::size_t i = 0; i < chosen.size(); ++i) out += (i ? ", " : "") + std::string(chosen[i]);
        return out + "]";
    }

    std::uint64_t state = fnv1a64(prefix, fnv1a64(std::to_string(seed), h_prompt));
    auto next = [&state] {
        state = fnv1a64("step", state);
        return state;
    };
    std::string text;
    const std::size_t sentences = 2 + next() % 3;
    for (std::size_t i = 0; i < sentences; ++i) {
        if (!text.empty()) text += ' ';
        text += kSentencePool[next() % kSentencePool.size()];
    }
    text += "\n" + end_think_ + "\n\n";

    const auto fmt = detect_format(prompt);
    const std::vector<std::string> alphabet =
        fmt == Format::Word ? std::vector<std::string>{"Yes", "No"} : detect_letters(prompt);
    auto pick = [&](std::string_view salt) {
        // Mostly the prompt's preferred answer; about 30% of samples deviate.
        const auto preferred = fnv1a64(salt, h_prompt) % alphabet.size();
        const auto roll = next();
        return alphabet[(roll % 10) < 3 ? (roll / 10) % alphabet.size() : preferred];
    };

    const auto roles = listed_roles(prompt);
    if (contains(prompt, "one answer per role") && !roles.empty()) {
        text += "Answers by role:\n";
        for (const auto& role : roles) text += role + ": " + format_answer(fmt, pick(role)) + "\n";
        return text;
    }
    text += "Final answer: " + format_answer(fmt, pick("answer"));
    return text;
}

HttpResponse SimulatedTransport::post(const std::string& path, const std::string& body, const Headers&) {
    const auto request = nlohmann::json::parse(body, nullptr, false);
    if (request.is_discarded() || !request.is_object()) return {400, R"({"error":{"message":"bad json"}})"};

    if (path == "/embeddings") {
        const auto& input = request.value("input", nlohmann::json::array());
        std::vector<std::vector<double>> vectors;
        if (input.is_string()) vectors.push_back(embed_text(input.get<std::string>()));
        else
            for (const auto& t : input) vectors.push_back(embed_text(t.is_string() ? t.get<std::string>() : t.dump()));
        return embedding_response(vectors);
    }
    if (path == "/chat/completions") {
        std::string prompt, prefix;
        for (const auto& m : request.value("messages", nlohmann::json::array())) {
            const auto role = m.value("role", "");
            if (role == "user") prompt = m.value("content", "");
            else if (role == "assistant") prefix = m.value("content", "");
        }
        const std::uint64_t seed = request.contains("seed") && request["seed"].is_number_unsigned()
                                       ? request["seed"].get<std::uint64_t>()
                                       : 0;
        return chat_response(chat(prompt, prefix, seed));
    }
    return {404, R"({"error":{"message":"unknown path"}})"};
}

}  // namespace divr
