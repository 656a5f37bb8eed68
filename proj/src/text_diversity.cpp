#include "divr/text_diversity.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>
#include <unordered_map>

#include "divr/error.hpp"
#include "utf8.hpp"

namespace divr {

namespace detail {
extern const std::string_view kBuiltinFunctionWords;
}

namespace {

constexpr double kWeightSumTolerance = 1e-9;

bool is_terminal(std::string_view token) noexcept {
    return token == "." || token == "!" || token == "?";
}

// Sum in ascending order so the result depends only on the multiset of values.
double stable_sum(std::vector<double> values) {
    std::sort(values.begin(), values.end());
    double total = 0.0;
    for (double v : values) total += v;
    return total;
}

/// Shannon entropy of a count vector divided by log(number of categories).
/// Zero when there is at most one category.
double normalized_entropy(std::vector<std::size_t> counts, std::size_t categories) {
    if (categories <= 1) return 0.0;
    std::sort(counts.begin(), counts.end());
    const double total = static_cast<double>(std::accumulate(counts.begin(), counts.end(), std::size_t{0}));
    if (total <= 0.0) return 0.0;
    double h = 0.0;
    for (std::size_t c : counts) {
        if (c == 0) continue;
        const double p = static_cast<double>(c) / total;
        h -= p * std::log(p);
    }
    return std::clamp(h / std::log(static_cast<double>(categories)), 0.0, 1.0);
}

std::vector<std::size_t> frequency_counts(const std::vector<std::string>& tokens) {
    std::unordered_map<std::string_view, std::size_t> freq;
    freq.reserve(tokens.size());
    for (const auto& t : tokens) ++freq[t];
    std::vector<std::size_t> counts;
    counts.reserve(freq.size());
    for (const auto& [_, c] : freq) counts.push_back(c);
    std::sort(counts.begin(), counts.end());
    return counts;
}

double sentence_length_diversity(const SentenceSegmentation& seg) {
    const auto n = seg.sentences.size();
    if (n < 2) return 0.0;
    std::vector<double> lengths;
    lengths.reserve(n);
    for (const auto& s : seg.sentences) lengths.push_back(static_cast<double>(s.size()));
    const double mean = stable_sum(lengths) / static_cast<double>(n);
    std::vector<double> sq;
    sq.reserve(n);
    for (double l : lengths) sq.push_back((l - mean) * (l - mean));
    const double sd = std::sqrt(stable_sum(sq) / static_cast<double>(n));
    const double cv = sd / mean;
    return cv / (1.0 + cv);
}

enum class SentenceClass { Declarative, Interrogative, Exclamatory, Fragment };

double sentence_pattern_diversity(const SentenceSegmentation& seg) {
    std::vector<std::size_t> counts(4, 0);
    for (const auto& s : seg.sentences) {
        const auto& last = s.back();
        SentenceClass c = SentenceClass::Fragment;
        if (last == ".") c = SentenceClass::Declarative;
        else if (last == "?") c = SentenceClass::Interrogative;
        else if (last == "!") c = SentenceClass::Exclamatory;
        ++counts[static_cast<std::size_t>(c)];
    }
    const auto observed = std::count_if(counts.begin(), counts.end(), [](auto c) { return c > 0; });
    if (observed <= 1) return 0.0;
    return normalized_entropy(counts, counts.size());
}

double adjacent_sentence_diversity(const SentenceSegmentation& seg) {
    const auto n = seg.sentences.size();
    if (n < 2) return 0.0;
    auto word_set = [](const std::vector<std::string>& s) {
        std::set<std::string_view> out;
        for (const auto& t : s)
            if (is_word_token(t)) out.insert(t);
        return out;
    };
    std::vector<double> distances;
    distances.reserve(n - 1);
    auto prev = word_set(seg.sentences[0]);
    for (std::size_t i = 1; i < n; ++i) {
        auto cur = word_set(seg.sentences[i]);
        std::size_t inter = 0;
        for (const auto& t : cur) inter += prev.count(t);
        const std::size_t uni = prev.size() + cur.size() - inter;
        distances.push_back(uni == 0 ? 0.0 : 1.0 - static_cast<double>(inter) / static_cast<double>(uni));
        prev = std::move(cur);
    }
    return stable_sum(std::move(distances)) / static_cast<double>(n - 1);
}

double yule_diversity(const std::vector<std::size_t>& counts, std::size_t n_tokens) {
    // sum over types of m^2 equals sum_m m^2 V(m)
    double s2 = 0.0;
    for (std::size_t c : counts) s2 += static_cast<double>(c) * static_cast<double>(c);
    const double n = static_cast<double>(n_tokens);
    const double k = 1e4 * (s2 - n) / (n * n);
    return std::clamp(std::exp(-k / 200.0), 0.0, 1.0);
}

double bigram_diversity(const std::vector<std::string>& tokens) {
    if (tokens.size() < 2) return 1.0;
    std::set<std::pair<std::string_view, std::string_view>> distinct;
    for (std::size_t i = 0; i + 1 < tokens.size(); ++i) distinct.emplace(tokens[i], tokens[i + 1]);
    return static_cast<double>(distinct.size()) / static_cast<double>(tokens.size() - 1);
}

double function_word_diversity(const std::vector<std::string>& tokens, const FunctionWordLexicon& lexicon) {
    std::vector<std::string> hits;
    for (const auto& t : tokens)
        if (lexicon.contains(t)) hits.push_back(t);
    auto counts = frequency_counts(hits);
    return normalized_entropy(counts, counts.size());
}

}  // namespace

DiversityWeights DiversityWeights::from_array(const std::array<double, kSubMetricCount>& w) noexcept {
    return {w[0], w[1], w[2], w[3], w[4], w[5], w[6], w[7]};
}

std::array<double, kSubMetricCount> DiversityWeights::as_array() const noexcept {
    return {lex, ent, len, pat, adj, yule, bi, func};
}

void DiversityWeights::validate() const {
    double sum = 0.0;
    for (double w : as_array()) {
        if (!std::isfinite(w) || w < 0.0 || w > 1.0) fail(ErrorKind::InvalidWeights, "weight outside [0,1]");
        sum += w;
    }
    if (std::abs(sum - 1.0) > kWeightSumTolerance)
        fail(ErrorKind::InvalidWeights, "weights sum to " + std::to_string(sum) + ", expected 1");
}

std::array<double, kSubMetricCount> DiversityReport::sub_scores() const noexcept {
    return {lex, ent, len, pat, adj, yule, bi, func};
}

DiversityReport DiversityReport::from_sub_scores(const std::array<double, kSubMetricCount>& s,
                                                 std::size_t token_count) noexcept {
    DiversityReport r;
    r.lex = s[0];
    r.ent = s[1];
    r.len = s[2];
    r.pat = s[3];
    r.adj = s[4];
    r.yule = s[5];
    r.bi = s[6];
    r.func = s[7];
    r.token_count = token_count;
    return r;
}

nlohmann::json to_json(const DiversityReport& report) {
    nlohmann::json j = nlohmann::json::object();
    const auto scores = report.sub_scores();
    for (std::size_t i = 0; i < kSubMetricCount; ++i) j[std::string(kSubMetricKeys[i])] = scores[i];
    j["combined"] = report.combined ? nlohmann::json(*report.combined) : nlohmann::json(nullptr);
    j["norm"] = report.norm ? nlohmann::json(*report.norm) : nlohmann::json(nullptr);
    j["token_count"] = report.token_count;
    return j;
}

DiversityReport report_from_json(const nlohmann::json& j) {
    if (!j.is_object()) fail(ErrorKind::ParseError, "diversity report must be a JSON object");
    std::array<double, kSubMetricCount> s{};
    try {
        for (std::size_t i = 0; i < kSubMetricCount; ++i) s[i] = j.at(std::string(kSubMetricKeys[i])).get<double>();
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::ParseError, std::string("diversity report: ") + e.what());
    }
    auto r = DiversityReport::from_sub_scores(s, j.value("token_count", std::size_t{0}));
    if (j.contains("combined") && j["combined"].is_number()) r.combined = j["combined"].get<double>();
    if (j.contains("norm") && j["norm"].is_number()) r.norm = j["norm"].get<double>();
    return r;
}

FunctionWordLexicon::FunctionWordLexicon(std::vector<std::string> words, std::string version)
    : version_(std::move(version)) {
    for (auto& w : words) {
        if (w.empty()) continue;
        for (char c : w)
            if (c >= 'A' && c <= 'Z') fail(ErrorKind::InvalidParameter, "function word not lowercase: " + w);
        words_.insert(w);
    }
    if (words_.empty()) fail(ErrorKind::InvalidParameter, "function-word lexicon is empty");
    sorted_.assign(words_.begin(), words_.end());
    std::sort(sorted_.begin(), sorted_.end());
}

namespace {
std::vector<std::string> parse_word_lines(std::istream& in) {
    std::vector<std::string> words;
    std::string line;
    while (std::getline(in, line)) {
        while (!line.empty() && (line.back() == '\r' || line.back() == ' ' || line.back() == '\t')) line.pop_back();
        const auto start = line.find_first_not_of(" \t");
        if (start == std::string::npos || line[start] == '#') continue;
        words.push_back(line.substr(start));
    }
    return words;
}
}  // namespace

const FunctionWordLexicon& FunctionWordLexicon::builtin() {
    static const FunctionWordLexicon lexicon = [] {
        std::istringstream in{std::string(detail::kBuiltinFunctionWords)};
        return FunctionWordLexicon(parse_word_lines(in), "en-fw-1");
    }();
    return lexicon;
}

FunctionWordLexicon FunctionWordLexicon::load(const std::string& path, std::string version) {
    std::ifstream in(path);
    if (!in) fail(ErrorKind::IoError, "cannot open lexicon " + path);
    return FunctionWordLexicon(parse_word_lines(in), version.empty() ? path : std::move(version));
}

bool FunctionWordLexicon::contains(std::string_view token) const {
    return words_.find(std::string(token)) != words_.end();
}

TokenSequence tokenize(std::string_view text) {
    TokenSequence out;
    std::string word;
    std::size_t pos = 0;
    while (pos < text.size()) {
        const auto cp = utf8::next(text, pos);
        if (!cp) fail(ErrorKind::InvalidText, "malformed UTF-8 at byte " + std::to_string(pos));
        if (utf8::is_word(*cp)) {
            utf8::append(word, utf8::to_lower(*cp));
            continue;
        }
        if (!word.empty()) out.tokens.push_back(std::move(word));
        word.clear();
        if (utf8::is_space(*cp)) continue;
        std::string punct;
        utf8::append(punct, *cp);
        out.tokens.push_back(std::move(punct));
    }
    if (!word.empty()) out.tokens.push_back(std::move(word));
    if (out.tokens.empty()) fail(ErrorKind::EmptyText, "text has no tokens");
    return out;
}

bool is_word_token(std::string_view token) noexcept {
    if (token.empty()) return false;
    std::size_t pos = 0;
    const auto cp = utf8::next(token, pos);
    return cp && utf8::is_word(*cp);
}

SentenceSegmentation segment_sentences(const TokenSequence& tokens) {
    SentenceSegmentation seg;
    std::vector<std::string> current;
    for (std::size_t i = 0; i < tokens.tokens.size(); ++i) {
        if (current.empty()) seg.boundaries.push_back(i);
        current.push_back(tokens.tokens[i]);
        if (is_terminal(tokens.tokens[i])) {
            seg.sentences.push_back(std::move(current));
            current.clear();
        }
    }
    if (!current.empty()) seg.sentences.push_back(std::move(current));
    return seg;
}

DiversityReport compute_sub_scores(const TokenSequence& tokens, const FunctionWordLexicon& lexicon) {
    if (tokens.empty()) fail(ErrorKind::EmptyText, "empty token sequence");
    const auto& t = tokens.tokens;
    const auto counts = frequency_counts(t);
    const auto seg = segment_sentences(tokens);

    DiversityReport r;
    r.token_count = t.size();
    r.lex = static_cast<double>(counts.size()) / static_cast<double>(t.size());
    r.ent = normalized_entropy(counts, counts.size());
    r.len = sentence_length_diversity(seg);
    r.pat = sentence_pattern_diversity(seg);
    r.adj = adjacent_sentence_diversity(seg);
    r.yule = yule_diversity(counts, t.size());
    r.bi = bigram_diversity(t);
    r.func = function_word_diversity(t, lexicon);
    return r;
}

DiversityReport compute_sub_scores(std::string_view text, const FunctionWordLexicon& lexicon) {
    return compute_sub_scores(tokenize(text), lexicon);
}

double combined_diversity(const DiversityReport& report, const DiversityWeights& weights) {
    weights.validate();
    const auto w = weights.as_array();
    const auto s = report.sub_scores();
    double total = 0.0;
    for (std::size_t i = 0; i < kSubMetricCount; ++i) total += w[i] * s[i];
    return std::clamp(total, 0.0, 1.0);
}

double length_normalized_diversity(double combined, std::size_t token_count, double length_scale) {
    if (!(length_scale > 0.0) || !std::isfinite(length_scale))
        fail(ErrorKind::InvalidParameter, "length scale must be positive");
    if (token_count == 0) fail(ErrorKind::InvalidParameter, "token count must be at least 1");
    if (!(combined >= 0.0 && combined <= 1.0)) fail(ErrorKind::InvalidParameter, "combined score outside [0,1]");
    const double n = static_cast<double>(token_count);
    return combined * n / (n + length_scale);
}

DiversityReport score_text(std::string_view text, const FunctionWordLexicon& lexicon, const ScoringOptions& options) {
    auto report = compute_sub_scores(text, lexicon);
    report.combined = combined_diversity(report, options.weights);
    report.norm = length_normalized_diversity(*report.combined, report.token_count, options.length_scale);
    return report;
}

}  // namespace divr
