#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include <nlohmann/json.hpp>

namespace divr {

/// Lowercased word and punctuation tokens of one text.
struct TokenSequence {
    std::vector<std::string> tokens;

    std::size_t source_length() const noexcept { return tokens.size(); }
    bool empty() const noexcept { return tokens.empty(); }
};

/// Sentences are copies of contiguous runs of the parent sequence.
/// `boundaries[i]` is the index of the first token of sentence i.
struct SentenceSegmentation {
    std::vector<std::vector<std::string>> sentences;
    std::vector<std::size_t> boundaries;
};

/// The eight sub-metrics, in the canonical order used for serialization,
/// weight vectors and the calibration tie-break.
enum class SubMetric : std::size_t { Lex, Ent, Len, Pat, Adj, Yule, Bi, Func };
inline constexpr std::size_t kSubMetricCount = 8;
inline constexpr std::array<std::string_view, kSubMetricCount> kSubMetricKeys = {
    "lex", "ent", "len", "pat", "adj", "yule", "bi", "func"};

struct DiversityWeights {
    double lex = 0.15;
    double ent = 0.15;
    double len = 0.10;
    double pat = 0.15;
    double adj = 0.10;
    double yule = 0.10;
    double bi = 0.15;
    double func = 0.10;

    static DiversityWeights defaults() noexcept { return {}; }
    static DiversityWeights from_array(const std::array<double, kSubMetricCount>& w) noexcept;

    std::array<double, kSubMetricCount> as_array() const noexcept;
    /// Throws InvalidWeights unless every weight is finite, non-negative and
    /// the eight sum to 1 within 1e-9.
    void validate() const;

    friend bool operator==(const DiversityWeights&, const DiversityWeights&) = default;
};

struct DiversityReport {
    double lex = 0.0;
    double ent = 0.0;
    double len = 0.0;
    double pat = 0.0;
    double adj = 0.0;
    double yule = 0.0;
    double bi = 0.0;
    double func = 0.0;
    std::optional<double> combined;
    std::optional<double> norm;
    std::size_t token_count = 0;

    std::array<double, kSubMetricCount> sub_scores() const noexcept;
    static DiversityReport from_sub_scores(const std::array<double, kSubMetricCount>& s,
                                           std::size_t token_count = 0) noexcept;

    friend bool operator==(const DiversityReport&, const DiversityReport&) = default;
};

/// Flat object with keys lex, ent, len, pat, adj, yule, bi, func, combined,
/// norm, token_count. Unset combined/norm serialize as null.
nlohmann::json to_json(const DiversityReport& report);
DiversityReport report_from_json(const nlohmann::json& j);

class FunctionWordLexicon {
public:
    FunctionWordLexicon(std::vector<std::string> words, std::string version);

    /// Built-in English list shipped with the library (also in data/function_words.txt).
    static const FunctionWordLexicon& builtin();
    /// One word per line, UTF-8. Blank lines and lines starting with '#' are skipped.
    static FunctionWordLexicon load(const std::string& path, std::string version = {});

    bool contains(std::string_view token) const;
    std::size_t size() const noexcept { return words_.size(); }
    const std::string& version() const noexcept { return version_; }
    const std::vector<std::string>& words() const noexcept { return sorted_; }

private:
    std::unordered_set<std::string> words_;
    std::vector<std::string> sorted_;
    std::string version_;
};

inline constexpr double kDefaultLengthScale = 100.0;

/// Throws EmptyText for empty or whitespace-only input and InvalidText for
/// malformed UTF-8.
TokenSequence tokenize(std::string_view text);

/// Splits after '.', '!' and '?' tokens; a trailing run without a terminal
/// forms the last sentence.
SentenceSegmentation segment_sentences(const TokenSequence& tokens);

bool is_word_token(std::string_view token) noexcept;

DiversityReport compute_sub_scores(const TokenSequence& tokens, const FunctionWordLexicon& lexicon);
DiversityReport compute_sub_scores(std::string_view text, const FunctionWordLexicon& lexicon);

double combined_diversity(const DiversityReport& report,
                          const DiversityWeights& weights = DiversityWeights::defaults());

/// combined * n / (n + length_scale)
double length_normalized_diversity(double combined, std::size_t token_count,
                                   double length_scale = kDefaultLengthScale);

struct ScoringOptions {
    DiversityWeights weights = DiversityWeights::defaults();
    double length_scale = kDefaultLengthScale;
};

/// Sub-scores plus combined and normalized scores.
DiversityReport score_text(std::string_view text, const FunctionWordLexicon& lexicon,
                           const ScoringOptions& options = {});

}  // namespace divr
