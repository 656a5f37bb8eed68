#include "divr/batch.hpp"

#include "divr/error.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace divr {

namespace {

std::optional<DiversityReport> score_one(const std::string& text, const FunctionWordLexicon& lexicon,
                                         const ScoringOptions& options) noexcept {
    try {
        return score_text(text, lexicon, options);
    } catch (const Error&) {
        return std::nullopt;
    }
}

}  // namespace

std::vector<std::optional<DiversityReport>> score_batch(std::span<const std::string> texts,
                                                        const FunctionWordLexicon& lexicon,
                                                        const ScoringOptions& options) {
    options.weights.validate();
    std::vector<std::optional<DiversityReport>> out(texts.size());
    const auto n = static_cast<std::ptrdiff_t>(texts.size());
#pragma omp parallel for schedule(dynamic, 4)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        const auto idx = static_cast<std::size_t>(i);
        out[idx] = score_one(texts[idx], lexicon, options);
    }
    return out;
}

std::vector<std::optional<DiversityReport>> score_batch_serial(std::span<const std::string> texts,
                                                               const FunctionWordLexicon& lexicon,
                                                               const ScoringOptions& options) {
    options.weights.validate();
    std::vector<std::optional<DiversityReport>> out;
    out.reserve(texts.size());
    for (const auto& t : texts) out.push_back(score_one(t, lexicon, options));
    return out;
}

int worker_threads() noexcept {
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

}  // namespace divr
