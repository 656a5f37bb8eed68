#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "divr/text_diversity.hpp"

namespace divr {

/// Scores many texts at once. Entries that fail to tokenize (empty or
/// malformed) come back as nullopt instead of aborting the batch.
std::vector<std::optional<DiversityReport>> score_batch(std::span<const std::string> texts,
                                                        const FunctionWordLexicon& lexicon,
                                                        const ScoringOptions& options = {});

/// Same contract, one thread. Reference for tests and the benchmark.
std::vector<std::optional<DiversityReport>> score_batch_serial(std::span<const std::string> texts,
                                                               const FunctionWordLexicon& lexicon,
                                                               const ScoringOptions& options = {});

int worker_threads() noexcept;

}  // namespace divr
