#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "divr/text_diversity.hpp"

namespace divr {

struct CalibrationSample {
    DiversityReport report;
    double rating = 0.0;
};

struct CalibrationResult {
    DiversityWeights weights;
    double correlation = 0.0;
    std::size_t candidates = 0;
};

inline constexpr double kCalibrationStep = 0.05;

/// Exhaustive search over the eight-weight simplex at `step` resolution for
/// the weights whose combined score correlates best (Pearson) with the
/// ratings. Exact ties go to the lexicographically smallest weight vector in
/// lex, ent, len, pat, adj, yule, bi, func order.
///
/// Throws InsufficientData for fewer than 3 samples, DegenerateRatings when
/// all ratings are equal, InvalidParameter when 1/step is not a whole number.
/// Parallelized with OpenMP when available.
CalibrationResult calibrate_weights(std::span<const CalibrationSample> samples, double step = kCalibrationStep);

/// Single-threaded reference that scores every grid point through
/// combined_diversity and pearson directly. Kept for tests and benchmarks.
CalibrationResult calibrate_weights_serial(std::span<const CalibrationSample> samples,
                                           double step = kCalibrationStep);

/// All compositions of `units` into eight non-negative parts, in ascending
/// lexicographic order.
std::vector<std::array<std::uint8_t, kSubMetricCount>> simplex_grid(unsigned units);

/// JSONL; each line is {"rating": r, "report": {...}} or {"rating": r, "text": "..."}.
std::vector<CalibrationSample> load_rating_samples(const std::string& path, const FunctionWordLexicon& lexicon);

}  // namespace divr
