#include "divr/calibration.hpp"

#include <cmath>
#include <fstream>
#include <limits>

#include <nlohmann/json.hpp>

#include "divr/error.hpp"
#include "divr/stats.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace divr {

namespace {

unsigned grid_units(double step) {
    if (!(step > 0.0) || step > 1.0) fail(ErrorKind::InvalidParameter, "calibration step must be in (0,1]");
    const double units = 1.0 / step;
    const double rounded = std::round(units);
    if (std::abs(units - rounded) > 1e-9 || rounded > 255)
        fail(ErrorKind::InvalidParameter, "1/step must be a whole number no larger than 255");
    return static_cast<unsigned>(rounded);
}

void check_samples(std::span<const CalibrationSample> samples) {
    if (samples.size() < 3) fail(ErrorKind::InsufficientData, "calibration needs at least 3 samples");
    bool varied = false;
    for (const auto& s : samples) {
        if (!std::isfinite(s.rating)) fail(ErrorKind::InvalidParameter, "non-finite rating");
        if (s.rating != samples.front().rating) varied = true;
    }
    if (!varied) fail(ErrorKind::DegenerateRatings, "all ratings are equal");
}

DiversityWeights weights_from_parts(const std::array<std::uint8_t, kSubMetricCount>& parts, unsigned units) {
    std::array<double, kSubMetricCount> w{};
    for (std::size_t k = 0; k < kSubMetricCount; ++k) w[k] = static_cast<double>(parts[k]) / units;
    return DiversityWeights::from_array(w);
}

void compose(unsigned remaining, std::size_t slot, std::array<std::uint8_t, kSubMetricCount>& cur,
             std::vector<std::array<std::uint8_t, kSubMetricCount>>& out) {
    if (slot + 1 == kSubMetricCount) {
        cur[slot] = static_cast<std::uint8_t>(remaining);
        out.push_back(cur);
        return;
    }
    for (unsigned v = 0; v <= remaining; ++v) {
        cur[slot] = static_cast<std::uint8_t>(v);
        compose(remaining - v, slot + 1, cur, out);
    }
}

struct Best {
    double corr = -std::numeric_limits<double>::infinity();
    std::size_t index = std::numeric_limits<std::size_t>::max();

    void offer(double c, std::size_t i) {
        if (c > corr || (c == corr && i < index)) {
            corr = c;
            index = i;
        }
    }
};

}  // namespace

std::vector<std::array<std::uint8_t, kSubMetricCount>> simplex_grid(unsigned units) {
    std::vector<std::array<std::uint8_t, kSubMetricCount>> out;
    std::array<std::uint8_t, kSubMetricCount> cur{};
    compose(units, 0, cur, out);
    return out;
}

CalibrationResult calibrate_weights(std::span<const CalibrationSample> samples, double step) {
    const unsigned units = grid_units(step);
    check_samples(samples);
    const std::size_t n = samples.size();
    constexpr std::size_t K = kSubMetricCount;

    // Centered moments: corr(w) = w.b / sqrt(w'Cw * syy).
    std::array<double, K> col_mean{};
    double y_mean = 0.0;
    for (const auto& s : samples) {
        const auto x = s.report.sub_scores();
        for (std::size_t k = 0; k < K; ++k) col_mean[k] += x[k];
        y_mean += s.rating;
    }
    for (auto& m : col_mean) m /= static_cast<double>(n);
    y_mean /= static_cast<double>(n);

    std::array<double, K> b{};
    std::array<std::array<double, K>, K> cov{};
    double syy = 0.0;
    for (const auto& s : samples) {
        const auto x = s.report.sub_scores();
        std::array<double, K> xc{};
        for (std::size_t k = 0; k < K; ++k) xc[k] = x[k] - col_mean[k];
        const double yc = s.rating - y_mean;
        syy += yc * yc;
        for (std::size_t k = 0; k < K; ++k) {
            b[k] += xc[k] * yc;
            for (std::size_t l = 0; l < K; ++l) cov[k][l] += xc[k] * xc[l];
        }
    }
    double max_diag = 0.0;
    for (std::size_t k = 0; k < K; ++k) max_diag = std::max(max_diag, cov[k][k]);
    if (max_diag <= 0.0) fail(ErrorKind::DegenerateVariance, "all sub-scores are constant across samples");
    const double var_floor = 1e-12 * max_diag;

    const auto grid = simplex_grid(units);
    const auto count = static_cast<std::ptrdiff_t>(grid.size());
    Best best;

#pragma omp parallel
    {
        Best local;
#pragma omp for schedule(static)
        for (std::ptrdiff_t i = 0; i < count; ++i) {
            const auto& parts = grid[static_cast<std::size_t>(i)];
            std::array<double, K> w{};
            for (std::size_t k = 0; k < K; ++k) w[k] = static_cast<double>(parts[k]) / units;
            double num = 0.0, quad = 0.0;
            for (std::size_t k = 0; k < K; ++k) {
                if (w[k] == 0.0) continue;
                num += w[k] * b[k];
                double row = 0.0;
                for (std::size_t l = 0; l < K; ++l) row += cov[k][l] * w[l];
                quad += w[k] * row;
            }
            if (quad <= var_floor) continue;
            local.offer(num / std::sqrt(quad * syy), static_cast<std::size_t>(i));
        }
#pragma omp critical(divr_calibration_best)
        best.offer(local.corr, local.index);
    }

    if (best.index >= grid.size()) fail(ErrorKind::DegenerateVariance, "no grid point yields a non-constant score");
    return {weights_from_parts(grid[best.index], units), std::clamp(best.corr, -1.0, 1.0), grid.size()};
}

CalibrationResult calibrate_weights_serial(std::span<const CalibrationSample> samples, double step) {
    const unsigned units = grid_units(step);
    check_samples(samples);
    std::vector<double> ratings;
    ratings.reserve(samples.size());
    for (const auto& s : samples) ratings.push_back(s.rating);

    const auto grid = simplex_grid(units);
    std::vector<double> combined(samples.size());
    Best best;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const auto w = weights_from_parts(grid[i], units);
        for (std::size_t s = 0; s < samples.size(); ++s) combined[s] = combined_diversity(samples[s].report, w);
        try {
            best.offer(pearson(combined, ratings), i);
        } catch (const Error& e) {
            if (e.kind() != ErrorKind::DegenerateVariance) throw;
        }
    }
    if (best.index >= grid.size()) fail(ErrorKind::DegenerateVariance, "no grid point yields a non-constant score");
    return {weights_from_parts(grid[best.index], units), best.corr, grid.size()};
}

std::vector<CalibrationSample> load_rating_samples(const std::string& path, const FunctionWordLexicon& lexicon) {
    std::ifstream in(path);
    if (!in) fail(ErrorKind::IoError, "cannot open ratings file " + path);
    std::vector<CalibrationSample> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error& e) {
            fail(ErrorKind::ParseError, path + ":" + std::to_string(line_no) + ": " + e.what());
        }
        if (!j.contains("rating") || !j["rating"].is_number())
            fail(ErrorKind::ParseError, path + ":" + std::to_string(line_no) + ": missing numeric rating");
        CalibrationSample s;
        s.rating = j["rating"].get<double>();
        if (j.contains("report")) {
            s.report = report_from_json(j["report"]);
        } else if (j.contains("text") && j["text"].is_string()) {
            s.report = compute_sub_scores(j["text"].get<std::string>(), lexicon);
        } else {
            fail(ErrorKind::ParseError, path + ":" + std::to_string(line_no) + ": need report or text");
        }
        out.push_back(std::move(s));
    }
    return out;
}

}  // namespace divr
