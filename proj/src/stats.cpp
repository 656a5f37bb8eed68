#include "divr/stats.hpp"

#include <algorithm>
#include <cmath>

#include "divr/error.hpp"

namespace divr {

double mean(std::span<const double> xs) {
    if (xs.empty()) fail(ErrorKind::InvalidParameter, "mean of empty sequence");
    double total = 0.0;
    for (double x : xs) total += x;
    return total / static_cast<double>(xs.size());
}

double population_stddev(std::span<const double> xs) {
    const double mu = mean(xs);
    double ss = 0.0;
    for (double x : xs) ss += (x - mu) * (x - mu);
    return std::sqrt(ss / static_cast<double>(xs.size()));
}

double pearson(std::span<const double> xs, std::span<const double> ys) {
    if (xs.size() != ys.size()) fail(ErrorKind::InvalidParameter, "pearson: length mismatch");
    if (xs.size() < 2) fail(ErrorKind::InvalidParameter, "pearson: need at least 2 points");
    const double mx = mean(xs);
    const double my = mean(ys);
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double dx = xs[i] - mx;
        const double dy = ys[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (sxx <= 0.0 || syy <= 0.0) fail(ErrorKind::DegenerateVariance, "pearson: zero variance");
    return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

LinearFit least_squares(std::span<const double> xs, std::span<const double> ys) {
    if (xs.size() != ys.size() || xs.empty()) fail(ErrorKind::InvalidParameter, "least_squares: bad lengths");
    const double mx = mean(xs);
    const double my = mean(ys);
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sxy += (xs[i] - mx) * (ys[i] - my);
        sxx += (xs[i] - mx) * (xs[i] - mx);
    }
    if (sxx <= 0.0) fail(ErrorKind::DegenerateVariance, "least_squares: constant x");
    const double slope = sxy / sxx;
    return {slope, my - slope * mx};
}

}  // namespace divr
