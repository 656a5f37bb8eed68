#pragma once

#include <span>

namespace divr {

double mean(std::span<const double> xs);
/// Population standard deviation (divides by n).
double population_stddev(std::span<const double> xs);

/// Product-moment correlation. Throws InvalidParameter for unequal lengths or
/// fewer than 2 points and DegenerateVariance when either side is constant.
double pearson(std::span<const double> xs, std::span<const double> ys);

struct LinearFit {
    double slope = 0.0;
    double intercept = 0.0;
};

/// Ordinary least squares y = slope * x + intercept. Throws DegenerateVariance
/// when x is constant.
LinearFit least_squares(std::span<const double> xs, std::span<const double> ys);

}  // namespace divr
