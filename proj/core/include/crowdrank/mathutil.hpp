#pragma once

#include <span>
#include <vector>

namespace crowdrank {

double mean(std::span<const double> values);

// Fractional ranks (1-based, ties get the average rank).
std::vector<double> rank_data(std::span<const double> values);

// Spearman rank correlation with average-rank tie handling.
// Degenerate inputs (a constant side) return 0.
double spearman(std::span<const double> a, std::span<const double> b);

bool on_simplex(std::span<const double> v, double tol);

}  // namespace crowdrank
