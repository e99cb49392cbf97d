#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

namespace relfeat {

// Pearson correlation; NaN when either side has zero variance or n < 2.
double pearson(const std::vector<double>& x, const std::vector<double>& y);

// Shannon entropy (natural log) of label counts.
double entropy_from_counts(const std::vector<size_t>& counts);

// Rank-based AUC with tie averaging; scores vs binary labels (0/1).
double auc_score(const std::vector<double>& scores, const std::vector<int>& labels);

// Standard normal density and distribution function.
inline double norm_pdf(double z) {
    return std::exp(-0.5 * z * z) / 2.5066282746310002;
}
inline double norm_cdf(double z) { return 0.5 * std::erfc(-z / 1.4142135623730951); }

}  // namespace relfeat
