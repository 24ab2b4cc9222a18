#pragma once

#include <cstdint>
#include <vector>

#include "rtm/matrix.hpp"

// Production kernels for the gradient-free, embarrassingly parallel work:
// OpenMP `parallel for` over rows with disjoint writes, so results are
// bit-identical at any thread count. `rtm::ref` holds the serial reference
// implementations these are tested (and benchmarked) against.

namespace rtm::kern {

// out(i,j) = squared Euclidean distance between a.row(i) and b.row(j).
Matrix pairwise_sqdist(const Matrix& a, const Matrix& b);

// Squared distance from each row of `pts` to its k-th nearest other row
// (self excluded). Requires 1 <= k < rows.
std::vector<double> knn_radii_sq(const Matrix& pts, int k);

// Euclidean version of the above (element-wise sqrt).
std::vector<double> knn_radii(const Matrix& pts, int k);

}  // namespace rtm::kern
