#include "rtm/kernels.hpp"

#include <algorithm>
#include <cmath>

#include "rtm/error.hpp"

namespace rtm::kern {

// The distance accumulation is a plain `acc += d*d` loop on purpose: the
// serial reference uses the identical pattern, so the two routes agree
// bit-for-bit and downstream tie comparisons (d^2 <= radius^2) are portable
// between them.
Matrix pairwise_sqdist(const Matrix& a, const Matrix& b) {
  if (a.cols != b.cols) throw ShapeError("pairwise_sqdist: column mismatch");
  Matrix out(a.rows, b.rows);
#pragma omp parallel for schedule(static)
  for (int64_t i = 0; i < a.rows; ++i) {
    const double* ar = a.row(i);
    double* orow = out.row(i);
    for (int64_t j = 0; j < b.rows; ++j) {
      const double* br = b.row(j);
      double acc = 0.0;
      for (int64_t d = 0; d < a.cols; ++d) {
        double diff = ar[d] - br[d];
        acc += diff * diff;
      }
      orow[j] = acc;
    }
  }
  return out;
}

std::vector<double> knn_radii_sq(const Matrix& pts, int k) {
  if (k < 1 || k >= pts.rows)
    throw ShapeError("knn_radii: k=" + std::to_string(k) + " needs 1 <= k < n=" +
                     std::to_string(pts.rows));
  int64_t n = pts.rows;
  std::vector<double> out(static_cast<size_t>(n));
#pragma omp parallel for schedule(static)
  for (int64_t i = 0; i < n; ++i) {
    std::vector<double> d;
    d.reserve(static_cast<size_t>(n - 1));
    const double* pi = pts.row(i);
    for (int64_t j = 0; j < n; ++j) {
      if (j == i) continue;
      const double* pj = pts.row(j);
      double acc = 0.0;
      for (int64_t c = 0; c < pts.cols; ++c) {
        double diff = pi[c] - pj[c];
        acc += diff * diff;
      }
      d.push_back(acc);
    }
    std::nth_element(d.begin(), d.begin() + (k - 1), d.end());
    out[static_cast<size_t>(i)] = d[static_cast<size_t>(k - 1)];
  }
  return out;
}

std::vector<double> knn_radii(const Matrix& pts, int k) {
  std::vector<double> out = knn_radii_sq(pts, k);
  for (double& v : out) v = std::sqrt(v);
  return out;
}

}  // namespace rtm::kern
