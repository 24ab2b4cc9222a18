#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "rtm/matrix.hpp"

// Serial, straight-line reference implementations written directly from the
// definitions. They share no code with the production path; tests and the
// kernel benchmark compare the two routes. Everything here is O(n^2)-honest
// and unclever on purpose.

namespace rtm::ref {

// Squared Euclidean distance between two length-`dim` vectors.
double sqdist(const double* a, const double* b, int64_t dim);

Matrix pairwise_sqdist(const Matrix& a, const Matrix& b);

// Distance from each row to its k-th nearest other row, via full sort.
std::vector<double> knn_radii(const Matrix& pts, int k);

// Squared variant of knn_radii; the metric definitions below build on it.
std::vector<double> knn_radii_sq(const Matrix& pts, int k);

// Two-set k-NN sample metrics. Membership uses d <= radius (ties included).
// precision: fraction of fake points inside some real point's k-NN ball.
// recall:    fraction of real points inside some fake point's k-NN ball.
// density:   mean over fake points of (#covering real balls) / k.
// coverage:  fraction of real points whose k-NN ball contains a fake point.
std::pair<double, double> precision_recall(const Matrix& real, const Matrix& fake, int k);
std::pair<double, double> density_coverage(const Matrix& real, const Matrix& fake, int k);

// Index of the nearest pool row for every data row; ties -> lowest index.
std::vector<int64_t> nearest_index(const Matrix& data, const Matrix& pool);

// y = W x + b with W given row-major (rows x cols).
std::vector<double> affine(const std::vector<double>& w, int64_t rows, int64_t cols,
                           const std::vector<double>& x, const std::vector<double>& b);

// Gated MLP weights in the layout out = W_down * (silu(W_gate*u + b_gate) .*
// (W_up*u + b_up)) + b_down acting on a length-`in` vector with `hidden`
// gate/up units.
struct GatedMlpWeights {
  int64_t in = 0;
  int64_t hidden = 0;
  std::vector<double> w_gate, b_gate, w_up, b_up, w_down, b_down;
};

// One shared-block application (token-mixing variant) on a tokens x channels
// grid, written as bare loops:
//   u0 = Z + ctx
//   u1 = rms_norm_rows(u0 + token_mix(u0))   (mix runs across the token axis)
//   u2 = rms_norm_rows(u1 + channel_mix(u1))
std::vector<double> token_mixer_block(const std::vector<double>& z, const std::vector<double>& ctx,
                                      int64_t tokens, int64_t channels,
                                      const GatedMlpWeights& token_mix,
                                      const GatedMlpWeights& channel_mix, double eps);

}  // namespace rtm::ref
