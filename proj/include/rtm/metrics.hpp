#pragma once

#include <cstdint>

#include "rtm/matrix.hpp"

// Sample-set quality metrics. Precision/recall/density/coverage follow the
// k-NN-manifold definitions: a point is "on" a set's manifold when it falls
// inside the k-NN ball of at least one member. All membership tests compare
// squared distances with <= (boundary points count as inside).

namespace rtm {

struct MetricReport {
  double precision = 0.0;
  double recall = 0.0;
  double density = 0.0;
  double coverage = 0.0;
  double fid = 0.0;
  int64_t modes_covered = -1;  // -1 when no mode geometry was supplied
  int64_t k = 3;
  int64_t n_real = 0;
  int64_t n_fake = 0;
};

// precision: fraction of fake points inside some real k-NN ball.
// recall:    fraction of real points inside some fake k-NN ball.
struct PrecisionRecall {
  double precision = 0.0;
  double recall = 0.0;
};
PrecisionRecall precision_recall(const Matrix& real, const Matrix& fake, int k);

// density:  (1/(k*n_fake)) * sum over fake of real-ball membership counts.
// coverage: fraction of real points whose own k-NN ball contains a fake.
struct DensityCoverage {
  double density = 0.0;
  double coverage = 0.0;
};
DensityCoverage density_coverage(const Matrix& real, const Matrix& fake, int k);

// Frechet distance between moment-matched Gaussians:
//   |mu_r - mu_f|^2 + tr(S_r) + tr(S_f) - 2 * tr((S_r^1/2 S_f S_r^1/2)^1/2)
// with unbiased (n-1) covariances. Requires rows >= cols+1 on both sets.
double fid(const Matrix& real, const Matrix& fake);

// Number of centers with at least one fake sample within `radius`.
// Requires the balls to be disjoint: radius < half the smallest
// inter-center distance.
int64_t mode_coverage(const Matrix& centers, double radius, const Matrix& fake);

MetricReport compute_metrics(const Matrix& real, const Matrix& fake, int k);
MetricReport compute_metrics(const Matrix& real, const Matrix& fake, int k,
                             const Matrix& mode_centers, double mode_radius);

}  // namespace rtm
