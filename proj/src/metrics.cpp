#include "rtm/metrics.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <string>

#include "rtm/error.hpp"
#include "rtm/kernels.hpp"

namespace rtm {

namespace {

void require_same_width(const Matrix& real, const Matrix& fake, const char* who) {
  if (real.cols != fake.cols)
    throw ShapeError(std::string(who) + ": real width " + std::to_string(real.cols) +
                     " != fake width " + std::to_string(fake.cols));
  if (real.rows < 1 || fake.rows < 1)
    throw ShapeError(std::string(who) + ": both sets must be non-empty");
}

}  // namespace

PrecisionRecall precision_recall(const Matrix& real, const Matrix& fake, int k) {
  require_same_width(real, fake, "precision_recall");
  std::vector<double> real_r = kern::knn_radii_sq(real, k);
  std::vector<double> fake_r = kern::knn_radii_sq(fake, k);
  Matrix d = kern::pairwise_sqdist(fake, real);  // (n_fake, n_real)
  int64_t fake_hits = 0;
  for (int64_t j = 0; j < fake.rows; ++j) {
    const double* row = d.row(j);
    for (int64_t i = 0; i < real.rows; ++i) {
      if (row[i] <= real_r[static_cast<size_t>(i)]) {
        ++fake_hits;
        break;
      }
    }
  }
  int64_t real_hits = 0;
  for (int64_t i = 0; i < real.rows; ++i) {
    for (int64_t j = 0; j < fake.rows; ++j) {
      if (d.at(j, i) <= fake_r[static_cast<size_t>(j)]) {
        ++real_hits;
        break;
      }
    }
  }
  PrecisionRecall out;
  out.precision = static_cast<double>(fake_hits) / static_cast<double>(fake.rows);
  out.recall = static_cast<double>(real_hits) / static_cast<double>(real.rows);
  return out;
}

DensityCoverage density_coverage(const Matrix& real, const Matrix& fake, int k) {
  require_same_width(real, fake, "density_coverage");
  std::vector<double> real_r = kern::knn_radii_sq(real, k);
  Matrix d = kern::pairwise_sqdist(fake, real);  // (n_fake, n_real)
  int64_t ball_memberships = 0;
  for (int64_t j = 0; j < fake.rows; ++j) {
    const double* row = d.row(j);
    for (int64_t i = 0; i < real.rows; ++i) {
      if (row[i] <= real_r[static_cast<size_t>(i)]) ++ball_memberships;
    }
  }
  int64_t covered = 0;
  for (int64_t i = 0; i < real.rows; ++i) {
    for (int64_t j = 0; j < fake.rows; ++j) {
      if (d.at(j, i) <= real_r[static_cast<size_t>(i)]) {
        ++covered;
        break;
      }
    }
  }
  DensityCoverage out;
  out.density = static_cast<double>(ball_memberships) /
                (static_cast<double>(k) * static_cast<double>(fake.rows));
  out.coverage = static_cast<double>(covered) / static_cast<double>(real.rows);
  return out;
}

namespace {

Eigen::VectorXd column_mean(const Matrix& m) {
  Eigen::VectorXd mu = Eigen::VectorXd::Zero(m.cols);
  for (int64_t i = 0; i < m.rows; ++i)
    for (int64_t j = 0; j < m.cols; ++j) mu[j] += m.at(i, j);
  mu /= static_cast<double>(m.rows);
  return mu;
}

Eigen::MatrixXd covariance(const Matrix& m, const Eigen::VectorXd& mu) {
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(m.cols, m.cols);
  Eigen::VectorXd x(m.cols);
  for (int64_t i = 0; i < m.rows; ++i) {
    for (int64_t j = 0; j < m.cols; ++j) x[j] = m.at(i, j) - mu[j];
    cov.noalias() += x * x.transpose();
  }
  cov /= static_cast<double>(m.rows - 1);
  return cov;
}

// Eigenvalues of a symmetric PSD matrix, tiny negatives clamped to zero.
Eigen::VectorXd psd_eigenvalues(const Eigen::MatrixXd& m, const char* who) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
  if (es.info() != Eigen::Success) throw NumericError(std::string(who) + ": eigensolver failed");
  Eigen::VectorXd ev = es.eigenvalues();
  for (int i = 0; i < ev.size(); ++i) {
    if (ev[i] < -1e-8)
      throw NumericError(std::string(who) + ": eigenvalue " + std::to_string(ev[i]) +
                         " below PSD tolerance");
    if (ev[i] < 0.0) ev[i] = 0.0;
  }
  return ev;
}

}  // namespace

double fid(const Matrix& real, const Matrix& fake) {
  require_same_width(real, fake, "fid");
  const int64_t dim = real.cols;
  if (real.rows < dim + 1 || fake.rows < dim + 1)
    throw ShapeError("fid: need at least dim+1 = " + std::to_string(dim + 1) +
                     " samples per set, got " + std::to_string(real.rows) + " real / " +
                     std::to_string(fake.rows) + " fake");

  Eigen::VectorXd mu_r = column_mean(real);
  Eigen::VectorXd mu_f = column_mean(fake);
  Eigen::MatrixXd cov_r = covariance(real, mu_r);
  Eigen::MatrixXd cov_f = covariance(fake, mu_f);

  // S = cov_r^{1/2} via eigendecomposition, then the trace of the matrix
  // square root of S * cov_f * S is the sum of sqrt-eigenvalues.
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov_r);
  if (es.info() != Eigen::Success) throw NumericError("fid: eigensolver failed on real covariance");
  Eigen::VectorXd ev_r = es.eigenvalues();
  for (int i = 0; i < ev_r.size(); ++i) {
    if (ev_r[i] < -1e-8)
      throw NumericError("fid: real covariance eigenvalue " + std::to_string(ev_r[i]) +
                         " below PSD tolerance");
    if (ev_r[i] < 0.0) ev_r[i] = 0.0;
  }
  Eigen::MatrixXd sqrt_cov_r =
      es.eigenvectors() * ev_r.cwiseSqrt().asDiagonal() * es.eigenvectors().transpose();
  Eigen::MatrixXd inner = sqrt_cov_r * cov_f * sqrt_cov_r;
  // Symmetrize away round-off before the PSD eigensolve.
  inner = 0.5 * (inner + inner.transpose()).eval();
  Eigen::VectorXd ev_inner = psd_eigenvalues(inner, "fid");

  double mean_term = (mu_r - mu_f).squaredNorm();
  double trace_term = cov_r.trace() + cov_f.trace() - 2.0 * ev_inner.cwiseSqrt().sum();
  return mean_term + trace_term;
}

int64_t mode_coverage(const Matrix& centers, double radius, const Matrix& fake) {
  require_same_width(centers, fake, "mode_coverage");
  if (!(radius > 0.0)) throw NumericError("mode_coverage: radius must be positive");
  if (centers.rows > 1) {
    double min_gap_sq = std::numeric_limits<double>::infinity();
    Matrix gaps = kern::pairwise_sqdist(centers, centers);
    for (int64_t i = 0; i < centers.rows; ++i)
      for (int64_t j = 0; j < centers.rows; ++j)
        if (i != j && gaps.at(i, j) < min_gap_sq) min_gap_sq = gaps.at(i, j);
    if (radius >= 0.5 * std::sqrt(min_gap_sq))
      throw NumericError("mode_coverage: radius " + std::to_string(radius) +
                         " makes mode balls overlap (min center gap " +
                         std::to_string(std::sqrt(min_gap_sq)) + ")");
  }
  const double r_sq = radius * radius;
  Matrix d = kern::pairwise_sqdist(centers, fake);
  int64_t covered = 0;
  for (int64_t i = 0; i < centers.rows; ++i) {
    const double* row = d.row(i);
    for (int64_t j = 0; j < fake.rows; ++j) {
      if (row[j] <= r_sq) {
        ++covered;
        break;
      }
    }
  }
  return covered;
}

MetricReport compute_metrics(const Matrix& real, const Matrix& fake, int k) {
  MetricReport r;
  PrecisionRecall pr = precision_recall(real, fake, k);
  DensityCoverage dc = density_coverage(real, fake, k);
  r.precision = pr.precision;
  r.recall = pr.recall;
  r.density = dc.density;
  r.coverage = dc.coverage;
  r.fid = fid(real, fake);
  r.k = k;
  r.n_real = real.rows;
  r.n_fake = fake.rows;
  return r;
}

MetricReport compute_metrics(const Matrix& real, const Matrix& fake, int k,
                             const Matrix& mode_centers, double mode_radius) {
  MetricReport r = compute_metrics(real, fake, k);
  r.modes_covered = mode_coverage(mode_centers, mode_radius, fake);
  return r;
}

}  // namespace rtm
