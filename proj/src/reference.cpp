#include "rtm/reference.hpp"

#include <algorithm>
#include <cmath>

#include "rtm/error.hpp"

namespace rtm::ref {

double sqdist(const double* a, const double* b, int64_t dim) {
  double acc = 0.0;
  for (int64_t d = 0; d < dim; ++d) {
    double diff = a[d] - b[d];
    acc += diff * diff;
  }
  return acc;
}

Matrix pairwise_sqdist(const Matrix& a, const Matrix& b) {
  if (a.cols != b.cols) throw ShapeError("ref::pairwise_sqdist: column mismatch");
  Matrix out(a.rows, b.rows);
  for (int64_t i = 0; i < a.rows; ++i)
    for (int64_t j = 0; j < b.rows; ++j) out.at(i, j) = sqdist(a.row(i), b.row(j), a.cols);
  return out;
}

std::vector<double> knn_radii(const Matrix& pts, int k) {
  if (k < 1 || k >= pts.rows) throw ShapeError("ref::knn_radii: need 1 <= k < n");
  std::vector<double> out(static_cast<size_t>(pts.rows));
  for (int64_t i = 0; i < pts.rows; ++i) {
    std::vector<double> d;
    for (int64_t j = 0; j < pts.rows; ++j)
      if (j != i) d.push_back(sqdist(pts.row(i), pts.row(j), pts.cols));
    std::sort(d.begin(), d.end());
    out[static_cast<size_t>(i)] = std::sqrt(d[static_cast<size_t>(k - 1)]);
  }
  return out;
}

// Squared k-NN radii by full sort; the metric loops below use this so they
// stay purely definitional.
std::vector<double> knn_radii_sq(const Matrix& pts, int k) {
  if (k < 1 || k >= pts.rows) throw ShapeError("ref::knn_radii_sq: need 1 <= k < n");
  std::vector<double> out(static_cast<size_t>(pts.rows));
  for (int64_t i = 0; i < pts.rows; ++i) {
    std::vector<double> d;
    for (int64_t j = 0; j < pts.rows; ++j)
      if (j != i) d.push_back(sqdist(pts.row(i), pts.row(j), pts.cols));
    std::sort(d.begin(), d.end());
    out[static_cast<size_t>(i)] = d[static_cast<size_t>(k - 1)];
  }
  return out;
}

std::pair<double, double> precision_recall(const Matrix& real, const Matrix& fake, int k) {
  std::vector<double> rr = knn_radii_sq(real, k);
  std::vector<double> rf = knn_radii_sq(fake, k);
  int64_t prec_hits = 0;
  for (int64_t f = 0; f < fake.rows; ++f) {
    bool inside = false;
    for (int64_t r = 0; r < real.rows && !inside; ++r)
      inside = sqdist(fake.row(f), real.row(r), real.cols) <= rr[static_cast<size_t>(r)];
    prec_hits += inside ? 1 : 0;
  }
  int64_t rec_hits = 0;
  for (int64_t r = 0; r < real.rows; ++r) {
    bool inside = false;
    for (int64_t f = 0; f < fake.rows && !inside; ++f)
      inside = sqdist(real.row(r), fake.row(f), real.cols) <= rf[static_cast<size_t>(f)];
    rec_hits += inside ? 1 : 0;
  }
  return {static_cast<double>(prec_hits) / static_cast<double>(fake.rows),
          static_cast<double>(rec_hits) / static_cast<double>(real.rows)};
}

std::pair<double, double> density_coverage(const Matrix& real, const Matrix& fake, int k) {
  std::vector<double> rr = knn_radii_sq(real, k);
  int64_t ball_memberships = 0;
  for (int64_t f = 0; f < fake.rows; ++f)
    for (int64_t r = 0; r < real.rows; ++r)
      if (sqdist(fake.row(f), real.row(r), real.cols) <= rr[static_cast<size_t>(r)])
        ++ball_memberships;
  double density = static_cast<double>(ball_memberships) /
                   (static_cast<double>(k) * static_cast<double>(fake.rows));
  int64_t covered = 0;
  for (int64_t r = 0; r < real.rows; ++r) {
    bool hit = false;
    for (int64_t f = 0; f < fake.rows && !hit; ++f)
      hit = sqdist(fake.row(f), real.row(r), real.cols) <= rr[static_cast<size_t>(r)];
    covered += hit ? 1 : 0;
  }
  return {density, static_cast<double>(covered) / static_cast<double>(real.rows)};
}

std::vector<int64_t> nearest_index(const Matrix& data, const Matrix& pool) {
  if (pool.rows < 1) throw ShapeError("ref::nearest_index: empty pool");
  std::vector<int64_t> out(static_cast<size_t>(data.rows));
  for (int64_t i = 0; i < data.rows; ++i) {
    int64_t best = 0;
    double best_d = sqdist(data.row(i), pool.row(0), data.cols);
    for (int64_t j = 1; j < pool.rows; ++j) {
      double d = sqdist(data.row(i), pool.row(j), data.cols);
      if (d < best_d) {
        best_d = d;
        best = j;
      }
    }
    out[static_cast<size_t>(i)] = best;
  }
  return out;
}

std::vector<double> affine(const std::vector<double>& w, int64_t rows, int64_t cols,
                           const std::vector<double>& x, const std::vector<double>& b) {
  std::vector<double> y(static_cast<size_t>(rows));
  for (int64_t i = 0; i < rows; ++i) {
    double acc = b.empty() ? 0.0 : b[static_cast<size_t>(i)];
    for (int64_t j = 0; j < cols; ++j) acc += w[static_cast<size_t>(i * cols + j)] * x[static_cast<size_t>(j)];
    y[static_cast<size_t>(i)] = acc;
  }
  return y;
}

namespace {

double silu_scalar(double x) { return x / (1.0 + std::exp(-x)); }

// Applies the gated MLP to a single length-`in` vector.
std::vector<double> gated_mlp_vec(const GatedMlpWeights& w, const std::vector<double>& u) {
  std::vector<double> gate = affine(w.w_gate, w.hidden, w.in, u, w.b_gate);
  std::vector<double> up = affine(w.w_up, w.hidden, w.in, u, w.b_up);
  std::vector<double> h(static_cast<size_t>(w.hidden));
  for (int64_t i = 0; i < w.hidden; ++i)
    h[static_cast<size_t>(i)] = silu_scalar(gate[static_cast<size_t>(i)]) * up[static_cast<size_t>(i)];
  return affine(w.w_down, w.in, w.hidden, h, w.b_down);
}

void rms_norm_rows(std::vector<double>& m, int64_t rows, int64_t cols, double eps) {
  for (int64_t i = 0; i < rows; ++i) {
    double ms = 0.0;
    for (int64_t j = 0; j < cols; ++j) {
      double x = m[static_cast<size_t>(i * cols + j)];
      ms += x * x;
    }
    ms /= static_cast<double>(cols);
    double inv = 1.0 / std::sqrt(ms + eps);
    for (int64_t j = 0; j < cols; ++j) m[static_cast<size_t>(i * cols + j)] *= inv;
  }
}

}  // namespace

std::vector<double> token_mixer_block(const std::vector<double>& z, const std::vector<double>& ctx,
                                      int64_t tokens, int64_t channels,
                                      const GatedMlpWeights& token_mix,
                                      const GatedMlpWeights& channel_mix, double eps) {
  size_t n = static_cast<size_t>(tokens * channels);
  std::vector<double> u0(n);
  for (size_t i = 0; i < n; ++i) u0[i] = z[i] + ctx[i];

  // Token mixing: for each channel, run the gated MLP across the token axis.
  std::vector<double> mixed(n);
  for (int64_t c = 0; c < channels; ++c) {
    std::vector<double> col(static_cast<size_t>(tokens));
    for (int64_t t = 0; t < tokens; ++t) col[static_cast<size_t>(t)] = u0[static_cast<size_t>(t * channels + c)];
    std::vector<double> y = gated_mlp_vec(token_mix, col);
    for (int64_t t = 0; t < tokens; ++t) mixed[static_cast<size_t>(t * channels + c)] = y[static_cast<size_t>(t)];
  }
  std::vector<double> u1(n);
  for (size_t i = 0; i < n; ++i) u1[i] = u0[i] + mixed[i];
  rms_norm_rows(u1, tokens, channels, eps);

  // Channel mixing: per token, across the channel axis.
  std::vector<double> u2(n);
  for (int64_t t = 0; t < tokens; ++t) {
    std::vector<double> row(static_cast<size_t>(channels));
    for (int64_t c = 0; c < channels; ++c) row[static_cast<size_t>(c)] = u1[static_cast<size_t>(t * channels + c)];
    std::vector<double> y = gated_mlp_vec(channel_mix, row);
    for (int64_t c = 0; c < channels; ++c)
      u2[static_cast<size_t>(t * channels + c)] = u1[static_cast<size_t>(t * channels + c)] + y[static_cast<size_t>(c)];
  }
  rms_norm_rows(u2, tokens, channels, eps);
  return u2;
}

}  // namespace rtm::ref
