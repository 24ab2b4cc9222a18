#include "rtm/data.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "rtm/error.hpp"
#include "rtm/kernels.hpp"
#include "rtm/rng.hpp"

namespace rtm {

namespace {

constexpr double kPi = 3.14159265358979323846;

constexpr int64_t kMicroChannels = 3;
constexpr int64_t kMicroHw = 8;
constexpr int64_t kMicroDim = kMicroChannels * kMicroHw * kMicroHw;

// Integer grid side for grid_mixture; modes must be a perfect square.
int64_t grid_side(int64_t modes) {
  int64_t side = static_cast<int64_t>(std::llround(std::sqrt(static_cast<double>(modes))));
  if (side * side != modes)
    throw ConfigError("dataset.modes: grid_mixture needs a perfect square, got " +
                      std::to_string(modes));
  return side;
}

Matrix ring_centers(const DatasetSpec& spec) {
  Matrix c(spec.modes, 2);
  for (int64_t k = 0; k < spec.modes; ++k) {
    double angle = 2.0 * kPi * static_cast<double>(k) / static_cast<double>(spec.modes);
    c.at(k, 0) = spec.ring_radius * std::cos(angle);
    c.at(k, 1) = spec.ring_radius * std::sin(angle);
  }
  return c;
}

Matrix grid_centers(const DatasetSpec& spec) {
  int64_t side = grid_side(spec.modes);
  Matrix c(spec.modes, 2);
  for (int64_t gx = 0; gx < side; ++gx) {
    for (int64_t gy = 0; gy < side; ++gy) {
      int64_t k = gx * side + gy;
      if (side == 1) {
        c.at(k, 0) = 0.0;
        c.at(k, 1) = 0.0;
      } else {
        c.at(k, 0) = -1.0 + 2.0 * static_cast<double>(gx) / static_cast<double>(side - 1);
        c.at(k, 1) = -1.0 + 2.0 * static_cast<double>(gy) / static_cast<double>(side - 1);
      }
    }
  }
  return c;
}

// Jitter-free base image for micro-pattern class k, channel-major layout.
// Classes cycle through stripes / checkers / diagonal gradients with
// class-dependent period and a stable pseudo-random two-color palette.
void micro_base_pattern(int64_t k, double* out /* kMicroDim */) {
  const int64_t family = k % 4;  // 0 h-stripes, 1 v-stripes, 2 checker, 3 gradient
  const int64_t period = 2 + (k / 4) % 3;
  auto palette_color = [&](int64_t slot, int64_t ch) {
    uint64_t bits = rng::mix64(static_cast<uint64_t>(k) * 6364136223846793005ULL +
                               static_cast<uint64_t>(slot * 3 + ch) + 1442695040888963407ULL);
    return 0.1 + 0.8 * static_cast<double>(bits >> 11) * 0x1.0p-53;
  };
  for (int64_t c = 0; c < kMicroChannels; ++c) {
    double lo = palette_color(0, c);
    double hi = palette_color(1, c);
    for (int64_t y = 0; y < kMicroHw; ++y) {
      for (int64_t x = 0; x < kMicroHw; ++x) {
        double v;
        if (family == 3) {
          v = lo + (hi - lo) * static_cast<double>(x + y) / (2.0 * (kMicroHw - 1));
        } else {
          bool bit;
          if (family == 0)
            bit = (y / period) % 2 == 0;
          else if (family == 1)
            bit = (x / period) % 2 == 0;
          else
            bit = ((x / period) + (y / period)) % 2 == 0;
          v = bit ? hi : lo;
        }
        out[c * kMicroHw * kMicroHw + y * kMicroHw + x] = v;
      }
    }
  }
}

Matrix micro_centers(const DatasetSpec& spec) {
  Matrix c(spec.palette, kMicroDim);
  for (int64_t k = 0; k < spec.palette; ++k) micro_base_pattern(k, c.row(k));
  return c;
}

Dataset mixture_dataset(const DatasetSpec& spec, const Matrix& centers) {
  rng::Stream label_stream(spec.seed, "data-label");
  rng::Stream noise_stream(spec.seed, "data-noise");
  Dataset ds;
  ds.sample_shape = {2};
  ds.samples = Matrix(spec.n, 2);
  ds.labels.resize(static_cast<size_t>(spec.n));
  for (int64_t i = 0; i < spec.n; ++i) {
    int64_t k = static_cast<int64_t>(label_stream.below(static_cast<uint64_t>(i),
                                                        static_cast<uint64_t>(centers.rows)));
    ds.labels[static_cast<size_t>(i)] = k;
    ds.samples.at(i, 0) =
        centers.at(k, 0) + spec.component_std * noise_stream.normal(2 * static_cast<uint64_t>(i));
    ds.samples.at(i, 1) = centers.at(k, 1) +
                          spec.component_std * noise_stream.normal(2 * static_cast<uint64_t>(i) + 1);
  }
  return ds;
}

Dataset moons_dataset(const DatasetSpec& spec) {
  rng::Stream label_stream(spec.seed, "data-label");
  rng::Stream shape_stream(spec.seed, "data-shape");
  rng::Stream noise_stream(spec.seed, "data-noise");
  Dataset ds;
  ds.sample_shape = {2};
  ds.samples = Matrix(spec.n, 2);
  ds.labels.resize(static_cast<size_t>(spec.n));
  for (int64_t i = 0; i < spec.n; ++i) {
    int64_t moon = static_cast<int64_t>(label_stream.below(static_cast<uint64_t>(i), 2));
    double t = kPi * shape_stream.uniform(static_cast<uint64_t>(i));
    double x, y;
    if (moon == 0) {
      x = std::cos(t);
      y = std::sin(t);
    } else {
      x = 1.0 - std::cos(t);
      y = 0.5 - std::sin(t);
    }
    ds.labels[static_cast<size_t>(i)] = moon;
    ds.samples.at(i, 0) = x + spec.moon_noise * noise_stream.normal(2 * static_cast<uint64_t>(i));
    ds.samples.at(i, 1) =
        y + spec.moon_noise * noise_stream.normal(2 * static_cast<uint64_t>(i) + 1);
  }
  return ds;
}

Dataset micro_dataset(const DatasetSpec& spec) {
  rng::Stream label_stream(spec.seed, "data-label");
  rng::Stream noise_stream(spec.seed, "data-noise");
  Matrix centers = micro_centers(spec);
  Dataset ds;
  ds.sample_shape = {kMicroChannels, kMicroHw, kMicroHw};
  ds.samples = Matrix(spec.n, kMicroDim);
  ds.labels.resize(static_cast<size_t>(spec.n));
  for (int64_t i = 0; i < spec.n; ++i) {
    int64_t k = static_cast<int64_t>(label_stream.below(static_cast<uint64_t>(i),
                                                        static_cast<uint64_t>(spec.palette)));
    ds.labels[static_cast<size_t>(i)] = k;
    // Per-sample color jitter: one shift per channel, shared by all pixels,
    // so each class stays a tight 3-parameter mode in sample space.
    double shift[kMicroChannels];
    for (int64_t c = 0; c < kMicroChannels; ++c)
      shift[c] = spec.component_std *
                 noise_stream.normal(kMicroChannels * static_cast<uint64_t>(i) +
                                     static_cast<uint64_t>(c));
    double* row = ds.samples.row(i);
    for (int64_t j = 0; j < kMicroDim; ++j)
      row[j] = centers.at(k, j) + shift[j / (kMicroHw * kMicroHw)];
  }
  return ds;
}

}  // namespace

DatasetKind dataset_kind_from_string(const std::string& s) {
  if (s == "gaussian_ring") return DatasetKind::gaussian_ring;
  if (s == "two_moons") return DatasetKind::two_moons;
  if (s == "grid_mixture") return DatasetKind::grid_mixture;
  if (s == "micro_patterns") return DatasetKind::micro_patterns;
  throw ConfigError("dataset.kind: unknown value \"" + s + "\"");
}

std::string to_string(DatasetKind kind) {
  switch (kind) {
    case DatasetKind::gaussian_ring: return "gaussian_ring";
    case DatasetKind::two_moons: return "two_moons";
    case DatasetKind::grid_mixture: return "grid_mixture";
    case DatasetKind::micro_patterns: return "micro_patterns";
  }
  throw std::logic_error("unreachable dataset kind");
}

void DatasetSpec::validate() const {
  if (n < 1) throw ConfigError("dataset.n: must be >= 1, got " + std::to_string(n));
  if (modes < 1) throw ConfigError("dataset.modes: must be >= 1, got " + std::to_string(modes));
  if (!(ring_radius > 0.0)) throw ConfigError("dataset.ring_radius: must be > 0");
  if (!(component_std >= 0.0)) throw ConfigError("dataset.component_std: must be >= 0");
  if (!(moon_noise >= 0.0)) throw ConfigError("dataset.moon_noise: must be >= 0");
  if (palette < 1 || palette > 256)
    throw ConfigError("dataset.palette: must be in [1, 256], got " + std::to_string(palette));
  if (kind == DatasetKind::grid_mixture) grid_side(modes);
}

Shape DatasetSpec::sample_shape() const {
  if (kind == DatasetKind::micro_patterns) return {kMicroChannels, kMicroHw, kMicroHw};
  return {2};
}

Dataset generate_dataset(const DatasetSpec& spec) {
  spec.validate();
  switch (spec.kind) {
    case DatasetKind::gaussian_ring: return mixture_dataset(spec, ring_centers(spec));
    case DatasetKind::two_moons: return moons_dataset(spec);
    case DatasetKind::grid_mixture: return mixture_dataset(spec, grid_centers(spec));
    case DatasetKind::micro_patterns: return micro_dataset(spec);
  }
  throw std::logic_error("unreachable dataset kind");
}

bool has_mode_geometry(const DatasetSpec& spec) {
  switch (spec.kind) {
    case DatasetKind::gaussian_ring:
    case DatasetKind::grid_mixture: return spec.modes > 1;
    case DatasetKind::micro_patterns: return spec.palette > 1;
    case DatasetKind::two_moons: return false;
  }
  return false;
}

ModeGeometry mode_geometry(const DatasetSpec& spec) {
  spec.validate();
  if (!has_mode_geometry(spec))
    throw ConfigError("dataset.kind: mode geometry needs a mixture with >= 2 components");
  ModeGeometry g;
  switch (spec.kind) {
    case DatasetKind::gaussian_ring: g.centers = ring_centers(spec); break;
    case DatasetKind::grid_mixture: g.centers = grid_centers(spec); break;
    case DatasetKind::micro_patterns: g.centers = micro_centers(spec); break;
    case DatasetKind::two_moons: throw std::logic_error("unreachable");
  }
  Matrix gaps = kern::pairwise_sqdist(g.centers, g.centers);
  double min_gap_sq = std::numeric_limits<double>::infinity();
  for (int64_t i = 0; i < g.centers.rows; ++i)
    for (int64_t j = 0; j < g.centers.rows; ++j)
      if (i != j && gaps.at(i, j) < min_gap_sq) min_gap_sq = gaps.at(i, j);
  g.radius = 0.45 * std::sqrt(min_gap_sq);
  return g;
}

}  // namespace rtm
