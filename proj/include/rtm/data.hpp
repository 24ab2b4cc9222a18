#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rtm/matrix.hpp"
#include "rtm/tensor.hpp"

// Synthetic training distributions. Every sample is derived from counter-mode
// RNG streams keyed by (seed, purpose, sample index), so datasets are
// reproducible elementwise: sample i does not depend on how many samples
// precede it.

namespace rtm {

enum class DatasetKind { gaussian_ring, two_moons, grid_mixture, micro_patterns };

DatasetKind dataset_kind_from_string(const std::string& s);
std::string to_string(DatasetKind kind);

struct DatasetSpec {
  DatasetKind kind = DatasetKind::gaussian_ring;
  int64_t n = 256;
  uint64_t seed = 1;
  int64_t modes = 8;           // mixture components (ring / grid)
  double ring_radius = 1.0;    // gaussian_ring center circle radius
  double component_std = 0.05; // per-component noise (also micro jitter scale)
  double moon_noise = 0.05;    // two_moons additive noise
  int64_t palette = 16;        // micro_patterns class count

  void validate() const;
  Shape sample_shape() const;
  int64_t sample_dim() const { return shape_numel(sample_shape()); }
};

struct Dataset {
  Matrix samples;               // n x sample_dim, flattened row-major
  std::vector<int64_t> labels;  // component / class index per sample
  Shape sample_shape;
};

Dataset generate_dataset(const DatasetSpec& spec);

// Disjoint-ball summary of a mixture's modes, for mode-coverage counting.
// radius = 0.45 * (smallest inter-center distance), strictly below the
// disjointness limit of 0.5. Undefined (throws) for two_moons and for
// single-component mixtures.
struct ModeGeometry {
  Matrix centers;
  double radius = 0.0;
};

bool has_mode_geometry(const DatasetSpec& spec);
ModeGeometry mode_geometry(const DatasetSpec& spec);

}  // namespace rtm
