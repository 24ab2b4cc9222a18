#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>
#include <vector>

#include "rtm/data.hpp"
#include "rtm/error.hpp"

using namespace rtm;

namespace {

constexpr double kPi = 3.14159265358979323846;

DatasetSpec ring_spec(int64_t n = 200, uint64_t seed = 1) {
  DatasetSpec s;
  s.kind = DatasetKind::gaussian_ring;
  s.n = n;
  s.seed = seed;
  s.modes = 8;
  return s;
}

double dist2(const Matrix& m, int64_t i, double x, double y) {
  double dx = m.at(i, 0) - x, dy = m.at(i, 1) - y;
  return std::sqrt(dx * dx + dy * dy);
}

}  // namespace

TEST_CASE("dataset kind names round-trip") {
  for (DatasetKind k : {DatasetKind::gaussian_ring, DatasetKind::two_moons,
                        DatasetKind::grid_mixture, DatasetKind::micro_patterns})
    CHECK(dataset_kind_from_string(to_string(k)) == k);
  CHECK_THROWS_AS(dataset_kind_from_string("nope"), ConfigError);
}

TEST_CASE("datasets are deterministic in the seed") {
  for (DatasetKind kind : {DatasetKind::gaussian_ring, DatasetKind::two_moons,
                           DatasetKind::grid_mixture, DatasetKind::micro_patterns}) {
    DatasetSpec s = ring_spec(64, 5);
    s.kind = kind;
    if (kind == DatasetKind::grid_mixture) s.modes = 9;
    Dataset a = generate_dataset(s);
    Dataset b = generate_dataset(s);
    CHECK(a.samples.data == b.samples.data);
    CHECK(a.labels == b.labels);
    s.seed = 6;
    Dataset c = generate_dataset(s);
    CHECK(a.samples.data != c.samples.data);
  }
}

TEST_CASE("sample generation is elementwise: prefixes agree across sizes") {
  DatasetSpec small = ring_spec(32, 9);
  DatasetSpec big = ring_spec(128, 9);
  Dataset a = generate_dataset(small);
  Dataset b = generate_dataset(big);
  for (int64_t i = 0; i < small.n; ++i) {
    CHECK(a.samples.at(i, 0) == b.samples.at(i, 0));
    CHECK(a.samples.at(i, 1) == b.samples.at(i, 1));
    CHECK(a.labels[static_cast<size_t>(i)] == b.labels[static_cast<size_t>(i)]);
  }
}

TEST_CASE("zero component noise puts ring samples exactly on their centers") {
  DatasetSpec s = ring_spec(100, 3);
  s.component_std = 0.0;
  Dataset ds = generate_dataset(s);
  for (int64_t i = 0; i < s.n; ++i) {
    int64_t k = ds.labels[static_cast<size_t>(i)];
    double angle = 2.0 * kPi * static_cast<double>(k) / static_cast<double>(s.modes);
    CHECK(ds.samples.at(i, 0) == doctest::Approx(std::cos(angle)).epsilon(1e-12));
    CHECK(ds.samples.at(i, 1) == doctest::Approx(std::sin(angle)).epsilon(1e-12));
  }
}

TEST_CASE("ring samples stay within six sigma of their component centers") {
  DatasetSpec s = ring_spec(500, 11);
  s.component_std = 0.05;
  s.ring_radius = 2.0;
  Dataset ds = generate_dataset(s);
  Matrix centers = mode_geometry(s).centers;
  for (int64_t i = 0; i < s.n; ++i) {
    int64_t k = ds.labels[static_cast<size_t>(i)];
    double d = dist2(ds.samples, i, centers.at(k, 0), centers.at(k, 1));
    CHECK(d < 6.0 * s.component_std * std::sqrt(2.0));
  }
}

TEST_CASE("component labels are roughly uniform") {
  DatasetSpec s = ring_spec(8000, 13);
  Dataset ds = generate_dataset(s);
  std::vector<int64_t> counts(static_cast<size_t>(s.modes), 0);
  for (int64_t lab : ds.labels) {
    REQUIRE(lab >= 0);
    REQUIRE(lab < s.modes);
    ++counts[static_cast<size_t>(lab)];
  }
  double expect = static_cast<double>(s.n) / static_cast<double>(s.modes);
  double sigma = std::sqrt(expect * (1.0 - 1.0 / static_cast<double>(s.modes)));
  for (int64_t c : counts) CHECK(std::abs(static_cast<double>(c) - expect) < 5.0 * sigma);
}

TEST_CASE("grid mixture lays its centers on a lattice") {
  DatasetSpec s = ring_spec(10, 1);
  s.kind = DatasetKind::grid_mixture;
  s.modes = 4;
  Matrix centers = mode_geometry(s).centers;
  REQUIRE(centers.rows == 4);
  std::set<std::pair<double, double>> seen;
  for (int64_t i = 0; i < 4; ++i) {
    CHECK(std::abs(centers.at(i, 0)) == 1.0);
    CHECK(std::abs(centers.at(i, 1)) == 1.0);
    seen.insert({centers.at(i, 0), centers.at(i, 1)});
  }
  CHECK(seen.size() == 4);  // all corners distinct
  s.modes = 5;
  CHECK_THROWS_AS(generate_dataset(s), ConfigError);
}

TEST_CASE("two moons samples lie near one of the two arcs") {
  DatasetSpec s = ring_spec(400, 17);
  s.kind = DatasetKind::two_moons;
  s.moon_noise = 0.02;
  Dataset ds = generate_dataset(s);
  int64_t on_moon[2] = {0, 0};
  for (int64_t i = 0; i < s.n; ++i) {
    int64_t lab = ds.labels[static_cast<size_t>(i)];
    REQUIRE((lab == 0 || lab == 1));
    ++on_moon[lab];
    double x = ds.samples.at(i, 0), y = ds.samples.at(i, 1);
    // Distance to the labeled arc stays within 6 sigma of the noise scale
    // (per-axis normal noise, combined radial deviation < 6*sqrt(2)*sigma).
    double best = 1e9;
    for (int t = 0; t <= 200; ++t) {
      double a = kPi * static_cast<double>(t) / 200.0;
      double mx = lab == 0 ? std::cos(a) : 1.0 - std::cos(a);
      double my = lab == 0 ? std::sin(a) : 0.5 - std::sin(a);
      double dx = x - mx, dy = y - my;
      best = std::min(best, std::sqrt(dx * dx + dy * dy));
    }
    CHECK(best < 6.0 * std::sqrt(2.0) * s.moon_noise + 0.01);
  }
  CHECK(on_moon[0] > s.n / 4);
  CHECK(on_moon[1] > s.n / 4);
}

TEST_CASE("zero-noise moons trace the exact parametric arcs") {
  DatasetSpec s = ring_spec(100, 19);
  s.kind = DatasetKind::two_moons;
  s.moon_noise = 0.0;
  Dataset ds = generate_dataset(s);
  for (int64_t i = 0; i < s.n; ++i) {
    double x = ds.samples.at(i, 0), y = ds.samples.at(i, 1);
    if (ds.labels[static_cast<size_t>(i)] == 0) {
      CHECK(x * x + y * y == doctest::Approx(1.0).epsilon(1e-9));
      CHECK(y >= -1e-12);  // upper arc only
    } else {
      double cx = 1.0 - x, cy = 0.5 - y;
      CHECK(cx * cx + cy * cy == doctest::Approx(1.0).epsilon(1e-9));
    }
  }
}

TEST_CASE("micro patterns have image shape and palette-bounded labels") {
  DatasetSpec s = ring_spec(60, 23);
  s.kind = DatasetKind::micro_patterns;
  s.palette = 16;
  Dataset ds = generate_dataset(s);
  CHECK(ds.sample_shape == Shape{3, 8, 8});
  CHECK(ds.samples.cols == 192);
  CHECK(s.sample_dim() == 192);
  for (int64_t lab : ds.labels) {
    CHECK(lab >= 0);
    CHECK(lab < s.palette);
  }
  // Base colors live in [0.1, 0.9]; per-channel jitter is small.
  for (double v : ds.samples.data) {
    CHECK(v > 0.1 - 6.0 * s.component_std);
    CHECK(v < 0.9 + 6.0 * s.component_std);
  }
}

TEST_CASE("micro pattern jitter is a per-channel constant shift") {
  DatasetSpec s = ring_spec(40, 29);
  s.kind = DatasetKind::micro_patterns;
  Dataset ds = generate_dataset(s);
  DatasetSpec clean = s;
  clean.component_std = 0.0;
  ModeGeometry g = mode_geometry(clean);
  for (int64_t i = 0; i < s.n; ++i) {
    int64_t k = ds.labels[static_cast<size_t>(i)];
    // Subtracting the class base pattern leaves one constant per channel.
    for (int64_t c = 0; c < 3; ++c) {
      double first = ds.samples.at(i, c * 64) - g.centers.at(k, c * 64);
      for (int64_t j = 1; j < 64; ++j) {
        double diff = ds.samples.at(i, c * 64 + j) - g.centers.at(k, c * 64 + j);
        CHECK(std::abs(diff - first) < 1e-12);
      }
    }
  }
}

TEST_CASE("mode geometry radius is forty-five percent of the smallest gap") {
  DatasetSpec s = ring_spec(10, 1);
  s.modes = 8;
  s.ring_radius = 1.0;
  ModeGeometry g = mode_geometry(s);
  REQUIRE(g.centers.rows == 8);
  double gap = 2.0 * std::sin(kPi / 8.0);  // adjacent chord length on the unit circle
  CHECK(g.radius == doctest::Approx(0.45 * gap).epsilon(1e-12));

  DatasetSpec grid = s;
  grid.kind = DatasetKind::grid_mixture;
  grid.modes = 4;
  ModeGeometry gg = mode_geometry(grid);
  CHECK(gg.radius == doctest::Approx(0.45 * 2.0).epsilon(1e-12));  // corner spacing 2
}

TEST_CASE("mode geometry rejects shapes without disjoint components") {
  DatasetSpec s = ring_spec(10, 1);
  s.kind = DatasetKind::two_moons;
  CHECK(!has_mode_geometry(s));
  CHECK_THROWS_AS(mode_geometry(s), ConfigError);
  DatasetSpec one = ring_spec(10, 1);
  one.modes = 1;
  CHECK(!has_mode_geometry(one));
  CHECK_THROWS_AS(mode_geometry(one), ConfigError);
}

TEST_CASE("spec validation rejects out-of-range fields") {
  DatasetSpec s = ring_spec();
  s.n = 0;
  CHECK_THROWS_AS(s.validate(), ConfigError);
  s = ring_spec();
  s.component_std = -0.1;
  CHECK_THROWS_AS(s.validate(), ConfigError);
  s = ring_spec();
  s.palette = 0;
  CHECK_THROWS_AS(s.validate(), ConfigError);
  s = ring_spec();
  s.palette = 257;
  CHECK_THROWS_AS(s.validate(), ConfigError);
  s = ring_spec();
  s.ring_radius = 0.0;
  CHECK_THROWS_AS(s.validate(), ConfigError);
}
