#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

#include "rtm/rng.hpp"

using namespace rtm;

TEST_CASE("streams are pure functions of (seed, tag, salt, counter)") {
  rng::Stream a(42, "init", 7);
  rng::Stream b(42, "init", 7);
  for (uint64_t c = 0; c < 100; ++c) {
    CHECK(a.bits(c) == b.bits(c));
    CHECK(a.uniform(c) == b.uniform(c));
    CHECK(a.normal(c) == b.normal(c));
  }
}

TEST_CASE("seed, tag and salt all separate streams") {
  rng::Stream base(42, "init", 0);
  rng::Stream other_seed(43, "init", 0);
  rng::Stream other_tag(42, "pool", 0);
  rng::Stream other_salt(42, "init", 1);
  int differ_seed = 0, differ_tag = 0, differ_salt = 0;
  for (uint64_t c = 0; c < 64; ++c) {
    differ_seed += base.bits(c) != other_seed.bits(c);
    differ_tag += base.bits(c) != other_tag.bits(c);
    differ_salt += base.bits(c) != other_salt.bits(c);
  }
  CHECK(differ_seed == 64);
  CHECK(differ_tag == 64);
  CHECK(differ_salt == 64);
}

TEST_CASE("counter order does not matter") {
  rng::Stream s(7, "eval");
  double late = s.uniform(1000);
  double early = s.uniform(3);
  rng::Stream t(7, "eval");
  CHECK(t.uniform(3) == early);
  CHECK(t.uniform(1000) == late);
}

TEST_CASE("uniform range and moments") {
  rng::Stream s(1, "test-uniform");
  const int n = 200000;
  double sum = 0.0, sum_sq = 0.0;
  for (int i = 0; i < n; ++i) {
    double u = s.uniform(static_cast<uint64_t>(i));
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
    sum += u;
    sum_sq += u * u;
  }
  double mean = sum / n;
  double var = sum_sq / n - mean * mean;
  // SE(mean) ~ 1/sqrt(12 n) ~ 6.5e-4; allow 5 sigma.
  CHECK(std::abs(mean - 0.5) < 5.0 / std::sqrt(12.0 * n));
  CHECK(std::abs(var - 1.0 / 12.0) < 0.002);
}

TEST_CASE("normal moments and finiteness") {
  rng::Stream s(1, "test-normal");
  const int n = 200000;
  double sum = 0.0, sum_sq = 0.0, sum_cu = 0.0;
  for (int i = 0; i < n; ++i) {
    double z = s.normal(static_cast<uint64_t>(i));
    REQUIRE(std::isfinite(z));
    sum += z;
    sum_sq += z * z;
    sum_cu += z * z * z;
  }
  double mean = sum / n;
  double var = sum_sq / n - mean * mean;
  double skew = sum_cu / n;
  CHECK(std::abs(mean) < 5.0 / std::sqrt(static_cast<double>(n)));        // 5 sigma
  CHECK(std::abs(var - 1.0) < 0.02);
  CHECK(std::abs(skew) < 0.05);  // E[z^3] = 0, SE ~ sqrt(15/n) ~ 0.0087
}

TEST_CASE("box-muller consumes disjoint counter pairs") {
  // normal(c) reads uniforms 2c and 2c+1, so adjacent draws never share
  // inputs and the same draw is reproducible in isolation.
  rng::Stream s(9, "test-bm");
  double z5 = s.normal(5);
  double u10 = s.uniform(10);
  double u11 = s.uniform(11);
  double r = std::sqrt(-2.0 * std::log1p(-u10));
  CHECK(z5 == doctest::Approx(r * std::cos(2.0 * M_PI * u11)).epsilon(1e-15));
  CHECK(s.normal(5) == z5);
}

TEST_CASE("below stays in range and is roughly uniform") {
  rng::Stream s(3, "test-below");
  const uint64_t n = 10;
  std::vector<int> counts(n, 0);
  const int draws = 100000;
  for (int i = 0; i < draws; ++i) {
    uint64_t v = s.below(static_cast<uint64_t>(i), n);
    REQUIRE(v < n);
    counts[v]++;
  }
  for (uint64_t k = 0; k < n; ++k)
    CHECK(std::abs(counts[k] - draws / static_cast<int>(n)) < 500);  // ~5 sigma
}

TEST_CASE("sample_without_replacement is valid and deterministic") {
  rng::Stream s(11, "batch", 17);
  auto pick = rng::sample_without_replacement(s, 100, 32);
  REQUIRE(pick.size() == 32);
  std::set<int64_t> uniq(pick.begin(), pick.end());
  CHECK(uniq.size() == 32);
  for (int64_t v : pick) {
    CHECK(v >= 0);
    CHECK(v < 100);
  }
  rng::Stream t(11, "batch", 17);
  CHECK(rng::sample_without_replacement(t, 100, 32) == pick);

  SUBCASE("k equal to n is a permutation") {
    rng::Stream u(5, "batch", 0);
    auto perm = rng::sample_without_replacement(u, 16, 16);
    std::set<int64_t> all(perm.begin(), perm.end());
    CHECK(all.size() == 16);
  }
  SUBCASE("every index can appear in position 0") {
    std::set<int64_t> seen;
    for (uint64_t salt = 0; salt < 200; ++salt) {
      rng::Stream u(5, "batch", salt);
      seen.insert(rng::sample_without_replacement(u, 8, 1)[0]);
    }
    CHECK(seen.size() == 8);
  }
}

TEST_CASE("fill_normal matches per-counter draws") {
  rng::Stream s(2, "init", 4);
  std::vector<double> out(50);
  rng::fill_normal(s, out);
  for (size_t i = 0; i < out.size(); ++i) CHECK(out[i] == s.normal(i));
}

TEST_CASE("mix64 scrambles single-bit differences") {
  // Flipping one input bit should flip roughly half the output bits.
  for (int bit = 0; bit < 64; ++bit) {
    uint64_t a = rng::mix64(0x1234567890abcdefull);
    uint64_t b = rng::mix64(0x1234567890abcdefull ^ (1ull << bit));
    int flipped = __builtin_popcountll(a ^ b);
    CHECK(flipped > 10);
    CHECK(flipped < 54);
  }
}
