#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstring>
#include <string>
#include <vector>

#include "rtm/kernels.hpp"
#include "rtm/matrix.hpp"
#include "rtm/reference.hpp"
#include "rtm/rng.hpp"

// Timing comparison between the OpenMP kernels and their serial reference
// implementations, plus a bit-equality check (the kernels are required to
// reproduce the reference exactly, at any thread count).

namespace {

using clock_type = std::chrono::steady_clock;

double median_seconds(std::vector<double>& samples) {
  std::sort(samples.begin(), samples.end());
  size_t n = samples.size();
  return n % 2 == 1 ? samples[n / 2] : 0.5 * (samples[n / 2 - 1] + samples[n / 2]);
}

template <typename F>
double time_median(F&& fn, int passes) {
  std::vector<double> samples;
  samples.reserve(static_cast<size_t>(passes));
  for (int p = 0; p < passes; ++p) {
    auto t0 = clock_type::now();
    fn();
    auto t1 = clock_type::now();
    samples.push_back(std::chrono::duration<double>(t1 - t0).count());
  }
  return median_seconds(samples);
}

rtm::Matrix random_matrix(int64_t rows, int64_t cols, uint64_t seed) {
  rtm::rng::Stream stream(seed, "bench-kernels");
  rtm::Matrix m(rows, cols);
  for (int64_t i = 0; i < rows; ++i)
    for (int64_t j = 0; j < cols; ++j)
      m.at(i, j) = stream.normal(static_cast<uint64_t>(i) * static_cast<uint64_t>(cols) +
                                 static_cast<uint64_t>(j));
  return m;
}

bool bit_equal(const std::vector<double>& a, const std::vector<double>& b) {
  return a.size() == b.size() &&
         std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

}  // namespace

int main(int argc, char** argv) {
  int64_t n = 2048;
  int64_t dim = 16;
  int k = 3;
  int passes = 9;
  for (int i = 1; i + 1 < argc; i += 2) {
    std::string flag = argv[i];
    long long v = std::atoll(argv[i + 1]);
    if (flag == "--n")
      n = v;
    else if (flag == "--dim")
      dim = v;
    else if (flag == "--k")
      k = static_cast<int>(v);
    else if (flag == "--passes")
      passes = static_cast<int>(v);
    else {
      std::fprintf(stderr, "unknown flag %s (expected --n/--dim/--k/--passes)\n", flag.c_str());
      return 2;
    }
  }

  rtm::Matrix a = random_matrix(n, dim, 7);
  rtm::Matrix b = random_matrix(n, dim, 8);

  rtm::Matrix d_kern = rtm::kern::pairwise_sqdist(a, b);
  rtm::Matrix d_ref = rtm::ref::pairwise_sqdist(a, b);
  bool dist_ok = bit_equal(d_kern.data, d_ref.data);
  double t_dist_kern = time_median([&] { rtm::kern::pairwise_sqdist(a, b); }, passes);
  double t_dist_ref = time_median([&] { rtm::ref::pairwise_sqdist(a, b); }, passes);

  std::vector<double> r_kern = rtm::kern::knn_radii(a, k);
  std::vector<double> r_ref = rtm::ref::knn_radii(a, k);
  bool knn_ok = bit_equal(r_kern, r_ref);
  double t_knn_kern = time_median([&] { rtm::kern::knn_radii(a, k); }, passes);
  double t_knn_ref = time_median([&] { rtm::ref::knn_radii(a, k); }, passes);

  std::printf("kernel            n      dim  parallel(s)  serial(s)   speedup  agreement\n");
  std::printf("pairwise_sqdist   %-6lld %-4lld %-12.6f %-11.6f %-8.2f %s\n",
              static_cast<long long>(n), static_cast<long long>(dim), t_dist_kern, t_dist_ref,
              t_dist_ref / t_dist_kern, dist_ok ? "bit-exact" : "MISMATCH");
  std::printf("knn_radii(k=%-2d)   %-6lld %-4lld %-12.6f %-11.6f %-8.2f %s\n", k,
              static_cast<long long>(n), static_cast<long long>(dim), t_knn_kern, t_knn_ref,
              t_knn_ref / t_knn_kern, knn_ok ? "bit-exact" : "MISMATCH");
  return (dist_ok && knn_ok) ? 0 : 1;
}
