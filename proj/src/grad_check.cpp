#include "rtm/grad_check.hpp"

#include <cmath>

#include "rtm/rng.hpp"

namespace rtm {

namespace {
std::string coord_name(size_t leaf, int64_t idx) {
  return "leaf " + std::to_string(leaf) + " coord " + std::to_string(idx);
}
}  // namespace

GradCheckResult grad_check(const std::function<Tensor()>& f, std::vector<Tensor> leaves,
                           const GradCheckOptions& opts) {
  GradCheckResult res;
  for (auto& leaf : leaves) leaf.set_requires_grad(true);

  std::vector<std::vector<double>> analytic;
  {
    Tape tape;
    TapeScope scope(tape);
    Tensor loss = f();
    if (loss.numel() != 1) throw ShapeError("grad_check: f() must return a scalar");
    if (!std::isfinite(loss.item())) {
      res.pass = false;
      res.detail = "non-finite loss in analytic pass";
      return res;
    }
    backward(loss);
    analytic.reserve(leaves.size());
    for (const auto& leaf : leaves) analytic.push_back(leaf.grad());
  }

  GradPause pause;  // finite differences never record
  auto eval = [&f]() { return f().item(); };

  for (size_t li = 0; li < leaves.size(); ++li) {
    Tensor& leaf = leaves[li];
    int64_t n = leaf.numel();
    std::vector<int64_t> coords;
    if (opts.max_coords_per_leaf > 0 && n > opts.max_coords_per_leaf) {
      rng::Stream pick(opts.seed, "grad-check-coords", static_cast<uint64_t>(li));
      coords = rng::sample_without_replacement(pick, n, opts.max_coords_per_leaf);
    } else {
      coords.resize(static_cast<size_t>(n));
      for (int64_t i = 0; i < n; ++i) coords[static_cast<size_t>(i)] = i;
    }
    for (int64_t idx : coords) {
      double orig = leaf.data()[idx];
      leaf.data()[idx] = orig + opts.step;
      double fp = eval();
      leaf.data()[idx] = orig - opts.step;
      double fm = eval();
      leaf.data()[idx] = orig;
      ++res.coords_checked;
      if (!std::isfinite(fp) || !std::isfinite(fm)) {
        res.pass = false;
        if (res.detail.empty()) res.detail = "non-finite f() at " + coord_name(li, idx);
        continue;
      }
      double fd = (fp - fm) / (2.0 * opts.step);
      double a = analytic[li][static_cast<size_t>(idx)];
      double rel = std::abs(a - fd) / std::max({1e-6, std::abs(a), std::abs(fd)});
      res.max_rel_err = std::max(res.max_rel_err, rel);
      if (rel > opts.tolerance && res.pass) {
        res.pass = false;
        res.detail = coord_name(li, idx) + ": analytic " + std::to_string(a) + " vs fd " +
                     std::to_string(fd);
      }
    }
  }
  return res;
}

}  // namespace rtm
