#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "rtm/tensor.hpp"

namespace rtm {

struct GradCheckOptions {
  double step = 1e-4;
  double tolerance = 1e-4;
  // 0 = probe every coordinate; otherwise per-leaf random subset of this size.
  int64_t max_coords_per_leaf = 0;
  uint64_t seed = 0;  // keys coordinate subsampling
};

struct GradCheckResult {
  bool pass = true;
  double max_rel_err = 0.0;
  int64_t coords_checked = 0;
  std::string detail;  // first failure: coordinate and the two gradient values
};

// Compares reverse-mode gradients of the scalar f() against central
// differences. f must be a deterministic pure function of the leaf values
// (which are perturbed in place and restored bit-exactly). Relative error is
// |analytic - fd| / max(1e-6, |analytic|, |fd|); non-finite f() evaluations
// are reported as failures, never propagated.
GradCheckResult grad_check(const std::function<Tensor()>& f, std::vector<Tensor> leaves,
                           const GradCheckOptions& opts = {});

}  // namespace rtm
