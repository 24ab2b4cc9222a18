#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "rtm/error.hpp"
#include "rtm/matrix.hpp"

// Reverse-mode automatic differentiation over small dense tensors.
//
// Design in one paragraph: a Tensor is a shared handle to a node holding
// values (and, after backward(), a gradient buffer). Operations compute
// eagerly in float64. While a Tape is active (TapeScope) and at least one
// input requires grad, the op appends a record with a closure that propagates
// the output gradient to its inputs; backward(loss) zeroes every touched
// gradient buffer, seeds d(loss)=1 and replays the records in reverse. The
// tape is an arena: the trainer clears it once per step. detach() and
// GradPause are the two ways to cut the graph — both simply stop records from
// being created, so gradients never flow past them.
//
// Determinism: no threading touches the tape, closures replay in a fixed
// order, and repeated backward() calls re-zero and re-accumulate, so values
// and gradients are bit-identical across runs and across repeated calls.

namespace rtm {

using Shape = std::vector<int64_t>;

int64_t shape_numel(const Shape& s);
std::string shape_str(const Shape& s);

struct TensorNode {
  Shape shape;
  std::vector<double> values;
  std::vector<double> grad;  // sized lazily by backward()
  bool requires_grad = false;
};

class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::shared_ptr<TensorNode> n) : node_(std::move(n)) {}

  static Tensor zeros(Shape shape);
  static Tensor full(Shape shape, double value);
  static Tensor from_values(Shape shape, std::vector<double> values);
  static Tensor scalar(double value);
  // Copies one row of a gradient-free sample matrix into a {cols} tensor.
  static Tensor from_row(const Matrix& m, int64_t row);

  bool defined() const { return static_cast<bool>(node_); }
  const Shape& shape() const { return node_->shape; }
  int64_t numel() const { return static_cast<int64_t>(node_->values.size()); }
  int64_t dim(size_t i) const { return node_->shape[i]; }
  size_t ndim() const { return node_->shape.size(); }

  std::vector<double>& values() { return node_->values; }
  const std::vector<double>& values() const { return node_->values; }
  double* data() { return node_->values.data(); }
  const double* data() const { return node_->values.data(); }
  double item() const;

  bool requires_grad() const { return node_->requires_grad; }
  Tensor& set_requires_grad(bool b) {
    node_->requires_grad = b;
    return *this;
  }

  // Gradient from the most recent backward(); zeros if this tensor was not
  // reached (detached branches, unused leaves).
  std::vector<double> grad() const;

  std::shared_ptr<TensorNode> node() const { return node_; }

 private:
  std::shared_ptr<TensorNode> node_;
};

class Tape {
 public:
  struct Record {
    std::vector<std::shared_ptr<TensorNode>> inputs;
    std::shared_ptr<TensorNode> output;
    std::function<void()> backprop;  // reads output->grad, accumulates input grads
  };

  size_t size() const { return records_.size(); }
  void clear() { records_.clear(); }
  void push(Record r) { records_.push_back(std::move(r)); }
  const std::vector<Record>& records() const { return records_; }

 private:
  std::vector<Record> records_;
};

// Thread-local active tape; null when none is in scope.
Tape* active_tape();

// Activates a tape for the lifetime of the scope.
class TapeScope {
 public:
  explicit TapeScope(Tape& t);
  ~TapeScope();
  TapeScope(const TapeScope&) = delete;
  TapeScope& operator=(const TapeScope&) = delete;

 private:
  Tape* prev_;
};

// Suspends recording (gradient-free region) for the lifetime of the scope.
class GradPause {
 public:
  GradPause();
  ~GradPause();
  GradPause(const GradPause&) = delete;
  GradPause& operator=(const GradPause&) = delete;

 private:
  Tape* prev_;
};

// ----- elementwise and structural ops -----
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);
// Adds vector v (length c) to every row of the r x c matrix m.
Tensor add_rowvec(const Tensor& m, const Tensor& v);
Tensor reshape(const Tensor& a, Shape shape);
Tensor transpose(const Tensor& a);
Tensor concat_cols(const Tensor& a, const Tensor& b);
Tensor slice_cols(const Tensor& a, int64_t c0, int64_t c1);
Tensor slice_vec(const Tensor& a, int64_t i0, int64_t i1);

// ----- contractions -----
Tensor matmul(const Tensor& a, const Tensor& b);     // (r,k) x (k,c)
Tensor matmul_nt(const Tensor& a, const Tensor& b);  // (r,k) x (c,k)^T -> (r,c)
Tensor matvec(const Tensor& w, const Tensor& x);     // (r,c) x {c} -> {r}

// ----- reductions -----
Tensor sum_all(const Tensor& a);   // -> {1}
Tensor mean_all(const Tensor& a);  // -> {1}

// ----- nonlinearities -----
Tensor silu(const Tensor& a);
Tensor gelu(const Tensor& a);  // exact erf form
Tensor leaky_relu(const Tensor& a, double slope);
Tensor softmax_rows(const Tensor& a);

// ----- normalizations -----
// Per-row x / sqrt(mean(x^2) + eps); a 1-D tensor is one row.
Tensor rms_norm(const Tensor& a, double eps = 1e-6);
// Per-row (x - mean) / sqrt(var + eps), population variance, no affine.
Tensor layer_norm(const Tensor& a, double eps = 1e-5);
// x is channels x positions; per-channel standardization, then per-channel
// scale/shift (each of length channels).
Tensor adain(const Tensor& x, const Tensor& scale_c, const Tensor& shift_c, double eps = 1e-5);

// ----- spatial ops (channels-first {C,H,W}) -----
// Stride-1 convolution with same padding; w is {F,C,k,k} with odd k, b is {F}.
Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b);
Tensor upsample_nearest_2x(const Tensor& x);

// Value copy with the graph connection severed.
Tensor detach(const Tensor& a);

// Reverse pass from a scalar loss recorded on the active tape.
void backward(const Tensor& loss);

// Rounds every value through IEEE float32. All persistent state (parameters,
// optimizer moments, EMA shadow, pool latents) is kept float32-representable
// so the float32 checkpoint format round-trips losslessly and resumed runs
// are bit-identical; transient math stays float64.
void round_to_float32(Tensor& t);

bool all_finite(const Tensor& t);

}  // namespace rtm
