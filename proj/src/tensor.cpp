#include "rtm/tensor.hpp"

#include <cmath>
#include <utility>

namespace rtm {

namespace {

thread_local Tape* g_active_tape = nullptr;

using NodePtr = std::shared_ptr<TensorNode>;

NodePtr new_node(Shape shape, std::vector<double> values, bool requires_grad) {
  auto n = std::make_shared<TensorNode>();
  n->shape = std::move(shape);
  n->values = std::move(values);
  n->requires_grad = requires_grad;
  return n;
}

bool tracing(const Tensor& a) { return g_active_tape && a.requires_grad(); }
bool tracing(const Tensor& a, const Tensor& b) {
  return g_active_tape && (a.requires_grad() || b.requires_grad());
}
bool tracing(const Tensor& a, const Tensor& b, const Tensor& c) {
  return g_active_tape && (a.requires_grad() || b.requires_grad() || c.requires_grad());
}

void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape())
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
}

void require_ndim(const char* op, const Tensor& a, size_t nd) {
  if (a.ndim() != nd)
    throw ShapeError(std::string(op) + ": expected " + std::to_string(nd) +
                     "-d tensor, got shape " + shape_str(a.shape()));
}

}  // namespace

int64_t shape_numel(const Shape& s) {
  int64_t n = 1;
  for (int64_t d : s) n *= d;
  return n;
}

std::string shape_str(const Shape& s) {
  std::string out = "{";
  for (size_t i = 0; i < s.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(s[i]);
  }
  return out + "}";
}

Tensor Tensor::zeros(Shape shape) { return full(std::move(shape), 0.0); }

Tensor Tensor::full(Shape shape, double value) {
  for (int64_t d : shape)
    if (d < 1) throw ShapeError("Tensor: dimensions must be positive, got " + shape_str(shape));
  int64_t n = shape_numel(shape);
  return Tensor(new_node(std::move(shape), std::vector<double>(static_cast<size_t>(n), value),
                         false));
}

Tensor Tensor::from_values(Shape shape, std::vector<double> values) {
  for (int64_t d : shape)
    if (d < 1) throw ShapeError("Tensor: dimensions must be positive, got " + shape_str(shape));
  if (shape_numel(shape) != static_cast<int64_t>(values.size()))
    throw ShapeError("Tensor: " + std::to_string(values.size()) + " values for shape " +
                     shape_str(shape));
  return Tensor(new_node(std::move(shape), std::move(values), false));
}

Tensor Tensor::scalar(double value) { return from_values({1}, {value}); }

Tensor Tensor::from_row(const Matrix& m, int64_t row) {
  if (row < 0 || row >= m.rows) throw ShapeError("Tensor::from_row: row out of range");
  return from_values({m.cols}, std::vector<double>(m.row(row), m.row(row) + m.cols));
}

double Tensor::item() const {
  if (numel() != 1) throw ShapeError("item: tensor has shape " + shape_str(shape()));
  return node_->values[0];
}

std::vector<double> Tensor::grad() const {
  if (node_->grad.size() == node_->values.size()) return node_->grad;
  return std::vector<double>(node_->values.size(), 0.0);
}

Tape* active_tape() { return g_active_tape; }

TapeScope::TapeScope(Tape& t) : prev_(g_active_tape) { g_active_tape = &t; }
TapeScope::~TapeScope() { g_active_tape = prev_; }

GradPause::GradPause() : prev_(g_active_tape) { g_active_tape = nullptr; }
GradPause::~GradPause() { g_active_tape = prev_; }

// ----- elementwise -----

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape("add", a, b);
  size_t n = a.values().size();
  std::vector<double> v(n);
  for (size_t i = 0; i < n; ++i) v[i] = a.data()[i] + b.data()[i];
  bool rec = tracing(a, b);
  auto out = new_node(a.shape(), std::move(v), rec);
  if (rec) {
    g_active_tape->push({{a.node(), b.node()},
                         out,
                         [an = a.node(), bn = b.node(), out] {
                           const double* g = out->grad.data();
                           size_t n = out->values.size();
                           if (an->requires_grad)
                             for (size_t i = 0; i < n; ++i) an->grad[i] += g[i];
                           if (bn->requires_grad)
                             for (size_t i = 0; i < n; ++i) bn->grad[i] += g[i];
                         }});
  }
  return Tensor(out);
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape("sub", a, b);
  size_t n = a.values().size();
  std::vector<double> v(n);
  for (size_t i = 0; i < n; ++i) v[i] = a.data()[i] - b.data()[i];
  bool rec = tracing(a, b);
  auto out = new_node(a.shape(), std::move(v), rec);
  if (rec) {
    g_active_tape->push({{a.node(), b.node()},
                         out,
                         [an = a.node(), bn = b.node(), out] {
                           const double* g = out->grad.data();
                           size_t n = out->values.size();
                           if (an->requires_grad)
                             for (size_t i = 0; i < n; ++i) an->grad[i] += g[i];
                           if (bn->requires_grad)
                             for (size_t i = 0; i < n; ++i) bn->grad[i] -= g[i];
                         }});
  }
  return Tensor(out);
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape("mul", a, b);
  size_t n = a.values().size();
  std::vector<double> v(n);
  for (size_t i = 0; i < n; ++i) v[i] = a.data()[i] * b.data()[i];
  bool rec = tracing(a, b);
  auto out = new_node(a.shape(), std::move(v), rec);
  if (rec) {
    g_active_tape->push({{a.node(), b.node()},
                         out,
                         [an = a.node(), bn = b.node(), out] {
                           const double* g = out->grad.data();
                           size_t n = out->values.size();
                           if (an->requires_grad)
                             for (size_t i = 0; i < n; ++i) an->grad[i] += g[i] * bn->values[i];
                           if (bn->requires_grad)
                             for (size_t i = 0; i < n; ++i) bn->grad[i] += g[i] * an->values[i];
                         }});
  }
  return Tensor(out);
}

Tensor scale(const Tensor& a, double s) {
  size_t n = a.values().size();
  std::vector<double> v(n);
  for (size_t i = 0; i < n; ++i) v[i] = a.data()[i] * s;
  bool rec = tracing(a);
  auto out = new_node(a.shape(), std::move(v), rec);
  if (rec) {
    g_active_tape->push({{a.node()},
                         out,
                         [an = a.node(), out, s] {
                           for (size_t i = 0; i < out->values.size(); ++i)
                             an->grad[i] += out->grad[i] * s;
                         }});
  }
  return Tensor(out);
}

Tensor add_rowvec(const Tensor& m, const Tensor& v) {
  require_ndim("add_rowvec", m, 2);
  require_ndim("add_rowvec", v, 1);
  if (m.dim(1) != v.dim(0))
    throw ShapeError("add_rowvec: " + shape_str(m.shape()) + " vs " + shape_str(v.shape()));
  int64_t r = m.dim(0), c = m.dim(1);
  std::vector<double> out_v(static_cast<size_t>(r * c));
  for (int64_t i = 0; i < r; ++i)
    for (int64_t j = 0; j < c; ++j) out_v[static_cast<size_t>(i * c + j)] = m.data()[i * c + j] + v.data()[j];
  bool rec = tracing(m, v);
  auto out = new_node(m.shape(), std::move(out_v), rec);
  if (rec) {
    g_active_tape->push({{m.node(), v.node()},
                         out,
                         [mn = m.node(), vn = v.node(), out, r, c] {
                           const double* g = out->grad.data();
                           if (mn->requires_grad)
                             for (int64_t i = 0; i < r * c; ++i) mn->grad[static_cast<size_t>(i)] += g[i];
                           if (vn->requires_grad)
                             for (int64_t i = 0; i < r; ++i)
                               for (int64_t j = 0; j < c; ++j) vn->grad[static_cast<size_t>(j)] += g[i * c + j];
                         }});
  }
  return Tensor(out);
}

// ----- structural -----

Tensor reshape(const Tensor& a, Shape shape) {
  for (int64_t d : shape)
    if (d < 1) throw ShapeError("reshape: dimensions must be positive, got " + shape_str(shape));
  if (shape_numel(shape) != a.numel())
    throw ShapeError("reshape: cannot view " + shape_str(a.shape()) + " as " + shape_str(shape));
  bool rec = tracing(a);
  auto out = new_node(std::move(shape), a.values(), rec);
  if (rec) {
    g_active_tape->push({{a.node()},
                         out,
                         [an = a.node(), out] {
                           for (size_t i = 0; i < out->values.size(); ++i)
                             an->grad[i] += out->grad[i];
                         }});
  }
  return Tensor(out);
}

Tensor transpose(const Tensor& a) {
  require_ndim("transpose", a, 2);
  int64_t r = a.dim(0), c = a.dim(1);
  std::vector<double> v(static_cast<size_t>(r * c));
  for (int64_t i = 0; i < r; ++i)
    for (int64_t j = 0; j < c; ++j) v[static_cast<size_t>(j * r + i)] = a.data()[i * c + j];
  bool rec = tracing(a);
  auto out = new_node({c, r}, std::move(v), rec);
  if (rec) {
    g_active_tape->push({{a.node()},
                         out,
                         [an = a.node(), out, r, c] {
                           const double* g = out->grad.data();
                           for (int64_t i = 0; i < r; ++i)
                             for (int64_t j = 0; j < c; ++j)
                               an->grad[static_cast<size_t>(i * c + j)] += g[j * r + i];
                         }});
  }
  return Tensor(out);
}

Tensor concat_cols(const Tensor& a, const Tensor& b) {
  require_ndim("concat_cols", a, 2);
  require_ndim("concat_cols", b, 2);
  if (a.dim(0) != b.dim(0))
    throw ShapeError("concat_cols: row mismatch " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
  int64_t r = a.dim(0), ca = a.dim(1), cb = b.dim(1);
  std::vector<double> v(static_cast<size_t>(r * (ca + cb)));
  for (int64_t i = 0; i < r; ++i) {
    for (int64_t j = 0; j < ca; ++j) v[static_cast<size_t>(i * (ca + cb) + j)] = a.data()[i * ca + j];
    for (int64_t j = 0; j < cb; ++j) v[static_cast<size_t>(i * (ca + cb) + ca + j)] = b.data()[i * cb + j];
  }
  bool rec = tracing(a, b);
  auto out = new_node({r, ca + cb}, std::move(v), rec);
  if (rec) {
    g_active_tape->push({{a.node(), b.node()},
                         out,
                         [an = a.node(), bn = b.node(), out, r, ca, cb] {
                           const double* g = out->grad.data();
                           for (int64_t i = 0; i < r; ++i) {
                             if (an->requires_grad)
                               for (int64_t j = 0; j < ca; ++j)
                                 an->grad[static_cast<size_t>(i * ca + j)] += g[i * (ca + cb) + j];
                             if (bn->requires_grad)
                               for (int64_t j = 0; j < cb; ++j)
                                 bn->grad[static_cast<size_t>(i * cb + j)] += g[i * (ca + cb) + ca + j];
                           }
                         }});
  }
  return Tensor(out);
}

Tensor slice_cols(const Tensor& a, int64_t c0, int64_t c1) {
  require_ndim("slice_cols", a, 2);
  if (c0 < 0 || c1 <= c0 || c1 > a.dim(1))
    throw ShapeError("slice_cols: range [" + std::to_string(c0) + "," + std::to_string(c1) +
                     ") on " + shape_str(a.shape()));
  int64_t r = a.dim(0), c = a.dim(1), w = c1 - c0;
  std::vector<double> v(static_cast<size_t>(r * w));
  for (int64_t i = 0; i < r; ++i)
    for (int64_t j = 0; j < w; ++j) v[static_cast<size_t>(i * w + j)] = a.data()[i * c + c0 + j];
  bool rec = tracing(a);
  auto out = new_node({r, w}, std::move(v), rec);
  if (rec) {
    g_active_tape->push({{a.node()},
                         out,
                         [an = a.node(), out, r, c, c0, w] {
                           const double* g = out->grad.data();
                           for (int64_t i = 0; i < r; ++i)
                             for (int64_t j = 0; j < w; ++j)
                               an->grad[static_cast<size_t>(i * c + c0 + j)] += g[i * w + j];
                         }});
  }
  return Tensor(out);
}

Tensor slice_vec(const Tensor& a, int64_t i0, int64_t i1) {
  require_ndim("slice_vec", a, 1);
  if (i0 < 0 || i1 <= i0 || i1 > a.dim(0))
    throw ShapeError("slice_vec: range [" + std::to_string(i0) + "," + std::to_string(i1) +
                     ") on " + shape_str(a.shape()));
  std::vector<double> v(a.data() + i0, a.data() + i1);
  bool rec = tracing(a);
  auto out = new_node({i1 - i0}, std::move(v), rec);
  if (rec) {
    g_active_tape->push({{a.node()},
                         out,
                         [an = a.node(), out, i0] {
                           for (size_t i = 0; i < out->values.size(); ++i)
                             an->grad[static_cast<size_t>(i0) + i] += out->grad[i];
                         }});
  }
  return Tensor(out);
}

// ----- contractions -----

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_ndim("matmul", a, 2);
  require_ndim("matmul", b, 2);
  if (a.dim(1) != b.dim(0))
    throw ShapeError("matmul: " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
  int64_t r = a.dim(0), k = a.dim(1), c = b.dim(1);
  std::vector<double> v(static_cast<size_t>(r * c), 0.0);
  const double* A = a.data();
  const double* B = b.data();
  for (int64_t i = 0; i < r; ++i)
    for (int64_t p = 0; p < k; ++p) {
      double aip = A[i * k + p];
      double* outrow = v.data() + i * c;
      const double* brow = B + p * c;
#pragma omp simd
      for (int64_t j = 0; j < c; ++j) outrow[j] += aip * brow[j];
    }
  bool rec = tracing(a, b);
  auto out = new_node({r, c}, std::move(v), rec);
  if (rec) {
    g_active_tape->push(
        {{a.node(), b.node()},
         out,
         [an = a.node(), bn = b.node(), out, r, k, c] {
           const double* g = out->grad.data();
           if (an->requires_grad) {
             const double* B = bn->values.data();
             for (int64_t i = 0; i < r; ++i)
               for (int64_t p = 0; p < k; ++p) {
                 const double* grow = g + i * c;
                 const double* brow = B + p * c;
                 double acc = 0.0;
#pragma omp simd reduction(+ : acc)
                 for (int64_t j = 0; j < c; ++j) acc += grow[j] * brow[j];
                 an->grad[static_cast<size_t>(i * k + p)] += acc;
               }
           }
           if (bn->requires_grad) {
             const double* A = an->values.data();
             for (int64_t i = 0; i < r; ++i)
               for (int64_t p = 0; p < k; ++p) {
                 double aip = A[i * k + p];
                 double* brow = bn->grad.data() + p * c;
                 const double* grow = g + i * c;
#pragma omp simd
                 for (int64_t j = 0; j < c; ++j) brow[j] += aip * grow[j];
               }
           }
         }});
  }
  return Tensor(out);
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
  require_ndim("matmul_nt", a, 2);
  require_ndim("matmul_nt", b, 2);
  if (a.dim(1) != b.dim(1))
    throw ShapeError("matmul_nt: " + shape_str(a.shape()) + " x " + shape_str(b.shape()) + "^T");
  int64_t r = a.dim(0), k = a.dim(1), c = b.dim(0);
  std::vector<double> v(static_cast<size_t>(r * c));
  const double* A = a.data();
  const double* B = b.data();
  for (int64_t i = 0; i < r; ++i)
    for (int64_t j = 0; j < c; ++j) {
      const double* arow = A + i * k;
      const double* brow = B + j * k;
      double acc = 0.0;
#pragma omp simd reduction(+ : acc)
      for (int64_t p = 0; p < k; ++p) acc += arow[p] * brow[p];
      v[static_cast<size_t>(i * c + j)] = acc;
    }
  bool rec = tracing(a, b);
  auto out = new_node({r, c}, std::move(v), rec);
  if (rec) {
    g_active_tape->push(
        {{a.node(), b.node()},
         out,
         [an = a.node(), bn = b.node(), out, r, k, c] {
           const double* g = out->grad.data();
           if (an->requires_grad) {
             const double* B = bn->values.data();
             for (int64_t i = 0; i < r; ++i)
               for (int64_t j = 0; j < c; ++j) {
                 double gij = g[i * c + j];
                 double* arow = an->grad.data() + i * k;
                 const double* brow = B + j * k;
#pragma omp simd
                 for (int64_t p = 0; p < k; ++p) arow[p] += gij * brow[p];
               }
           }
           if (bn->requires_grad) {
             const double* A = an->values.data();
             for (int64_t i = 0; i < r; ++i)
               for (int64_t j = 0; j < c; ++j) {
                 double gij = g[i * c + j];
                 double* brow = bn->grad.data() + j * k;
                 const double* arow = A + i * k;
#pragma omp simd
                 for (int64_t p = 0; p < k; ++p) brow[p] += gij * arow[p];
               }
           }
         }});
  }
  return Tensor(out);
}

Tensor matvec(const Tensor& w, const Tensor& x) {
  require_ndim("matvec", w, 2);
  require_ndim("matvec", x, 1);
  if (w.dim(1) != x.dim(0))
    throw ShapeError("matvec: " + shape_str(w.shape()) + " x " + shape_str(x.shape()));
  int64_t r = w.dim(0), c = w.dim(1);
  std::vector<double> v(static_cast<size_t>(r));
  const double* W = w.data();
  const double* X = x.data();
  for (int64_t i = 0; i < r; ++i) {
    const double* wrow = W + i * c;
    double acc = 0.0;
#pragma omp simd reduction(+ : acc)
    for (int64_t j = 0; j < c; ++j) acc += wrow[j] * X[j];
    v[static_cast<size_t>(i)] = acc;
  }
  bool rec = tracing(w, x);
  auto out = new_node({r}, std::move(v), rec);
  if (rec) {
    g_active_tape->push({{w.node(), x.node()},
                         out,
                         [wn = w.node(), xn = x.node(), out, r, c] {
                           const double* g = out->grad.data();
                           if (wn->requires_grad) {
                             const double* X = xn->values.data();
                             for (int64_t i = 0; i < r; ++i) {
                               double gi = g[i];
                               double* wrow = wn->grad.data() + i * c;
#pragma omp simd
                               for (int64_t j = 0; j < c; ++j) wrow[j] += gi * X[j];
                             }
                           }
                           if (xn->requires_grad) {
                             const double* W = wn->values.data();
                             for (int64_t i = 0; i < r; ++i) {
                               double gi = g[i];
                               const double* wrow = W + i * c;
#pragma omp simd
                               for (int64_t j = 0; j < c; ++j) xn->grad[static_cast<size_t>(j)] += gi * wrow[j];
                             }
                           }
                         }});
  }
  return Tensor(out);
}

// ----- reductions -----

Tensor sum_all(const Tensor& a) {
  double acc = 0.0;
  for (double x : a.values()) acc += x;
  bool rec = tracing(a);
  auto out = new_node({1}, {acc}, rec);
  if (rec) {
    g_active_tape->push({{a.node()},
                         out,
                         [an = a.node(), out] {
                           double g = out->grad[0];
                           for (size_t i = 0; i < an->values.size(); ++i) an->grad[i] += g;
                         }});
  }
  return Tensor(out);
}

Tensor mean_all(const Tensor& a) {
  double acc = 0.0;
  for (double x : a.values()) acc += x;
  double inv = 1.0 / static_cast<double>(a.numel());
  bool rec = tracing(a);
  auto out = new_node({1}, {acc * inv}, rec);
  if (rec) {
    g_active_tape->push({{a.node()},
                         out,
                         [an = a.node(), out, inv] {
                           double g = out->grad[0] * inv;
                           for (size_t i = 0; i < an->values.size(); ++i) an->grad[i] += g;
                         }});
  }
  return Tensor(out);
}

// ----- nonlinearities -----

Tensor silu(const Tensor& a) {
  size_t n = a.values().size();
  std::vector<double> v(n);
  for (size_t i = 0; i < n; ++i) {
    double x = a.data()[i];
    v[i] = x / (1.0 + std::exp(-x));
  }
  bool rec = tracing(a);
  auto out = new_node(a.shape(), std::move(v), rec);
  if (rec) {
    g_active_tape->push({{a.node()},
                         out,
                         [an = a.node(), out] {
                           for (size_t i = 0; i < out->values.size(); ++i) {
                             double x = an->values[i];
                             double s = 1.0 / (1.0 + std::exp(-x));
                             an->grad[i] += out->grad[i] * (s + x * s * (1.0 - s));
                           }
                         }});
  }
  return Tensor(out);
}

Tensor gelu(const Tensor& a) {
  constexpr double kInvSqrt2 = 0.70710678118654752440;
  size_t n = a.values().size();
  std::vector<double> v(n);
  for (size_t i = 0; i < n; ++i) {
    double x = a.data()[i];
    v[i] = 0.5 * x * (1.0 + std::erf(x * kInvSqrt2));
  }
  bool rec = tracing(a);
  auto out = new_node(a.shape(), std::move(v), rec);
  if (rec) {
    g_active_tape->push({{a.node()},
                         out,
                         [an = a.node(), out] {
                           constexpr double kInvSqrt2Pi = 0.39894228040143267794;
                           for (size_t i = 0; i < out->values.size(); ++i) {
                             double x = an->values[i];
                             double cdf = 0.5 * (1.0 + std::erf(x * kInvSqrt2));
                             double pdf = kInvSqrt2Pi * std::exp(-0.5 * x * x);
                             an->grad[i] += out->grad[i] * (cdf + x * pdf);
                           }
                         }});
  }
  return Tensor(out);
}

Tensor leaky_relu(const Tensor& a, double slope) {
  size_t n = a.values().size();
  std::vector<double> v(n);
  for (size_t i = 0; i < n; ++i) {
    double x = a.data()[i];
    v[i] = x > 0.0 ? x : slope * x;
  }
  bool rec = tracing(a);
  auto out = new_node(a.shape(), std::move(v), rec);
  if (rec) {
    g_active_tape->push({{a.node()},
                         out,
                         [an = a.node(), out, slope] {
                           for (size_t i = 0; i < out->values.size(); ++i)
                             an->grad[i] += out->grad[i] * (an->values[i] > 0.0 ? 1.0 : slope);
                         }});
  }
  return Tensor(out);
}

Tensor softmax_rows(const Tensor& a) {
  if (a.ndim() != 1 && a.ndim() != 2)
    throw ShapeError("softmax_rows: expected 1-d or 2-d tensor, got " + shape_str(a.shape()));
  int64_t r = a.ndim() == 2 ? a.dim(0) : 1;
  int64_t c = a.ndim() == 2 ? a.dim(1) : a.dim(0);
  std::vector<double> v(static_cast<size_t>(r * c));
  for (int64_t i = 0; i < r; ++i) {
    const double* x = a.data() + i * c;
    double* y = v.data() + i * c;
    double mx = x[0];
    for (int64_t j = 1; j < c; ++j) mx = std::max(mx, x[j]);
    double z = 0.0;
    for (int64_t j = 0; j < c; ++j) {
      y[j] = std::exp(x[j] - mx);
      z += y[j];
    }
    double inv = 1.0 / z;
    for (int64_t j = 0; j < c; ++j) y[j] *= inv;
  }
  bool rec = tracing(a);
  auto out = new_node(a.shape(), std::move(v), rec);
  if (rec) {
    g_active_tape->push({{a.node()},
                         out,
                         [an = a.node(), out, r, c] {
                           for (int64_t i = 0; i < r; ++i) {
                             const double* y = out->values.data() + i * c;
                             const double* g = out->grad.data() + i * c;
                             double dot = 0.0;
                             for (int64_t j = 0; j < c; ++j) dot += g[j] * y[j];
                             for (int64_t j = 0; j < c; ++j)
                               an->grad[static_cast<size_t>(i * c + j)] += y[j] * (g[j] - dot);
                           }
                         }});
  }
  return Tensor(out);
}

// ----- normalizations -----

namespace {
void rowwise_dims(const char* op, const Tensor& a, int64_t& r, int64_t& c) {
  if (a.ndim() == 1) {
    r = 1;
    c = a.dim(0);
  } else if (a.ndim() == 2) {
    r = a.dim(0);
    c = a.dim(1);
  } else {
    throw ShapeError(std::string(op) + ": expected 1-d or 2-d tensor, got " + shape_str(a.shape()));
  }
}
}  // namespace

Tensor rms_norm(const Tensor& a, double eps) {
  int64_t r, c;
  rowwise_dims("rms_norm", a, r, c);
  std::vector<double> v(static_cast<size_t>(r * c));
  for (int64_t i = 0; i < r; ++i) {
    const double* x = a.data() + i * c;
    double ms = 0.0;
    for (int64_t j = 0; j < c; ++j) ms += x[j] * x[j];
    ms /= static_cast<double>(c);
    double inv = 1.0 / std::sqrt(ms + eps);
    for (int64_t j = 0; j < c; ++j) v[static_cast<size_t>(i * c + j)] = x[j] * inv;
  }
  bool rec = tracing(a);
  auto out = new_node(a.shape(), std::move(v), rec);
  if (rec) {
    g_active_tape->push(
        {{a.node()},
         out,
         [an = a.node(), out, r, c, eps] {
           for (int64_t i = 0; i < r; ++i) {
             const double* x = an->values.data() + i * c;
             const double* g = out->grad.data() + i * c;
             double ms = 0.0, gx = 0.0;
             for (int64_t j = 0; j < c; ++j) {
               ms += x[j] * x[j];
               gx += g[j] * x[j];
             }
             ms = ms / static_cast<double>(c) + eps;
             double inv = 1.0 / std::sqrt(ms);
             double coef = gx / (static_cast<double>(c) * ms);
             for (int64_t j = 0; j < c; ++j)
               an->grad[static_cast<size_t>(i * c + j)] += inv * (g[j] - x[j] * coef);
           }
         }});
  }
  return Tensor(out);
}

Tensor layer_norm(const Tensor& a, double eps) {
  int64_t r, c;
  rowwise_dims("layer_norm", a, r, c);
  std::vector<double> v(static_cast<size_t>(r * c));
  for (int64_t i = 0; i < r; ++i) {
    const double* x = a.data() + i * c;
    double mu = 0.0;
    for (int64_t j = 0; j < c; ++j) mu += x[j];
    mu /= static_cast<double>(c);
    double var = 0.0;
    for (int64_t j = 0; j < c; ++j) var += (x[j] - mu) * (x[j] - mu);
    var /= static_cast<double>(c);
    double inv = 1.0 / std::sqrt(var + eps);
    for (int64_t j = 0; j < c; ++j) v[static_cast<size_t>(i * c + j)] = (x[j] - mu) * inv;
  }
  bool rec = tracing(a);
  auto out = new_node(a.shape(), std::move(v), rec);
  if (rec) {
    g_active_tape->push(
        {{a.node()},
         out,
         [an = a.node(), out, r, c, eps] {
           // dx = (g - mean(g) - xhat * mean(g .* xhat)) / sqrt(var + eps),
           // with xhat already stored in the output values.
           for (int64_t i = 0; i < r; ++i) {
             const double* xh = out->values.data() + i * c;
             const double* g = out->grad.data() + i * c;
             const double* x = an->values.data() + i * c;
             double mu = 0.0;
             for (int64_t j = 0; j < c; ++j) mu += x[j];
             mu /= static_cast<double>(c);
             double var = 0.0;
             for (int64_t j = 0; j < c; ++j) var += (x[j] - mu) * (x[j] - mu);
             var /= static_cast<double>(c);
             double inv = 1.0 / std::sqrt(var + eps);
             double gm = 0.0, gxh = 0.0;
             for (int64_t j = 0; j < c; ++j) {
               gm += g[j];
               gxh += g[j] * xh[j];
             }
             gm /= static_cast<double>(c);
             gxh /= static_cast<double>(c);
             for (int64_t j = 0; j < c; ++j)
               an->grad[static_cast<size_t>(i * c + j)] += inv * (g[j] - gm - xh[j] * gxh);
           }
         }});
  }
  return Tensor(out);
}

// ----- adain -----

Tensor adain(const Tensor& x, const Tensor& scale_c, const Tensor& shift_c, double eps) {
  require_ndim("adain", x, 2);
  require_ndim("adain", scale_c, 1);
  require_ndim("adain", shift_c, 1);
  int64_t C = x.dim(0), P = x.dim(1);
  if (scale_c.dim(0) != C || shift_c.dim(0) != C)
    throw ShapeError("adain: style length " + shape_str(scale_c.shape()) + "/" +
                     shape_str(shift_c.shape()) + " for " + std::to_string(C) + " channels");
  std::vector<double> v(static_cast<size_t>(C * P));
  for (int64_t ch = 0; ch < C; ++ch) {
    const double* row = x.data() + ch * P;
    double mu = 0.0;
    for (int64_t p = 0; p < P; ++p) mu += row[p];
    mu /= static_cast<double>(P);
    double var = 0.0;
    for (int64_t p = 0; p < P; ++p) var += (row[p] - mu) * (row[p] - mu);
    var /= static_cast<double>(P);
    double inv = 1.0 / std::sqrt(var + eps);
    double s = scale_c.data()[ch], b = shift_c.data()[ch];
    for (int64_t p = 0; p < P; ++p)
      v[static_cast<size_t>(ch * P + p)] = s * (row[p] - mu) * inv + b;
  }
  bool rec = tracing(x, scale_c, shift_c);
  auto out = new_node(x.shape(), std::move(v), rec);
  if (rec) {
    g_active_tape->push(
        {{x.node(), scale_c.node(), shift_c.node()},
         out,
         [xn = x.node(), sn = scale_c.node(), bn = shift_c.node(), out, C, P, eps] {
           for (int64_t ch = 0; ch < C; ++ch) {
             const double* row = xn->values.data() + ch * P;
             const double* g = out->grad.data() + ch * P;
             double mu = 0.0;
             for (int64_t p = 0; p < P; ++p) mu += row[p];
             mu /= static_cast<double>(P);
             double var = 0.0;
             for (int64_t p = 0; p < P; ++p) var += (row[p] - mu) * (row[p] - mu);
             var /= static_cast<double>(P);
             double inv = 1.0 / std::sqrt(var + eps);
             double s = sn->values[static_cast<size_t>(ch)];
             double gsum = 0.0, gxh = 0.0;
             for (int64_t p = 0; p < P; ++p) {
               gsum += g[p];
               gxh += g[p] * (row[p] - mu) * inv;
             }
             if (bn->requires_grad) bn->grad[static_cast<size_t>(ch)] += gsum;
             if (sn->requires_grad) sn->grad[static_cast<size_t>(ch)] += gxh;
             if (xn->requires_grad) {
               double gm = gsum / static_cast<double>(P);
               double gxm = gxh / static_cast<double>(P);
               for (int64_t p = 0; p < P; ++p) {
                 double xh = (row[p] - mu) * inv;
                 xn->grad[static_cast<size_t>(ch * P + p)] += s * inv * (g[p] - gm - xh * gxm);
               }
             }
           }
         }});
  }
  return Tensor(out);
}

// ----- spatial -----

Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b) {
  require_ndim("conv2d", x, 3);
  if (w.ndim() != 4) throw ShapeError("conv2d: weight must be {F,C,k,k}, got " + shape_str(w.shape()));
  require_ndim("conv2d", b, 1);
  int64_t C = x.dim(0), H = x.dim(1), W = x.dim(2);
  int64_t F = w.dim(0), k = w.dim(2);
  if (w.dim(1) != C || w.dim(3) != k || (k % 2) == 0)
    throw ShapeError("conv2d: weight " + shape_str(w.shape()) + " incompatible with input " +
                     shape_str(x.shape()) + " (square odd kernel required)");
  if (b.dim(0) != F) throw ShapeError("conv2d: bias length " + shape_str(b.shape()));
  int64_t pad = k / 2;
  std::vector<double> v(static_cast<size_t>(F * H * W));
  const double* X = x.data();
  const double* Wt = w.data();
  for (int64_t f = 0; f < F; ++f)
    for (int64_t y = 0; y < H; ++y)
      for (int64_t xx = 0; xx < W; ++xx) {
        double acc = b.data()[f];
        for (int64_t ch = 0; ch < C; ++ch)
          for (int64_t dy = 0; dy < k; ++dy) {
            int64_t iy = y + dy - pad;
            if (iy < 0 || iy >= H) continue;
            for (int64_t dx = 0; dx < k; ++dx) {
              int64_t ix = xx + dx - pad;
              if (ix < 0 || ix >= W) continue;
              acc += Wt[((f * C + ch) * k + dy) * k + dx] * X[(ch * H + iy) * W + ix];
            }
          }
        v[static_cast<size_t>((f * H + y) * W + xx)] = acc;
      }
  bool rec = tracing(x, w, b);
  auto out = new_node({F, H, W}, std::move(v), rec);
  if (rec) {
    g_active_tape->push(
        {{x.node(), w.node(), b.node()},
         out,
         [xn = x.node(), wn = w.node(), bn = b.node(), out, C, H, W, F, k, pad] {
           const double* g = out->grad.data();
           const double* X = xn->values.data();
           const double* Wt = wn->values.data();
           for (int64_t f = 0; f < F; ++f)
             for (int64_t y = 0; y < H; ++y)
               for (int64_t xx = 0; xx < W; ++xx) {
                 double gv = g[(f * H + y) * W + xx];
                 if (bn->requires_grad) bn->grad[static_cast<size_t>(f)] += gv;
                 for (int64_t ch = 0; ch < C; ++ch)
                   for (int64_t dy = 0; dy < k; ++dy) {
                     int64_t iy = y + dy - pad;
                     if (iy < 0 || iy >= H) continue;
                     for (int64_t dx = 0; dx < k; ++dx) {
                       int64_t ix = xx + dx - pad;
                       if (ix < 0 || ix >= W) continue;
                       size_t wi = static_cast<size_t>(((f * C + ch) * k + dy) * k + dx);
                       size_t xi = static_cast<size_t>((ch * H + iy) * W + ix);
                       if (wn->requires_grad) wn->grad[wi] += gv * X[xi];
                       if (xn->requires_grad) xn->grad[xi] += gv * Wt[wi];
                     }
                   }
               }
         }});
  }
  return Tensor(out);
}

Tensor upsample_nearest_2x(const Tensor& x) {
  require_ndim("upsample_nearest_2x", x, 3);
  int64_t C = x.dim(0), H = x.dim(1), W = x.dim(2);
  std::vector<double> v(static_cast<size_t>(C * 4 * H * W));
  for (int64_t ch = 0; ch < C; ++ch)
    for (int64_t y = 0; y < H; ++y)
      for (int64_t xx = 0; xx < W; ++xx) {
        double val = x.data()[(ch * H + y) * W + xx];
        for (int64_t a = 0; a < 2; ++a)
          for (int64_t b = 0; b < 2; ++b)
            v[static_cast<size_t>((ch * 2 * H + 2 * y + a) * 2 * W + 2 * xx + b)] = val;
      }
  bool rec = tracing(x);
  auto out = new_node({C, 2 * H, 2 * W}, std::move(v), rec);
  if (rec) {
    g_active_tape->push({{x.node()},
                         out,
                         [xn = x.node(), out, C, H, W] {
                           const double* g = out->grad.data();
                           for (int64_t ch = 0; ch < C; ++ch)
                             for (int64_t y = 0; y < H; ++y)
                               for (int64_t xx = 0; xx < W; ++xx) {
                                 double acc = 0.0;
                                 for (int64_t a = 0; a < 2; ++a)
                                   for (int64_t b = 0; b < 2; ++b)
                                     acc += g[(ch * 2 * H + 2 * y + a) * 2 * W + 2 * xx + b];
                                 xn->grad[static_cast<size_t>((ch * H + y) * W + xx)] += acc;
                               }
                         }});
  }
  return Tensor(out);
}

Tensor detach(const Tensor& a) {
  return Tensor(new_node(a.shape(), a.values(), false));
}

void round_to_float32(Tensor& t) {
  for (double& v : t.values()) v = static_cast<double>(static_cast<float>(v));
}

bool all_finite(const Tensor& t) {
  for (double v : t.values())
    if (!std::isfinite(v)) return false;
  return true;
}

void backward(const Tensor& loss) {
  if (!loss.defined()) throw ShapeError("backward: undefined loss tensor");
  if (loss.numel() != 1)
    throw ShapeError("backward: loss must be a scalar, got shape " + shape_str(loss.shape()));
  Tape* t = g_active_tape;
  if (!t) throw std::logic_error("backward: no active tape");
  for (const auto& r : t->records()) {
    for (const auto& in : r.inputs)
      if (in->requires_grad) in->grad.assign(in->values.size(), 0.0);
    r.output->grad.assign(r.output->values.size(), 0.0);
  }
  loss.node()->grad.assign(1, 1.0);
  const auto& recs = t->records();
  for (auto it = recs.rbegin(); it != recs.rend(); ++it) it->backprop();
}

}  // namespace rtm
