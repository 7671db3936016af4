#include "hackg/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <unordered_set>

namespace hackg {

using detail::TensorImpl;

namespace {

thread_local bool g_grad_enabled = true;

void check_finite(const std::vector<double>& data, const char* op) {
  for (double v : data) {
    if (!std::isfinite(v)) {
      throw NonFiniteValue(std::string(op) + ": produced a non-finite value");
    }
  }
}

std::shared_ptr<TensorImpl> make_leaf(Shape shape, std::vector<double> data, bool requires_grad) {
  if (shape_numel(shape) != static_cast<int64_t>(data.size())) {
    throw ShapeMismatch("tensor: shape does not match value count");
  }
  auto impl = std::make_shared<TensorImpl>();
  impl->shape = std::move(shape);
  impl->data = std::move(data);
  impl->requires_grad = requires_grad;
  return impl;
}

using detail::make_op;

double* grad_of(TensorImpl& node) { return detail::grad_buffer(node); }

void require_rank2(const Tensor& t, const char* op) {
  if (t.rank() != 2) throw ShapeMismatch(std::string(op) + ": expected a rank-2 tensor");
}

}  // namespace

int64_t shape_numel(const Shape& shape) {
  int64_t n = 1;
  for (int64_t d : shape) {
    if (d < 0) throw ShapeMismatch("tensor: negative dimension");
    n *= d;
  }
  return n;
}

namespace detail {

// Builds an op result. Parents and the gradient closure are dropped when the
// result does not participate in differentiation.
Tensor make_op(const char* op, Shape shape, std::vector<double> data,
               std::vector<Tensor> parents, std::function<void(TensorImpl&)> backprop) {
  check_finite(data, op);
  auto impl = make_leaf(std::move(shape), std::move(data), false);
  impl->op = op;
  bool needs_grad = false;
  if (g_grad_enabled) {
    for (const Tensor& p : parents) {
      if (p.defined() && p.requires_grad()) needs_grad = true;
    }
  }
  if (needs_grad) {
    impl->requires_grad = true;
    impl->parents.reserve(parents.size());
    for (const Tensor& p : parents) impl->parents.push_back(p.impl_ptr());
    impl->backprop = std::move(backprop);
  }
  return Tensor(std::move(impl));
}

double* grad_buffer(TensorImpl& node) {
  node.ensure_grad();
  return node.grad.data();
}

}  // namespace detail

// --- Tensor basics ---

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  const int64_t n = shape_numel(shape);
  return Tensor(make_leaf(std::move(shape), std::vector<double>(static_cast<size_t>(n), 0.0),
                          requires_grad));
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  const int64_t n = shape_numel(shape);
  return Tensor(make_leaf(std::move(shape), std::vector<double>(static_cast<size_t>(n), value),
                          requires_grad));
}

Tensor Tensor::from_values(Shape shape, std::vector<double> values, bool requires_grad) {
  check_finite(values, "from_values");
  return Tensor(make_leaf(std::move(shape), std::move(values), requires_grad));
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return from_values({}, {value}, requires_grad);
}

Tensor Tensor::row(std::vector<double> values, bool requires_grad) {
  const int64_t n = static_cast<int64_t>(values.size());
  return from_values({n}, std::move(values), requires_grad);
}

Tensor Tensor::uniform(Shape shape, double lo, double hi, Rng& rng, bool requires_grad) {
  const int64_t n = shape_numel(shape);
  std::vector<double> values(static_cast<size_t>(n));
  for (double& v : values) v = rng.uniform(lo, hi);
  return Tensor(make_leaf(std::move(shape), std::move(values), requires_grad));
}

const Shape& Tensor::shape() const {
  if (!impl_) throw Error("tensor: undefined");
  return impl_->shape;
}

int64_t Tensor::rank() const { return static_cast<int64_t>(shape().size()); }

int64_t Tensor::numel() const {
  if (!impl_) throw Error("tensor: undefined");
  return impl_->numel();
}

int64_t Tensor::rows() const {
  const Shape& s = shape();
  if (s.empty()) throw ShapeMismatch("tensor: scalar has no rows");
  return s[0];
}

int64_t Tensor::cols() const {
  const Shape& s = shape();
  if (s.size() != 2) throw ShapeMismatch("tensor: cols() requires rank 2");
  return s[1];
}

bool Tensor::requires_grad() const { return impl_ && impl_->requires_grad; }

void Tensor::set_requires_grad(bool v) {
  if (!impl_) throw Error("tensor: undefined");
  impl_->requires_grad = v;
}

double Tensor::value() const {
  if (numel() != 1) throw ShapeMismatch("tensor: value() requires a single element");
  return impl_->data[0];
}

double Tensor::at(std::initializer_list<int64_t> idx) const {
  const Shape& s = shape();
  if (idx.size() != s.size()) throw ShapeMismatch("tensor: index rank mismatch");
  int64_t flat = 0;
  size_t i = 0;
  for (int64_t v : idx) {
    if (v < 0 || v >= s[i]) throw ShapeMismatch("tensor: index out of range");
    flat = flat * s[i] + v;
    ++i;
  }
  return impl_->data[static_cast<size_t>(flat)];
}

std::span<const double> Tensor::data() const {
  if (!impl_) throw Error("tensor: undefined");
  return impl_->data;
}

std::span<double> Tensor::raw_data() {
  if (!impl_) throw Error("tensor: undefined");
  return impl_->data;
}

bool Tensor::has_grad() const { return impl_ && impl_->grad.size() == impl_->data.size(); }

std::span<const double> Tensor::grad() const {
  if (!has_grad()) throw MissingGradient("tensor: gradient not populated");
  return impl_->grad;
}

std::span<double> Tensor::raw_grad() {
  if (!has_grad()) throw MissingGradient("tensor: gradient not populated");
  return impl_->grad;
}

void Tensor::ensure_grad() {
  if (!impl_) throw Error("tensor: undefined");
  impl_->ensure_grad();
}

void Tensor::zero_grad() {
  if (!impl_) throw Error("tensor: undefined");
  impl_->grad.assign(impl_->data.size(), 0.0);
}

Tensor Tensor::clone_detached(bool requires_grad) const {
  if (!impl_) throw Error("tensor: undefined");
  return from_values(impl_->shape, impl_->data, requires_grad);
}

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

bool grad_enabled() { return g_grad_enabled; }

// --- matmul ---

namespace {

// c[m,n] += a[m,k] * b[k,n]
void gemm_acc(const double* a, const double* b, double* c, int64_t m, int64_t k, int64_t n) {
#pragma omp parallel for if (m * k * n > 262144)
  for (int64_t i = 0; i < m; ++i) {
    double* crow = c + i * n;
    const double* arow = a + i * k;
    for (int64_t p = 0; p < k; ++p) {
      const double av = arow[p];
      const double* brow = b + p * n;
      for (int64_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

// c[m,k] += g[m,n] * b[k,n]^T
void gemm_nt_acc(const double* g, const double* b, double* c, int64_t m, int64_t n, int64_t k) {
#pragma omp parallel for if (m * k * n > 262144)
  for (int64_t i = 0; i < m; ++i) {
    double* crow = c + i * k;
    const double* grow = g + i * n;
    for (int64_t p = 0; p < k; ++p) {
      const double* brow = b + p * n;
      double acc = 0.0;
      for (int64_t j = 0; j < n; ++j) acc += grow[j] * brow[j];
      crow[p] += acc;
    }
  }
}

// c[k,n] += a[m,k]^T * g[m,n]
void gemm_tn_acc(const double* a, const double* g, double* c, int64_t m, int64_t k, int64_t n) {
#pragma omp parallel for if (m * k * n > 262144)
  for (int64_t p = 0; p < k; ++p) {
    double* crow = c + p * n;
    for (int64_t i = 0; i < m; ++i) {
      const double av = a[i * k + p];
      const double* grow = g + i * n;
      for (int64_t j = 0; j < n; ++j) crow[j] += av * grow[j];
    }
  }
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_rank2(a, "matmul");
  require_rank2(b, "matmul");
  const int64_t m = a.rows(), k = a.cols(), n = b.cols();
  if (b.rows() != k) throw ShapeMismatch("matmul: inner dimensions differ");
  std::vector<double> out(static_cast<size_t>(m * n), 0.0);
  gemm_acc(a.data().data(), b.data().data(), out.data(), m, k, n);

  auto ai = a.impl_ptr();
  auto bi = b.impl_ptr();
  return make_op("matmul", {m, n}, std::move(out), {a, b}, [ai, bi, m, k, n](TensorImpl& node) {
    const double* g = node.grad.data();
    if (ai->requires_grad) gemm_nt_acc(g, bi->data.data(), grad_of(*ai), m, n, k);
    if (bi->requires_grad) gemm_tn_acc(ai->data.data(), g, grad_of(*bi), m, k, n);
  });
}

// --- elementwise with scalar broadcast ---

namespace {

enum class Broadcast { None, Left, Right };

Broadcast broadcast_kind(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() == b.shape()) return Broadcast::None;
  if (a.numel() == 1 && b.numel() == 1) {
    // both single-element but shaped differently: keep the higher-rank shape
    return a.rank() >= b.rank() ? Broadcast::Right : Broadcast::Left;
  }
  if (a.numel() == 1) return Broadcast::Left;   // a is the scalar
  if (b.numel() == 1) return Broadcast::Right;  // b is the scalar
  throw ShapeMismatch(std::string(op) + ": shapes differ and neither side is a scalar");
}

template <typename Fwd, typename Bwd>
Tensor binary_elementwise(const char* op, const Tensor& a, const Tensor& b, Fwd fwd, Bwd bwd) {
  const Broadcast bc = broadcast_kind(a, b, op);
  const Tensor& big = bc == Broadcast::Left ? b : a;
  const int64_t n = big.numel();
  std::vector<double> out(static_cast<size_t>(n));
  const auto ad = a.data();
  const auto bd = b.data();
  for (int64_t i = 0; i < n; ++i) {
    const double av = bc == Broadcast::Left ? ad[0] : ad[i];
    const double bv = bc == Broadcast::Right ? bd[0] : bd[i];
    out[static_cast<size_t>(i)] = fwd(av, bv);
  }
  auto ai = a.impl_ptr();
  auto bi = b.impl_ptr();
  return make_op(op, big.shape(), std::move(out), {a, b}, [ai, bi, bc, n, bwd](TensorImpl& node) {
    double* ag = ai->requires_grad ? grad_of(*ai) : nullptr;
    double* bg = bi->requires_grad ? grad_of(*bi) : nullptr;
    for (int64_t i = 0; i < n; ++i) {
      const double av = bc == Broadcast::Left ? ai->data[0] : ai->data[i];
      const double bv = bc == Broadcast::Right ? bi->data[0] : bi->data[i];
      const double g = node.grad[i];
      double da, db;
      bwd(av, bv, g, da, db);
      if (ag) ag[bc == Broadcast::Left ? 0 : i] += da;
      if (bg) bg[bc == Broadcast::Right ? 0 : i] += db;
    }
  });
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  return binary_elementwise(
      "add", a, b, [](double x, double y) { return x + y; },
      [](double, double, double g, double& da, double& db) {
        da = g;
        db = g;
      });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return binary_elementwise(
      "sub", a, b, [](double x, double y) { return x - y; },
      [](double, double, double g, double& da, double& db) {
        da = g;
        db = -g;
      });
}

Tensor hadamard(const Tensor& a, const Tensor& b) {
  return binary_elementwise(
      "hadamard", a, b, [](double x, double y) { return x * y; },
      [](double x, double y, double g, double& da, double& db) {
        da = g * y;
        db = g * x;
      });
}

Tensor scale(const Tensor& a, double factor) {
  const int64_t n = a.numel();
  std::vector<double> out(static_cast<size_t>(n));
  const auto ad = a.data();
  for (int64_t i = 0; i < n; ++i) out[static_cast<size_t>(i)] = ad[i] * factor;
  auto ai = a.impl_ptr();
  return make_op("scale", a.shape(), std::move(out), {a}, [ai, factor, n](TensorImpl& node) {
    double* ag = grad_of(*ai);
    for (int64_t i = 0; i < n; ++i) ag[i] += node.grad[i] * factor;
  });
}

// --- activations ---

namespace {

template <typename Fwd, typename Bwd>
Tensor unary_elementwise(const char* op, const Tensor& x, Fwd fwd, Bwd bwd) {
  const int64_t n = x.numel();
  std::vector<double> out(static_cast<size_t>(n));
  const auto xd = x.data();
  for (int64_t i = 0; i < n; ++i) out[static_cast<size_t>(i)] = fwd(xd[i]);
  auto xi = x.impl_ptr();
  return make_op(op, x.shape(), std::move(out), {x}, [xi, n, bwd](TensorImpl& node) {
    double* xg = grad_of(*xi);
    for (int64_t i = 0; i < n; ++i) xg[i] += node.grad[i] * bwd(xi->data[i], node.data[i]);
  });
}

double stable_sigmoid(double x) {
  if (x >= 0.0) {
    const double e = std::exp(-x);
    return 1.0 / (1.0 + e);
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

Tensor sigmoid(const Tensor& x) {
  return unary_elementwise(
      "sigmoid", x, [](double v) { return stable_sigmoid(v); },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor tanh_act(const Tensor& x) {
  return unary_elementwise(
      "tanh", x, [](double v) { return std::tanh(v); },
      [](double, double y) { return 1.0 - y * y; });
}

Tensor leaky_relu(const Tensor& x, double negative_slope) {
  return unary_elementwise(
      "leaky_relu", x,
      [negative_slope](double v) { return v >= 0.0 ? v : negative_slope * v; },
      [negative_slope](double v, double) { return v >= 0.0 ? 1.0 : negative_slope; });
}

Tensor softplus(const Tensor& x) {
  return unary_elementwise(
      "softplus", x,
      [](double v) {
        if (v > 32.0) return v;
        if (v < -32.0) return std::exp(v);
        return std::log1p(std::exp(v));
      },
      [](double v, double) { return stable_sigmoid(v); });
}

Tensor log_elem(const Tensor& x) {
  return unary_elementwise(
      "log", x, [](double v) { return std::log(v); },
      [](double v, double) { return 1.0 / v; });
}

Tensor clamp(const Tensor& x, double lo, double hi) {
  if (lo > hi) throw Error("clamp: lo > hi");
  return unary_elementwise(
      "clamp", x,
      [lo, hi](double v) { return std::min(std::max(v, lo), hi); },
      [lo, hi](double v, double) { return (v >= lo && v <= hi) ? 1.0 : 0.0; });
}

// --- segment softmax ---

Tensor segment_softmax(const Tensor& logits, const std::vector<int64_t>& segment_of,
                       int64_t n_segments) {
  if (logits.rank() != 1) throw ShapeMismatch("segment_softmax: logits must be rank 1");
  const int64_t n = logits.numel();
  if (static_cast<int64_t>(segment_of.size()) != n) {
    throw ShapeMismatch("segment_softmax: segment map length differs from logits");
  }
  if (n_segments <= 0) throw EmptySegment("segment_softmax: no segments");
  std::vector<int64_t> count(static_cast<size_t>(n_segments), 0);
  for (int64_t s : segment_of) {
    if (s < 0 || s >= n_segments) throw ShapeMismatch("segment_softmax: segment id out of range");
    ++count[static_cast<size_t>(s)];
  }
  for (int64_t s = 0; s < n_segments; ++s) {
    if (count[static_cast<size_t>(s)] == 0) {
      throw EmptySegment("segment_softmax: segment " + std::to_string(s) + " is empty");
    }
  }

  const auto ld = logits.data();
  std::vector<double> seg_max(static_cast<size_t>(n_segments),
                              -std::numeric_limits<double>::infinity());
  for (int64_t i = 0; i < n; ++i) {
    double& m = seg_max[static_cast<size_t>(segment_of[i])];
    m = std::max(m, ld[i]);
  }
  std::vector<double> out(static_cast<size_t>(n));
  std::vector<double> seg_sum(static_cast<size_t>(n_segments), 0.0);
  for (int64_t i = 0; i < n; ++i) {
    const double e = std::exp(ld[i] - seg_max[static_cast<size_t>(segment_of[i])]);
    out[static_cast<size_t>(i)] = e;
    seg_sum[static_cast<size_t>(segment_of[i])] += e;
  }
  for (int64_t i = 0; i < n; ++i) out[static_cast<size_t>(i)] /= seg_sum[static_cast<size_t>(segment_of[i])];

  auto li = logits.impl_ptr();
  return make_op("segment_softmax", logits.shape(), std::move(out), {logits},
                 [li, segment_of, n, n_segments](TensorImpl& node) {
                   // d l_e = y_e * (g_e - sum_{e' in seg} g_e' * y_e')
                   std::vector<double> seg_dot(static_cast<size_t>(n_segments), 0.0);
                   for (int64_t i = 0; i < n; ++i) {
                     seg_dot[static_cast<size_t>(segment_of[i])] += node.grad[i] * node.data[i];
                   }
                   double* lg = grad_of(*li);
                   for (int64_t i = 0; i < n; ++i) {
                     lg[i] += node.data[i] *
                              (node.grad[i] - seg_dot[static_cast<size_t>(segment_of[i])]);
                   }
                 });
}

// --- structure ---

Tensor concat(const std::vector<Tensor>& parts, int axis) {
  if (parts.empty()) throw ShapeMismatch("concat: no parts");
  const int64_t rank = parts[0].rank();
  if (axis < 0 || axis >= rank) throw ShapeMismatch("concat: axis out of range");
  for (const Tensor& p : parts) {
    if (p.rank() != rank) throw ShapeMismatch("concat: mixed ranks");
    for (int64_t d = 0; d < rank; ++d) {
      if (d != axis && p.shape()[static_cast<size_t>(d)] != parts[0].shape()[static_cast<size_t>(d)]) {
        throw ShapeMismatch("concat: non-concat dimensions differ");
      }
    }
  }

  if (rank == 1 || (rank == 2 && axis == 0)) {
    // Stack along dim 0: plain buffer concatenation.
    Shape out_shape = parts[0].shape();
    int64_t total0 = 0;
    for (const Tensor& p : parts) total0 += p.shape()[0];
    out_shape[0] = total0;
    std::vector<double> out;
    out.reserve(static_cast<size_t>(shape_numel(out_shape)));
    for (const Tensor& p : parts) out.insert(out.end(), p.data().begin(), p.data().end());

    std::vector<std::shared_ptr<TensorImpl>> impls;
    for (const Tensor& p : parts) impls.push_back(p.impl_ptr());
    return make_op("concat", std::move(out_shape), std::move(out), parts,
                   [impls](TensorImpl& node) {
                     size_t off = 0;
                     for (const auto& p : impls) {
                       const size_t len = p->data.size();
                       if (p->requires_grad) {
                         double* pg = grad_of(*p);
                         for (size_t i = 0; i < len; ++i) pg[i] += node.grad[off + i];
                       }
                       off += len;
                     }
                   });
  }

  // rank 2, axis 1: interleave rows.
  const int64_t r = parts[0].rows();
  int64_t total_cols = 0;
  std::vector<int64_t> widths;
  for (const Tensor& p : parts) {
    widths.push_back(p.cols());
    total_cols += p.cols();
  }
  std::vector<double> out(static_cast<size_t>(r * total_cols));
  int64_t col_off = 0;
  for (size_t pi = 0; pi < parts.size(); ++pi) {
    const auto pd = parts[pi].data();
    const int64_t w = widths[pi];
    for (int64_t i = 0; i < r; ++i) {
      std::copy(pd.begin() + i * w, pd.begin() + (i + 1) * w,
                out.begin() + i * total_cols + col_off);
    }
    col_off += w;
  }
  std::vector<std::shared_ptr<TensorImpl>> impls;
  for (const Tensor& p : parts) impls.push_back(p.impl_ptr());
  return make_op("concat", {r, total_cols}, std::move(out), parts,
                 [impls, widths, r, total_cols](TensorImpl& node) {
                   int64_t off = 0;
                   for (size_t pi = 0; pi < impls.size(); ++pi) {
                     const int64_t w = widths[pi];
                     if (impls[pi]->requires_grad) {
                       double* pg = grad_of(*impls[pi]);
                       for (int64_t i = 0; i < r; ++i) {
                         for (int64_t j = 0; j < w; ++j) {
                           pg[i * w + j] += node.grad[i * total_cols + off + j];
                         }
                       }
                     }
                     off += w;
                   }
                 });
}

Tensor reshape(const Tensor& x, Shape new_shape) {
  if (shape_numel(new_shape) != x.numel()) throw ShapeMismatch("reshape: element count differs");
  auto xi = x.impl_ptr();
  std::vector<double> out(x.data().begin(), x.data().end());
  return make_op("reshape", std::move(new_shape), std::move(out), {x},
                 [xi](TensorImpl& node) {
                   double* xg = grad_of(*xi);
                   for (size_t i = 0; i < node.grad.size(); ++i) xg[i] += node.grad[i];
                 });
}

Tensor gather_rows(const Tensor& x, const std::vector<int64_t>& rows) {
  require_rank2(x, "gather_rows");
  const int64_t r = x.rows(), c = x.cols();
  for (int64_t idx : rows) {
    if (idx < 0 || idx >= r) throw ShapeMismatch("gather_rows: row index out of range");
  }
  const int64_t n = static_cast<int64_t>(rows.size());
  std::vector<double> out(static_cast<size_t>(n * c));
  const auto xd = x.data();
  for (int64_t i = 0; i < n; ++i) {
    std::copy(xd.begin() + rows[static_cast<size_t>(i)] * c,
              xd.begin() + (rows[static_cast<size_t>(i)] + 1) * c, out.begin() + i * c);
  }
  auto xi = x.impl_ptr();
  return make_op("gather_rows", {n, c}, std::move(out), {x}, [xi, rows, c](TensorImpl& node) {
    double* xg = grad_of(*xi);
    for (size_t i = 0; i < rows.size(); ++i) {
      const double* g = node.grad.data() + i * c;
      double* dst = xg + rows[i] * c;
      for (int64_t j = 0; j < c; ++j) dst[j] += g[j];
    }
  });
}

Tensor scatter_add_rows(const Tensor& src, const std::vector<int64_t>& rows, int64_t n_rows) {
  require_rank2(src, "scatter_add_rows");
  const int64_t n = src.rows(), c = src.cols();
  if (static_cast<int64_t>(rows.size()) != n) {
    throw ShapeMismatch("scatter_add_rows: index count differs from source rows");
  }
  for (int64_t idx : rows) {
    if (idx < 0 || idx >= n_rows) throw ShapeMismatch("scatter_add_rows: row index out of range");
  }
  std::vector<double> out(static_cast<size_t>(n_rows * c), 0.0);
  const auto sd = src.data();
  for (int64_t i = 0; i < n; ++i) {
    double* dst = out.data() + rows[static_cast<size_t>(i)] * c;
    const double* s = sd.data() + i * c;
    for (int64_t j = 0; j < c; ++j) dst[j] += s[j];
  }
  auto si = src.impl_ptr();
  return make_op("scatter_add_rows", {n_rows, c}, std::move(out), {src},
                 [si, rows, c](TensorImpl& node) {
                   double* sg = grad_of(*si);
                   for (size_t i = 0; i < rows.size(); ++i) {
                     const double* g = node.grad.data() + rows[i] * c;
                     double* dst = sg + i * c;
                     for (int64_t j = 0; j < c; ++j) dst[j] += g[j];
                   }
                 });
}

Tensor scale_rows(const Tensor& x, const Tensor& per_row) {
  require_rank2(x, "scale_rows");
  if (per_row.rank() != 1 || per_row.numel() != x.rows()) {
    throw ShapeMismatch("scale_rows: scale vector must have one entry per row");
  }
  const int64_t r = x.rows(), c = x.cols();
  std::vector<double> out(static_cast<size_t>(r * c));
  const auto xd = x.data();
  const auto sd = per_row.data();
  for (int64_t i = 0; i < r; ++i) {
    for (int64_t j = 0; j < c; ++j) out[static_cast<size_t>(i * c + j)] = xd[i * c + j] * sd[i];
  }
  auto xi = x.impl_ptr();
  auto si = per_row.impl_ptr();
  return make_op("scale_rows", {r, c}, std::move(out), {x, per_row},
                 [xi, si, r, c](TensorImpl& node) {
                   double* xg = xi->requires_grad ? grad_of(*xi) : nullptr;
                   double* sg = si->requires_grad ? grad_of(*si) : nullptr;
                   for (int64_t i = 0; i < r; ++i) {
                     for (int64_t j = 0; j < c; ++j) {
                       const double g = node.grad[i * c + j];
                       if (xg) xg[i * c + j] += g * si->data[i];
                       if (sg) sg[i] += g * xi->data[i * c + j];
                     }
                   }
                 });
}

Tensor add_bias(const Tensor& x, const Tensor& bias) {
  require_rank2(x, "add_bias");
  if (bias.rank() != 1 || bias.numel() != x.cols()) {
    throw ShapeMismatch("add_bias: bias must have one entry per column");
  }
  const int64_t r = x.rows(), c = x.cols();
  std::vector<double> out(static_cast<size_t>(r * c));
  const auto xd = x.data();
  const auto bd = bias.data();
  for (int64_t i = 0; i < r; ++i) {
    for (int64_t j = 0; j < c; ++j) out[static_cast<size_t>(i * c + j)] = xd[i * c + j] + bd[j];
  }
  auto xi = x.impl_ptr();
  auto bi = bias.impl_ptr();
  return make_op("add_bias", {r, c}, std::move(out), {x, bias},
                 [xi, bi, r, c](TensorImpl& node) {
                   if (xi->requires_grad) {
                     double* xg = grad_of(*xi);
                     for (int64_t i = 0; i < r * c; ++i) xg[i] += node.grad[i];
                   }
                   if (bi->requires_grad) {
                     double* bg = grad_of(*bi);
                     for (int64_t i = 0; i < r; ++i) {
                       for (int64_t j = 0; j < c; ++j) bg[j] += node.grad[i * c + j];
                     }
                   }
                 });
}

Tensor row_sums(const Tensor& x) {
  require_rank2(x, "row_sums");
  const int64_t r = x.rows(), c = x.cols();
  std::vector<double> out(static_cast<size_t>(r), 0.0);
  const auto xd = x.data();
  for (int64_t i = 0; i < r; ++i) {
    for (int64_t j = 0; j < c; ++j) out[static_cast<size_t>(i)] += xd[i * c + j];
  }
  auto xi = x.impl_ptr();
  return make_op("row_sums", {r}, std::move(out), {x}, [xi, r, c](TensorImpl& node) {
    double* xg = grad_of(*xi);
    for (int64_t i = 0; i < r; ++i) {
      for (int64_t j = 0; j < c; ++j) xg[i * c + j] += node.grad[i];
    }
  });
}

// --- reductions ---

Tensor l2_norm_sq(const Tensor& x) {
  double acc = 0.0;
  for (double v : x.data()) acc += v * v;
  auto xi = x.impl_ptr();
  return make_op("l2_norm_sq", {}, {acc}, {x}, [xi](TensorImpl& node) {
    const double g = node.grad[0];
    double* xg = grad_of(*xi);
    for (size_t i = 0; i < xi->data.size(); ++i) xg[i] += 2.0 * xi->data[i] * g;
  });
}

Tensor sum(const Tensor& x) {
  double acc = 0.0;
  for (double v : x.data()) acc += v;
  auto xi = x.impl_ptr();
  return make_op("sum", {}, {acc}, {x}, [xi](TensorImpl& node) {
    const double g = node.grad[0];
    double* xg = grad_of(*xi);
    for (size_t i = 0; i < xi->data.size(); ++i) xg[i] += g;
  });
}

Tensor mean(const Tensor& x) {
  const int64_t n = x.numel();
  if (n == 0) throw ShapeMismatch("mean: empty tensor");
  double acc = 0.0;
  for (double v : x.data()) acc += v;
  auto xi = x.impl_ptr();
  return make_op("mean", {}, {acc / static_cast<double>(n)}, {x}, [xi, n](TensorImpl& node) {
    const double g = node.grad[0] / static_cast<double>(n);
    double* xg = grad_of(*xi);
    for (size_t i = 0; i < xi->data.size(); ++i) xg[i] += g;
  });
}

// --- backward ---

void backward(const Tensor& loss) {
  if (!loss.defined()) throw Error("backward: undefined tensor");
  TensorImpl* root = loss.impl();
  if (root->numel() != 1) throw NonScalarLoss("backward: loss must be a scalar");
  if (root->backward_done) throw DoubleBackward("backward: already ran for this loss");
  if (!root->requires_grad) {
    root->backward_done = true;
    return;  // nothing upstream wants gradients
  }

  // Iterative post-order DFS; each node enters the order after its parents.
  std::vector<TensorImpl*> order;
  std::unordered_set<TensorImpl*> visited;
  std::vector<std::pair<TensorImpl*, size_t>> stack;
  stack.emplace_back(root, 0);
  visited.insert(root);
  while (!stack.empty()) {
    TensorImpl* node = stack.back().first;
    const size_t next = stack.back().second;
    if (next < node->parents.size()) {
      stack.back().second = next + 1;
      TensorImpl* parent = node->parents[next].get();
      if (parent->requires_grad && !visited.count(parent)) {
        visited.insert(parent);
        stack.emplace_back(parent, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  root->ensure_grad();
  root->grad[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    TensorImpl* node = *it;
    node->ensure_grad();
    if (node->backprop) node->backprop(*node);
  }
  root->backward_done = true;
}

}  // namespace hackg
