#pragma once
// Dense double-precision tensor with reverse-mode automatic differentiation.
//
// Design:
// - Values are contiguous std::vector<double>; shapes are rank 0..2 in
//   practice (scalars, vectors, matrices).
// - Every op builds a backward record (parents + gradient closure) when
//   gradients are enabled and at least one input requires them.
// - backward() topologically sorts the recorded graph and accumulates
//   gradients additively, so shared subexpressions sum their path gradients.
// - Broadcasting is limited to scalar-vs-tensor; model code reshapes
//   explicitly. Row helpers (gather/scatter/scale_rows/add_bias) cover the
//   graph workloads.
// - Forward results are checked for NaN/Inf and fail loudly.

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "hackg/errors.hpp"
#include "hackg/rng.hpp"

namespace hackg {

using Shape = std::vector<int64_t>;

int64_t shape_numel(const Shape& shape);

namespace detail {

struct TensorImpl {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;  // allocated lazily, same length as data
  bool requires_grad = false;
  bool backward_done = false;  // set on a loss root once backward ran
  const char* op = "leaf";
  std::vector<std::shared_ptr<TensorImpl>> parents;
  // Reads this node's grad and accumulates into parents' grads.
  std::function<void(TensorImpl&)> backprop;

  int64_t numel() const { return static_cast<int64_t>(data.size()); }
  void ensure_grad() {
    if (grad.size() != data.size()) grad.assign(data.size(), 0.0);
  }
};

}  // namespace detail

class Tensor;

namespace detail {
// Low-level op constructor for fused kernels defined outside tensor.cpp.
// Validates finiteness, wires parents, and installs the gradient closure
// when recording is on.
Tensor make_op(const char* op, Shape shape, std::vector<double> data,
               std::vector<Tensor> parents, std::function<void(TensorImpl&)> backprop);
// Zero-initializes the gradient buffer if needed and returns it.
double* grad_buffer(TensorImpl& node);
}  // namespace detail

class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor from_values(Shape shape, std::vector<double> values, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);
  static Tensor row(std::vector<double> values, bool requires_grad = false);
  // Uniform values in [lo, hi) drawn from rng.
  static Tensor uniform(Shape shape, double lo, double hi, Rng& rng, bool requires_grad = false);

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const;
  int64_t rank() const;
  int64_t numel() const;
  int64_t rows() const;  // size of dim 0
  int64_t cols() const;  // size of dim 1 (rank-2 only)

  bool requires_grad() const;
  void set_requires_grad(bool v);

  double value() const;  // single-element tensors only
  double at(std::initializer_list<int64_t> idx) const;

  std::span<const double> data() const;
  std::span<double> raw_data();  // in-place mutation; for init and optimizers
  bool has_grad() const;
  std::span<const double> grad() const;
  std::span<double> raw_grad();
  void ensure_grad();
  void zero_grad();

  // Deep copy of values (no graph history is copied).
  Tensor clone_detached(bool requires_grad) const;

  detail::TensorImpl* impl() const { return impl_.get(); }
  const std::shared_ptr<detail::TensorImpl>& impl_ptr() const { return impl_; }
  explicit Tensor(std::shared_ptr<detail::TensorImpl> impl) : impl_(std::move(impl)) {}

 private:
  std::shared_ptr<detail::TensorImpl> impl_;
};

// Disables graph recording in a scope (evaluation passes).
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_enabled();

// --- linear algebra ---
Tensor matmul(const Tensor& a, const Tensor& b);

// --- elementwise (exact shape or scalar broadcast on either side) ---
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor hadamard(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);

// --- activations ---
Tensor sigmoid(const Tensor& x);
Tensor tanh_act(const Tensor& x);
Tensor leaky_relu(const Tensor& x, double negative_slope = 0.01);
Tensor softplus(const Tensor& x);  // ln(1 + e^x), overflow-safe
Tensor log_elem(const Tensor& x);
Tensor clamp(const Tensor& x, double lo, double hi);

// Softmax over edge segments: within each segment (all positions e with
// segment_of[e] == s) outputs are positive and sum to one. Stabilized by
// per-segment max subtraction. Every segment in [0, n_segments) must own at
// least one position.
Tensor segment_softmax(const Tensor& logits, const std::vector<int64_t>& segment_of,
                       int64_t n_segments);

// --- structure ---
Tensor concat(const std::vector<Tensor>& parts, int axis);
Tensor reshape(const Tensor& x, Shape new_shape);
Tensor gather_rows(const Tensor& x, const std::vector<int64_t>& rows);
Tensor scatter_add_rows(const Tensor& src, const std::vector<int64_t>& rows, int64_t n_rows);
Tensor scale_rows(const Tensor& x, const Tensor& per_row);        // x[R,C] * s[R]
Tensor add_bias(const Tensor& x, const Tensor& bias);             // x[R,C] + b[C]
Tensor row_sums(const Tensor& x);                                 // [R,C] -> [R]

// --- reductions ---
Tensor l2_norm_sq(const Tensor& x);
Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);

// Runs reverse-mode accumulation from a scalar loss. Gradients add into any
// previously populated buffers; optimizers zero them between steps. Calling
// backward twice on the same root throws DoubleBackward.
void backward(const Tensor& loss);

}  // namespace hackg
