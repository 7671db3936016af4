#include "hackg/fusion.hpp"

#include <cmath>

namespace hackg {

FusionParams init_fusion_params(int64_t entity_width, int64_t numeric_width, int64_t hidden_dim,
                                Rng& rng) {
  auto glorot = [&rng](int64_t fan_in, int64_t fan_out) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    return Tensor::uniform({fan_in, fan_out}, -bound, bound, rng, /*requires_grad=*/true);
  };
  FusionParams p;
  p.w_entity = glorot(entity_width, hidden_dim);
  p.w_numeric = glorot(numeric_width, hidden_dim);
  p.w_concat = glorot(entity_width + numeric_width, hidden_dim);
  return p;
}

InitialFeatures make_initial_features(const CosmeticKG& kg, int64_t entity_width, Rng& rng) {
  const int64_t n = kg.num_entities();
  const double bound = 1.0 / std::sqrt(static_cast<double>(entity_width));
  InitialFeatures f;
  f.entity_embed = Tensor::uniform({n, entity_width}, -bound, bound, rng, /*requires_grad=*/true);

  std::vector<double> numeric(static_cast<size_t>(n * kNumericWidth), 0.0);
  for (const Entity& e : kg.entities()) {
    if (e.numeric_attrs.empty()) continue;
    for (int c = 0; c < kNumericWidth; ++c) {
      numeric[static_cast<size_t>(e.id * kNumericWidth + c)] = e.numeric_attrs[static_cast<size_t>(c)];
    }
  }
  f.numeric = Tensor::from_values({n, kNumericWidth}, std::move(numeric));
  return f;
}

Tensor fuse(const FusionParams& params, const Tensor& h, const Tensor& n) {
  if (h.rank() != 2 || n.rank() != 2 || h.rows() != n.rows()) {
    throw ShapeMismatch("fuse: h and n must be rank 2 with equal row counts");
  }
  if (h.cols() != params.w_entity.rows() || n.cols() != params.w_numeric.rows() ||
      params.w_concat.rows() != h.cols() + n.cols()) {
    throw ShapeMismatch("fuse: parameter widths do not match inputs");
  }
  const Tensor h_hat = matmul(h, params.w_entity);
  const Tensor n_hat = matmul(n, params.w_numeric);
  const Tensor alpha = sigmoid(add(h_hat, n_hat));
  const Tensor beta = tanh_act(matmul(concat({h, n}, 1), params.w_concat));
  const Tensor one_minus_alpha = sub(Tensor::scalar(1.0), alpha);
  return add(hadamard(alpha, beta), hadamard(one_minus_alpha, h_hat));
}

}  // namespace hackg
