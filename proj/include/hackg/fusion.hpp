#pragma once
// Gated fusion of learnable entity embeddings with fixed numeric attribute
// vectors. For each entity row:
//   h_hat = h * W_E          n_hat = n * W_N
//   alpha = sigmoid(h_hat + n_hat)
//   beta  = tanh((h || n) * W)
//   out   = alpha (.) beta + (1 - alpha) (.) h_hat

#include <cstdint>

#include "hackg/kgraph.hpp"
#include "hackg/tensor.hpp"

namespace hackg {

struct FusionParams {
  Tensor w_entity;  // E x d
  Tensor w_numeric; // N x d
  Tensor w_concat;  // (E + N) x d
};

FusionParams init_fusion_params(int64_t entity_width, int64_t numeric_width, int64_t hidden_dim,
                                Rng& rng);

struct InitialFeatures {
  Tensor entity_embed;  // |V| x E, learnable
  Tensor numeric;       // |V| x N, fixed; zero rows for attribute-free entities
};

// Learnable embeddings drawn uniform in [-1/sqrt(E), 1/sqrt(E)]; numeric rows
// copied from the graph's property entities.
InitialFeatures make_initial_features(const CosmeticKG& kg, int64_t entity_width, Rng& rng);

// Row counts of h and n must match; returns one fused row per entity.
Tensor fuse(const FusionParams& params, const Tensor& h, const Tensor& n);

}  // namespace hackg
