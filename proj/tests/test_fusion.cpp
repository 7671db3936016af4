#include <doctest.h>

#include <cmath>

#include "hackg/fusion.hpp"
#include "support/fixtures.hpp"
#include "support/gradcheck.hpp"
#include "support/model_oracles.hpp"

using namespace hackg;
using namespace hackg::testing;

TEST_CASE("all-zero parameters fuse to zero") {
  FusionParams params;
  params.w_entity = Tensor::zeros({4, 3});
  params.w_numeric = Tensor::zeros({2, 3});
  params.w_concat = Tensor::zeros({6, 3});
  Rng rng(1);
  const Tensor h = Tensor::uniform({5, 4}, -1, 1, rng);
  const Tensor n = Tensor::uniform({5, 2}, -1, 1, rng);
  const Tensor out = fuse(params, h, n);
  for (double v : out.data()) CHECK(v == 0.0);
}

TEST_CASE("zero numeric path reduces to the h-only specialization") {
  Rng rng(2);
  FusionParams params;
  params.w_entity = Tensor::uniform({3, 2}, -1, 1, rng);
  params.w_numeric = Tensor::zeros({2, 2});
  params.w_concat = Tensor::uniform({5, 2}, -1, 1, rng);
  const Tensor h = Tensor::uniform({4, 3}, -1, 1, rng);
  const Tensor n = Tensor::zeros({4, 2});
  const Tensor out = fuse(params, h, n);

  // out = sigmoid(h_hat) (.) tanh((h||0) W) + (1 - sigmoid(h_hat)) (.) h_hat
  const Matrix hm = to_matrix(h);
  const Matrix we = to_matrix(params.w_entity);
  const Matrix wc = to_matrix(params.w_concat);
  for (int64_t i = 0; i < 4; ++i) {
    for (int64_t j = 0; j < 2; ++j) {
      double h_hat = 0.0, pre_beta = 0.0;
      for (int64_t k = 0; k < 3; ++k) {
        h_hat += hm[i][k] * we[k][j];
        pre_beta += hm[i][k] * wc[k][j];
      }
      const double alpha = oracle_sigmoid(h_hat);
      const double expected = alpha * std::tanh(pre_beta) + (1.0 - alpha) * h_hat;
      CHECK(out.at({i, j}) == doctest::Approx(expected).epsilon(1e-12));
    }
  }
}

TEST_CASE("fuse matches the scalar-loop oracle to 1e-12") {
  Rng rng(7);
  const int64_t e_width = 4, n_width = 2, d = 3, rows = 6;
  FusionParams params = init_fusion_params(e_width, n_width, d, rng);
  const Tensor h = Tensor::uniform({rows, e_width}, -2, 2, rng);
  const Tensor n = Tensor::uniform({rows, n_width}, -2, 2, rng);

  const Tensor out = fuse(params, h, n);
  const Matrix expected = oracle_fuse(to_matrix(h), to_matrix(n), to_matrix(params.w_entity),
                                      to_matrix(params.w_numeric), to_matrix(params.w_concat));
  for (int64_t i = 0; i < rows; ++i) {
    for (int64_t j = 0; j < d; ++j) {
      CHECK(std::abs(out.at({i, j}) - expected[static_cast<size_t>(i)][static_cast<size_t>(j)]) <
            1e-12);
    }
  }
}

TEST_CASE("gate saturation interpolates between beta and h_hat") {
  Rng rng(3);
  const int64_t width = 3;
  FusionParams params;
  params.w_numeric = Tensor::zeros({2, width});
  params.w_concat = Tensor::uniform({width + 2, width}, -1, 1, rng);
  const Tensor n = Tensor::zeros({2, 2});

  // push h_hat + n_hat strongly positive: alpha -> 1, output -> beta
  params.w_entity = Tensor::full({width, width}, 20.0);
  const Tensor h_pos = Tensor::full({2, width}, 1.0);
  const Tensor near_beta = fuse(params, h_pos, n);
  const Tensor beta = tanh_act(matmul(concat({h_pos, n}, 1), params.w_concat));
  const Tensor h_hat = matmul(h_pos, params.w_entity);
  for (int64_t i = 0; i < 2; ++i) {
    for (int64_t j = 0; j < width; ++j) {
      CHECK(near_beta.at({i, j}) == doctest::Approx(beta.at({i, j})).epsilon(1e-6));
    }
  }

  // push it strongly negative: alpha -> 0, output -> h_hat
  const Tensor h_neg = Tensor::full({2, width}, -1.0);
  const Tensor near_h = fuse(params, h_neg, n);
  const Tensor h_hat_neg = matmul(h_neg, params.w_entity);
  for (int64_t i = 0; i < 2; ++i) {
    for (int64_t j = 0; j < width; ++j) {
      CHECK(near_h.at({i, j}) == doctest::Approx(h_hat_neg.at({i, j})).epsilon(1e-6));
    }
  }
}

TEST_CASE("fuse gradients pass the finite-difference check") {
  Rng rng(4);
  FusionParams params = init_fusion_params(3, 2, 4, rng);
  Tensor h = Tensor::uniform({3, 3}, -2, 2, rng, true);
  Tensor n = Tensor::uniform({3, 2}, -2, 2, rng, true);
  const double err = max_grad_rel_error(
      {h, n, params.w_entity, params.w_numeric, params.w_concat},
      [&] { return mean(fuse(params, h, n)); });
  CHECK(err < 1e-4);
}

TEST_CASE("permuting entity rows permutes fused rows identically") {
  Rng rng(5);
  FusionParams params = init_fusion_params(3, 2, 4, rng);
  const Tensor h = Tensor::uniform({5, 3}, -2, 2, rng);
  const Tensor n = Tensor::uniform({5, 2}, -2, 2, rng);
  const std::vector<int64_t> perm{3, 0, 4, 1, 2};

  const Tensor direct = fuse(params, gather_rows(h, perm), gather_rows(n, perm));
  const Tensor permuted = gather_rows(fuse(params, h, n), perm);
  for (int64_t i = 0; i < 5; ++i) {
    for (int64_t j = 0; j < 4; ++j) {
      CHECK(direct.at({i, j}) == doctest::Approx(permuted.at({i, j})).epsilon(1e-12));
    }
  }
}

TEST_CASE("initial features: zero numeric rows for attribute-free entities") {
  const CosmeticKG kg = toy_graph();
  Rng rng(6);
  const InitialFeatures feats = make_initial_features(kg, 8, rng);
  CHECK(feats.entity_embed.rows() == kg.num_entities());
  CHECK(feats.numeric.cols() == kNumericWidth);

  const auto p1 = *kg.find(EntityKind::Cosmetic, "P1");
  for (int c = 0; c < kNumericWidth; ++c) CHECK(feats.numeric.at({p1, c}) == 0.0);

  const auto tox = *kg.find(EntityKind::Toxicity, "toxicity=0.9");
  CHECK(feats.numeric.at({tox, 0}) == doctest::Approx(1.0));

  const double bound = 1.0 / std::sqrt(8.0);
  for (double v : feats.entity_embed.data()) {
    CHECK(v >= -bound);
    CHECK(v < bound);
  }
}

TEST_CASE("fuse shape errors") {
  Rng rng(8);
  FusionParams params = init_fusion_params(3, 2, 4, rng);
  const Tensor h = Tensor::uniform({3, 3}, -1, 1, rng);
  const Tensor n_wrong_rows = Tensor::uniform({2, 2}, -1, 1, rng);
  CHECK_THROWS_AS(fuse(params, h, n_wrong_rows), ShapeMismatch);
  const Tensor n_wrong_cols = Tensor::uniform({3, 5}, -1, 1, rng);
  CHECK_THROWS_AS(fuse(params, h, n_wrong_cols), ShapeMismatch);
}
