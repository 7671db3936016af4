#include <doctest.h>

#include <cmath>

#include "hackg/rgat.hpp"
#include "hackg/text.hpp"
#include "support/fixtures.hpp"
#include "support/gradcheck.hpp"
#include "support/model_oracles.hpp"

using namespace hackg;
using namespace hackg::testing;

namespace {

// Small schema-valid graph: 2 cosmetics, 2 ingredients, 1 brand, 1 category.
CosmeticKG six_node_graph() {
  std::vector<Entity> entities = {
      {0, EntityKind::Cosmetic, "p0", {}},   {1, EntityKind::Cosmetic, "p1", {}},
      {2, EntityKind::Ingredient, "i0", {}}, {3, EntityKind::Ingredient, "i1", {}},
      {4, EntityKind::Brand, "b0", {}},      {5, EntityKind::Category, "c0", {}},
  };
  std::vector<Triple> triples = {
      {0, RelationKind::HasIngredient, 2}, {0, RelationKind::HasIngredient, 3},
      {1, RelationKind::HasIngredient, 3}, {0, RelationKind::HasBrand, 4},
      {1, RelationKind::HasBrand, 4},      {1, RelationKind::HasCategory, 5},
  };
  return CosmeticKG::from_parts(std::move(entities), std::move(triples));
}

CosmeticKG five_node_graph() {
  std::vector<Entity> entities = {
      {0, EntityKind::Cosmetic, "p0", {}},   {1, EntityKind::Ingredient, "i0", {}},
      {2, EntityKind::Ingredient, "i1", {}}, {3, EntityKind::Brand, "b0", {}},
      {4, EntityKind::Status, "halal", {}},
  };
  std::vector<Triple> triples = {
      {0, RelationKind::HasIngredient, 1},
      {0, RelationKind::HasIngredient, 2},
      {0, RelationKind::HasBrand, 3},
      {0, RelationKind::HasStatus, 4},
  };
  return CosmeticKG::from_parts(std::move(entities), std::move(triples));
}

}  // namespace

TEST_CASE("zero attention weights give logits equal to the bias") {
  const CosmeticKG kg = five_node_graph();
  const EdgeIndex edges = EdgeIndex::from_graph(kg);
  RgatChannelParams chan;
  chan.proj = Tensor::zeros({4, 2});
  chan.attn_w = Tensor::zeros({6, 1});
  chan.attn_b = Tensor::from_values({1}, {0.3});
  chan.rel_embed = Tensor::zeros({kNumEdgeTypes, 2});
  Rng rng(1);
  const Tensor feats = Tensor::uniform({5, 4}, -1, 1, rng);
  const Tensor logits = attention_logits(chan, edges, feats);
  REQUIRE(logits.numel() == edges.n_edges());
  for (double v : logits.data()) CHECK(v == doctest::Approx(0.3));
}

TEST_CASE("single entity with only its self-loop yields one logit") {
  std::vector<Entity> one = {{0, EntityKind::Cosmetic, "p", {}}};
  const CosmeticKG kg = CosmeticKG::from_parts(one, {});
  const EdgeIndex edges = EdgeIndex::from_graph(kg);
  Rng rng(2);
  RgatLayerParams layer = init_layer_params(4, 2, rng);
  const Tensor feats = Tensor::uniform({1, 4}, -1, 1, rng);
  const Tensor logits = attention_logits(layer.channels[0], edges, feats);
  CHECK(logits.numel() == 1);
}

TEST_CASE("attention logits match the scalar-loop oracle to 1e-12") {
  const CosmeticKG kg = five_node_graph();
  const EdgeIndex edges = EdgeIndex::from_graph(kg);
  Rng rng(3);
  RgatLayerParams layer = init_layer_params(4, 1, rng);
  const Tensor feats = Tensor::uniform({5, 4}, -2, 2, rng);

  const Tensor logits = attention_logits(layer.channels[0], edges, feats);
  const auto expected = oracle_attention_logits(
      to_matrix(feats), oracle_edges(edges), to_matrix(layer.channels[0].proj),
      to_matrix(layer.channels[0].attn_w), layer.channels[0].attn_b.data()[0],
      to_matrix(layer.channels[0].rel_embed));
  REQUIRE(logits.numel() == static_cast<int64_t>(expected.size()));
  for (size_t e = 0; e < expected.size(); ++e) {
    CHECK(std::abs(logits.data()[e] - expected[e]) < 1e-12);
  }
}

TEST_CASE("self-loop-only entity aggregates its own modulated features") {
  std::vector<Entity> one = {{0, EntityKind::Cosmetic, "p", {}}};
  const CosmeticKG kg = CosmeticKG::from_parts(one, {});
  const EdgeIndex edges = EdgeIndex::from_graph(kg);
  Rng rng(4);
  RgatLayerParams layer = init_layer_params(4, 2, rng);
  const Tensor feats = Tensor::uniform({1, 4}, -2, 2, rng);

  std::vector<Tensor> attn;
  const Tensor out = attend_and_aggregate(layer, edges, feats, &attn);
  REQUIRE(attn.size() == 2);
  CHECK(attn[0].data()[0] == doctest::Approx(1.0));

  for (int64_t k = 0; k < 2; ++k) {
    const Tensor projected = matmul(feats, layer.channels[static_cast<size_t>(k)].proj);
    const Tensor rel = gather_rows(layer.channels[static_cast<size_t>(k)].rel_embed,
                                   std::vector<int64_t>{kSelfLoopEdgeType});
    const Tensor expected = leaky_relu(hadamard(projected, rel));
    for (int64_t j = 0; j < 2; ++j) {
      CHECK(out.at({0, k * 2 + j}) == doctest::Approx(expected.at({0, j})).epsilon(1e-12));
    }
  }
}

TEST_CASE("two identical neighbors split attention evenly") {
  // p0 has two ingredients; make their features identical
  const CosmeticKG kg = five_node_graph();
  const EdgeIndex edges = EdgeIndex::from_graph(kg);
  Rng rng(5);
  RgatLayerParams layer = init_layer_params(4, 1, rng);
  std::vector<double> rows(5 * 4);
  Rng fill(6);
  for (double& v : rows) v = fill.uniform(-1, 1);
  // ingredient rows 1 and 2 identical
  for (int j = 0; j < 4; ++j) rows[static_cast<size_t>(2 * 4 + j)] = rows[static_cast<size_t>(1 * 4 + j)];
  const Tensor feats = Tensor::from_values({5, 4}, rows);

  std::vector<Tensor> attn;
  attend_and_aggregate(layer, edges, feats, &attn);
  // find the two has_ingredient edges targeting p0
  double w1 = -1, w2 = -1;
  for (int64_t e = 0; e < edges.n_edges(); ++e) {
    if (edges.target[static_cast<size_t>(e)] == 0 &&
        edges.edge_type[static_cast<size_t>(e)] ==
            edge_type_id(RelationKind::HasIngredient, EdgeDir::Forward)) {
      (w1 < 0 ? w1 : w2) = attn[0].data()[static_cast<size_t>(e)];
    }
  }
  CHECK(w1 == doctest::Approx(w2).epsilon(1e-12));
}

TEST_CASE("attend_and_aggregate matches the scalar oracle on a 6-node graph") {
  const CosmeticKG kg = six_node_graph();
  const EdgeIndex edges = EdgeIndex::from_graph(kg);
  Rng rng(11);
  RgatLayerParams layer = init_layer_params(4, 2, rng);
  const Tensor feats = Tensor::uniform({6, 4}, -2, 2, rng);

  const Tensor out = attend_and_aggregate(layer, edges, feats);
  const Matrix expected =
      oracle_attend_and_aggregate(to_matrix(feats), oracle_edges(edges), layer, 6);
  for (int64_t i = 0; i < 6; ++i) {
    for (int64_t j = 0; j < 4; ++j) {
      CHECK(std::abs(out.at({i, j}) - expected[static_cast<size_t>(i)][static_cast<size_t>(j)]) <
            1e-12);
    }
  }
}

TEST_CASE("residual_combine endpoint behaviour") {
  Rng rng(7);
  const Tensor layer_out = Tensor::uniform({3, 4}, -2, 2, rng);
  const Tensor e0 = Tensor::uniform({3, 4}, -2, 2, rng);

  const Tensor full = residual_combine(1.0, layer_out, e0);
  const Tensor none = residual_combine(0.0, layer_out, e0);
  const Tensor fixed = residual_combine(0.5, e0, e0);
  const Tensor sigma_e0 = leaky_relu(e0);
  const Tensor sigma_lo = leaky_relu(layer_out);
  for (int64_t i = 0; i < 3; ++i) {
    for (int64_t j = 0; j < 4; ++j) {
      CHECK(full.at({i, j}) == doctest::Approx(sigma_e0.at({i, j})).epsilon(1e-12));
      CHECK(none.at({i, j}) == doctest::Approx(sigma_lo.at({i, j})).epsilon(1e-12));
      CHECK(fixed.at({i, j}) == doctest::Approx(sigma_e0.at({i, j})).epsilon(1e-12));
    }
  }
  CHECK_THROWS_AS(residual_combine(1.5, layer_out, e0), ConfigInvalid);
}

TEST_CASE("readout identity and zero cases") {
  std::vector<double> id(16, 0.0);
  for (int i = 0; i < 4; ++i) id[static_cast<size_t>(i * 4 + i)] = 1.0;
  ReadoutParams identity{Tensor::from_values({4, 4}, id), Tensor::zeros({4})};
  Rng rng(8);
  const Tensor non_negative = Tensor::uniform({3, 4}, 0, 2, rng);
  const Tensor out = readout(identity, {non_negative});
  for (int64_t i = 0; i < 3; ++i) {
    for (int64_t j = 0; j < 4; ++j) {
      CHECK(out.at({i, j}) == doctest::Approx(non_negative.at({i, j})).epsilon(1e-12));
    }
  }

  ReadoutParams zero{Tensor::zeros({8, 4}), Tensor::zeros({4})};
  const Tensor zeros = readout(zero, {non_negative, non_negative});
  for (double v : zeros.data()) CHECK(v == 0.0);

  CHECK_THROWS_AS(readout(identity, {non_negative, non_negative}), WrongLayerCount);
}

TEST_CASE("readout matches scalar oracle for two layers") {
  Rng rng(9);
  ReadoutParams params = init_readout_params(2, 4, rng);
  const Tensor l1 = Tensor::uniform({3, 4}, -2, 2, rng);
  const Tensor l2 = Tensor::uniform({3, 4}, -2, 2, rng);
  const Tensor out = readout(params, {l1, l2});
  const std::vector<double> bias(params.b.data().begin(), params.b.data().end());
  const Matrix expected =
      oracle_readout({to_matrix(l1), to_matrix(l2)}, to_matrix(params.w), bias);
  for (int64_t i = 0; i < 3; ++i) {
    for (int64_t j = 0; j < 4; ++j) {
      CHECK(std::abs(out.at({i, j}) - expected[static_cast<size_t>(i)][static_cast<size_t>(j)]) <
            1e-12);
    }
  }
}

TEST_CASE("encode rejects zero layers and handles degenerate graphs") {
  std::vector<Entity> one = {{0, EntityKind::Cosmetic, "p", {}}};
  const CosmeticKG kg = CosmeticKG::from_parts(one, {});
  const EdgeIndex edges = EdgeIndex::from_graph(kg);
  Rng rng(10);

  EncoderParams empty;
  empty.fusion = init_fusion_params(4, kNumericWidth, 4, rng);
  empty.readout = init_readout_params(1, 4, rng);
  const Tensor embed = Tensor::uniform({1, 4}, -1, 1, rng);
  const Tensor numeric = Tensor::zeros({1, kNumericWidth});
  CHECK_THROWS_AS(encode(empty, edges, embed, numeric), WrongLayerCount);

  EncoderParams two;
  two.fusion = init_fusion_params(4, kNumericWidth, 4, rng);
  two.layers = {init_layer_params(4, 2, rng), init_layer_params(4, 2, rng)};
  two.residual.alpha = {0.1, 0.1};
  two.readout = init_readout_params(2, 4, rng);
  const EncodeResult res = encode(two, edges, embed, numeric);
  CHECK(res.output.rows() == 1);
  for (double v : res.output.data()) CHECK(std::isfinite(v));
}

TEST_CASE("encode is deterministic on the toy graph") {
  const CosmeticKG kg = toy_graph();
  const EdgeIndex edges = EdgeIndex::from_graph(kg);
  auto run_hash = [&]() {
    Rng rng(42);
    EncoderParams params;
    params.fusion = init_fusion_params(8, kNumericWidth, 8, rng);
    params.layers = {init_layer_params(8, 2, rng), init_layer_params(8, 2, rng)};
    params.residual.alpha = {0.1, 0.1};
    params.readout = init_readout_params(2, 8, rng);
    const Tensor embed = Tensor::uniform({kg.num_entities(), 8}, -1, 1, rng);
    std::vector<double> numeric_rows(static_cast<size_t>(kg.num_entities() * kNumericWidth), 0.0);
    for (const Entity& e : kg.entities()) {
      for (size_t c = 0; c < e.numeric_attrs.size(); ++c) {
        numeric_rows[static_cast<size_t>(e.id) * kNumericWidth + c] = e.numeric_attrs[c];
      }
    }
    const Tensor numeric = Tensor::from_values({kg.num_entities(), kNumericWidth}, numeric_rows);
    const EncodeResult res = encode(params, edges, embed, numeric);
    const auto bytes = res.output.data();
    return fnv1a64(std::string_view(reinterpret_cast<const char*>(bytes.data()),
                                    bytes.size() * sizeof(double)));
  };
  CHECK(run_hash() == run_hash());
}

TEST_CASE("attention weights sum to one per entity and channel") {
  Rng rng(13);
  for (int trial = 0; trial < 10; ++trial) {
    const auto recs = random_records(rng);
    const CosmeticKG kg = build_from_records(recs.products, recs.ingredients);
    const EdgeIndex edges = EdgeIndex::from_graph(kg);
    RgatLayerParams layer = init_layer_params(8, 2, rng);
    const Tensor feats = Tensor::uniform({kg.num_entities(), 8}, -2, 2, rng);
    std::vector<Tensor> attn;
    attend_and_aggregate(layer, edges, feats, &attn);
    for (const Tensor& channel : attn) {
      std::vector<double> sums(static_cast<size_t>(kg.num_entities()), 0.0);
      for (int64_t e = 0; e < edges.n_edges(); ++e) {
        sums[static_cast<size_t>(edges.target[static_cast<size_t>(e)])] += channel.data()[static_cast<size_t>(e)];
      }
      for (double s : sums) CHECK(std::abs(s - 1.0) <= 1e-9);
    }
  }
}

TEST_CASE("end-to-end encode gradient check on a small graph") {
  const CosmeticKG kg = five_node_graph();
  const EdgeIndex edges = EdgeIndex::from_graph(kg);
  // seed chosen so no leaky-relu pre-activation sits inside the central
  // finite-difference window of its kink
  Rng rng(15);
  EncoderParams params;
  params.fusion = init_fusion_params(4, kNumericWidth, 4, rng);
  params.layers = {init_layer_params(4, 2, rng)};
  params.residual.alpha = {0.25};
  params.readout = init_readout_params(1, 4, rng);
  Tensor embed = Tensor::uniform({5, 4}, -1, 1, rng, true);
  const Tensor numeric = Tensor::uniform({5, kNumericWidth}, 0, 1, rng);

  std::vector<Tensor> leaves{embed,
                             params.fusion.w_entity,
                             params.fusion.w_numeric,
                             params.fusion.w_concat,
                             params.readout.w,
                             params.readout.b};
  for (const RgatChannelParams& c : params.layers[0].channels) {
    leaves.push_back(c.proj);
    leaves.push_back(c.attn_w);
    leaves.push_back(c.attn_b);
    leaves.push_back(c.rel_embed);
  }
  const double err = max_grad_rel_error(leaves, [&] {
    return mean(encode(params, edges, embed, numeric).output);
  });
  CHECK(err < 1e-4);
}

TEST_CASE("relabeling invariance") {
  const CosmeticKG kg = six_node_graph();
  // permutation of entity ids (kinds preserved per id role)
  const std::vector<int64_t> perm{2, 0, 3, 1, 5, 4};  // new id of old entity i
  std::vector<Entity> permuted_entities(6);
  for (const Entity& e : kg.entities()) {
    Entity copy = e;
    copy.id = perm[static_cast<size_t>(e.id)];
    permuted_entities[static_cast<size_t>(copy.id)] = copy;
  }
  std::vector<Triple> permuted_triples;
  for (const Triple& t : kg.triples()) {
    permuted_triples.push_back(Triple{perm[static_cast<size_t>(t.head)], t.relation,
                                      perm[static_cast<size_t>(t.tail)]});
  }
  const CosmeticKG relabeled = CosmeticKG::from_parts(permuted_entities, permuted_triples);

  Rng rng(15);
  EncoderParams params;
  params.fusion = init_fusion_params(4, kNumericWidth, 4, rng);
  params.layers = {init_layer_params(4, 2, rng), init_layer_params(4, 2, rng)};
  params.residual.alpha = {0.2, 0.2};
  params.readout = init_readout_params(2, 4, rng);
  const Tensor embed = Tensor::uniform({6, 4}, -1, 1, rng);
  const Tensor numeric = Tensor::zeros({6, kNumericWidth});

  // permute the feature rows consistently
  std::vector<int64_t> inverse(6);
  for (int64_t i = 0; i < 6; ++i) inverse[static_cast<size_t>(perm[static_cast<size_t>(i)])] = i;
  const Tensor embed_perm = gather_rows(embed, inverse);

  const EncodeResult base = encode(params, EdgeIndex::from_graph(kg), embed, numeric);
  const EncodeResult moved = encode(params, EdgeIndex::from_graph(relabeled), embed_perm, numeric);
  for (int64_t old_id = 0; old_id < 6; ++old_id) {
    const int64_t new_id = perm[static_cast<size_t>(old_id)];
    for (int64_t j = 0; j < 4; ++j) {
      CHECK(base.output.at({old_id, j}) ==
            doctest::Approx(moved.output.at({new_id, j})).epsilon(1e-9));
    }
  }
}

TEST_CASE("locality: far-away perturbations leave pre-readout rows unchanged") {
  // chain: p0 - i0 (shared) - p1 - i1 ; i1 is 3 hops from p0
  std::vector<Entity> entities = {
      {0, EntityKind::Cosmetic, "p0", {}},
      {1, EntityKind::Ingredient, "i0", {}},
      {2, EntityKind::Cosmetic, "p1", {}},
      {3, EntityKind::Ingredient, "i1", {}},
  };
  std::vector<Triple> triples = {
      {0, RelationKind::HasIngredient, 1},
      {2, RelationKind::HasIngredient, 1},
      {2, RelationKind::HasIngredient, 3},
  };
  const CosmeticKG kg = CosmeticKG::from_parts(entities, triples);
  const EdgeIndex edges = EdgeIndex::from_graph(kg);

  Rng rng(16);
  EncoderParams params;
  params.fusion = init_fusion_params(4, kNumericWidth, 4, rng);
  params.layers = {init_layer_params(4, 2, rng), init_layer_params(4, 2, rng)};
  params.residual.alpha = {0.3, 0.3};
  params.readout = init_readout_params(2, 4, rng);
  Tensor embed = Tensor::uniform({4, 4}, -1, 1, rng);
  const Tensor numeric = Tensor::zeros({4, kNumericWidth});

  const EncodeResult before = encode(params, edges, embed, numeric);
  auto data = embed.raw_data();
  for (int j = 0; j < 4; ++j) data[static_cast<size_t>(3 * 4 + j)] += 0.5;  // perturb i1 only
  const EncodeResult after = encode(params, edges, embed, numeric);

  // with L = 2 the row of p0 (3 hops from i1) is unchanged pre-readout
  for (size_t l = 0; l < 2; ++l) {
    for (int64_t j = 0; j < 4; ++j) {
      CHECK(before.per_layer[l].at({0, j}) ==
            doctest::Approx(after.per_layer[l].at({0, j})).epsilon(1e-12));
    }
  }
  // while p1 (1 hop) does change at the second layer
  double delta = 0.0;
  for (int64_t j = 0; j < 4; ++j) {
    delta += std::abs(before.per_layer[1].at({2, j}) - after.per_layer[1].at({2, j}));
  }
  CHECK(delta > 1e-9);
}

TEST_CASE("gcn_propagate matches hand-computed symmetric normalization") {
  // two entities joined by one edge; degrees (with self-loops) are 2 and 2
  std::vector<Entity> entities = {
      {0, EntityKind::Cosmetic, "p", {}},
      {1, EntityKind::Ingredient, "i", {}},
  };
  std::vector<Triple> triples = {{0, RelationKind::HasIngredient, 1}};
  const CosmeticKG kg = CosmeticKG::from_parts(entities, triples);
  const EdgeIndex edges = EdgeIndex::from_graph(kg);

  const Tensor feats = Tensor::from_values({2, 2}, {1, 2, 3, 4});
  const Tensor out = gcn_propagate(edges, feats);
  // P = [[1/2, 1/2], [1/2, 1/2]] for this graph
  CHECK(out.at({0, 0}) == doctest::Approx(0.5 * 1 + 0.5 * 3));
  CHECK(out.at({0, 1}) == doctest::Approx(0.5 * 2 + 0.5 * 4));
  CHECK(out.at({1, 0}) == doctest::Approx(0.5 * 1 + 0.5 * 3));
  CHECK(out.at({1, 1}) == doctest::Approx(0.5 * 2 + 0.5 * 4));
}
