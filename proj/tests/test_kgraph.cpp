#include <doctest.h>

#include <set>
#include <sstream>

#include "hackg/kgraph.hpp"
#include "support/fixtures.hpp"

using namespace hackg;
using hackg::testing::random_records;
using hackg::testing::toy_graph;
using hackg::testing::toy_ingredients;
using hackg::testing::toy_products;

TEST_CASE("kind and relation enumerations round-trip") {
  for (int i = 0; i < kNumEntityKinds; ++i) {
    const EntityKind k = static_cast<EntityKind>(i);
    CHECK(entity_kind_from_name(entity_kind_name(k)) == k);
  }
  for (int i = 0; i < kNumRelationKinds; ++i) {
    const RelationKind r = static_cast<RelationKind>(i);
    CHECK(relation_from_name(relation_name(r)) == r);
  }
  CHECK(kNumEntityKinds == 11);
  CHECK(kNumRelationKinds == 5);
  CHECK(kNumEdgeTypes == 11);
}

TEST_CASE("build_from_records deduplicates shared names") {
  const CosmeticKG kg = toy_graph();

  // one Brand entity for the two records naming B1
  CHECK(kg.entities_of(EntityKind::Brand).size() == 2);
  const auto b1 = kg.find(EntityKind::Brand, "b1");
  REQUIRE(b1.has_value());
  int inverse_brand_edges = 0;
  for (const AdjEntry& e : kg.neighbors(*b1)) {
    if (e.dir == EdgeDir::Inverse && e.relation == RelationKind::HasBrand) ++inverse_brand_edges;
  }
  CHECK(inverse_brand_edges == 2);

  // P1 -> I11, I12 triples exist
  const auto p1 = kg.find(EntityKind::Cosmetic, "P1");
  const auto i11 = kg.find(EntityKind::Ingredient, "I11");
  const auto i12 = kg.find(EntityKind::Ingredient, "I12");
  REQUIRE(p1.has_value());
  REQUIRE(i11.has_value());
  REQUIRE(i12.has_value());
  CHECK(kg.has_triple(*p1, RelationKind::HasIngredient, *i11));
  CHECK(kg.has_triple(*p1, RelationKind::HasIngredient, *i12));

  // hand-enumerated totals for the toy fixture
  CHECK(kg.entities_of(EntityKind::Cosmetic).size() == 3);
  CHECK(kg.entities_of(EntityKind::Status).size() == 2);
  CHECK(kg.num_triples() == 38);
}

TEST_CASE("empty record list produces an empty graph") {
  const CosmeticKG kg = build_from_records({}, {});
  CHECK(kg.num_entities() == 0);
  CHECK(kg.num_triples() == 0);
}

TEST_CASE("record errors") {
  // same product with two distinct statuses
  std::vector<ProductRecord> twice = {
      {"P1", "B1", "C1", {"I1"}, "halal"},
      {"P1", "B1", "C1", {"I1"}, "haram"},
  };
  CHECK_THROWS_AS(build_from_records(twice, {}), DuplicateStatus);

  // conflicting one-to-one brand edge
  std::vector<ProductRecord> brands = {
      {"P1", "B1", "C1", {"I1"}, ""},
      {"P1", "B2", "C1", {"I1"}, ""},
  };
  CHECK_THROWS_AS(build_from_records(brands, {}), SchemaViolation);

  std::vector<ProductRecord> empty_name = {{"", "B1", "C1", {"I1"}, ""}};
  CHECK_THROWS_AS(build_from_records(empty_name, {}), SchemaViolation);

  std::vector<ProductRecord> bad_status = {{"P1", "B1", "C1", {"I1"}, "maybe"}};
  CHECK_THROWS_AS(build_from_records(bad_status, {}), SchemaViolation);
}

TEST_CASE("neighbors ordering and contents") {
  // isolated entity: exactly its self-loop
  std::vector<Entity> entities = {{0, EntityKind::Cosmetic, "lonely", {}}};
  const CosmeticKG isolated = CosmeticKG::from_parts(entities, {});
  REQUIRE(isolated.neighbors(0).size() == 1);
  CHECK(isolated.neighbors(0)[0].dir == EdgeDir::SelfLoop);
  CHECK(isolated.neighbors(0)[0].neighbor == 0);

  // P1 with edges to I11, I12, B1: 3 forward entries + self-loop
  std::vector<Entity> parts = {
      {0, EntityKind::Cosmetic, "P1", {}},
      {1, EntityKind::Ingredient, "I11", {}},
      {2, EntityKind::Ingredient, "I12", {}},
      {3, EntityKind::Brand, "B1", {}},
  };
  std::vector<Triple> triples = {
      {0, RelationKind::HasIngredient, 1},
      {0, RelationKind::HasIngredient, 2},
      {0, RelationKind::HasBrand, 3},
  };
  const CosmeticKG kg = CosmeticKG::from_parts(parts, triples);
  const auto p1_neighbors = kg.neighbors(0);
  REQUIRE(p1_neighbors.size() == 4);
  int forward = 0, self = 0;
  for (const AdjEntry& e : p1_neighbors) {
    forward += e.dir == EdgeDir::Forward;
    self += e.dir == EdgeDir::SelfLoop;
  }
  CHECK(forward == 3);
  CHECK(self == 1);

  // sorted by edge type then neighbor
  for (size_t i = 1; i < p1_neighbors.size(); ++i) {
    const bool ordered =
        p1_neighbors[i - 1].edge_type() < p1_neighbors[i].edge_type() ||
        (p1_neighbors[i - 1].edge_type() == p1_neighbors[i].edge_type() &&
         p1_neighbors[i - 1].neighbor < p1_neighbors[i].neighbor);
    CHECK(ordered);
  }

  // tail of (P1, has_ingredient, I11) sees the inverse entry
  bool found_inverse = false;
  for (const AdjEntry& e : kg.neighbors(1)) {
    if (e.dir == EdgeDir::Inverse && e.relation == RelationKind::HasIngredient && e.neighbor == 0) {
      found_inverse = true;
    }
  }
  CHECK(found_inverse);

  CHECK_THROWS_AS(kg.neighbors(99), UnknownEntity);
  CHECK_THROWS_AS(kg.neighbors(-1), UnknownEntity);
}

TEST_CASE("schema closure and inverse symmetry on random records") {
  Rng rng(31);
  for (int trial = 0; trial < 150; ++trial) {
    const auto recs = random_records(rng);
    const CosmeticKG kg = build_from_records(recs.products, recs.ingredients);

    for (const Triple& t : kg.triples()) {
      const EntityKind hk = kg.entity(t.head).kind;
      const EntityKind tk = kg.entity(t.tail).kind;
      switch (t.relation) {
        case RelationKind::HasIngredient:
          CHECK(hk == EntityKind::Cosmetic);
          CHECK(tk == EntityKind::Ingredient);
          break;
        case RelationKind::HasBrand:
          CHECK(hk == EntityKind::Cosmetic);
          CHECK(tk == EntityKind::Brand);
          break;
        case RelationKind::HasCategory:
          CHECK(hk == EntityKind::Cosmetic);
          CHECK(tk == EntityKind::Category);
          break;
        case RelationKind::HasProperty:
          CHECK(hk == EntityKind::Ingredient);
          CHECK(is_property_kind(tk));
          break;
        case RelationKind::HasStatus:
          CHECK(hk == EntityKind::Cosmetic);
          CHECK(tk == EntityKind::Status);
          break;
      }
    }

    // inverse symmetry + exactly one self-loop per entity
    int64_t forward_entries = 0;
    for (int64_t v = 0; v < kg.num_entities(); ++v) {
      int self_loops = 0;
      for (const AdjEntry& e : kg.neighbors(v)) {
        if (e.dir == EdgeDir::SelfLoop) {
          ++self_loops;
          CHECK(e.neighbor == v);
          continue;
        }
        if (e.dir == EdgeDir::Forward) ++forward_entries;
        bool mirrored = false;
        for (const AdjEntry& back : kg.neighbors(e.neighbor)) {
          if (back.neighbor == v && back.relation == e.relation &&
              back.dir == (e.dir == EdgeDir::Forward ? EdgeDir::Inverse : EdgeDir::Forward)) {
            mirrored = true;
          }
        }
        CHECK(mirrored);
      }
      CHECK(self_loops == 1);
    }
    CHECK(forward_entries == kg.num_triples());
  }
}

TEST_CASE("numeric attributes are normalized per column") {
  const CosmeticKG kg = toy_graph();
  // toxicity values {0.2, 0.4, 0.9, 0.2} -> min 0.2, max 0.9
  const auto lo = kg.find(EntityKind::Toxicity, "toxicity=0.2");
  const auto hi = kg.find(EntityKind::Toxicity, "toxicity=0.9");
  REQUIRE(lo.has_value());
  REQUIRE(hi.has_value());
  CHECK(kg.entity(*lo).numeric_attrs[0] == doctest::Approx(0.0));
  CHECK(kg.entity(*hi).numeric_attrs[0] == doctest::Approx(1.0));
  // other slots stay zero
  CHECK(kg.entity(*hi).numeric_attrs[3] == 0.0);

  // constant column maps to 0.5
  std::vector<ProductRecord> products = {{"P1", "B1", "C1", {"I1", "I2"}, ""}};
  std::vector<IngredientRecord> ingredients = {
      {"I1", {0.7, 0.1, 0.2, 0.0, 0.5, 0.5}},
      {"I2", {0.7, 0.9, 0.2, 0.0, 0.5, 0.5}},
  };
  const CosmeticKG flat = build_from_records(products, ingredients);
  const auto tox = flat.find(EntityKind::Toxicity, "toxicity=0.7");
  REQUIRE(tox.has_value());
  CHECK(flat.entity(*tox).numeric_attrs[0] == doctest::Approx(0.5));
}

TEST_CASE("property node modes") {
  const CosmeticKG shared = toy_graph();
  // values {0.2, 0.4, 0.9, 0.2} share one node for the two 0.2 readings
  CHECK(shared.entities_of(EntityKind::Toxicity).size() == 3);
  // continuous scores stay per-ingredient even in shared mode
  CHECK(shared.entities_of(EntityKind::MinScore).size() == 4);

  BuildOptions per_ingredient;
  per_ingredient.property_mode = PropertyNodeMode::PerIngredient;
  const CosmeticKG split_mode = toy_graph(per_ingredient);
  CHECK(split_mode.entities_of(EntityKind::Toxicity).size() == 4);
}

TEST_CASE("split_status_pairs sizes and determinism") {
  std::vector<ProductRecord> products;
  std::vector<IngredientRecord> ingredients = {{"base", {0.5, 0.5, 0.5, 0.0, 0.2, 0.8}}};
  for (int i = 0; i < 10; ++i) {
    products.push_back({"P" + std::to_string(i), "B", "C", {"base"},
                        i % 2 == 0 ? "halal" : "haram"});
  }
  const CosmeticKG kg = build_from_records(products, ingredients);

  const SplitSets splits = split_status_pairs(kg, {0.6, 0.2, 0.2}, 9);
  CHECK(splits.train.size() == 6);
  CHECK(splits.val.size() == 2);
  CHECK(splits.test.size() == 2);

  const SplitSets again = split_status_pairs(kg, {0.6, 0.2, 0.2}, 9);
  for (size_t i = 0; i < splits.train.size(); ++i) {
    CHECK(splits.train[i].product == again.train[i].product);
    CHECK(splits.train[i].label == again.train[i].label);
  }

  CHECK_THROWS_AS(split_status_pairs(kg, {0.5, 0.5, 0.5}, 9), ConfigInvalid);

  // every labeled product exactly once across the three splits
  std::set<int64_t> seen;
  for (const auto* split : {&splits.train, &splits.val, &splits.test}) {
    for (const StatusPair& p : *split) CHECK(seen.insert(p.product).second);
  }
  CHECK(seen.size() == kg.labeled_products().size());
}

TEST_CASE("label leakage guard removes exactly the held-out status edges") {
  const CosmeticKG kg = toy_graph();
  const auto p1 = *kg.find(EntityKind::Cosmetic, "P1");
  const auto p2 = *kg.find(EntityKind::Cosmetic, "P2");
  const auto halal = *kg.find(EntityKind::Status, "halal");
  const auto haram = *kg.find(EntityKind::Status, "haram");

  const CosmeticKG masked = kg.without_status_triples({p2});
  CHECK(masked.has_triple(p1, RelationKind::HasStatus, halal));
  CHECK_FALSE(masked.has_triple(p2, RelationKind::HasStatus, haram));
  CHECK_FALSE(masked.status_of(p2).has_value());
  // no adjacency entry reaches the removed edge from either side
  for (const AdjEntry& e : masked.neighbors(haram)) CHECK(e.neighbor != p2);
  CHECK(masked.num_triples() == kg.num_triples() - 1);
  CHECK(masked.num_entities() == kg.num_entities());
}

TEST_CASE("insufficient data errors") {
  std::vector<ProductRecord> few = {
      {"P0", "B", "C", {"i"}, "halal"},
      {"P1", "B", "C", {"i"}, "haram"},
      {"P2", "B", "C", {"i"}, "halal"},
      {"P3", "B", "C", {"i"}, "haram"},
  };
  const CosmeticKG kg = build_from_records(few, {});
  CHECK_THROWS_AS(split_status_pairs(kg, {0.6, 0.2, 0.2}, 1), InsufficientData);
}

TEST_CASE("triple TSV export is deterministic") {
  const CosmeticKG kg = toy_graph();
  std::ostringstream first, second;
  kg.export_triples_tsv(first);
  kg.export_triples_tsv(second);
  CHECK(first.str() == second.str());
  CHECK(first.str().find("P1\thas_ingredient\tI11\n") != std::string::npos);
  CHECK(first.str().find("P2\thas_status\tharam\n") != std::string::npos);

  // one line per triple
  int64_t lines = 0;
  for (char c : first.str()) lines += c == '\n';
  CHECK(lines == kg.num_triples());
}

TEST_CASE("duplicate and ill-typed triples are rejected by from_parts") {
  std::vector<Entity> entities = {
      {0, EntityKind::Cosmetic, "P", {}},
      {1, EntityKind::Ingredient, "I", {}},
  };
  std::vector<Triple> dup = {
      {0, RelationKind::HasIngredient, 1},
      {0, RelationKind::HasIngredient, 1},
  };
  CHECK_THROWS_AS(CosmeticKG::from_parts(entities, dup), SchemaViolation);

  std::vector<Triple> wrong = {{1, RelationKind::HasBrand, 0}};
  CHECK_THROWS_AS(CosmeticKG::from_parts(entities, wrong), SchemaViolation);

  std::vector<Entity> bad_ids = {{5, EntityKind::Cosmetic, "P", {}}};
  CHECK_THROWS_AS(CosmeticKG::from_parts(bad_ids, {}), SchemaViolation);
}
