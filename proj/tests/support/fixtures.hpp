#pragma once
// Shared test fixtures: the three-product toy graph and randomized record
// generators for schema property tests.

#include <string>
#include <vector>

#include "hackg/kgraph.hpp"
#include "hackg/rng.hpp"

namespace hackg::testing {

// Toy topology: P1/P2 share brand B1 and ingredient I12; P3 is unlabeled.
inline std::vector<ProductRecord> toy_products() {
  return {
      {"P1", "B1", "C1", {"I11", "I12"}, "halal"},
      {"P2", "B1", "C1", {"I12", "I21"}, "haram"},
      {"P3", "B2", "C2", {"I21", "I22"}, ""},
  };
}

inline std::vector<IngredientRecord> toy_ingredients() {
  return {
      {"I11", {0.2, 0.1, 0.0, 0.0, 0.1, 0.9}},
      {"I12", {0.4, 0.1, 0.0, 0.0, 0.2, 0.8}},
      {"I21", {0.9, 0.5, 1.0, 1.0, 0.0, 1.0}},
      {"I22", {0.2, 0.5, 0.0, 0.0, 0.3, 0.7}},
  };
}

inline CosmeticKG toy_graph(const BuildOptions& options = {}) {
  const auto products = toy_products();
  const auto ingredients = toy_ingredients();
  return build_from_records(products, ingredients, options);
}

struct RandomRecords {
  std::vector<ProductRecord> products;
  std::vector<IngredientRecord> ingredients;
};

// Random but precondition-respecting records: names drawn from small pools
// so deduplication and shared property values are exercised.
inline RandomRecords random_records(Rng& rng) {
  RandomRecords out;
  const int n_ingredients = 2 + static_cast<int>(rng.bounded(8));
  for (int i = 0; i < n_ingredients; ++i) {
    IngredientRecord rec;
    rec.name = "ing" + std::to_string(i);
    for (int c = 0; c < kNumericWidth; ++c) {
      // coarse grid so shared-value property nodes occur
      rec.properties[static_cast<size_t>(c)] = static_cast<double>(rng.bounded(4)) / 3.0;
    }
    out.ingredients.push_back(std::move(rec));
  }
  const int n_products = 5 + static_cast<int>(rng.bounded(10));
  for (int p = 0; p < n_products; ++p) {
    ProductRecord rec;
    rec.product = "prod" + std::to_string(p);
    rec.brand = "brand" + std::to_string(rng.bounded(3));
    rec.category = "cat" + std::to_string(rng.bounded(2));
    const int want = 1 + static_cast<int>(rng.bounded(static_cast<uint64_t>(n_ingredients)));
    for (int i = 0; i < want; ++i) {
      const std::string name = "ing" + std::to_string(rng.bounded(static_cast<uint64_t>(n_ingredients)));
      bool seen = false;
      for (const std::string& existing : rec.ingredients) seen = seen || existing == name;
      if (!seen) rec.ingredients.push_back(name);
    }
    const uint64_t status = rng.bounded(3);
    rec.status = status == 0 ? "halal" : status == 1 ? "haram" : "";
    out.products.push_back(std::move(rec));
  }
  return out;
}

}  // namespace hackg::testing
