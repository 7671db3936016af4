#pragma once
// Synthetic cosmetic knowledge graphs with a known ground-truth halal rule
// (a product is haram iff it contains at least one restricted ingredient),
// plus CSV ingestion of the real record format.

#include <cstdint>
#include <filesystem>
#include <string>
#include <unordered_map>
#include <vector>

#include "hackg/kgraph.hpp"

namespace hackg {

struct SynthConfig {
  int64_t n_products = 2000;
  int64_t n_ingredients = 300;
  int64_t n_brands = 10;
  int64_t n_categories = 8;
  int64_t ingredients_per_product_min = 3;
  int64_t ingredients_per_product_max = 8;
  double haram_ingredient_fraction = 0.1;  // strictly inside (0, 1)
  double label_noise = 0.0;                // flip probability, in [0, 1)
  uint64_t seed = 42;

  void validate() const;  // throws ConfigInvalid
};

struct SynthData {
  std::vector<ProductRecord> products;      // status column carries the noisy label
  std::vector<IngredientRecord> ingredients;
  CosmeticKG kg;
  // Ground-truth rule labels before noise, aligned with products (1 = halal).
  std::vector<int> true_labels;
  // Haram flag per ingredient record.
  std::vector<int> ingredient_is_haram;
};

// Deterministic in the seed. Ingredient popularity follows Zipf(1.1) so some
// ingredients are shared widely. ceil(fraction * n_ingredients) ingredients
// get Restriction = 1.0 (others 0.0); remaining properties are uniform [0,1].
SynthData generate(const SynthConfig& config);

struct IngestResult {
  CosmeticKG kg;
  std::vector<std::string> warnings;  // per-line diagnostics for skipped rows
};

// Reads the two-CSV record format:
//   products:    product,brand,category,ingredients,status
//   ingredients: ingredient,toxicity,allergy,cancer,restriction,min_score,max_score
// Malformed rows are skipped with a warning; bad headers fail hard.
IngestResult ingest_csv(const std::filesystem::path& product_csv,
                        const std::filesystem::path& ingredient_csv,
                        const BuildOptions& options = {});

// Parsed-but-not-built variant used by the CLI's inductive predict mode.
struct ParsedRecords {
  std::vector<ProductRecord> products;
  std::vector<IngredientRecord> ingredients;
  std::vector<std::string> warnings;
};
ParsedRecords parse_record_csvs(const std::filesystem::path& product_csv,
                                const std::filesystem::path& ingredient_csv);

// Writes the synthetic dataset as CSVs: products.csv, ingredients.csv, and
// labels.csv holding the noise-free rule labels (product,status).
void write_synth_csvs(const SynthData& data, const std::filesystem::path& out_dir);

}  // namespace hackg
