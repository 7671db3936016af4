#include "hackg/synthdata.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "hackg/rng.hpp"

namespace hackg {

void SynthConfig::validate() const {
  std::vector<std::string> problems;
  if (n_products < 1) problems.push_back("n_products must be at least 1");
  if (n_ingredients < 1) problems.push_back("n_ingredients must be at least 1");
  if (n_brands < 1) problems.push_back("n_brands must be at least 1");
  if (n_categories < 1) problems.push_back("n_categories must be at least 1");
  if (ingredients_per_product_min < 1) {
    problems.push_back("ingredients_per_product_min must be at least 1");
  }
  if (ingredients_per_product_max < ingredients_per_product_min) {
    problems.push_back("ingredients_per_product range must satisfy min <= max");
  }
  if (ingredients_per_product_max > n_ingredients) {
    problems.push_back("ingredients_per_product_max cannot exceed n_ingredients");
  }
  if (!(haram_ingredient_fraction > 0.0 && haram_ingredient_fraction < 1.0)) {
    problems.push_back("haram_ingredient_fraction must lie strictly inside (0, 1)");
  }
  if (!(label_noise >= 0.0 && label_noise < 1.0)) {
    problems.push_back("label_noise must lie in [0, 1)");
  }
  if (!problems.empty()) {
    std::string msg = "invalid synth config:";
    for (const std::string& p : problems) msg += "\n  - " + p;
    throw ConfigInvalid(msg);
  }
}

namespace {

std::string padded(const char* prefix, int64_t i, int width) {
  std::string digits = std::to_string(i);
  while (static_cast<int>(digits.size()) < width) digits.insert(digits.begin(), '0');
  return std::string(prefix) + digits;
}

}  // namespace

SynthData generate(const SynthConfig& config) {
  config.validate();
  Rng rng(config.seed);

  SynthData data;
  data.ingredients.reserve(static_cast<size_t>(config.n_ingredients));
  data.ingredient_is_haram.assign(static_cast<size_t>(config.n_ingredients), 0);

  const int64_t n_haram = static_cast<int64_t>(std::ceil(
      config.haram_ingredient_fraction * static_cast<double>(config.n_ingredients)));
  std::vector<int64_t> shuffled(static_cast<size_t>(config.n_ingredients));
  for (int64_t i = 0; i < config.n_ingredients; ++i) shuffled[static_cast<size_t>(i)] = i;
  rng.shuffle(shuffled);
  for (int64_t i = 0; i < n_haram; ++i) {
    data.ingredient_is_haram[static_cast<size_t>(shuffled[static_cast<size_t>(i)])] = 1;
  }

  for (int64_t i = 0; i < config.n_ingredients; ++i) {
    IngredientRecord rec;
    rec.name = padded("ING", i, 5);
    rec.properties = {rng.uniform(), rng.uniform(), rng.uniform(),
                      data.ingredient_is_haram[static_cast<size_t>(i)] ? 1.0 : 0.0,
                      rng.uniform(), rng.uniform()};
    data.ingredients.push_back(std::move(rec));
  }

  // Zipf(1.1) popularity over a shuffled ingredient order: a few ingredients
  // are shared by many products, mirroring real ingredient reuse.
  std::vector<int64_t> rank_of(static_cast<size_t>(config.n_ingredients));
  for (int64_t i = 0; i < config.n_ingredients; ++i) rank_of[static_cast<size_t>(i)] = i;
  rng.shuffle(rank_of);
  std::vector<double> cumulative(static_cast<size_t>(config.n_ingredients));
  double total = 0.0;
  for (int64_t r = 0; r < config.n_ingredients; ++r) {
    total += 1.0 / std::pow(static_cast<double>(r + 1), 1.1);
    cumulative[static_cast<size_t>(r)] = total;
  }
  auto draw_ingredient = [&]() {
    const double u = rng.uniform() * total;
    const auto it = std::lower_bound(cumulative.begin(), cumulative.end(), u);
    const int64_t rank = std::min<int64_t>(it - cumulative.begin(), config.n_ingredients - 1);
    return rank_of[static_cast<size_t>(rank)];
  };

  data.products.reserve(static_cast<size_t>(config.n_products));
  data.true_labels.reserve(static_cast<size_t>(config.n_products));
  const int64_t span =
      config.ingredients_per_product_max - config.ingredients_per_product_min + 1;
  for (int64_t p = 0; p < config.n_products; ++p) {
    ProductRecord rec;
    rec.product = padded("P", p, 5);
    rec.brand = padded("BR", static_cast<int64_t>(rng.bounded(static_cast<uint64_t>(config.n_brands))), 2);
    rec.category =
        padded("CAT", static_cast<int64_t>(rng.bounded(static_cast<uint64_t>(config.n_categories))), 2);

    const int64_t want =
        config.ingredients_per_product_min + static_cast<int64_t>(rng.bounded(static_cast<uint64_t>(span)));
    std::vector<int64_t> chosen;
    while (static_cast<int64_t>(chosen.size()) < want) {
      const int64_t ing = draw_ingredient();
      if (std::find(chosen.begin(), chosen.end(), ing) == chosen.end()) chosen.push_back(ing);
    }
    bool haram = false;
    for (int64_t ing : chosen) {
      rec.ingredients.push_back(data.ingredients[static_cast<size_t>(ing)].name);
      if (data.ingredient_is_haram[static_cast<size_t>(ing)]) haram = true;
    }
    const int true_label = haram ? 0 : 1;  // 1 = halal
    data.true_labels.push_back(true_label);
    int stored = true_label;
    if (config.label_noise > 0.0 && rng.uniform() < config.label_noise) stored = 1 - stored;
    rec.status = stored == 1 ? "halal" : "haram";
    data.products.push_back(std::move(rec));
  }

  data.kg = build_from_records(data.products, data.ingredients);
  return data;
}

// --- CSV ---

namespace {

// Minimal CSV: comma-separated, double quotes  around fields that contain
// commas; "" escapes a quote inside a quoted field.
std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string current;
  bool quoted = false;
  for (size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          current.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        current.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(current));
      current.clear();
    } else {
      current.push_back(c);
    }
  }
  fields.push_back(std::move(current));
  return fields;
}

std::string trim(const std::string& s) {
  size_t begin = 0, end = s.size();
  while (begin < end && (s[begin] == ' ' || s[begin] == '\t' || s[begin] == '\r')) ++begin;
  while (end > begin && (s[end - 1] == ' ' || s[end - 1] == '\t' || s[end - 1] == '\r')) --end;
  return s.substr(begin, end - begin);
}

std::vector<std::string> read_lines(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) lines.push_back(line);
  return lines;
}

void expect_header(const std::vector<std::string>& fields, const std::vector<std::string>& expected,
                   const std::filesystem::path& path) {
  bool ok = fields.size() == expected.size();
  for (size_t i = 0; ok && i < expected.size(); ++i) {
    ok = fold_name(trim(fields[i])) == expected[i];
  }
  if (!ok) {
    std::string want;
    for (size_t i = 0; i < expected.size(); ++i) {
      if (i) want += ",";
      want += expected[i];
    }
    throw HeaderMismatch(path.string() + ": expected header '" + want + "'");
  }
}

}  // namespace

ParsedRecords parse_record_csvs(const std::filesystem::path& product_csv,
                                const std::filesystem::path& ingredient_csv) {
  ParsedRecords out;

  const auto ing_lines = read_lines(ingredient_csv);
  if (ing_lines.empty()) throw HeaderMismatch(ingredient_csv.string() + ": empty file");
  expect_header(split_csv_line(ing_lines[0]),
                {"ingredient", "toxicity", "allergy", "cancer", "restriction", "min_score",
                 "max_score"},
                ingredient_csv);
  for (size_t i = 1; i < ing_lines.size(); ++i) {
    if (trim(ing_lines[i]).empty()) continue;
    const auto fields = split_csv_line(ing_lines[i]);
    if (fields.size() != 7) {
      out.warnings.push_back(ingredient_csv.filename().string() + ":" + std::to_string(i + 1) +
                             ": expected 7 fields, got " + std::to_string(fields.size()) +
                             "; row skipped");
      continue;
    }
    IngredientRecord rec;
    rec.name = trim(fields[0]);
    if (rec.name.empty()) {
      out.warnings.push_back(ingredient_csv.filename().string() + ":" + std::to_string(i + 1) +
                             ": empty ingredient name; row skipped");
      continue;
    }
    bool numeric_ok = true;
    for (int c = 0; c < kNumericWidth; ++c) {
      try {
        size_t used = 0;
        const std::string field = trim(fields[static_cast<size_t>(c) + 1]);
        rec.properties[static_cast<size_t>(c)] = std::stod(field, &used);
        if (used != field.size() || !std::isfinite(rec.properties[static_cast<size_t>(c)])) {
          numeric_ok = false;
        }
      } catch (const std::exception&) {
        numeric_ok = false;
      }
    }
    if (!numeric_ok) {
      out.warnings.push_back(ingredient_csv.filename().string() + ":" + std::to_string(i + 1) +
                             ": non-numeric property value; row skipped");
      continue;
    }
    out.ingredients.push_back(std::move(rec));
  }

  const auto prod_lines = read_lines(product_csv);
  if (prod_lines.empty()) throw HeaderMismatch(product_csv.string() + ": empty file");
  expect_header(split_csv_line(prod_lines[0]),
                {"product", "brand", "category", "ingredients", "status"}, product_csv);
  for (size_t i = 1; i < prod_lines.size(); ++i) {
    if (trim(prod_lines[i]).empty()) continue;
    const auto fields = split_csv_line(prod_lines[i]);
    if (fields.size() != 5) {
      out.warnings.push_back(product_csv.filename().string() + ":" + std::to_string(i + 1) +
                             ": expected 5 fields, got " + std::to_string(fields.size()) +
                             "; row skipped");
      continue;
    }
    ProductRecord rec;
    rec.product = trim(fields[0]);
    rec.brand = trim(fields[1]);
    rec.category = trim(fields[2]);
    if (rec.product.empty() || rec.brand.empty() || rec.category.empty()) {
      out.warnings.push_back(product_csv.filename().string() + ":" + std::to_string(i + 1) +
                             ": empty product/brand/category; row skipped");
      continue;
    }
    std::stringstream ing_stream(fields[3]);
    std::string item;
    while (std::getline(ing_stream, item, ';')) {
      const std::string name = trim(item);
      if (!name.empty()) rec.ingredients.push_back(name);
    }
    if (rec.ingredients.empty()) {
      out.warnings.push_back(product_csv.filename().string() + ":" + std::to_string(i + 1) +
                             ": product '" + rec.product + "' lists no ingredients");
    }
    const std::string status = fold_name(trim(fields[4]));
    if (!status.empty() && status != "halal" && status != "haram") {
      out.warnings.push_back(product_csv.filename().string() + ":" + std::to_string(i + 1) +
                             ": unknown status '" + trim(fields[4]) + "'; row skipped");
      continue;
    }
    rec.status = status;
    out.products.push_back(std::move(rec));
  }

  return out;
}

IngestResult ingest_csv(const std::filesystem::path& product_csv,
                        const std::filesystem::path& ingredient_csv,
                        const BuildOptions& options) {
  ParsedRecords parsed = parse_record_csvs(product_csv, ingredient_csv);

  // Flag property rows for ingredients no product references.
  std::unordered_set<std::string> used;
  for (const ProductRecord& p : parsed.products) {
    for (const std::string& ing : p.ingredients) used.insert(fold_name(ing));
  }
  for (const IngredientRecord& rec : parsed.ingredients) {
    if (!used.count(fold_name(rec.name))) {
      parsed.warnings.push_back("ingredient '" + rec.name + "' is referenced by no product");
    }
  }

  IngestResult result{build_from_records(parsed.products, parsed.ingredients, options),
                      std::move(parsed.warnings)};
  return result;
}

// --- synthetic CSV output ---

namespace {

std::string csv_escape(const std::string& field) {
  if (field.find_first_of(",\"\n") == std::string::npos) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += "\"\"";
    else out.push_back(c);
  }
  out += "\"";
  return out;
}

}  // namespace

void write_synth_csvs(const SynthData& data, const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);

  std::ofstream products(out_dir / "products.csv");
  if (!products) throw IoError("cannot write products.csv");
  products << "product,brand,category,ingredients,status\n";
  for (const ProductRecord& rec : data.products) {
    std::string joined;
    for (size_t i = 0; i < rec.ingredients.size(); ++i) {
      if (i) joined += ";";
      joined += rec.ingredients[i];
    }
    products << csv_escape(rec.product) << ',' << csv_escape(rec.brand) << ','
             << csv_escape(rec.category) << ',' << csv_escape(joined) << ',' << rec.status
             << '\n';
  }

  std::ofstream ingredients(out_dir / "ingredients.csv");
  if (!ingredients) throw IoError("cannot write ingredients.csv");
  ingredients << "ingredient,toxicity,allergy,cancer,restriction,min_score,max_score\n";
  for (const IngredientRecord& rec : data.ingredients) {
    ingredients << csv_escape(rec.name);
    for (double v : rec.properties) ingredients << ',' << format_double(v);
    ingredients << '\n';
  }

  std::ofstream labels(out_dir / "labels.csv");
  if (!labels) throw IoError("cannot write labels.csv");
  labels << "product,status\n";
  for (size_t i = 0; i < data.products.size(); ++i) {
    labels << csv_escape(data.products[i].product) << ','
           << (data.true_labels[i] == 1 ? "halal" : "haram") << '\n';
  }
}

}  // namespace hackg
