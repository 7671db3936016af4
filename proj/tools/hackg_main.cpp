// hackg: knowledge-graph representation learning for halal cosmetic
// prediction. Subcommands: build-kg, synth, pretrain, finetune, evaluate,
// gridsearch, ablate, predict.
//
// Every run appends exactly one manifest line (inputs digests, config
// snapshot, output hashes, timestamps) to <out>/manifests.jsonl. Reports
// themselves are deterministic: identical inputs + config + seed produce
// byte-identical files.

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "hackg/checkpoint.hpp"
#include "hackg/synthdata.hpp"
#include "hackg/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;
using namespace hackg;

namespace {

constexpr int kExitSuccess = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

struct CliState {
  std::string config_path;
  std::string out_dir = "hackg_out";
  std::string products_csv;
  std::string ingredients_csv;
  std::optional<uint64_t> seed_override;
  bool quiet = false;

  // collected for the manifest
  ordered_json config_snapshot = ordered_json::object();
  std::vector<std::pair<std::string, std::string>> input_digests;
  std::vector<std::pair<std::string, std::string>> output_digests;
  std::chrono::steady_clock::time_point started = std::chrono::steady_clock::now();
};

std::string file_digest(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return to_hex(fnv1a64(buffer.str()));
}

void note_input(CliState& state, const fs::path& path) {
  state.input_digests.emplace_back(path.filename().string(), file_digest(path));
}

void note_output(CliState& state, const fs::path& path) {
  state.output_digests.emplace_back(path.filename().string(), file_digest(path));
}

void write_text(CliState& state, const fs::path& path, const std::string& text) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  out.close();
  note_output(state, path);
}

void write_json(CliState& state, const fs::path& path, const ordered_json& value) {
  write_text(state, path, value.dump(2) + "\n");
}

std::string iso_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
  return buf;
}

// One manifest line per run, append-only.
void write_manifest(CliState& state, const std::string& command) {
  const double wall =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - state.started).count();
  ordered_json manifest;
  manifest["schema_version"] = 1;
  manifest["command"] = command;
  manifest["timestamp"] = iso_timestamp();
  manifest["config"] = state.config_snapshot;
  manifest["inputs"] = ordered_json::object();
  for (const auto& [name, digest] : state.input_digests) manifest["inputs"][name] = digest;
  manifest["outputs"] = ordered_json::object();
  for (const auto& [name, digest] : state.output_digests) manifest["outputs"][name] = digest;
  manifest["wall_seconds"] = wall;

  fs::create_directories(state.out_dir);
  std::ofstream out(fs::path(state.out_dir) / "manifests.jsonl", std::ios::app);
  if (!out) throw IoError("cannot append to manifests.jsonl");
  out << manifest.dump() << "\n";
}

void check_keys(const json& obj, const std::vector<std::string>& allowed,
                const std::string& where) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool known = false;
    for (const std::string& key : allowed) known = known || key == it.key();
    if (!known) throw ConfigInvalid(where + ": unknown key '" + it.key() + "'");
  }
}

struct FileConfig {
  TrainConfig train;
  GridSpec grid;
  BaselineOptions baseline;
  PropertyNodeMode property_mode = PropertyNodeMode::SharedCategorical;
};

FileConfig load_config(CliState& state) {
  if (state.config_path.empty()) throw ConfigInvalid("--config <file> is required");
  std::ifstream in(state.config_path);
  if (!in) throw IoError("cannot open config " + state.config_path);
  json root;
  try {
    in >> root;
  } catch (const json::exception& e) {
    throw ConfigInvalid("config is not valid JSON: " + std::string(e.what()));
  }
  check_keys(root, {"schema_version", "train", "grid", "baseline", "property_mode"}, "config");
  if (!root.contains("schema_version") || root["schema_version"].get<int>() != 1) {
    throw ConfigInvalid("config: schema_version must be 1");
  }

  FileConfig cfg;
  if (root.contains("train")) {
    const json& t = root["train"];
    check_keys(t,
               {"learning_rate", "hidden_dim", "entity_width", "layers", "channels",
                "residual_alpha", "lambda", "batch_size", "pretrain_epochs", "max_epochs",
                "patience", "seed", "split_ratios"},
               "config.train");
    cfg.train.learning_rate = t.value("learning_rate", cfg.train.learning_rate);
    cfg.train.hidden_dim = t.value("hidden_dim", cfg.train.hidden_dim);
    cfg.train.entity_width = t.value("entity_width", cfg.train.entity_width);
    cfg.train.layers = t.value("layers", cfg.train.layers);
    cfg.train.channels = t.value("channels", cfg.train.channels);
    cfg.train.residual_alpha = t.value("residual_alpha", cfg.train.residual_alpha);
    cfg.train.lambda = t.value("lambda", cfg.train.lambda);
    cfg.train.batch_size = t.value("batch_size", cfg.train.batch_size);
    cfg.train.pretrain_epochs = t.value("pretrain_epochs", cfg.train.pretrain_epochs);
    cfg.train.max_epochs = t.value("max_epochs", cfg.train.max_epochs);
    cfg.train.patience = t.value("patience", cfg.train.patience);
    cfg.train.seed = t.value("seed", cfg.train.seed);
    if (t.contains("split_ratios")) {
      const auto ratios = t["split_ratios"].get<std::vector<double>>();
      if (ratios.size() != 3) throw ConfigInvalid("config.train.split_ratios needs 3 entries");
      cfg.train.split_ratios = {ratios[0], ratios[1], ratios[2]};
    }
  }
  if (root.contains("grid")) {
    const json& g = root["grid"];
    check_keys(g, {"learning_rates", "hidden_dims", "layer_counts", "channel_counts"},
               "config.grid");
    if (g.contains("learning_rates")) {
      cfg.grid.learning_rates = g["learning_rates"].get<std::vector<double>>();
    }
    if (g.contains("hidden_dims")) {
      cfg.grid.hidden_dims = g["hidden_dims"].get<std::vector<int64_t>>();
    }
    if (g.contains("layer_counts")) {
      cfg.grid.layer_counts = g["layer_counts"].get<std::vector<int64_t>>();
    }
    if (g.contains("channel_counts")) {
      cfg.grid.channel_counts = g["channel_counts"].get<std::vector<int64_t>>();
    }
  }
  if (root.contains("baseline")) {
    const json& b = root["baseline"];
    check_keys(b, {"status_triples_only", "margin"}, "config.baseline");
    cfg.baseline.status_triples_only = b.value("status_triples_only", false);
    cfg.baseline.margin = b.value("margin", 1.0);
  }
  if (root.contains("property_mode")) {
    const std::string mode = root["property_mode"].get<std::string>();
    if (mode == "shared") {
      cfg.property_mode = PropertyNodeMode::SharedCategorical;
    } else if (mode == "per-ingredient") {
      cfg.property_mode = PropertyNodeMode::PerIngredient;
    } else {
      throw ConfigInvalid("config.property_mode must be 'shared' or 'per-ingredient'");
    }
  }

  if (state.seed_override) cfg.train.seed = *state.seed_override;
  cfg.grid.base = cfg.train;
  note_input(state, state.config_path);
  return cfg;
}

ordered_json train_config_json(const TrainConfig& cfg) {
  return ordered_json{
      {"learning_rate", cfg.learning_rate},
      {"hidden_dim", cfg.hidden_dim},
      {"entity_width", cfg.entity_width},
      {"layers", cfg.layers},
      {"channels", cfg.channels},
      {"residual_alpha", cfg.residual_alpha},
      {"lambda", cfg.lambda},
      {"batch_size", cfg.batch_size},
      {"pretrain_epochs", cfg.pretrain_epochs},
      {"max_epochs", cfg.max_epochs},
      {"patience", cfg.patience},
      {"seed", cfg.seed},
      {"split_ratios", cfg.split_ratios},
  };
}

ordered_json metrics_json(const MetricsReport& m) {
  return ordered_json{
      {"tp", m.tp},
      {"fp", m.fp},
      {"tn", m.tn},
      {"fn", m.fn},
      {"accuracy", m.accuracy},
      {"precision", m.precision},
      {"recall", m.recall},
      {"f1", m.f1},
      {"no_positive_predictions", m.no_positive_predictions},
  };
}


void check_checkpoint_architecture(const ModelParams& loaded, const TrainConfig& cfg) {
  const ModelConfig want = cfg.model_config();
  if (loaded.config.hidden_dim != want.hidden_dim || loaded.config.layers != want.layers ||
      loaded.config.channels != want.channels ||
      loaded.config.entity_width != want.entity_width) {
    throw HeaderMismatch(
        "checkpoint architecture (d=" + std::to_string(loaded.config.hidden_dim) + ", L=" +
        std::to_string(loaded.config.layers) + ", K=" + std::to_string(loaded.config.channels) +
        ") does not match the config");
  }
}

CosmeticKG load_graph(CliState& state, PropertyNodeMode mode) {
  if (state.products_csv.empty() || state.ingredients_csv.empty()) {
    throw ConfigInvalid("--products and --ingredients CSV paths are required");
  }
  for (const std::string& path : {state.products_csv, state.ingredients_csv}) {
    if (!fs::exists(path)) throw ConfigInvalid("input file does not exist: " + path);
  }
  note_input(state, state.products_csv);
  note_input(state, state.ingredients_csv);
  BuildOptions options;
  options.property_mode = mode;
  IngestResult result = ingest_csv(state.products_csv, state.ingredients_csv, options);
  if (!state.quiet) {
    for (const std::string& warning : result.warnings) {
      std::cerr << "warning: " << warning << "\n";
    }
  }
  return std::move(result.kg);
}

std::string kg_digest(const CosmeticKG& kg) {
  std::ostringstream tsv;
  kg.export_triples_tsv(tsv);
  return to_hex(fnv1a64(tsv.str()));
}

ordered_json split_sizes_json(const SplitSets& splits) {
  return ordered_json{{"train", splits.train.size()},
                      {"val", splits.val.size()},
                      {"test", splits.test.size()}};
}

// metrics.json as named in the interface contract; wall-clock time lives in
// the manifest so reports stay byte-identical across reruns.
void write_metrics_report(CliState& state, const fs::path& path, const TrainConfig& cfg,
                          const SplitSets& splits, const MetricsReport& metrics,
                          int64_t epochs_run) {
  ordered_json report;
  report["config"] = train_config_json(cfg);
  report["split_sizes"] = split_sizes_json(splits);
  const ordered_json metric_fields = metrics_json(metrics);
  for (const auto& [key, value] : metric_fields.items()) report[key] = value;
  report["epochs_run"] = epochs_run;
  write_json(state, path, report);
}

void write_predictions_csv(CliState& state, const fs::path& path, const CosmeticKG& kg,
                           const SplitSets& splits, const std::vector<double>& test_preds) {
  std::ostringstream out;
  out << "product,split,p_halal,predicted,label\n";
  for (size_t i = 0; i < splits.test.size(); ++i) {
    const StatusPair& pair = splits.test[i];
    out << kg.entity(pair.product).name << ",test," << format_double(test_preds[i]) << ","
        << (test_preds[i] >= 0.5 ? "halal" : "haram") << ","
        << (pair.label == 1 ? "halal" : "haram") << "\n";
  }
  write_text(state, path, out.str());
}

SplitSets make_splits(const CosmeticKG& kg, const TrainConfig& cfg) {
  return split_status_pairs(kg, cfg.split_ratios, cfg.seed);
}

CosmeticKG masked_graph(const CosmeticKG& kg, const SplitSets& splits) {
  std::vector<int64_t> heldout;
  for (const StatusPair& p : splits.val) heldout.push_back(p.product);
  for (const StatusPair& p : splits.test) heldout.push_back(p.product);
  return kg.without_status_triples(heldout);
}

// --- subcommand bodies ---

int cmd_build_kg(CliState& state, PropertyNodeMode mode) {
  const CosmeticKG kg = load_graph(state, mode);
  state.config_snapshot["property_mode"] =
      mode == PropertyNodeMode::SharedCategorical ? "shared" : "per-ingredient";

  std::ostringstream tsv;
  kg.export_triples_tsv(tsv);
  write_text(state, fs::path(state.out_dir) / "triples.tsv", tsv.str());

  const KgStats stats = kg.stats();
  ordered_json stats_json;
  stats_json["n_entities"] = stats.n_entities;
  stats_json["n_triples"] = stats.n_triples;
  stats_json["entities_per_kind"] = ordered_json::object();
  for (int k = 0; k < kNumEntityKinds; ++k) {
    stats_json["entities_per_kind"][std::string(entity_kind_name(static_cast<EntityKind>(k)))] =
        stats.entities_per_kind[static_cast<size_t>(k)];
  }
  stats_json["triples_per_relation"] = ordered_json::object();
  for (int r = 0; r < kNumRelationKinds; ++r) {
    stats_json["triples_per_relation"][std::string(relation_name(static_cast<RelationKind>(r)))] =
        stats.triples_per_relation[static_cast<size_t>(r)];
  }
  write_json(state, fs::path(state.out_dir) / "stats.json", stats_json);
  if (!state.quiet) std::cout << stats_json.dump(2) << "\n";

  write_manifest(state, "build-kg");
  return kExitSuccess;
}

int cmd_synth(CliState& state, SynthConfig& cfg) {
  if (state.seed_override) cfg.seed = *state.seed_override;
  cfg.validate();
  const SynthData data = generate(cfg);
  write_synth_csvs(data, state.out_dir);
  note_output(state, fs::path(state.out_dir) / "products.csv");
  note_output(state, fs::path(state.out_dir) / "ingredients.csv");
  note_output(state, fs::path(state.out_dir) / "labels.csv");

  ordered_json manifest{
      {"n_products", cfg.n_products},
      {"n_ingredients", cfg.n_ingredients},
      {"n_brands", cfg.n_brands},
      {"n_categories", cfg.n_categories},
      {"ingredients_per_product_min", cfg.ingredients_per_product_min},
      {"ingredients_per_product_max", cfg.ingredients_per_product_max},
      {"haram_ingredient_fraction", cfg.haram_ingredient_fraction},
      {"label_noise", cfg.label_noise},
      {"seed", cfg.seed},
  };
  state.config_snapshot = manifest;
  write_json(state, fs::path(state.out_dir) / "manifest.json", manifest);
  if (!state.quiet) {
    std::cout << "wrote " << data.products.size() << " products / " << data.ingredients.size()
              << " ingredients to " << state.out_dir << "\n";
  }
  write_manifest(state, "synth");
  return kExitSuccess;
}

int cmd_pretrain(CliState& state) {
  const FileConfig cfg = load_config(state);
  cfg.train.validate();
  state.config_snapshot = train_config_json(cfg.train);
  const CosmeticKG kg = load_graph(state, cfg.property_mode);

  const SplitSets splits = make_splits(kg, cfg.train);
  const CosmeticKG masked = masked_graph(kg, splits);
  const GraphInputs inputs = GraphInputs::from(masked);

  ModelParams params = ModelParams::init(cfg.train.model_config(), kg.num_entities(),
                                         cfg.train.seed);
  const PretrainResult result = pretrain(inputs, cfg.train, params);

  const fs::path stem = fs::path(state.out_dir) / "pretrained";
  fs::create_directories(state.out_dir);
  save_checkpoint(stem, params, kg_digest(kg));
  note_output(state, stem.string() + ".json");
  note_output(state, stem.string() + ".bin");

  ordered_json report;
  report["config"] = train_config_json(cfg.train);
  report["val_loss_history"] = result.val_loss_history;
  report["best_epoch"] = result.best_epoch;
  report["epochs_run"] = result.epochs_run;
  write_json(state, fs::path(state.out_dir) / "pretrain_report.json", report);
  if (!state.quiet) {
    std::cout << "pretrain: " << result.epochs_run << " epochs, best validation ranking loss "
              << result.val_loss_history[static_cast<size_t>(result.best_epoch)] << "\n";
  }
  write_manifest(state, "pretrain");
  return kExitSuccess;
}

int cmd_finetune(CliState& state, const std::string& checkpoint, bool from_scratch) {
  const FileConfig cfg = load_config(state);
  cfg.train.validate();
  if (checkpoint.empty() && !from_scratch) {
    throw ConfigInvalid("finetune needs --checkpoint <stem> or --from-scratch");
  }
  state.config_snapshot = train_config_json(cfg.train);
  const CosmeticKG kg = load_graph(state, cfg.property_mode);

  const SplitSets splits = make_splits(kg, cfg.train);
  const CosmeticKG masked = masked_graph(kg, splits);
  const GraphInputs inputs = GraphInputs::from(masked);

  ModelParams params = [&] {
    if (from_scratch) {
      return ModelParams::init(cfg.train.model_config(), kg.num_entities(), cfg.train.seed);
    }
    note_input(state, checkpoint + ".json");
    note_input(state, checkpoint + ".bin");
    LoadedCheckpoint loaded = load_checkpoint(checkpoint);
    if (loaded.kg_hash != kg_digest(kg)) {
      throw HeaderMismatch("checkpoint was trained on a different graph");
    }
    check_checkpoint_architecture(loaded.params, cfg.train);
    return std::move(loaded.params);
  }();

  const FinetuneResult result = finetune(inputs, splits, cfg.train, params);

  const fs::path stem = fs::path(state.out_dir) / "finetuned";
  fs::create_directories(state.out_dir);
  save_checkpoint(stem, params, kg_digest(kg));
  note_output(state, stem.string() + ".json");
  note_output(state, stem.string() + ".bin");

  write_metrics_report(state, fs::path(state.out_dir) / "metrics.json", cfg.train, splits,
                       result.test_metrics, result.epochs_run);
  write_predictions_csv(state, fs::path(state.out_dir) / "predictions.csv", kg, splits,
                        result.test_predictions);
  if (!state.quiet) {
    std::cout << "finetune: test accuracy " << result.test_metrics.accuracy << ", F1 "
              << result.test_metrics.f1 << "\n";
  }
  write_manifest(state, "finetune");
  return kExitSuccess;
}

int cmd_evaluate(CliState& state, const std::string& checkpoint) {
  const FileConfig cfg = load_config(state);
  cfg.train.validate();
  if (checkpoint.empty()) throw ConfigInvalid("evaluate needs --checkpoint <stem>");
  state.config_snapshot = train_config_json(cfg.train);
  const CosmeticKG kg = load_graph(state, cfg.property_mode);

  note_input(state, checkpoint + ".json");
  note_input(state, checkpoint + ".bin");
  LoadedCheckpoint loaded = load_checkpoint(checkpoint);
  if (loaded.kg_hash != kg_digest(kg)) {
    throw HeaderMismatch("checkpoint was trained on a different graph");
  }
  check_checkpoint_architecture(loaded.params, cfg.train);

  const SplitSets splits = make_splits(kg, cfg.train);
  const CosmeticKG masked = masked_graph(kg, splits);
  const GraphInputs inputs = GraphInputs::from(masked);

  NoGradGuard no_grad;
  const EncodeResult enc = encode_graph(loaded.params, inputs);
  std::vector<int64_t> products, statuses;
  std::vector<int> labels;
  for (const StatusPair& pair : splits.test) {
    products.push_back(pair.product);
    statuses.push_back(pair.status);
    labels.push_back(pair.label);
  }
  const Tensor preds = finetune_score(loaded.params.relation_space, loaded.params.mlp,
                                      gather_rows(enc.output, products),
                                      gather_rows(enc.output, statuses));
  const std::vector<double> pred_values(preds.data().begin(), preds.data().end());
  const MetricsReport metrics = evaluate(pred_values, labels);

  write_metrics_report(state, fs::path(state.out_dir) / "metrics.json", cfg.train, splits,
                       metrics, 0);
  write_predictions_csv(state, fs::path(state.out_dir) / "predictions.csv", kg, splits,
                        pred_values);
  if (!state.quiet) std::cout << metrics_json(metrics).dump(2) << "\n";
  write_manifest(state, "evaluate");
  return kExitSuccess;
}

int cmd_gridsearch(CliState& state) {
  const FileConfig cfg = load_config(state);
  state.config_snapshot = train_config_json(cfg.train);
  const CosmeticKG kg = load_graph(state, cfg.property_mode);

  const GridResult result = grid_search(kg, cfg.grid);

  std::ostringstream csv;
  csv << "learning_rate,hidden_dim,layers,channels,seed,val_f1,test_accuracy,test_precision,"
         "test_recall,test_f1,pretrain_epochs_run,finetune_epochs_run\n";
  for (const GridRow& row : result.rows) {
    csv << format_double(row.config.learning_rate) << ',' << row.config.hidden_dim << ','
        << row.config.layers << ',' << row.config.channels << ',' << row.config.seed << ','
        << format_double(row.val_f1) << ',' << format_double(row.test_metrics.accuracy) << ','
        << format_double(row.test_metrics.precision) << ','
        << format_double(row.test_metrics.recall) << ',' << format_double(row.test_metrics.f1)
        << ',' << row.pretrain_epochs_run << ',' << row.finetune_epochs_run << "\n";
  }
  write_text(state, fs::path(state.out_dir) / "grid.csv", csv.str());

  ordered_json best;
  best["best_config"] = train_config_json(result.best);
  write_json(state, fs::path(state.out_dir) / "best_config.json", best);
  if (!state.quiet) {
    std::cout << "grid: " << result.rows.size() << " configurations, best hidden_dim "
              << result.best.hidden_dim << " layers " << result.best.layers << "\n";
  }
  write_manifest(state, "gridsearch");
  return kExitSuccess;
}

int cmd_ablate(CliState& state, const std::vector<std::string>& switch_names) {
  const FileConfig cfg = load_config(state);
  cfg.train.validate();
  state.config_snapshot = train_config_json(cfg.train);
  const CosmeticKG kg = load_graph(state, cfg.property_mode);

  auto parse_switch = [](const std::string& name) {
    if (name == "no_pretrain") return AblationSwitch::NoPretrain;
    if (name == "no_numeric") return AblationSwitch::NoNumeric;
    if (name == "no_residual") return AblationSwitch::NoResidual;
    throw ConfigInvalid("unknown ablation switch '" + name +
                        "' (expected no_pretrain, no_numeric, no_residual)");
  };

  ordered_json report = ordered_json::array();
  {
    const MetricsReport full = run_ablation(kg, cfg.train, {});
    ordered_json entry;
    entry["variant"] = "full";
    entry["metrics"] = metrics_json(full);
    report.push_back(std::move(entry));
  }
  for (const std::string& name : switch_names) {
    const MetricsReport metrics = run_ablation(kg, cfg.train, {parse_switch(name)});
    ordered_json entry;
    entry["variant"] = name;
    entry["metrics"] = metrics_json(metrics);
    report.push_back(std::move(entry));
  }
  write_json(state, fs::path(state.out_dir) / "ablation.json", report);
  if (!state.quiet) std::cout << report.dump(2) << "\n";
  write_manifest(state, "ablate");
  return kExitSuccess;
}

int cmd_predict(CliState& state, const std::string& checkpoint, const std::string& product_name,
                const std::string& record_json) {
  const FileConfig cfg = load_config(state);
  cfg.train.validate();
  if (checkpoint.empty()) throw ConfigInvalid("predict needs --checkpoint <stem>");
  if (product_name.empty() == record_json.empty()) {
    throw ConfigInvalid("predict needs exactly one of --product or --record");
  }
  state.config_snapshot = train_config_json(cfg.train);
  const CosmeticKG kg = load_graph(state, cfg.property_mode);

  note_input(state, checkpoint + ".json");
  note_input(state, checkpoint + ".bin");
  LoadedCheckpoint loaded = load_checkpoint(checkpoint);
  if (loaded.kg_hash != kg_digest(kg)) {
    throw HeaderMismatch("checkpoint was trained on a different graph");
  }
  check_checkpoint_architecture(loaded.params, cfg.train);

  // same masked message-passing view the model was trained with
  const SplitSets splits = make_splits(kg, cfg.train);

  int64_t target = -1;
  CosmeticKG graph;
  ModelParams params = std::move(loaded.params);

  if (!product_name.empty()) {
    const auto found = kg.find(EntityKind::Cosmetic, product_name);
    if (!found) throw UnknownProduct("product '" + product_name + "' is not in the graph");
    target = *found;
    graph = masked_graph(kg, splits);
  } else {
    // attach-then-encode: a new product joins through its ingredient, brand,
    // and category edges; its initial embedding is the mean of the learned
    // product embeddings
    json record;
    try {
      record = json::parse(record_json);
    } catch (const json::exception& e) {
      throw ConfigInvalid("--record is not valid JSON: " + std::string(e.what()));
    }
    check_keys(record, {"product", "brand", "category", "ingredients"}, "record");
    const std::string name = record.value("product", "new-product");
    if (kg.find(EntityKind::Cosmetic, name)) {
      throw ConfigInvalid("product '" + name + "' already exists; use --product");
    }
    const auto ingredients = record.value("ingredients", std::vector<std::string>{});
    if (ingredients.empty()) throw ConfigInvalid("record needs at least one ingredient");

    const CosmeticKG masked = masked_graph(kg, splits);
    std::vector<Entity> entities = masked.entities();
    std::vector<Triple> triples = masked.triples();
    const int64_t new_id = static_cast<int64_t>(entities.size());
    entities.push_back(Entity{new_id, EntityKind::Cosmetic, name, {}});
    for (const std::string& ing : ingredients) {
      const auto iid = kg.find(EntityKind::Ingredient, ing);
      if (!iid) throw UnknownIngredient("ingredient '" + ing + "' is not in the graph");
      triples.push_back(Triple{new_id, RelationKind::HasIngredient, *iid});
    }
    if (record.contains("brand")) {
      const std::string brand = record["brand"].get<std::string>();
      const auto bid = kg.find(EntityKind::Brand, brand);
      if (!bid) throw UnknownEntity("brand '" + brand + "' is not in the graph");
      triples.push_back(Triple{new_id, RelationKind::HasBrand, *bid});
    }
    if (record.contains("category")) {
      const std::string category = record["category"].get<std::string>();
      const auto cid = kg.find(EntityKind::Category, category);
      if (!cid) throw UnknownEntity("category '" + category + "' is not in the graph");
      triples.push_back(Triple{new_id, RelationKind::HasCategory, *cid});
    }
    graph = CosmeticKG::from_parts(std::move(entities), std::move(triples));
    target = new_id;

    // extend the embedding table with the mean product row
    const int64_t e_width = params.entity_embed.cols();
    std::vector<double> extended(params.entity_embed.data().begin(),
                                 params.entity_embed.data().end());
    std::vector<double> mean_row(static_cast<size_t>(e_width), 0.0);
    const auto& product_ids = kg.entities_of(EntityKind::Cosmetic);
    for (int64_t pid : product_ids) {
      for (int64_t j = 0; j < e_width; ++j) {
        mean_row[static_cast<size_t>(j)] += params.entity_embed.at({pid, j});
      }
    }
    for (double& v : mean_row) v /= static_cast<double>(product_ids.size());
    extended.insert(extended.end(), mean_row.begin(), mean_row.end());
    params.entity_embed =
        Tensor::from_values({new_id + 1, e_width}, std::move(extended), false);
    params.n_entities = new_id + 1;
  }

  const auto halal = graph.find(EntityKind::Status, "halal");
  if (!halal) throw InsufficientData("graph has no halal status entity");

  NoGradGuard no_grad;
  const GraphInputs inputs = GraphInputs::from(graph);
  const EncodeResult enc = encode_graph(params, inputs, /*keep_attention=*/true);
  const Tensor prob = finetune_score(params.relation_space, params.mlp,
                                     gather_rows(enc.output, {target}),
                                     gather_rows(enc.output, {*halal}));
  const double p_halal = prob.data()[0];

  // top-5 neighbors by attention weight, averaged over channels of the last
  // layer, self-loop excluded
  struct Weighted {
    double weight;
    int64_t neighbor;
    int64_t edge_type;
  };
  std::vector<Weighted> ranked;
  const auto& last_layer = enc.attention.back();
  for (int64_t e = 0; e < inputs.edges.n_edges(); ++e) {
    if (inputs.edges.target[static_cast<size_t>(e)] != target) continue;
    if (inputs.edges.edge_type[static_cast<size_t>(e)] == kSelfLoopEdgeType) continue;
    double avg = 0.0;
    for (const Tensor& channel : last_layer) avg += channel.data()[static_cast<size_t>(e)];
    avg /= static_cast<double>(last_layer.size());
    ranked.push_back(Weighted{avg, inputs.edges.source[static_cast<size_t>(e)],
                              inputs.edges.edge_type[static_cast<size_t>(e)]});
  }
  std::sort(ranked.begin(), ranked.end(), [](const Weighted& a, const Weighted& b) {
    if (a.weight != b.weight) return a.weight > b.weight;
    return a.neighbor < b.neighbor;
  });
  if (ranked.size() > 5) ranked.resize(5);

  ordered_json result;
  result["product"] = graph.entity(target).name;
  result["p_halal"] = p_halal;
  result["label"] = p_halal >= 0.5 ? "halal" : "haram";
  result["top_neighbors"] = ordered_json::array();
  for (const Weighted& w : ranked) {
    const bool inverse = w.edge_type >= kNumRelationKinds && w.edge_type < kSelfLoopEdgeType;
    const int base = static_cast<int>(w.edge_type % kNumRelationKinds);
    ordered_json entry;
    entry["name"] = graph.entity(w.neighbor).name;
    entry["kind"] = std::string(entity_kind_name(graph.entity(w.neighbor).kind));
    entry["relation"] = std::string(relation_name(static_cast<RelationKind>(base))) +
                        (inverse ? " (inverse)" : "");
    entry["attention"] = w.weight;
    result["top_neighbors"].push_back(std::move(entry));
  }

  write_json(state, fs::path(state.out_dir) / "prediction.json", result);
  std::cout << result.dump(2) << "\n";
  write_manifest(state, "predict");
  return kExitSuccess;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"HaCKG: halal cosmetic prediction over a cosmetic knowledge graph"};
  app.require_subcommand(1);

  CliState state;
  app.add_option("--config", state.config_path, "versioned JSON config file")->expected(1);
  app.add_option("--seed", state.seed_override, "seed override");
  app.add_option("--out", state.out_dir, "output directory (default hackg_out)");
  app.add_flag("--quiet", state.quiet, "suppress progress output");
  app.fallthrough();

  std::string property_mode_flag = "shared";
  auto add_graph_inputs = [&](CLI::App* cmd) {
    cmd->add_option("--products", state.products_csv, "product records CSV")->expected(1);
    cmd->add_option("--ingredients", state.ingredients_csv, "ingredient property CSV")->expected(1);
  };

  CLI::App* build = app.add_subcommand("build-kg", "construct the knowledge graph from CSVs");
  add_graph_inputs(build);
  build->add_option("--property-mode", property_mode_flag,
                    "property node mode: shared | per-ingredient");

  SynthConfig synth_cfg;
  CLI::App* synth = app.add_subcommand("synth", "generate a synthetic benchmark dataset");
  synth->add_option("--products", synth_cfg.n_products, "number of products");
  synth->add_option("--ingredients", synth_cfg.n_ingredients, "number of ingredients");
  synth->add_option("--brands", synth_cfg.n_brands, "number of brands");
  synth->add_option("--categories", synth_cfg.n_categories, "number of categories");
  synth->add_option("--min-ingredients", synth_cfg.ingredients_per_product_min,
                    "min ingredients per product");
  synth->add_option("--max-ingredients", synth_cfg.ingredients_per_product_max,
                    "max ingredients per product");
  synth->add_option("--haram-fraction", synth_cfg.haram_ingredient_fraction,
                    "fraction of ingredients marked haram");
  synth->add_option("--noise", synth_cfg.label_noise, "label flip probability");

  CLI::App* pre = app.add_subcommand("pretrain", "self-supervised triplet pre-training");
  add_graph_inputs(pre);

  std::string checkpoint;
  bool from_scratch = false;
  CLI::App* fine = app.add_subcommand("finetune", "supervised status fine-tuning");
  add_graph_inputs(fine);
  fine->add_option("--checkpoint", checkpoint, "pretrained checkpoint stem");
  fine->add_flag("--from-scratch", from_scratch, "train without a pretrained checkpoint");

  CLI::App* eval = app.add_subcommand("evaluate", "evaluate a fine-tuned checkpoint");
  add_graph_inputs(eval);
  eval->add_option("--checkpoint", checkpoint, "fine-tuned checkpoint stem");

  CLI::App* grid = app.add_subcommand("gridsearch", "hyperparameter grid search");
  add_graph_inputs(grid);

  std::vector<std::string> switch_names;
  CLI::App* ablate = app.add_subcommand("ablate", "ablation runs");
  add_graph_inputs(ablate);
  ablate->add_option("--switches", switch_names,
                     "ablation switches: no_pretrain no_numeric no_residual")
      ->delimiter(',');

  std::string product_name, record_json;
  CLI::App* predict = app.add_subcommand("predict", "predict the halal status of a product");
  add_graph_inputs(predict);
  predict->add_option("--checkpoint", checkpoint, "fine-tuned checkpoint stem");
  predict->add_option("--product", product_name, "existing product name");
  predict->add_option("--record", record_json,
                      "JSON record of a new product: {\"product\",\"brand\",\"category\","
                      "\"ingredients\":[...]}");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (build->parsed()) {
      PropertyNodeMode mode;
      if (property_mode_flag == "shared") {
        mode = PropertyNodeMode::SharedCategorical;
      } else if (property_mode_flag == "per-ingredient") {
        mode = PropertyNodeMode::PerIngredient;
      } else {
        throw ConfigInvalid("--property-mode must be 'shared' or 'per-ingredient'");
      }
      return cmd_build_kg(state, mode);
    }
    if (synth->parsed()) return cmd_synth(state, synth_cfg);
    if (pre->parsed()) return cmd_pretrain(state);
    if (fine->parsed()) return cmd_finetune(state, checkpoint, from_scratch);
    if (eval->parsed()) return cmd_evaluate(state, checkpoint);
    if (grid->parsed()) return cmd_gridsearch(state);
    if (ablate->parsed()) return cmd_ablate(state, switch_names);
    if (predict->parsed()) return cmd_predict(state, checkpoint, product_name, record_json);
    std::cerr << "error: no subcommand\n";
    return kExitUsage;
  } catch (const ConfigInvalid& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const HeaderMismatch& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}
