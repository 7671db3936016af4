// Python bindings for the HaCKG core: graph construction, synthetic data,
// training pipeline, and prediction.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "hackg/checkpoint.hpp"
#include "hackg/synthdata.hpp"
#include "hackg/trainer.hpp"

namespace py = pybind11;
using namespace hackg;

namespace {

py::dict metrics_dict(const MetricsReport& m) {
  py::dict d;
  d["tp"] = m.tp;
  d["fp"] = m.fp;
  d["tn"] = m.tn;
  d["fn"] = m.fn;
  d["accuracy"] = m.accuracy;
  d["precision"] = m.precision;
  d["recall"] = m.recall;
  d["f1"] = m.f1;
  d["no_positive_predictions"] = m.no_positive_predictions;
  return d;
}

TrainConfig config_from_kwargs(const py::dict& kwargs) {
  TrainConfig cfg;
  for (auto item : kwargs) {
    const std::string key = py::cast<std::string>(item.first);
    if (key == "learning_rate") cfg.learning_rate = py::cast<double>(item.second);
    else if (key == "hidden_dim") cfg.hidden_dim = py::cast<int64_t>(item.second);
    else if (key == "entity_width") cfg.entity_width = py::cast<int64_t>(item.second);
    else if (key == "layers") cfg.layers = py::cast<int64_t>(item.second);
    else if (key == "channels") cfg.channels = py::cast<int64_t>(item.second);
    else if (key == "residual_alpha") cfg.residual_alpha = py::cast<double>(item.second);
    else if (key == "lambda_") cfg.lambda = py::cast<double>(item.second);
    else if (key == "batch_size") cfg.batch_size = py::cast<int64_t>(item.second);
    else if (key == "pretrain_epochs") cfg.pretrain_epochs = py::cast<int64_t>(item.second);
    else if (key == "max_epochs") cfg.max_epochs = py::cast<int64_t>(item.second);
    else if (key == "patience") cfg.patience = py::cast<int64_t>(item.second);
    else if (key == "seed") cfg.seed = py::cast<uint64_t>(item.second);
    else if (key == "split_ratios") {
      auto v = py::cast<std::vector<double>>(item.second);
      if (v.size() != 3) throw ConfigInvalid("split_ratios needs 3 entries");
      cfg.split_ratios = {v[0], v[1], v[2]};
    } else {
      throw ConfigInvalid("unknown train config key '" + key + "'");
    }
  }
  cfg.validate();
  return cfg;
}

}  // namespace

PYBIND11_MODULE(_hackg, m) {
  m.doc() = "Halal cosmetic knowledge-graph representation learning";

  py::register_exception<ConfigInvalid>(m, "ConfigInvalidError", PyExc_ValueError);
  py::register_exception<SchemaViolation>(m, "SchemaViolationError", PyExc_ValueError);
  static py::exception<Error> base_error(m, "HackgError", PyExc_RuntimeError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const ConfigInvalid&) {
      throw;  // handled by the registered exception above
    } catch (const SchemaViolation&) {
      throw;
    } catch (const Error& e) {
      py::set_error(base_error, e.what());
    }
  });

  py::class_<CosmeticKG>(m, "CosmeticKG")
      .def_property_readonly("n_entities", &CosmeticKG::num_entities)
      .def_property_readonly("n_triples", &CosmeticKG::num_triples)
      .def("stats",
           [](const CosmeticKG& kg) {
             const KgStats s = kg.stats();
             py::dict entities, relations;
             for (int k = 0; k < kNumEntityKinds; ++k) {
               entities[py::str(std::string(entity_kind_name(static_cast<EntityKind>(k))))] =
                   s.entities_per_kind[static_cast<size_t>(k)];
             }
             for (int r = 0; r < kNumRelationKinds; ++r) {
               relations[py::str(std::string(relation_name(static_cast<RelationKind>(r))))] =
                   s.triples_per_relation[static_cast<size_t>(r)];
             }
             py::dict d;
             d["n_entities"] = s.n_entities;
             d["n_triples"] = s.n_triples;
             d["entities_per_kind"] = entities;
             d["triples_per_relation"] = relations;
             return d;
           })
      .def("triples_tsv",
           [](const CosmeticKG& kg) {
             std::ostringstream out;
             kg.export_triples_tsv(out);
             return out.str();
           })
      .def("find_product", [](const CosmeticKG& kg, const std::string& name) {
        return kg.find(EntityKind::Cosmetic, name);
      });

  m.def(
      "generate_synth",
      [](int64_t n_products, int64_t n_ingredients, int64_t n_brands, int64_t n_categories,
         int64_t min_ingredients, int64_t max_ingredients, double haram_fraction,
         double label_noise, uint64_t seed) {
        SynthConfig cfg;
        cfg.n_products = n_products;
        cfg.n_ingredients = n_ingredients;
        cfg.n_brands = n_brands;
        cfg.n_categories = n_categories;
        cfg.ingredients_per_product_min = min_ingredients;
        cfg.ingredients_per_product_max = max_ingredients;
        cfg.haram_ingredient_fraction = haram_fraction;
        cfg.label_noise = label_noise;
        cfg.seed = seed;
        SynthData data = generate(cfg);
        py::dict d;
        d["kg"] = std::move(data.kg);
        py::list labels;
        for (size_t i = 0; i < data.products.size(); ++i) {
          labels.append(py::make_tuple(data.products[i].product, data.true_labels[i]));
        }
        d["true_labels"] = labels;
        return d;
      },
      py::arg("n_products") = 2000, py::arg("n_ingredients") = 300, py::arg("n_brands") = 10,
      py::arg("n_categories") = 8, py::arg("min_ingredients") = 3,
      py::arg("max_ingredients") = 8, py::arg("haram_fraction") = 0.1,
      py::arg("label_noise") = 0.0, py::arg("seed") = 42);

  m.def(
      "ingest_csv",
      [](const std::string& products, const std::string& ingredients) {
        IngestResult result = ingest_csv(products, ingredients);
        return py::make_tuple(std::move(result.kg), result.warnings);
      },
      py::arg("products_csv"), py::arg("ingredients_csv"));

  m.def(
      "evaluate",
      [](const std::vector<double>& preds, const std::vector<int>& labels) {
        return metrics_dict(evaluate(preds, labels));
      },
      py::arg("predictions"), py::arg("labels"));

  m.def(
      "run_pipeline",
      [](const CosmeticKG& kg, const py::kwargs& kwargs) {
        py::dict cfg_dict;
        bool do_pretrain = true;
        for (auto item : kwargs) {
          if (py::cast<std::string>(item.first) == "pretrain") {
            do_pretrain = py::cast<bool>(item.second);
          } else {
            cfg_dict[item.first] = item.second;
          }
        }
        const TrainConfig cfg = config_from_kwargs(cfg_dict);
        PipelineOptions options;
        options.run_pretrain = do_pretrain;
        const PipelineResult result = run_pipeline(kg, cfg, options);
        py::dict d;
        d["test_metrics"] = metrics_dict(result.finetune.test_metrics);
        d["best_val_f1"] = result.finetune.best_val_f1;
        d["pretrain_loss_history"] = result.pretrain.val_loss_history;
        d["pretrain_epochs_run"] = result.pretrain.epochs_run;
        d["finetune_epochs_run"] = result.finetune.epochs_run;
        d["test_predictions"] = result.finetune.test_predictions;
        return d;
      },
      py::arg("kg"));

  m.def(
      "train_baseline",
      [](const CosmeticKG& kg, const std::string& kind, const py::kwargs& kwargs) {
        py::dict cfg_dict;
        for (auto item : kwargs) cfg_dict[item.first] = item.second;
        const TrainConfig cfg = config_from_kwargs(cfg_dict);
        BaselineKind bk;
        if (kind == "transe") bk = BaselineKind::TransE;
        else if (kind == "transr") bk = BaselineKind::TransR;
        else throw ConfigInvalid("baseline kind must be 'transe' or 'transr'");

        const SplitSets splits = split_status_pairs(kg, cfg.split_ratios, cfg.seed);
        std::vector<int64_t> heldout;
        for (const StatusPair& p : splits.val) heldout.push_back(p.product);
        for (const StatusPair& p : splits.test) heldout.push_back(p.product);
        const CosmeticKG masked = kg.without_status_triples(heldout);
        const BaselineResult result = train_baseline(bk, masked, splits, cfg);
        py::dict d;
        d["test_metrics"] = metrics_dict(result.test_metrics);
        d["epochs_run"] = result.epochs_run;
        return d;
      },
      py::arg("kg"), py::arg("kind"));

  m.attr("__version__") = "0.1.0";
}
