#pragma once
// Training: Adam, pre-training over all graph triples with a ranking loss,
// supervised fine-tuning with early stopping on validation F1, evaluation
// metrics, grid search, ablations, and TransE/TransR baselines.

#include <cstdint>
#include <set>
#include <vector>

#include "hackg/checkpoint.hpp"
#include "hackg/model.hpp"

namespace hackg {

struct TrainConfig {
  double learning_rate = 1e-4;
  int64_t hidden_dim = 64;    // d, paper sweep {16, 32, 64, 128}
  int64_t entity_width = 0;   // E; 0 means "use hidden_dim"
  int64_t layers = 2;         // L, paper sweep {1..5}
  int64_t channels = 4;       // K, must divide d
  double residual_alpha = 0.1;
  double lambda = 1e-5;       // L2 regularization weight
  int64_t batch_size = 512;   // pre-training mini-batch
  int64_t pretrain_epochs = 10;
  int64_t max_epochs = 200;   // fine-tuning cap
  int64_t patience = 10;      // extra epochs allowed past the best one
  uint64_t seed = 42;
  std::array<double, 3> split_ratios{0.6, 0.2, 0.2};

  int64_t effective_entity_width() const { return entity_width > 0 ? entity_width : hidden_dim; }
  // Throws ConfigInvalid listing every violated constraint.
  void validate() const;
  ModelConfig model_config() const;
};

class Adam {
 public:
  explicit Adam(std::vector<Tensor> params, double beta1 = 0.9, double beta2 = 0.999,
                double epsilon = 1e-8);

  void zero_grad();
  // Bias-corrected update. Throws MissingGradient when a parameter has no
  // populated gradient buffer.
  void step(double lr);
  int64_t step_count() const { return t_; }

 private:
  struct Slot {
    Tensor param;
    std::vector<double> m, v;
  };
  std::vector<Slot> slots_;
  double beta1_, beta2_, epsilon_;
  int64_t t_ = 0;
};

struct MetricsReport {
  int64_t tp = 0, fp = 0, tn = 0, fn = 0;
  double accuracy = 0.0, precision = 0.0, recall = 0.0, f1 = 0.0;
  // Precision is undefined when nothing is predicted positive; reported as 0
  // with this flag set.
  bool no_positive_predictions = false;

  int64_t total() const { return tp + fp + tn + fn; }
};

// Thresholds probabilities at 0.5 (>= 0.5 predicts the positive class).
MetricsReport evaluate(const std::vector<double>& preds, const std::vector<int>& labels);

// Graph-side inputs of a training run: flattened edges and the fixed numeric
// feature matrix. The ablation variant replaces property rows with uniform
// random vectors.
struct GraphInputs {
  const CosmeticKG* kg = nullptr;
  EdgeIndex edges;
  Tensor numeric;

  static GraphInputs from(const CosmeticKG& kg);
  static GraphInputs with_random_numeric(const CosmeticKG& kg, uint64_t seed);
};

// Forward pass of the full encoder over a graph.
EncodeResult encode_graph(const ModelParams& params, const GraphInputs& inputs,
                          bool keep_attention = false);

struct PretrainResult {
  // Validation ranking loss; entry 0 is measured before any update.
  std::vector<double> val_loss_history;
  int64_t best_epoch = 0;
  int64_t epochs_run = 0;
};

// Self-supervised triplet ranking over all triples of the (already masked)
// graph, one sampled negative per positive. Returns params at the best
// validation ranking loss.
PretrainResult pretrain(const GraphInputs& inputs, const TrainConfig& config,
                        ModelParams& params);

struct FinetuneResult {
  MetricsReport test_metrics;
  double best_val_f1 = 0.0;
  int64_t epochs_run = 0;
  std::vector<double> test_predictions;  // aligned with splits.test
};

// Supervised (product, S_halal) classification; early stopping on validation
// F1 with the configured patience; test metrics at threshold 0.5.
FinetuneResult finetune(const GraphInputs& inputs, const SplitSets& splits,
                        const TrainConfig& config, ModelParams& params);

enum class AblationSwitch { NoPretrain, NoNumeric, NoResidual };

struct PipelineOptions {
  bool run_pretrain = true;
  bool randomize_numeric = false;
  bool zero_residual = false;

  static PipelineOptions for_switches(const std::set<AblationSwitch>& switches);
};

struct PipelineResult {
  SplitSets splits;
  PretrainResult pretrain;
  FinetuneResult finetune;
  ModelParams params;
};

// Full protocol: split labels, drop val/test status edges from the message
// passing graph, pre-train, fine-tune.
PipelineResult run_pipeline(const CosmeticKG& kg, const TrainConfig& config,
                            const PipelineOptions& options = {});

// An empty switch set is exactly the full pipeline.
MetricsReport run_ablation(const CosmeticKG& kg, const TrainConfig& config,
                           const std::set<AblationSwitch>& switches);

// --- baselines ---

enum class BaselineKind { TransE, TransR };

struct BaselineParams {
  Tensor entities;                  // |V| x d
  Tensor relations;                 // kNumRelationKinds x d
  std::vector<Tensor> projections;  // TransR only: one d x d matrix per relation

  std::vector<Tensor> all() const;
};

// Squared translation distances ||h + r - t||^2 (TransE) or
// ||h M_r + r - t M_r||^2 (TransR) for one relation block.
Tensor baseline_distances(BaselineKind kind, const BaselineParams& params, RelationKind relation,
                          const std::vector<int64_t>& heads, const std::vector<int64_t>& tails);

struct BaselineOptions {
  // Train on every triple of the masked graph (default) or only status
  // triples.
  bool status_triples_only = false;
  double margin = 1.0;
};

struct BaselineResult {
  MetricsReport test_metrics;
  double best_val_f1 = 0.0;
  std::vector<double> train_loss_history;
  int64_t epochs_run = 0;
};

// Margin-ranking embedding training, then status prediction by comparing the
// distances to S_halal and S_haram (lower distance wins).
BaselineResult train_baseline(BaselineKind kind, const CosmeticKG& masked_kg,
                              const SplitSets& splits, const TrainConfig& config,
                              const BaselineOptions& options = {});

// --- grid search ---

struct GridSpec {
  TrainConfig base;
  std::vector<double> learning_rates{1e-4, 5e-5, 1e-5};
  std::vector<int64_t> hidden_dims;   // empty: keep base.hidden_dim
  std::vector<int64_t> layer_counts;  // empty: keep base.layers
  std::vector<int64_t> channel_counts;
};

struct GridRow {
  TrainConfig config;
  double val_f1 = 0.0;
  MetricsReport test_metrics;
  int64_t pretrain_epochs_run = 0;
  int64_t finetune_epochs_run = 0;
};

struct GridResult {
  TrainConfig best;
  std::vector<GridRow> rows;
};

// Exhaustive sweep; combinations that fail config validation are skipped.
// Selection by validation F1. Each configuration gets its own seed stream.
GridResult grid_search(const CosmeticKG& kg, const GridSpec& spec);

}  // namespace hackg
