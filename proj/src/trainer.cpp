#include "hackg/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace hackg {

namespace {

uint64_t derive_seed(uint64_t base, uint64_t stream) {
  uint64_t x = base + 0x9E3779B97F4A7C15ULL * (stream + 1);
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::vector<int> labels_of(const std::vector<StatusPair>& pairs) {
  std::vector<int> out;
  out.reserve(pairs.size());
  for (const StatusPair& p : pairs) out.push_back(p.label);
  return out;
}

}  // namespace

void TrainConfig::validate() const {
  std::vector<std::string> problems;
  if (learning_rate <= 0.0) problems.push_back("learning_rate must be positive");
  if (hidden_dim <= 0) problems.push_back("hidden_dim must be positive");
  if (entity_width < 0) problems.push_back("entity_width must be non-negative");
  if (layers <= 0) problems.push_back("layers must be at least 1");
  if (channels <= 0) {
    problems.push_back("channels must be positive");
  } else if (hidden_dim > 0 && hidden_dim % channels != 0) {
    problems.push_back("channels must divide hidden_dim");
  }
  if (residual_alpha < 0.0 || residual_alpha > 1.0) {
    problems.push_back("residual_alpha must be in [0, 1]");
  }
  if (lambda < 0.0) problems.push_back("lambda must be non-negative");
  if (batch_size <= 0) problems.push_back("batch_size must be positive");
  if (pretrain_epochs < 0) problems.push_back("pretrain_epochs must be non-negative");
  if (max_epochs <= 0) problems.push_back("max_epochs must be at least 1");
  if (patience < 0) problems.push_back("patience must be non-negative");
  double ratio_sum = 0.0;
  bool ratios_positive = true;
  for (double r : split_ratios) {
    if (r <= 0.0) ratios_positive = false;
    ratio_sum += r;
  }
  if (!ratios_positive) problems.push_back("split ratios must be positive");
  if (std::abs(ratio_sum - 1.0) > 1e-9) problems.push_back("split ratios must sum to 1");
  if (!problems.empty()) {
    std::string msg = "invalid train config:";
    for (const std::string& p : problems) msg += "\n  - " + p;
    throw ConfigInvalid(msg);
  }
}

ModelConfig TrainConfig::model_config() const {
  ModelConfig mc;
  mc.hidden_dim = hidden_dim;
  mc.entity_width = effective_entity_width();
  mc.numeric_width = kNumericWidth;
  mc.layers = layers;
  mc.channels = channels;
  mc.residual_alpha = residual_alpha;
  return mc;
}

// --- Adam ---

Adam::Adam(std::vector<Tensor> params, double beta1, double beta2, double epsilon)
    : beta1_(beta1), beta2_(beta2), epsilon_(epsilon) {
  slots_.reserve(params.size());
  for (Tensor& p : params) {
    const size_t n = static_cast<size_t>(p.numel());
    slots_.push_back(Slot{std::move(p), std::vector<double>(n, 0.0), std::vector<double>(n, 0.0)});
  }
}

void Adam::zero_grad() {
  for (Slot& s : slots_) s.param.zero_grad();
}

void Adam::step(double lr) {
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (Slot& s : slots_) {
    if (!s.param.has_grad()) {
      throw MissingGradient("adam: parameter gradient not populated before step");
    }
    const auto g = s.param.grad();
    auto x = s.param.raw_data();
    for (size_t i = 0; i < x.size(); ++i) {
      s.m[i] = beta1_ * s.m[i] + (1.0 - beta1_) * g[i];
      s.v[i] = beta2_ * s.v[i] + (1.0 - beta2_) * g[i] * g[i];
      const double m_hat = s.m[i] / bc1;
      const double v_hat = s.v[i] / bc2;
      x[i] -= lr * m_hat / (std::sqrt(v_hat) + epsilon_);
    }
  }
}

// --- metrics ---

MetricsReport evaluate(const std::vector<double>& preds, const std::vector<int>& labels) {
  if (preds.size() != labels.size()) {
    throw ShapeMismatch("evaluate: predictions and labels must align");
  }
  if (preds.empty()) throw ShapeMismatch("evaluate: empty input");
  MetricsReport r;
  for (size_t i = 0; i < preds.size(); ++i) {
    if (labels[i] != 0 && labels[i] != 1) throw Error("evaluate: labels must be 0/1");
    const bool predicted = preds[i] >= 0.5;
    const bool actual = labels[i] == 1;
    if (predicted && actual) ++r.tp;
    else if (predicted && !actual) ++r.fp;
    else if (!predicted && actual) ++r.fn;
    else ++r.tn;
  }
  r.accuracy = static_cast<double>(r.tp + r.tn) / static_cast<double>(r.total());
  if (r.tp + r.fp == 0) {
    r.no_positive_predictions = true;
    r.precision = 0.0;
  } else {
    r.precision = static_cast<double>(r.tp) / static_cast<double>(r.tp + r.fp);
  }
  r.recall = (r.tp + r.fn == 0) ? 0.0 : static_cast<double>(r.tp) / static_cast<double>(r.tp + r.fn);
  r.f1 = (r.precision + r.recall > 0.0)
             ? 2.0 * r.precision * r.recall / (r.precision + r.recall)
             : 0.0;
  return r;
}

// --- graph inputs ---

GraphInputs GraphInputs::from(const CosmeticKG& kg) {
  GraphInputs in;
  in.kg = &kg;
  in.edges = EdgeIndex::from_graph(kg, EdgeFilter::ExcludeStatus);
  const int64_t n = kg.num_entities();
  std::vector<double> numeric(static_cast<size_t>(n * kNumericWidth), 0.0);
  for (const Entity& e : kg.entities()) {
    for (size_t c = 0; c < e.numeric_attrs.size(); ++c) {
      numeric[static_cast<size_t>(e.id) * kNumericWidth + c] = e.numeric_attrs[c];
    }
  }
  in.numeric = Tensor::from_values({n, kNumericWidth}, std::move(numeric));
  return in;
}

GraphInputs GraphInputs::with_random_numeric(const CosmeticKG& kg, uint64_t seed) {
  GraphInputs in = from(kg);
  Rng rng(seed);
  auto data = in.numeric.raw_data();
  for (const Entity& e : kg.entities()) {
    if (e.numeric_attrs.empty()) continue;
    for (int c = 0; c < kNumericWidth; ++c) {
      data[static_cast<size_t>(e.id) * kNumericWidth + static_cast<size_t>(c)] = rng.uniform();
    }
  }
  return in;
}

EncodeResult encode_graph(const ModelParams& params, const GraphInputs& inputs,
                          bool keep_attention) {
  return encode(params.encoder, inputs.edges, params.entity_embed, inputs.numeric,
                keep_attention);
}

namespace {

// Scores aligned positive/negative triple batches grouped by relation kind.
std::pair<Tensor, Tensor> score_triple_batch(const ModelParams& params, const Tensor& enc,
                                             const std::vector<Triple>& pos,
                                             const std::vector<Triple>& neg) {
  std::vector<Tensor> pos_parts, neg_parts;
  for (int r = 0; r < kNumRelationKinds; ++r) {
    std::vector<int64_t> heads, pos_tails, neg_tails;
    for (size_t i = 0; i < pos.size(); ++i) {
      if (static_cast<int>(pos[i].relation) != r) continue;
      heads.push_back(pos[i].head);
      pos_tails.push_back(pos[i].tail);
      neg_tails.push_back(neg[i].tail);
    }
    if (heads.empty()) continue;
    const Tensor h = gather_rows(enc, heads);
    const RelationKind rel = static_cast<RelationKind>(r);
    pos_parts.push_back(transr_scores(params.relation_space, h, rel, gather_rows(enc, pos_tails)));
    neg_parts.push_back(transr_scores(params.relation_space, h, rel, gather_rows(enc, neg_tails)));
  }
  if (pos_parts.empty()) throw InsufficientData("no scoreable triples in batch");
  Tensor pos_scores = pos_parts.size() == 1 ? pos_parts[0] : concat(pos_parts, 0);
  Tensor neg_scores = neg_parts.size() == 1 ? neg_parts[0] : concat(neg_parts, 0);
  return {pos_scores, neg_scores};
}

// Negatives for a triple list; triples whose tail kind has a single entity
// carry no ranking signal and are dropped.
std::pair<std::vector<Triple>, std::vector<Triple>> with_negatives(NegativeSampler& sampler,
                                                                   const std::vector<Triple>& pos) {
  std::vector<Triple> kept, negs;
  kept.reserve(pos.size());
  negs.reserve(pos.size());
  for (const Triple& t : pos) {
    try {
      Triple n = sampler.sample(t);
      kept.push_back(t);
      negs.push_back(n);
    } catch (const NoCandidates&) {
      // skip
    }
  }
  return {kept, negs};
}

std::vector<double> predict_pairs(const ModelParams& params, const GraphInputs& inputs,
                                  const std::vector<StatusPair>& pairs) {
  NoGradGuard no_grad;
  const EncodeResult enc = encode_graph(params, inputs);
  std::vector<int64_t> products, statuses;
  for (const StatusPair& p : pairs) {
    products.push_back(p.product);
    statuses.push_back(p.status);
  }
  const Tensor preds = finetune_score(params.relation_space, params.mlp,
                                      gather_rows(enc.output, products),
                                      gather_rows(enc.output, statuses));
  return {preds.data().begin(), preds.data().end()};
}

}  // namespace

// --- pretrain ---

PretrainResult pretrain(const GraphInputs& inputs, const TrainConfig& config,
                        ModelParams& params) {
  config.validate();
  const std::vector<Triple>& triples = inputs.kg->triples();
  if (triples.empty()) throw InsufficientData("pretrain: graph has no triples");

  Rng shuffle_rng(derive_seed(config.seed, 1));
  NegativeSampler train_sampler(*inputs.kg, derive_seed(config.seed, 2));
  NegativeSampler val_sampler(*inputs.kg, derive_seed(config.seed, 3));

  // Fixed validation pairs: a seeded sample of triples with frozen negatives.
  // They measure ranking fit; training still covers every triple.
  std::vector<size_t> indices(triples.size());
  std::iota(indices.begin(), indices.end(), size_t{0});
  Rng val_pick(derive_seed(config.seed, 4));
  val_pick.shuffle(indices);
  const size_t val_count =
      std::min<size_t>(std::max<size_t>(1, triples.size() / 10), 2048);
  std::vector<Triple> val_pos_raw(val_count);
  for (size_t i = 0; i < val_count; ++i) val_pos_raw[i] = triples[indices[i]];
  auto [val_pos, val_neg] = with_negatives(val_sampler, val_pos_raw);
  if (val_pos.empty()) throw InsufficientData("pretrain: no validation pairs are sampleable");

  const std::vector<Tensor> reg_params = params.all_params();
  Adam adam(params.all_params());

  auto validation_loss = [&]() {
    NoGradGuard no_grad;
    const EncodeResult enc = encode_graph(params, inputs);
    auto [pos_s, neg_s] = score_triple_batch(params, enc.output, val_pos, val_neg);
    return mean(softplus(sub(pos_s, neg_s))).value();
  };

  PretrainResult result;
  result.val_loss_history.push_back(validation_loss());
  double best = result.val_loss_history[0];
  ModelParams best_params = params.clone();

  std::vector<size_t> order(triples.size());
  std::iota(order.begin(), order.end(), size_t{0});

  for (int64_t epoch = 1; epoch <= config.pretrain_epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    for (size_t start = 0; start < order.size(); start += static_cast<size_t>(config.batch_size)) {
      const size_t end = std::min(order.size(), start + static_cast<size_t>(config.batch_size));
      std::vector<Triple> batch;
      batch.reserve(end - start);
      for (size_t i = start; i < end; ++i) batch.push_back(triples[order[i]]);
      auto [pos, neg] = with_negatives(train_sampler, batch);
      if (pos.empty()) continue;

      const EncodeResult enc = encode_graph(params, inputs);
      auto [pos_s, neg_s] = score_triple_batch(params, enc.output, pos, neg);
      const Tensor loss = pretrain_loss(pos_s, neg_s, reg_params, config.lambda);
      adam.zero_grad();
      backward(loss);
      adam.step(config.learning_rate);
    }
    result.epochs_run = epoch;
    const double vl = validation_loss();
    result.val_loss_history.push_back(vl);
    if (vl < best - 1e-12) {
      best = vl;
      result.best_epoch = epoch;
      best_params = params.clone();
    }
    if (epoch - result.best_epoch >= config.patience) break;
  }

  params.copy_values_from(best_params);
  return result;
}

// --- finetune ---

FinetuneResult finetune(const GraphInputs& inputs, const SplitSets& splits,
                        const TrainConfig& config, ModelParams& params) {
  config.validate();
  if (splits.train.empty() || splits.val.empty() || splits.test.empty()) {
    throw InsufficientData("finetune: every split must be non-empty");
  }

  std::vector<int64_t> train_products, train_statuses;
  for (const StatusPair& p : splits.train) {
    train_products.push_back(p.product);
    train_statuses.push_back(p.status);
  }
  const std::vector<int> train_labels = labels_of(splits.train);
  const std::vector<int> val_labels = labels_of(splits.val);

  Adam adam(params.all_params());

  FinetuneResult result;
  double best_f1 = -1.0;
  int64_t best_epoch = 0;
  ModelParams best_params = params.clone();

  for (int64_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    const EncodeResult enc = encode_graph(params, inputs);
    const Tensor preds = finetune_score(params.relation_space, params.mlp,
                                        gather_rows(enc.output, train_products),
                                        gather_rows(enc.output, train_statuses));
    const Tensor loss = finetune_loss(preds, train_labels);
    adam.zero_grad();
    backward(loss);
    adam.step(config.learning_rate);
    result.epochs_run = epoch;

    const MetricsReport val = evaluate(predict_pairs(params, inputs, splits.val), val_labels);
    if (val.f1 > best_f1 + 1e-12) {
      best_f1 = val.f1;
      best_epoch = epoch;
      best_params = params.clone();
    }
    if (epoch - best_epoch >= config.patience) break;
  }

  params.copy_values_from(best_params);
  result.best_val_f1 = best_f1;
  result.test_predictions = predict_pairs(params, inputs, splits.test);
  result.test_metrics = evaluate(result.test_predictions, labels_of(splits.test));
  return result;
}

// --- pipeline ---

PipelineOptions PipelineOptions::for_switches(const std::set<AblationSwitch>& switches) {
  PipelineOptions o;
  o.run_pretrain = !switches.count(AblationSwitch::NoPretrain);
  o.randomize_numeric = switches.count(AblationSwitch::NoNumeric) > 0;
  o.zero_residual = switches.count(AblationSwitch::NoResidual) > 0;
  return o;
}

PipelineResult run_pipeline(const CosmeticKG& kg, const TrainConfig& config,
                            const PipelineOptions& options) {
  config.validate();
  TrainConfig effective = config;
  if (options.zero_residual) effective.residual_alpha = 0.0;

  PipelineResult result{
      split_status_pairs(kg, config.split_ratios, config.seed),
      {},
      {},
      ModelParams::init(effective.model_config(), kg.num_entities(), derive_seed(config.seed, 11)),
  };

  std::vector<int64_t> heldout;
  for (const StatusPair& p : result.splits.val) heldout.push_back(p.product);
  for (const StatusPair& p : result.splits.test) heldout.push_back(p.product);
  const CosmeticKG masked = kg.without_status_triples(heldout);

  const GraphInputs inputs =
      options.randomize_numeric
          ? GraphInputs::with_random_numeric(masked, derive_seed(config.seed, 12))
          : GraphInputs::from(masked);

  if (options.run_pretrain && config.pretrain_epochs > 0) {
    result.pretrain = pretrain(inputs, effective, result.params);
  }
  result.finetune = finetune(inputs, result.splits, effective, result.params);
  return result;
}

MetricsReport run_ablation(const CosmeticKG& kg, const TrainConfig& config,
                           const std::set<AblationSwitch>& switches) {
  return run_pipeline(kg, config, PipelineOptions::for_switches(switches)).finetune.test_metrics;
}

// --- baselines ---

std::vector<Tensor> BaselineParams::all() const {
  std::vector<Tensor> out{entities, relations};
  out.insert(out.end(), projections.begin(), projections.end());
  return out;
}

Tensor baseline_distances(BaselineKind kind, const BaselineParams& params, RelationKind relation,
                          const std::vector<int64_t>& heads, const std::vector<int64_t>& tails) {
  if (heads.size() != tails.size()) {
    throw ShapeMismatch("baseline_distances: head/tail counts differ");
  }
  Tensor h = gather_rows(params.entities, heads);
  Tensor t = gather_rows(params.entities, tails);
  if (kind == BaselineKind::TransR) {
    h = matmul(h, params.projections[static_cast<size_t>(relation)]);
    t = matmul(t, params.projections[static_cast<size_t>(relation)]);
  }
  const Tensor rel = gather_rows(
      params.relations, std::vector<int64_t>(heads.size(), static_cast<int64_t>(relation)));
  const Tensor diff = sub(add(h, rel), t);
  return row_sums(hadamard(diff, diff));
}

namespace {

void renormalize_rows(Tensor& t) {
  auto data = t.raw_data();
  const int64_t r = t.rows(), c = t.cols();
  for (int64_t i = 0; i < r; ++i) {
    double norm = 0.0;
    for (int64_t j = 0; j < c; ++j) norm += data[i * c + j] * data[i * c + j];
    norm = std::sqrt(norm);
    if (norm > 1e-12) {
      for (int64_t j = 0; j < c; ++j) data[i * c + j] /= norm;
    }
  }
}

Tensor identity_matrix(int64_t n, bool requires_grad) {
  std::vector<double> data(static_cast<size_t>(n * n), 0.0);
  for (int64_t i = 0; i < n; ++i) data[static_cast<size_t>(i * n + i)] = 1.0;
  return Tensor::from_values({n, n}, std::move(data), requires_grad);
}

std::vector<double> baseline_predict(BaselineKind kind, const BaselineParams& p,
                                     const std::vector<StatusPair>& pairs, int64_t halal_id,
                                     int64_t haram_id) {
  NoGradGuard no_grad;
  std::vector<int64_t> products;
  for (const StatusPair& s : pairs) products.push_back(s.product);
  const RelationKind rel = RelationKind::HasStatus;
  const Tensor d_halal = baseline_distances(
      kind, p, rel, products, std::vector<int64_t>(products.size(), halal_id));
  const Tensor d_haram = baseline_distances(
      kind, p, rel, products, std::vector<int64_t>(products.size(), haram_id));
  // Lower halal distance => higher halal probability.
  const Tensor prob = sigmoid(sub(d_haram, d_halal));
  return {prob.data().begin(), prob.data().end()};
}

}  // namespace

BaselineResult train_baseline(BaselineKind kind, const CosmeticKG& masked_kg,
                              const SplitSets& splits, const TrainConfig& config,
                              const BaselineOptions& options) {
  config.validate();
  const int64_t d = config.hidden_dim;
  const int64_t n = masked_kg.num_entities();

  const auto halal = masked_kg.find(EntityKind::Status, "halal");
  const auto haram = masked_kg.find(EntityKind::Status, "haram");
  if (!halal || !haram) throw InsufficientData("baseline: graph lacks halal/haram entities");

  Rng rng(derive_seed(config.seed, 21));
  const double bound = 6.0 / std::sqrt(static_cast<double>(d));
  BaselineParams params;
  params.entities = Tensor::uniform({n, d}, -bound, bound, rng, /*requires_grad=*/true);
  params.relations =
      Tensor::uniform({kNumRelationKinds, d}, -bound, bound, rng, /*requires_grad=*/true);
  renormalize_rows(params.entities);
  renormalize_rows(params.relations);
  if (kind == BaselineKind::TransR) {
    for (int r = 0; r < kNumRelationKinds; ++r) {
      params.projections.push_back(identity_matrix(d, /*requires_grad=*/true));
    }
  }

  std::vector<Triple> pool;
  for (const Triple& t : masked_kg.triples()) {
    if (options.status_triples_only && t.relation != RelationKind::HasStatus) continue;
    pool.push_back(t);
  }
  if (pool.empty()) throw InsufficientData("baseline: no training triples");

  NegativeSampler sampler(masked_kg, derive_seed(config.seed, 22));
  Rng shuffle_rng(derive_seed(config.seed, 23));
  Adam adam(params.all());

  const std::vector<int> val_labels = labels_of(splits.val);
  BaselineResult result;
  double best_f1 = -1.0;
  int64_t best_epoch = 0;
  Tensor best_entities = params.entities.clone_detached(false);
  Tensor best_relations = params.relations.clone_detached(false);
  std::vector<Tensor> best_projections;
  for (const Tensor& p : params.projections) best_projections.push_back(p.clone_detached(false));

  std::vector<size_t> order(pool.size());
  std::iota(order.begin(), order.end(), size_t{0});

  const int64_t epochs = std::max<int64_t>(config.pretrain_epochs, 1);
  for (int64_t epoch = 1; epoch <= epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    double epoch_loss = 0.0;
    int64_t batches = 0;
    for (size_t start = 0; start < order.size(); start += static_cast<size_t>(config.batch_size)) {
      const size_t end = std::min(order.size(), start + static_cast<size_t>(config.batch_size));
      std::vector<Triple> batch;
      for (size_t i = start; i < end; ++i) batch.push_back(pool[order[i]]);
      auto [pos, neg] = with_negatives(sampler, batch);
      if (pos.empty()) continue;

      std::vector<Tensor> losses;
      for (int r = 0; r < kNumRelationKinds; ++r) {
        std::vector<int64_t> heads, pos_tails, neg_tails;
        for (size_t i = 0; i < pos.size(); ++i) {
          if (static_cast<int>(pos[i].relation) != r) continue;
          heads.push_back(pos[i].head);
          pos_tails.push_back(pos[i].tail);
          neg_tails.push_back(neg[i].tail);
        }
        if (heads.empty()) continue;
        const Tensor pos_d =
            baseline_distances(kind, params, static_cast<RelationKind>(r), heads, pos_tails);
        const Tensor neg_d =
            baseline_distances(kind, params, static_cast<RelationKind>(r), heads, neg_tails);
        // max(0, margin + d_pos - d_neg)
        losses.push_back(
            leaky_relu(add(sub(pos_d, neg_d), Tensor::scalar(options.margin)), 0.0));
      }
      const Tensor loss = mean(losses.size() == 1 ? losses[0] : concat(losses, 0));
      adam.zero_grad();
      backward(loss);
      adam.step(config.learning_rate);
      if (kind == BaselineKind::TransE) renormalize_rows(params.entities);
      epoch_loss += loss.value();
      ++batches;
    }
    result.train_loss_history.push_back(batches > 0 ? epoch_loss / static_cast<double>(batches)
                                                    : 0.0);
    result.epochs_run = epoch;

    const MetricsReport val =
        evaluate(baseline_predict(kind, params, splits.val, *halal, *haram), val_labels);
    if (val.f1 > best_f1 + 1e-12) {
      best_f1 = val.f1;
      best_epoch = epoch;
      best_entities = params.entities.clone_detached(false);
      best_relations = params.relations.clone_detached(false);
      for (size_t i = 0; i < params.projections.size(); ++i) {
        best_projections[i] = params.projections[i].clone_detached(false);
      }
    }
    if (epoch - best_epoch >= config.patience) break;
  }

  auto restore = [](Tensor& dst, const Tensor& src) {
    auto d_ = dst.raw_data();
    auto s_ = src.data();
    std::copy(s_.begin(), s_.end(), d_.begin());
  };
  restore(params.entities, best_entities);
  restore(params.relations, best_relations);
  for (size_t i = 0; i < params.projections.size(); ++i) {
    restore(params.projections[i], best_projections[i]);
  }

  result.best_val_f1 = best_f1;
  result.test_metrics =
      evaluate(baseline_predict(kind, params, splits.test, *halal, *haram), labels_of(splits.test));
  return result;
}

// --- grid search ---

GridResult grid_search(const CosmeticKG& kg, const GridSpec& spec) {
  auto or_default = [](auto values, auto fallback) {
    if (values.empty()) values.push_back(fallback);
    return values;
  };
  const auto lrs = or_default(spec.learning_rates, spec.base.learning_rate);
  const auto dims = or_default(spec.hidden_dims, spec.base.hidden_dim);
  const auto layer_counts = or_default(spec.layer_counts, spec.base.layers);
  const auto channel_counts = or_default(spec.channel_counts, spec.base.channels);

  GridResult result;
  double best_f1 = -1.0;
  uint64_t index = 0;
  for (double lr : lrs) {
    for (int64_t dim : dims) {
      for (int64_t layers : layer_counts) {
        for (int64_t channels : channel_counts) {
          TrainConfig cfg = spec.base;
          cfg.learning_rate = lr;
          cfg.hidden_dim = dim;
          cfg.layers = layers;
          cfg.channels = channels;
          cfg.seed = derive_seed(spec.base.seed, 1000 + index);
          ++index;
          try {
            cfg.validate();
          } catch (const ConfigInvalid&) {
            continue;  // e.g. channels not dividing this dim
          }
          const PipelineResult run = run_pipeline(kg, cfg);
          GridRow row;
          row.config = cfg;
          row.val_f1 = run.finetune.best_val_f1;
          row.test_metrics = run.finetune.test_metrics;
          row.pretrain_epochs_run = run.pretrain.epochs_run;
          row.finetune_epochs_run = run.finetune.epochs_run;
          if (row.val_f1 > best_f1) {
            best_f1 = row.val_f1;
            result.best = cfg;
          }
          result.rows.push_back(std::move(row));
        }
      }
    }
  }
  if (result.rows.empty()) throw ConfigInvalid("grid search: no valid configuration");
  return result;
}

}  // namespace hackg
