#include "hackg/objectives.hpp"

#include <cmath>

namespace hackg {

RelationSpace init_relation_space(int64_t hidden_dim, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(hidden_dim));
  RelationSpace space;
  for (int r = 0; r < kNumRelationKinds; ++r) {
    space.relations[r].proj =
        Tensor::uniform({hidden_dim, hidden_dim}, -bound, bound, rng, /*requires_grad=*/true);
    space.relations[r].vec =
        Tensor::uniform({hidden_dim}, -bound, bound, rng, /*requires_grad=*/true);
  }
  return space;
}

Tensor transr_scores(const RelationSpace& space, const Tensor& heads, RelationKind relation,
                     const Tensor& tails) {
  if (heads.rank() != 2 || tails.rank() != 2 || heads.shape() != tails.shape()) {
    throw ShapeMismatch("transr_scores: heads and tails must be [B, d] with equal shapes");
  }
  const RelationParams& rel = space.of(relation);
  if (heads.cols() != rel.proj.rows()) {
    throw ShapeMismatch("transr_scores: vector width does not match the relation space");
  }
  const Tensor translated = add_bias(matmul(heads, rel.proj), rel.vec);
  const Tensor diff = sub(translated, matmul(tails, rel.proj));
  return row_sums(hadamard(diff, diff));
}

Tensor transr_score(const RelationSpace& space, const Tensor& h_vec, RelationKind relation,
                    const Tensor& t_vec) {
  Tensor h = h_vec.rank() == 1 ? reshape(h_vec, {1, h_vec.numel()}) : h_vec;
  Tensor t = t_vec.rank() == 1 ? reshape(t_vec, {1, t_vec.numel()}) : t_vec;
  if (h.rows() != 1 || t.rows() != 1) {
    throw ShapeMismatch("transr_score: expects single head/tail vectors");
  }
  return reshape(transr_scores(space, h, relation, t), {});
}

Tensor pretrain_loss(const Tensor& pos_scores, const Tensor& neg_scores,
                     const std::vector<Tensor>& params, double lambda) {
  if (pos_scores.shape() != neg_scores.shape() || pos_scores.rank() != 1) {
    throw ShapeMismatch("pretrain_loss: positive/negative batches must align");
  }
  // -ln sigmoid(neg - pos) == softplus(pos - neg)
  Tensor loss = mean(softplus(sub(pos_scores, neg_scores)));
  if (lambda != 0.0) {
    for (const Tensor& p : params) {
      loss = add(loss, scale(l2_norm_sq(p), lambda));
    }
  }
  return loss;
}

NegativeSampler::NegativeSampler(const CosmeticKG& kg, uint64_t seed, int max_retries)
    : kg_(&kg), rng_(seed), max_retries_(max_retries) {}

Triple NegativeSampler::sample(const Triple& positive) {
  if (!kg_->has_triple(positive.head, positive.relation, positive.tail)) {
    throw Error("sample_negative: positive triple not present in the graph");
  }
  const EntityKind tail_kind = kg_->entity(positive.tail).kind;
  const std::vector<int64_t>& candidates = kg_->entities_of(tail_kind);
  if (candidates.size() <= 1) {
    throw NoCandidates("sample_negative: tail kind '" +
                       std::string(entity_kind_name(tail_kind)) + "' has a single entity");
  }
  for (int attempt = 0; attempt < max_retries_; ++attempt) {
    const int64_t tail = candidates[rng_.bounded(candidates.size())];
    if (tail == positive.tail) continue;
    if (kg_->has_triple(positive.head, positive.relation, tail)) continue;
    return Triple{positive.head, positive.relation, tail};
  }
  // Fallback: accept a possible false negative, but never the input triple.
  for (;;) {
    const int64_t tail = candidates[rng_.bounded(candidates.size())];
    if (tail != positive.tail) return Triple{positive.head, positive.relation, tail};
  }
}

MlpHead init_mlp_head(int64_t hidden_dim, Rng& rng) {
  auto glorot = [&rng](Shape shape, int64_t fan_in) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    return Tensor::uniform(std::move(shape), -bound, bound, rng, /*requires_grad=*/true);
  };
  MlpHead head;
  head.w1 = glorot({2 * hidden_dim, hidden_dim}, 2 * hidden_dim);
  head.b1 = Tensor::zeros({hidden_dim}, /*requires_grad=*/true);
  head.w2 = glorot({hidden_dim, 1}, hidden_dim);
  head.b2 = Tensor::zeros({1}, /*requires_grad=*/true);
  return head;
}

Tensor finetune_score(const RelationSpace& space, const MlpHead& head, const Tensor& h_vecs,
                      const Tensor& t_vecs) {
  if (h_vecs.rank() != 2 || t_vecs.rank() != 2 || h_vecs.shape() != t_vecs.shape()) {
    throw ShapeMismatch("finetune_score: heads and tails must be [B, d] with equal shapes");
  }
  const RelationParams& rel = space.of(RelationKind::HasStatus);
  const Tensor pair = concat({matmul(h_vecs, rel.proj), matmul(t_vecs, rel.proj)}, 1);
  const Tensor hidden = leaky_relu(add_bias(matmul(pair, head.w1), head.b1));
  const Tensor logit = add_bias(matmul(hidden, head.w2), head.b2);
  return reshape(sigmoid(logit), {h_vecs.rows()});
}

Tensor finetune_loss(const Tensor& preds, const std::vector<int>& labels) {
  if (preds.rank() != 1 || preds.numel() != static_cast<int64_t>(labels.size())) {
    throw ShapeMismatch("finetune_loss: predictions and labels must align");
  }
  const Tensor clamped = clamp(preds, 1e-12, 1.0 - 1e-12);
  std::vector<double> y(labels.size()), one_minus_y(labels.size());
  for (size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] != 0 && labels[i] != 1) throw Error("finetune_loss: labels must be 0/1");
    y[i] = static_cast<double>(labels[i]);
    one_minus_y[i] = 1.0 - y[i];
  }
  const Tensor yt = Tensor::row(std::move(y));
  const Tensor nyt = Tensor::row(std::move(one_minus_y));
  const Tensor pos_term = hadamard(yt, log_elem(clamped));
  const Tensor neg_term = hadamard(nyt, log_elem(sub(Tensor::scalar(1.0), clamped)));
  return scale(mean(add(pos_term, neg_term)), -1.0);
}

}  // namespace hackg
