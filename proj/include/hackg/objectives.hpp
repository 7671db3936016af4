#pragma once
// Pre-training triplet scoring with a pairwise ranking loss, tail-corruption
// negative sampling, and the fine-tuning pair scorer with binary cross
// entropy.
//
// Score semantics are distances: transr_score returns
// ||h W_r + r - t W_r||_2^2, lower meaning more plausible, so the ranking
// loss -ln sigmoid(score_neg - score_pos) pushes negatives above positives.

#include <cstdint>
#include <vector>

#include "hackg/kgraph.hpp"
#include "hackg/rng.hpp"
#include "hackg/tensor.hpp"

namespace hackg {

struct RelationParams {
  Tensor proj;  // d x d
  Tensor vec;   // [d]
};

struct RelationSpace {
  std::array<RelationParams, kNumRelationKinds> relations;

  const RelationParams& of(RelationKind kind) const {
    return relations[static_cast<int>(kind)];
  }
};

RelationSpace init_relation_space(int64_t hidden_dim, Rng& rng);

// h_vec and t_vec are single encoded rows (shape [1, d]).
Tensor transr_score(const RelationSpace& space, const Tensor& h_vec, RelationKind relation,
                    const Tensor& t_vec);

// Batched variant: heads/tails are [B, d] blocks sharing one relation.
Tensor transr_scores(const RelationSpace& space, const Tensor& heads, RelationKind relation,
                     const Tensor& tails);

// Mean over aligned positive/negative score batches of
// -ln sigmoid(neg - pos), plus lambda * sum ||theta||_2^2 over params.
Tensor pretrain_loss(const Tensor& pos_scores, const Tensor& neg_scores,
                     const std::vector<Tensor>& params, double lambda);

class NegativeSampler {
 public:
  NegativeSampler(const CosmeticKG& kg, uint64_t seed, int max_retries = 20);

  // Tail corruption: uniform over entities of the tail's kind, rejecting
  // triples already in the graph. After max_retries the sampler accepts a
  // possible false negative but never returns the input triple itself.
  Triple sample(const Triple& positive);

 private:
  const CosmeticKG* kg_;
  Rng rng_;
  int max_retries_;
};

struct MlpHead {
  Tensor w1;  // 2d x d
  Tensor b1;  // [d]
  Tensor w2;  // d x 1
  Tensor b2;  // [1]
};

MlpHead init_mlp_head(int64_t hidden_dim, Rng& rng);

// sigmoid(MLP(h W_rs || t W_rs)) using the has_status relation space.
// Accepts [B, d] blocks and returns [B] probabilities in (0, 1).
Tensor finetune_score(const RelationSpace& space, const MlpHead& head, const Tensor& h_vecs,
                      const Tensor& t_vecs);

// Mean binary cross entropy; predictions clamped to [1e-12, 1 - 1e-12].
Tensor finetune_loss(const Tensor& preds, const std::vector<int>& labels);

}  // namespace hackg
