#pragma once
// Multi-channel relational graph attention with initial-residual connections
// and a layer-concatenation readout.
//
// Per layer, each of K channels projects features to width d/K, scores every
// adjacency edge (v, relation, u) with a single dense layer over
// (e_v || r || e_u), softmax-normalizes the scores over each target's
// incident edges, and aggregates relation-modulated messages. Channel
// outputs are concatenated back to width d, then mixed with the layer-0
// features: sigma((1 - alpha) * agg + alpha * e0).

#include <cstdint>
#include <vector>

#include "hackg/fusion.hpp"
#include "hackg/kgraph.hpp"
#include "hackg/tensor.hpp"

namespace hackg {

struct RgatChannelParams {
  Tensor proj;       // d x (d/K)
  Tensor attn_w;     // 3*(d/K) x 1
  Tensor attn_b;     // [1]
  Tensor rel_embed;  // kNumEdgeTypes x (d/K)
};

struct RgatLayerParams {
  std::vector<RgatChannelParams> channels;
};

struct ResidualConfig {
  // One residual strength per layer, each in [0, 1].
  std::vector<double> alpha;
};

struct ReadoutParams {
  Tensor w;  // (L*d) x d
  Tensor b;  // [d]
};

// Flattened adjacency of a graph, grouped by target entity so that edge
// segments are contiguous. Built once per graph and reused across layers.
//
// Training and inference use the ExcludeStatus view: a product's own status
// edge would otherwise sit in its 1-hop neighborhood, and the attention
// learns to read it instead of the ingredient structure, which is useless
// for products whose status is unknown. Status triples still participate in
// the pre-training ranking objective; they are only kept out of message
// passing.
enum class EdgeFilter { All, ExcludeStatus };

struct EdgeIndex {
  std::vector<int64_t> target;
  std::vector<int64_t> source;
  std::vector<int64_t> edge_type;  // 0..kNumEdgeTypes-1
  int64_t n_entities = 0;

  int64_t n_edges() const { return static_cast<int64_t>(target.size()); }
  static EdgeIndex from_graph(const CosmeticKG& kg, EdgeFilter filter = EdgeFilter::All);
};

RgatLayerParams init_layer_params(int64_t hidden_dim, int64_t channels, Rng& rng);
ReadoutParams init_readout_params(int64_t layers, int64_t hidden_dim, Rng& rng);

// Attention logits for one channel: per edge, leaky_relu(w . (e_v||r||e_u) + b)
// where e = feats * proj. Throws UnknownRelation for an edge type outside the
// relation-embedding table.
Tensor attention_logits(const RgatChannelParams& channel, const EdgeIndex& edges,
                        const Tensor& feats);

// Fused edge kernels. Both take the projected per-entity features and the
// relation embedding table and loop the edge list directly, avoiding the
// per-edge gather/concat temporaries. `edges` must outlive the backward pass.
//
// edge_attention_logits: per edge leaky_relu(wv.P[tgt] + wr.R[type] + wu.P[src] + b).
Tensor edge_attention_logits(const Tensor& projected, const Tensor& rel_embed,
                             const Tensor& attn_w, const Tensor& attn_b,
                             const EdgeIndex& edges);
// edge_weighted_aggregate: out[v] = sum over edges into v of
// weight_e * (P[src] (.) R[type]).
Tensor edge_weighted_aggregate(const Tensor& projected, const Tensor& rel_embed,
                               const Tensor& weights, const EdgeIndex& edges);

// Full layer: per-channel attention, aggregation, activation, concatenation.
// When attention_out is non-null it receives the per-channel normalized
// attention weights (one tensor of length n_edges per channel).
Tensor attend_and_aggregate(const RgatLayerParams& layer, const EdgeIndex& edges,
                            const Tensor& feats, std::vector<Tensor>* attention_out = nullptr);

// sigma((1 - alpha) * layer_out + alpha * e0), sigma = leaky_relu.
Tensor residual_combine(double alpha, const Tensor& layer_out, const Tensor& e0);

// Final representation: sigma(concat_l(per_layer) * W + b).
Tensor readout(const ReadoutParams& params, const std::vector<Tensor>& per_layer);

struct EncoderParams {
  FusionParams fusion;
  std::vector<RgatLayerParams> layers;
  ResidualConfig residual;
  ReadoutParams readout;
};

struct EncodeResult {
  Tensor output;                               // |V| x d
  std::vector<Tensor> per_layer;               // post-residual features per layer
  std::vector<std::vector<Tensor>> attention;  // [layer][channel] edge weights
};

// e0 = fuse(h, n); L residual attention layers; readout over all layers.
EncodeResult encode(const EncoderParams& params, const EdgeIndex& edges,
                    const Tensor& entity_embed, const Tensor& numeric,
                    bool keep_attention = false);

// Symmetric-normalized propagation P = D~^{-1/2} A~ D~^{-1/2} applied to
// feature rows. Diagnostic only; the training path uses attention
// aggregation as the propagated term.
Tensor gcn_propagate(const EdgeIndex& edges, const Tensor& feats);

}  // namespace hackg
