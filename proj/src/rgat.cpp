#include "hackg/rgat.hpp"

#include <cmath>

namespace hackg {

EdgeIndex EdgeIndex::from_graph(const CosmeticKG& kg, EdgeFilter filter) {
  EdgeIndex idx;
  idx.n_entities = kg.num_entities();
  for (int64_t v = 0; v < idx.n_entities; ++v) {
    for (const AdjEntry& e : kg.neighbors(v)) {
      if (filter == EdgeFilter::ExcludeStatus && e.dir != EdgeDir::SelfLoop &&
          e.relation == RelationKind::HasStatus) {
        continue;
      }
      idx.target.push_back(v);
      idx.source.push_back(e.neighbor);
      idx.edge_type.push_back(e.edge_type());
    }
  }
  return idx;
}

RgatLayerParams init_layer_params(int64_t hidden_dim, int64_t channels, Rng& rng) {
  if (channels <= 0 || hidden_dim % channels != 0) {
    throw ConfigInvalid("channel count must divide the hidden dimension");
  }
  const int64_t width = hidden_dim / channels;
  auto glorot = [&rng](Shape shape, int64_t fan_in) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    return Tensor::uniform(std::move(shape), -bound, bound, rng, /*requires_grad=*/true);
  };
  RgatLayerParams layer;
  for (int64_t k = 0; k < channels; ++k) {
    RgatChannelParams chan;
    chan.proj = glorot({hidden_dim, width}, hidden_dim);
    chan.attn_w = glorot({3 * width, 1}, 3 * width);
    chan.attn_b = Tensor::zeros({1}, /*requires_grad=*/true);
    chan.rel_embed = glorot({kNumEdgeTypes, width}, width);
    layer.channels.push_back(std::move(chan));
  }
  return layer;
}

ReadoutParams init_readout_params(int64_t layers, int64_t hidden_dim, Rng& rng) {
  if (layers <= 0) throw WrongLayerCount("need at least one layer");
  const double bound = 1.0 / std::sqrt(static_cast<double>(layers * hidden_dim));
  ReadoutParams p;
  p.w = Tensor::uniform({layers * hidden_dim, hidden_dim}, -bound, bound, rng,
                        /*requires_grad=*/true);
  p.b = Tensor::zeros({hidden_dim}, /*requires_grad=*/true);
  return p;
}

namespace {

void check_edges(const RgatChannelParams& channel, const EdgeIndex& edges) {
  for (int64_t t : edges.edge_type) {
    if (t < 0 || t >= channel.rel_embed.rows()) {
      throw UnknownRelation("edge type " + std::to_string(t) + " has no relation embedding");
    }
  }
}

}  // namespace

Tensor edge_attention_logits(const Tensor& projected, const Tensor& rel_embed,
                             const Tensor& attn_w, const Tensor& attn_b,
                             const EdgeIndex& edges) {
  const int64_t width = projected.cols();
  if (rel_embed.cols() != width || attn_w.rows() != 3 * width || attn_w.cols() != 1 ||
      attn_b.numel() != 1) {
    throw ShapeMismatch("edge_attention_logits: parameter widths do not match");
  }
  if (projected.rows() != edges.n_entities) {
    throw ShapeMismatch("edge_attention_logits: projected rows must cover all entities");
  }
  const int64_t n_edges = edges.n_edges();
  const double* p = projected.data().data();
  const double* r = rel_embed.data().data();
  const double* w = attn_w.data().data();
  const double b = attn_b.data()[0];

  // pre-activations kept for the backward slope
  auto pre = std::make_shared<std::vector<double>>(static_cast<size_t>(n_edges));
  std::vector<double> out(static_cast<size_t>(n_edges));
  for (int64_t e = 0; e < n_edges; ++e) {
    const double* pv = p + edges.target[static_cast<size_t>(e)] * width;
    const double* re = r + edges.edge_type[static_cast<size_t>(e)] * width;
    const double* pu = p + edges.source[static_cast<size_t>(e)] * width;
    double z = b;
    for (int64_t j = 0; j < width; ++j) {
      z += w[j] * pv[j] + w[width + j] * re[j] + w[2 * width + j] * pu[j];
    }
    (*pre)[static_cast<size_t>(e)] = z;
    out[static_cast<size_t>(e)] = z >= 0.0 ? z : 0.01 * z;
  }

  auto pi = projected.impl_ptr();
  auto ri = rel_embed.impl_ptr();
  auto wi = attn_w.impl_ptr();
  auto bi = attn_b.impl_ptr();
  const EdgeIndex* eidx = &edges;
  return detail::make_op(
      "edge_attention_logits", {n_edges}, std::move(out),
      {projected, rel_embed, attn_w, attn_b},
      [pi, ri, wi, bi, eidx, pre, width, n_edges](detail::TensorImpl& node) {
        double* pg = pi->requires_grad ? detail::grad_buffer(*pi) : nullptr;
        double* rg = ri->requires_grad ? detail::grad_buffer(*ri) : nullptr;
        double* wg = wi->requires_grad ? detail::grad_buffer(*wi) : nullptr;
        double* bg = bi->requires_grad ? detail::grad_buffer(*bi) : nullptr;
        const double* p = pi->data.data();
        const double* r = ri->data.data();
        const double* w = wi->data.data();
        for (int64_t e = 0; e < n_edges; ++e) {
          const double slope = (*pre)[static_cast<size_t>(e)] >= 0.0 ? 1.0 : 0.01;
          const double g = node.grad[static_cast<size_t>(e)] * slope;
          if (g == 0.0) continue;
          const int64_t tv = eidx->target[static_cast<size_t>(e)] * width;
          const int64_t tr = eidx->edge_type[static_cast<size_t>(e)] * width;
          const int64_t tu = eidx->source[static_cast<size_t>(e)] * width;
          if (bg) bg[0] += g;
          for (int64_t j = 0; j < width; ++j) {
            if (pg) {
              pg[tv + j] += g * w[j];
              pg[tu + j] += g * w[2 * width + j];
            }
            if (rg) rg[tr + j] += g * w[width + j];
            if (wg) {
              wg[j] += g * p[tv + j];
              wg[width + j] += g * r[tr + j];
              wg[2 * width + j] += g * p[tu + j];
            }
          }
        }
      });
}

Tensor edge_weighted_aggregate(const Tensor& projected, const Tensor& rel_embed,
                               const Tensor& weights, const EdgeIndex& edges) {
  const int64_t width = projected.cols();
  const int64_t n_edges = edges.n_edges();
  if (rel_embed.cols() != width) {
    throw ShapeMismatch("edge_weighted_aggregate: relation embedding width differs");
  }
  if (weights.rank() != 1 || weights.numel() != n_edges) {
    throw ShapeMismatch("edge_weighted_aggregate: one weight per edge required");
  }
  if (projected.rows() != edges.n_entities) {
    throw ShapeMismatch("edge_weighted_aggregate: projected rows must cover all entities");
  }
  const double* p = projected.data().data();
  const double* r = rel_embed.data().data();
  const double* wt = weights.data().data();

  std::vector<double> out(static_cast<size_t>(edges.n_entities * width), 0.0);
  for (int64_t e = 0; e < n_edges; ++e) {
    double* dst = out.data() + edges.target[static_cast<size_t>(e)] * width;
    const double* pu = p + edges.source[static_cast<size_t>(e)] * width;
    const double* re = r + edges.edge_type[static_cast<size_t>(e)] * width;
    const double we = wt[e];
    for (int64_t j = 0; j < width; ++j) dst[j] += we * pu[j] * re[j];
  }

  auto pi = projected.impl_ptr();
  auto ri = rel_embed.impl_ptr();
  auto wi = weights.impl_ptr();
  const EdgeIndex* eidx = &edges;
  return detail::make_op(
      "edge_weighted_aggregate", {edges.n_entities, width}, std::move(out),
      {projected, rel_embed, weights},
      [pi, ri, wi, eidx, width, n_edges](detail::TensorImpl& node) {
        double* pg = pi->requires_grad ? detail::grad_buffer(*pi) : nullptr;
        double* rg = ri->requires_grad ? detail::grad_buffer(*ri) : nullptr;
        double* wg = wi->requires_grad ? detail::grad_buffer(*wi) : nullptr;
        const double* p = pi->data.data();
        const double* r = ri->data.data();
        const double* wt = wi->data.data();
        for (int64_t e = 0; e < n_edges; ++e) {
          const double* g = node.grad.data() + eidx->target[static_cast<size_t>(e)] * width;
          const int64_t tu = eidx->source[static_cast<size_t>(e)] * width;
          const int64_t tr = eidx->edge_type[static_cast<size_t>(e)] * width;
          const double we = wt[e];
          double wsum = 0.0;
          for (int64_t j = 0; j < width; ++j) {
            const double gj = g[j];
            if (pg) pg[tu + j] += gj * we * r[tr + j];
            if (rg) rg[tr + j] += gj * we * p[tu + j];
            wsum += gj * p[tu + j] * r[tr + j];
          }
          if (wg) wg[e] += wsum;
        }
      });
}

namespace {

struct ChannelForward {
  Tensor projected;  // entity features in channel space
  Tensor logits;     // per-edge attention logits
};

ChannelForward channel_forward(const RgatChannelParams& channel, const EdgeIndex& edges,
                               const Tensor& feats) {
  check_edges(channel, edges);
  ChannelForward fwd;
  fwd.projected = matmul(feats, channel.proj);
  fwd.logits = edge_attention_logits(fwd.projected, channel.rel_embed, channel.attn_w,
                                     channel.attn_b, edges);
  return fwd;
}

}  // namespace

Tensor attention_logits(const RgatChannelParams& channel, const EdgeIndex& edges,
                        const Tensor& feats) {
  return channel_forward(channel, edges, feats).logits;
}

Tensor attend_and_aggregate(const RgatLayerParams& layer, const EdgeIndex& edges,
                            const Tensor& feats, std::vector<Tensor>* attention_out) {
  if (layer.channels.empty()) throw ConfigInvalid("layer has no channels");
  std::vector<Tensor> channel_outputs;
  channel_outputs.reserve(layer.channels.size());
  for (const RgatChannelParams& channel : layer.channels) {
    const ChannelForward fwd = channel_forward(channel, edges, feats);
    const Tensor weights = segment_softmax(fwd.logits, edges.target, edges.n_entities);
    if (attention_out) attention_out->push_back(weights);
    const Tensor aggregated =
        edge_weighted_aggregate(fwd.projected, channel.rel_embed, weights, edges);
    channel_outputs.push_back(leaky_relu(aggregated));
  }
  return channel_outputs.size() == 1 ? channel_outputs[0] : concat(channel_outputs, 1);
}

Tensor residual_combine(double alpha, const Tensor& layer_out, const Tensor& e0) {
  if (alpha < 0.0 || alpha > 1.0) throw ConfigInvalid("residual alpha must be in [0, 1]");
  if (layer_out.shape() != e0.shape()) {
    throw ShapeMismatch("residual_combine: layer output and e0 shapes differ");
  }
  return leaky_relu(add(scale(layer_out, 1.0 - alpha), scale(e0, alpha)));
}

Tensor readout(const ReadoutParams& params, const std::vector<Tensor>& per_layer) {
  if (per_layer.empty()) throw WrongLayerCount("readout: no layer outputs");
  for (const Tensor& t : per_layer) {
    if (t.shape() != per_layer[0].shape()) {
      throw ShapeMismatch("readout: layer outputs must share a shape");
    }
  }
  const int64_t expected = static_cast<int64_t>(per_layer.size()) * per_layer[0].cols();
  if (params.w.rows() != expected) {
    throw WrongLayerCount("readout: weight expects " + std::to_string(params.w.rows() / per_layer[0].cols()) +
                          " layers, got " + std::to_string(per_layer.size()));
  }
  const Tensor stacked = per_layer.size() == 1 ? per_layer[0] : concat(per_layer, 1);
  return leaky_relu(add_bias(matmul(stacked, params.w), params.b));
}

EncodeResult encode(const EncoderParams& params, const EdgeIndex& edges,
                    const Tensor& entity_embed, const Tensor& numeric, bool keep_attention) {
  const size_t n_layers = params.layers.size();
  if (n_layers == 0) throw WrongLayerCount("encode: need at least one layer");
  if (params.residual.alpha.size() != n_layers) {
    throw ConfigInvalid("encode: one residual alpha per layer required");
  }
  if (entity_embed.rows() != edges.n_entities) {
    throw ShapeMismatch("encode: feature rows must cover all entities");
  }

  EncodeResult result;
  const Tensor e0 = fuse(params.fusion, entity_embed, numeric);
  Tensor feats = e0;
  for (size_t l = 0; l < n_layers; ++l) {
    std::vector<Tensor> attn;
    const Tensor agg =
        attend_and_aggregate(params.layers[l], edges, feats, keep_attention ? &attn : nullptr);
    feats = residual_combine(params.residual.alpha[l], agg, e0);
    result.per_layer.push_back(feats);
    if (keep_attention) result.attention.push_back(std::move(attn));
  }
  result.output = readout(params.readout, result.per_layer);
  return result;
}

Tensor gcn_propagate(const EdgeIndex& edges, const Tensor& feats) {
  if (feats.rows() != edges.n_entities) {
    throw ShapeMismatch("gcn_propagate: feature rows must cover all entities");
  }
  std::vector<double> degree(static_cast<size_t>(edges.n_entities), 0.0);
  for (int64_t v : edges.target) degree[static_cast<size_t>(v)] += 1.0;
  std::vector<double> coeff(static_cast<size_t>(edges.n_edges()));
  for (int64_t e = 0; e < edges.n_edges(); ++e) {
    coeff[static_cast<size_t>(e)] =
        1.0 / std::sqrt(degree[static_cast<size_t>(edges.target[static_cast<size_t>(e)])] *
                        degree[static_cast<size_t>(edges.source[static_cast<size_t>(e)])]);
  }
  const Tensor gathered = gather_rows(feats, edges.source);
  const Tensor scaled = scale_rows(gathered, Tensor::row(std::move(coeff)));
  return scatter_add_rows(scaled, edges.target, edges.n_entities);
}

}  // namespace hackg
