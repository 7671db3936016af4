#include "hackg/model.hpp"

#include <algorithm>
#include <cmath>

namespace hackg {

void ModelConfig::validate() const {
  std::vector<std::string> problems;
  if (hidden_dim <= 0) problems.push_back("hidden_dim must be positive");
  if (entity_width <= 0) problems.push_back("entity_width must be positive");
  if (numeric_width != kNumericWidth) {
    problems.push_back("numeric_width must equal " + std::to_string(kNumericWidth));
  }
  if (layers <= 0) problems.push_back("layers must be at least 1");
  if (channels <= 0) {
    problems.push_back("channels must be positive");
  } else if (hidden_dim > 0 && hidden_dim % channels != 0) {
    problems.push_back("channels must divide hidden_dim");
  }
  if (residual_alpha < 0.0 || residual_alpha > 1.0) {
    problems.push_back("residual_alpha must be in [0, 1]");
  }
  if (!problems.empty()) {
    std::string msg = "invalid model config:";
    for (const std::string& p : problems) msg += "\n  - " + p;
    throw ConfigInvalid(msg);
  }
}

ModelParams ModelParams::init(const ModelConfig& config, int64_t n_entities, uint64_t seed) {
  config.validate();
  if (n_entities <= 0) throw ConfigInvalid("model needs at least one entity");
  Rng rng(seed);

  ModelParams p;
  p.config = config;
  p.n_entities = n_entities;
  const double embed_bound = 1.0 / std::sqrt(static_cast<double>(config.entity_width));
  p.entity_embed = Tensor::uniform({n_entities, config.entity_width}, -embed_bound, embed_bound,
                                   rng, /*requires_grad=*/true);
  p.encoder.fusion =
      init_fusion_params(config.entity_width, config.numeric_width, config.hidden_dim, rng);
  for (int64_t l = 0; l < config.layers; ++l) {
    p.encoder.layers.push_back(init_layer_params(config.hidden_dim, config.channels, rng));
  }
  p.encoder.residual.alpha.assign(static_cast<size_t>(config.layers), config.residual_alpha);
  p.encoder.readout = init_readout_params(config.layers, config.hidden_dim, rng);
  p.relation_space = init_relation_space(config.hidden_dim, rng);
  p.mlp = init_mlp_head(config.hidden_dim, rng);
  return p;
}

std::vector<std::pair<std::string, Tensor>> ModelParams::named_params() const {
  std::vector<std::pair<std::string, Tensor>> out;
  out.emplace_back("initial.entity_embed", entity_embed);
  out.emplace_back("fusion.w_entity", encoder.fusion.w_entity);
  out.emplace_back("fusion.w_numeric", encoder.fusion.w_numeric);
  out.emplace_back("fusion.w_concat", encoder.fusion.w_concat);
  for (size_t l = 0; l < encoder.layers.size(); ++l) {
    for (size_t k = 0; k < encoder.layers[l].channels.size(); ++k) {
      const std::string prefix =
          "rgat.layer" + std::to_string(l) + ".chan" + std::to_string(k) + ".";
      const RgatChannelParams& chan = encoder.layers[l].channels[k];
      out.emplace_back(prefix + "proj", chan.proj);
      out.emplace_back(prefix + "attn_w", chan.attn_w);
      out.emplace_back(prefix + "attn_b", chan.attn_b);
      out.emplace_back(prefix + "rel_embed", chan.rel_embed);
    }
  }
  out.emplace_back("readout.w", encoder.readout.w);
  out.emplace_back("readout.b", encoder.readout.b);
  for (int r = 0; r < kNumRelationKinds; ++r) {
    const std::string prefix =
        "relspace." + std::string(relation_name(static_cast<RelationKind>(r))) + ".";
    out.emplace_back(prefix + "proj", relation_space.relations[r].proj);
    out.emplace_back(prefix + "vec", relation_space.relations[r].vec);
  }
  out.emplace_back("mlp.w1", mlp.w1);
  out.emplace_back("mlp.b1", mlp.b1);
  out.emplace_back("mlp.w2", mlp.w2);
  out.emplace_back("mlp.b2", mlp.b2);
  return out;
}

std::vector<Tensor> ModelParams::all_params() const {
  std::vector<Tensor> out;
  for (auto& [name, tensor] : named_params()) out.push_back(tensor);
  return out;
}

ModelParams ModelParams::clone() const {
  ModelParams copy = init(config, n_entities, /*seed=*/0);
  copy.copy_values_from(*this);
  return copy;
}

void ModelParams::copy_values_from(const ModelParams& other) {
  auto mine = named_params();
  auto theirs = other.named_params();
  if (mine.size() != theirs.size()) throw ShapeMismatch("model structures differ");
  for (size_t i = 0; i < mine.size(); ++i) {
    if (mine[i].first != theirs[i].first ||
        mine[i].second.shape() != theirs[i].second.shape()) {
      throw ShapeMismatch("model parameter '" + mine[i].first + "' differs in structure");
    }
    auto dst = mine[i].second.raw_data();
    auto src = theirs[i].second.data();
    std::copy(src.begin(), src.end(), dst.begin());
  }
}

}  // namespace hackg
