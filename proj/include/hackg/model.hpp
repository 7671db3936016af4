#pragma once
// All learnable state of the HaCKG model plus its structural configuration.

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "hackg/objectives.hpp"
#include "hackg/rgat.hpp"

namespace hackg {

struct ModelConfig {
  int64_t hidden_dim = 64;    // d
  int64_t entity_width = 64;  // E; defaults to d
  int64_t numeric_width = kNumericWidth;
  int64_t layers = 2;         // L
  int64_t channels = 4;       // K, must divide d
  double residual_alpha = 0.1;

  void validate() const;
};

struct ModelParams {
  ModelConfig config;
  int64_t n_entities = 0;

  Tensor entity_embed;  // |V| x E
  EncoderParams encoder;
  RelationSpace relation_space;
  MlpHead mlp;

  static ModelParams init(const ModelConfig& config, int64_t n_entities, uint64_t seed);

  // Stable name -> tensor listing; the checkpoint array order.
  std::vector<std::pair<std::string, Tensor>> named_params() const;
  std::vector<Tensor> all_params() const;

  // Deep copy of parameter values (no autodiff history).
  ModelParams clone() const;
  // Copies parameter values from another instance with identical structure.
  void copy_values_from(const ModelParams& other);
};

}  // namespace hackg
