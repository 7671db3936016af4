#pragma once
// Checkpoint format: a raw payload of little-endian 64-bit float arrays
// (<stem>.bin) indexed by a JSON manifest (<stem>.json) that records
// {name, shape, byte_offset} per array plus the model configuration.

#include <filesystem>
#include <string>

#include "hackg/model.hpp"

namespace hackg {

// kg_hash ties the checkpoint to the graph whose entity ids the embeddings
// index; load refuses a different graph.
void save_checkpoint(const std::filesystem::path& stem, const ModelParams& params,
                     const std::string& kg_hash);

struct LoadedCheckpoint {
  ModelParams params;
  std::string kg_hash;
};

LoadedCheckpoint load_checkpoint(const std::filesystem::path& stem);

}  // namespace hackg
