#include "hackg/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include <json.hpp>

namespace hackg {

namespace {

uint64_t swap_bytes(uint64_t x) {
  x = ((x & 0x00FF00FF00FF00FFULL) << 8) | ((x & 0xFF00FF00FF00FF00ULL) >> 8);
  x = ((x & 0x0000FFFF0000FFFFULL) << 16) | ((x & 0xFFFF0000FFFF0000ULL) >> 16);
  return (x << 32) | (x >> 32);
}

void write_le_doubles(std::ostream& out, std::span<const double> values) {
  for (double v : values) {
    uint64_t bits;
    std::memcpy(&bits, &v, sizeof(bits));
    if constexpr (std::endian::native == std::endian::big) bits = swap_bytes(bits);
    char buf[8];
    std::memcpy(buf, &bits, sizeof(buf));
    out.write(buf, sizeof(buf));
  }
}

void read_le_doubles(std::istream& in, std::span<double> values) {
  for (double& v : values) {
    char buf[8];
    in.read(buf, sizeof(buf));
    if (!in) throw IoError("checkpoint payload truncated");
    uint64_t bits;
    std::memcpy(&bits, buf, sizeof(bits));
    if constexpr (std::endian::native == std::endian::big) bits = swap_bytes(bits);
    std::memcpy(&v, &bits, sizeof(v));
  }
}

}  // namespace

void save_checkpoint(const std::filesystem::path& stem, const ModelParams& params,
                     const std::string& kg_hash) {
  const auto named = params.named_params();

  nlohmann::ordered_json manifest;
  manifest["schema_version"] = 1;
  manifest["kg_hash"] = kg_hash;
  manifest["model"] = {
      {"hidden_dim", params.config.hidden_dim},
      {"entity_width", params.config.entity_width},
      {"numeric_width", params.config.numeric_width},
      {"layers", params.config.layers},
      {"channels", params.config.channels},
      {"residual_alpha", params.config.residual_alpha},
      {"n_entities", params.n_entities},
  };

  std::filesystem::path bin_path = stem;
  bin_path += ".bin";
  std::ofstream bin(bin_path, std::ios::binary);
  if (!bin) throw IoError("cannot open " + bin_path.string() + " for writing");

  int64_t offset = 0;
  nlohmann::ordered_json arrays = nlohmann::ordered_json::array();
  for (const auto& [name, tensor] : named) {
    nlohmann::ordered_json entry;
    entry["name"] = name;
    entry["shape"] = tensor.shape();
    entry["byte_offset"] = offset;
    arrays.push_back(std::move(entry));
    write_le_doubles(bin, tensor.data());
    offset += tensor.numel() * 8;
  }
  manifest["arrays"] = std::move(arrays);
  if (!bin) throw IoError("failed writing " + bin_path.string());
  bin.close();

  std::filesystem::path json_path = stem;
  json_path += ".json";
  std::ofstream meta(json_path);
  if (!meta) throw IoError("cannot open " + json_path.string() + " for writing");
  meta << manifest.dump(2) << '\n';
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& stem) {
  std::filesystem::path json_path = stem;
  json_path += ".json";
  std::ifstream meta(json_path);
  if (!meta) throw IoError("cannot open " + json_path.string());
  nlohmann::json manifest;
  try {
    meta >> manifest;
  } catch (const nlohmann::json::exception& e) {
    throw IoError("malformed checkpoint manifest: " + std::string(e.what()));
  }
  if (!manifest.contains("schema_version") || manifest["schema_version"].get<int>() != 1) {
    throw HeaderMismatch("unsupported checkpoint schema version");
  }

  const auto& model = manifest.at("model");
  ModelConfig config;
  config.hidden_dim = model.at("hidden_dim").get<int64_t>();
  config.entity_width = model.at("entity_width").get<int64_t>();
  config.numeric_width = model.at("numeric_width").get<int64_t>();
  config.layers = model.at("layers").get<int64_t>();
  config.channels = model.at("channels").get<int64_t>();
  config.residual_alpha = model.at("residual_alpha").get<double>();
  const int64_t n_entities = model.at("n_entities").get<int64_t>();

  LoadedCheckpoint loaded{ModelParams::init(config, n_entities, /*seed=*/0),
                          manifest.value("kg_hash", std::string())};

  std::filesystem::path bin_path = stem;
  bin_path += ".bin";
  std::ifstream bin(bin_path, std::ios::binary);
  if (!bin) throw IoError("cannot open " + bin_path.string());

  auto named = loaded.params.named_params();
  const auto& arrays = manifest.at("arrays");
  if (arrays.size() != named.size()) {
    throw HeaderMismatch("checkpoint manifest lists " + std::to_string(arrays.size()) +
                         " arrays, model expects " + std::to_string(named.size()));
  }
  for (size_t i = 0; i < named.size(); ++i) {
    const auto& entry = arrays[i];
    if (entry.at("name").get<std::string>() != named[i].first) {
      throw HeaderMismatch("checkpoint array '" + entry.at("name").get<std::string>() +
                           "' does not match expected '" + named[i].first + "'");
    }
    const Shape shape = entry.at("shape").get<Shape>();
    if (shape != named[i].second.shape()) {
      throw HeaderMismatch("checkpoint array '" + named[i].first + "' has a different shape");
    }
    bin.seekg(entry.at("byte_offset").get<int64_t>());
    read_le_doubles(bin, named[i].second.raw_data());
  }
  return loaded;
}

}  // namespace hackg
