#pragma once

#include <filesystem>

#include "json.hpp"
#include "sra/model.hpp"

namespace sra {

nlohmann::json to_json(const ModelConfig& config);
ModelConfig model_config_from_json(const nlohmann::json& j);

struct Checkpoint {
  Parameters params;
  nlohmann::json manifest;  // training manifest: seed, alpha, epoch, ...
};

/// Layout: the magic line "SRACKPT1\n", an 8-byte little-endian header length,
/// a JSON header (config, manifest, tensor table), then every tensor's
/// row-major doubles in declared order. Reloading is bit-exact.
void save_checkpoint(const std::filesystem::path& path, const Parameters& params,
                     const nlohmann::json& manifest);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace sra
