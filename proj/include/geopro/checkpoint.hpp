/**
 * Model checkpoints and key = value configuration files.
 *
 * Checkpoint layout (little-endian): "GEOPRO01", u32 tensor count, then per
 * tensor u16 name length, name bytes, u8 rank, u32 dims, f64 values; a
 * trailing u32 architecture hash. The architecture itself is stored as the
 * tensor "__arch__" so a checkpoint can be loaded without a config file.
 */
#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "geopro/pipeline.hpp"

namespace geopro {

struct CheckpointTensor {
    std::string name;
    ad::Shape shape;
    std::vector<double> values;
};

std::string encode_checkpoint(const std::vector<CheckpointTensor>& tensors, std::uint32_t hash);
/// Throws DataError on bad magic, truncation or trailing bytes.
std::vector<CheckpointTensor> decode_checkpoint(std::string_view bytes, std::uint32_t* hash);

std::string serialize_model(const GeoProModel& model);
/// Rebuilds the architecture from "__arch__", checks the hash and copies every parameter.
GeoProModel deserialize_model(std::string_view bytes);

void save_checkpoint(const std::filesystem::path& path, const GeoProModel& model);
GeoProModel load_checkpoint(const std::filesystem::path& path);
/// Also refuses a checkpoint whose architecture differs from `expected`.
GeoProModel load_checkpoint(const std::filesystem::path& path, const ModelConfig& expected);

/// Short hex tag of the architecture hash, used as a model version string.
std::string model_version(const GeoProModel& model);

/// `key = value` lines; '#' comments and blank lines ignored. Throws ParseError.
std::map<std::string, std::string> parse_key_values(std::string_view text);

/// Applies recognized keys; unknown keys and bad values throw ConfigError.
void apply_config(TrainingConfig& config, const std::map<std::string, std::string>& values);

std::string format_config(const TrainingConfig& config);

}  // namespace geopro
