#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "logora/parameters.hpp"

namespace logora {

inline constexpr char kCheckpointMagic[5] = "LGRA";
inline constexpr std::uint8_t kCheckpointVersion = 1;

struct CheckpointRecord {
  std::string name;
  Shape shape;
  std::vector<double> values;
};

/// Layout (all integers little-endian):
///   "LGRA" u8 version
///   u32 metadata length, UTF-8 JSON metadata
///   u32 record count, then per record:
///     u32 name length, UTF-8 name, u32 rank, u64 dims[rank], f64 payload
struct Checkpoint {
  std::string metadata_json;
  std::vector<CheckpointRecord> records;

  const CheckpointRecord* find(const std::string& name) const;
};

void write_checkpoint(const std::filesystem::path& path, const std::string& metadata_json, const ParameterSet& params);
Checkpoint read_checkpoint(const std::filesystem::path& path);

/// Copies record values into the matching tensors of `params`. Every entry
/// of `params` must be present with an identical shape.
void load_parameters(const Checkpoint& checkpoint, const ParameterSet& params);

}  // namespace logora
