#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "hwdnet/config.hpp"
#include "hwdnet/model.hpp"

namespace hwdnet {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  std::uint32_t format_version = kCheckpointVersion;
  int epoch = 0;       // completed epochs
  std::int64_t step = 0;
  Settings config;
  std::vector<std::int64_t> identity_classes;  // class index -> identity
  std::string rng_state;
  std::vector<NamedTensor> model;
  std::vector<NamedTensor> optimizer;  // momentum buffers, keyed by parameter name
};

// Layout: "HWDNETCK", u32 version, u64 header length, JSON header, raw
// tensor bytes, u32 crc32 of everything before it. Little-endian.
std::string serialize_checkpoint(const Checkpoint& ckpt);
Checkpoint parse_checkpoint(const std::string& bytes, const std::string& origin = "<memory>");

// Written to a sibling temp file and renamed into place.
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& file);
Checkpoint load_checkpoint(const std::filesystem::path& file);

}  // namespace hwdnet
