#pragma once

#include <filesystem>
#include <string>

#include "mmbsn/train.hpp"

namespace mmbsn {

inline constexpr const char* kCheckpointVersion = "mmbsn-ckpt-v1";

/// Layout: u64 little-endian header length, UTF-8 JSON header, then raw
/// little-endian float64 blocks: every layer's weight and bias in registry
/// order, followed by the Adam first and second moments per layer.
std::string serialize_checkpoint(const Checkpoint& ck);
Checkpoint deserialize_checkpoint(const std::string& bytes);

void save_checkpoint(const Checkpoint& ck, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Thrown for unreadable or malformed checkpoint files.
class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace mmbsn
