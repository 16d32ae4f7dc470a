#pragma once

#include <filesystem>
#include <map>
#include <string>

#include "mmbsn/train.hpp"

namespace mmbsn {

/// `key = value` lines; '#' starts a comment, values may be double-quoted,
/// `[section]` headers are accepted and ignored.
std::map<std::string, std::string> parse_key_values(const std::string& text);

/// Applies keys named after TrainingConfig / ArchitectureConfig fields.
/// Unknown keys and malformed values throw std::invalid_argument.
void apply_training_keys(TrainingConfig& config, const std::map<std::string, std::string>& keys);

TrainingConfig load_training_config(const std::filesystem::path& path);

/// Resolved configuration in the same key/value syntax.
std::string format_training_config(const TrainingConfig& config);

}  // namespace mmbsn
