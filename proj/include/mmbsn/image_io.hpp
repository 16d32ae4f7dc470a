#pragma once

#include <filesystem>
#include <stdexcept>
#include <vector>

#include "mmbsn/tensor.hpp"

namespace mmbsn {

class ImageIoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// 8-bit PNG to a (1, 3, H, W) tensor in [0, 1]. Gray, palette and alpha
/// inputs are converted to RGB.
Tensor4 read_png(const std::filesystem::path& path);
/// Writes batch entry 0 as 8-bit RGB (1 channel is replicated); values are
/// clamped to [0, 1] and rounded.
void write_png(const std::filesystem::path& path, const Tensor4& image);
/// Rounds to the 8-bit grid write_png would store.
Tensor4 quantize8(const Tensor4& image);

/// All *.png files of a directory, sorted by name.
std::vector<std::filesystem::path> list_pngs(const std::filesystem::path& dir);

}  // namespace mmbsn
