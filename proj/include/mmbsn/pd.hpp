#pragma once

#include <cstdint>
#include <functional>

#include "mmbsn/tensor.hpp"

namespace mmbsn {

/// Pixel-shuffle downsampling. The s*s stride-s sub-images are tiled as an
/// s x s mosaic: block (i, j) holds pixels (i + s*y, j + s*x). Sizes that are
/// not multiples of s are reflect-padded up to the next multiple first.
Tensor4 pd(const Tensor4& image, int s);

/// Exact inverse of pd for mosaics whose sides are multiples of s.
Tensor4 pd_inv(const Tensor4& mosaic, int s);
/// Inverse followed by a crop to (height, width), undoing pd's padding.
Tensor4 pd_inv(const Tensor4& mosaic, int s, std::size_t height, std::size_t width);

/// Side length after padding to a multiple of s.
std::size_t pd_padded(std::size_t n, int s);
Tensor4 reflect_pad(const Tensor4& image, std::size_t height, std::size_t width);

using Denoiser = std::function<Tensor4(const Tensor4&)>;

/// Averages T re-denoising passes; in each pass every pixel (all channels
/// together) is reverted to `noisy` with probability p.
Tensor4 random_replace_refine(const Tensor4& denoised, const Tensor4& noisy, double p, int passes,
                              std::uint64_t seed, const Denoiser& denoise);

}  // namespace mmbsn
