#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>

#include "mmbsn/mask.hpp"
#include "mmbsn/tensor.hpp"

namespace mmbsn {

enum class CleanPattern { Stripes, Checker, Gradient, Disks };

CleanPattern parse_pattern(const std::string& name);
std::string pattern_name(CleanPattern p);

/// Synthetic clean image in [0, 1], shape (1, channels, size, size).
/// Checker and stripes use a period of 4 pixels for the base layer.
Tensor4 gen_clean(CleanPattern pattern, std::size_t size, std::uint64_t seed,
                  std::size_t channels = 3);

/// Shape of the correlation kernel: a mask geometry, or an isotropic Gaussian
/// blob when `shape` is empty.
struct NoiseSpec {
  double sigma = 0.1;
  std::optional<MaskShape> shape = MaskShape(MaskTag::O);
  int support = 1;
  std::uint64_t seed = 0;
};

/// Normalized (unit L2) support x support shaping kernel, row-major.
std::vector<double> noise_kernel(const NoiseSpec& spec);

/// White Gaussian field convolved with the shaping kernel and scaled by sigma,
/// independently per channel.
Tensor4 gen_correlated_noise(const NoiseSpec& spec, std::size_t height, std::size_t width,
                             std::size_t channels = 3);

/// Pixel-area proportions per bucket: [1..9], [10..25], [26..100], >100.
inline constexpr std::array<const char*, 4> kAreaBuckets = {"1-9", "10-25", "26-100", ">100"};
inline constexpr std::size_t kLargeNoiseArea = 25;

struct NoiseRegionStats {
  std::vector<std::size_t> areas;  // one entry per component, sorted ascending
  std::array<double, 4> bucket_proportions{};
  double large_fraction = 0.0;
  std::size_t noisy_pixels = 0;

  /// component area -> number of components with that area
  std::map<std::size_t, std::size_t> histogram() const;
};

/// Binarizes |residual| > threshold (any channel), labels 8-connected
/// components and summarizes their areas.
NoiseRegionStats analyze_regions(const Tensor4& residual, double threshold);
/// Default threshold: 2 * 1.4826 * MAD of the residual.
double robust_threshold(const Tensor4& residual);

/// 10 log10(peak^2 / MSE), capped at 99 dB.
double psnr(const Tensor4& a, const Tensor4& b, double peak = 1.0);
/// Mean SSIM with an 11x11 Gaussian window (sigma 1.5) over valid positions,
/// averaged across channels and batch entries.
double ssim(const Tensor4& a, const Tensor4& b, double peak = 1.0);

Tensor4 clamp01(Tensor4 x);

}  // namespace mmbsn
