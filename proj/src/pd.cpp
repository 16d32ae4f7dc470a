#include "mmbsn/pd.hpp"

#include <random>
#include <stdexcept>

namespace mmbsn {

namespace {

void check_stride(int s) {
  if (s < 1) throw std::invalid_argument("pd stride must be >= 1, got " + std::to_string(s));
}

std::size_t reflect_index(std::size_t p, std::size_t n) {
  if (n == 1) return 0;
  const std::size_t period = 2 * (n - 1);
  p %= period;
  return p < n ? p : period - p;
}

}  // namespace

std::size_t pd_padded(std::size_t n, int s) {
  const auto st = static_cast<std::size_t>(s);
  return (n + st - 1) / st * st;
}

Tensor4 reflect_pad(const Tensor4& image, std::size_t height, std::size_t width) {
  if (height < image.height() || width < image.width()) {
    throw ShapeError("reflect_pad: target smaller than image");
  }
  if (height == image.height() && width == image.width()) return image;
  Tensor4 out(image.batch(), image.channels(), height, width);
  for (std::size_t b = 0; b < image.batch(); ++b)
    for (std::size_t c = 0; c < image.channels(); ++c)
      for (std::size_t y = 0; y < height; ++y) {
        const std::size_t sy = reflect_index(y, image.height());
        for (std::size_t x = 0; x < width; ++x) {
          out.at(b, c, y, x) = image.at(b, c, sy, reflect_index(x, image.width()));
        }
      }
  return out;
}

Tensor4 pd(const Tensor4& image, int s) {
  check_stride(s);
  if (s == 1) return image;
  const Tensor4 src = reflect_pad(image, pd_padded(image.height(), s), pd_padded(image.width(), s));
  const auto st = static_cast<std::size_t>(s);
  const std::size_t H = src.height(), W = src.width();
  const std::size_t sh = H / st, sw = W / st;
  Tensor4 out(src.shape());
  for (std::size_t b = 0; b < src.batch(); ++b)
    for (std::size_t c = 0; c < src.channels(); ++c) {
      const double* in = src.plane(b, c);
      double* dst = out.plane(b, c);
      for (std::size_t i = 0; i < st; ++i)
        for (std::size_t y = 0; y < sh; ++y) {
          double* row = dst + (i * sh + y) * W;
          const double* srow = in + (i + st * y) * W;
          for (std::size_t j = 0; j < st; ++j)
            for (std::size_t x = 0; x < sw; ++x) row[j * sw + x] = srow[j + st * x];
        }
    }
  return out;
}

Tensor4 pd_inv(const Tensor4& mosaic, int s) {
  check_stride(s);
  if (s == 1) return mosaic;
  const auto st = static_cast<std::size_t>(s);
  const std::size_t H = mosaic.height(), W = mosaic.width();
  if (H % st != 0 || W % st != 0) {
    throw ShapeError("pd_inv: mosaic " + mosaic.shape().str() + " not divisible by stride " +
                     std::to_string(s));
  }
  const std::size_t sh = H / st, sw = W / st;
  Tensor4 out(mosaic.shape());
  for (std::size_t b = 0; b < mosaic.batch(); ++b)
    for (std::size_t c = 0; c < mosaic.channels(); ++c) {
      const double* in = mosaic.plane(b, c);
      double* dst = out.plane(b, c);
      for (std::size_t i = 0; i < st; ++i)
        for (std::size_t y = 0; y < sh; ++y) {
          const double* row = in + (i * sh + y) * W;
          double* drow = dst + (i + st * y) * W;
          for (std::size_t j = 0; j < st; ++j)
            for (std::size_t x = 0; x < sw; ++x) drow[j + st * x] = row[j * sw + x];
        }
    }
  return out;
}

Tensor4 pd_inv(const Tensor4& mosaic, int s, std::size_t height, std::size_t width) {
  Tensor4 full = pd_inv(mosaic, s);
  if (height > full.height() || width > full.width()) {
    throw ShapeError("pd_inv: crop larger than mosaic");
  }
  if (height == full.height() && width == full.width()) return full;
  Tensor4 out(full.batch(), full.channels(), height, width);
  for (std::size_t b = 0; b < full.batch(); ++b)
    for (std::size_t c = 0; c < full.channels(); ++c)
      for (std::size_t y = 0; y < height; ++y)
        for (std::size_t x = 0; x < width; ++x) out.at(b, c, y, x) = full.at(b, c, y, x);
  return out;
}

Tensor4 random_replace_refine(const Tensor4& denoised, const Tensor4& noisy, double p, int passes,
                              std::uint64_t seed, const Denoiser& denoise) {
  require_same_shape(denoised, noisy, "random_replace_refine");
  if (p < 0.0 || p > 1.0) throw std::invalid_argument("refine probability must be in [0, 1]");
  if (passes < 1) throw std::invalid_argument("refine pass count must be >= 1");

  std::mt19937_64 rng(seed);
  std::bernoulli_distribution replace(p);
  Tensor4 acc(denoised.shape());
  const std::size_t H = denoised.height(), W = denoised.width();
  for (int t = 0; t < passes; ++t) {
    Tensor4 mixed = denoised;
    for (std::size_t b = 0; b < denoised.batch(); ++b)
      for (std::size_t y = 0; y < H; ++y)
        for (std::size_t x = 0; x < W; ++x) {
          if (!replace(rng)) continue;
          for (std::size_t c = 0; c < denoised.channels(); ++c) {
            mixed.at(b, c, y, x) = noisy.at(b, c, y, x);
          }
        }
    const Tensor4 out = denoise(mixed);
    require_same_shape(out, denoised, "random_replace_refine: denoiser output");
    for (std::size_t j = 0; j < acc.size(); ++j) acc[j] += out[j];
  }
  for (auto& v : acc.values()) v /= static_cast<double>(passes);
  return acc;
}

}  // namespace mmbsn
