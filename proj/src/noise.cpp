#include "mmbsn/noise.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

namespace mmbsn {

CleanPattern parse_pattern(const std::string& name) {
  if (name == "stripes") return CleanPattern::Stripes;
  if (name == "checker") return CleanPattern::Checker;
  if (name == "gradient") return CleanPattern::Gradient;
  if (name == "disks") return CleanPattern::Disks;
  throw std::invalid_argument("unknown pattern '" + name + "' (stripes, checker, gradient, disks)");
}

std::string pattern_name(CleanPattern p) {
  switch (p) {
    case CleanPattern::Stripes:
      return "stripes";
    case CleanPattern::Checker:
      return "checker";
    case CleanPattern::Gradient:
      return "gradient";
    case CleanPattern::Disks:
      return "disks";
  }
  return "?";
}

Tensor4 gen_clean(CleanPattern pattern, std::size_t size, std::uint64_t seed,
                  std::size_t channels) {
  if (size < 16) throw std::invalid_argument("clean image size must be >= 16");
  Tensor4 img(1, channels, size, size);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  const double n = static_cast<double>(size);

  switch (pattern) {
    case CleanPattern::Checker:
      for (std::size_t c = 0; c < channels; ++c)
        for (std::size_t y = 0; y < size; ++y)
          for (std::size_t x = 0; x < size; ++x)
            img.at(0, c, y, x) = static_cast<double>((y / 4 + x / 4) % 2);
      break;
    case CleanPattern::Stripes: {
      // Oriented sinusoid with period 4..12 pixels, per-channel gain.
      const double angle = uni(rng) * std::numbers::pi;
      const double period = 4.0 + 8.0 * uni(rng);
      const double kx = std::cos(angle) * 2.0 * std::numbers::pi / period;
      const double ky = std::sin(angle) * 2.0 * std::numbers::pi / period;
      for (std::size_t c = 0; c < channels; ++c) {
        const double gain = 0.3 + 0.2 * uni(rng);
        for (std::size_t y = 0; y < size; ++y)
          for (std::size_t x = 0; x < size; ++x)
            img.at(0, c, y, x) = 0.5 + gain * std::sin(kx * static_cast<double>(x) +
                                                       ky * static_cast<double>(y));
      }
      break;
    }
    case CleanPattern::Gradient:
      for (std::size_t c = 0; c < channels; ++c) {
        const double lo = 0.4 * uni(rng);
        const double hi = 0.6 + 0.4 * uni(rng);
        for (std::size_t y = 0; y < size; ++y)
          for (std::size_t x = 0; x < size; ++x)
            img.at(0, c, y, x) =
                lo + (hi - lo) * (0.7 * static_cast<double>(x) / (n - 1.0) +
                                  0.3 * static_cast<double>(y) / (n - 1.0));
      }
      break;
    case CleanPattern::Disks: {
      std::vector<double> background(channels);
      for (auto& v : background) v = 0.2 + 0.6 * uni(rng);
      for (std::size_t c = 0; c < channels; ++c)
        for (std::size_t j = 0; j < size * size; ++j) img[c * size * size + j] = background[c];
      const int count = 6 + static_cast<int>(uni(rng) * 6.0);
      for (int d = 0; d < count; ++d) {
        const double cy = uni(rng) * n, cx = uni(rng) * n;
        const double r = n * (0.06 + 0.14 * uni(rng));
        std::vector<double> color(channels);
        for (auto& v : color) v = uni(rng);
        for (std::size_t y = 0; y < size; ++y)
          for (std::size_t x = 0; x < size; ++x) {
            const double dy = static_cast<double>(y) + 0.5 - cy;
            const double dx = static_cast<double>(x) + 0.5 - cx;
            if (dy * dy + dx * dx <= r * r)
              for (std::size_t c = 0; c < channels; ++c) img.at(0, c, y, x) = color[c];
          }
      }
      break;
    }
  }
  for (auto& v : img.values()) v = std::clamp(v, 0.0, 1.0);
  return img;
}

std::vector<double> noise_kernel(const NoiseSpec& spec) {
  if (spec.support < 1 || spec.support % 2 == 0) {
    throw std::invalid_argument("noise kernel support must be odd and >= 1");
  }
  const int k = spec.support;
  const int r = (k - 1) / 2;
  std::vector<double> w(static_cast<std::size_t>(k * k), 0.0);
  if (spec.shape) {
    const KernelMask m = render_mask(*spec.shape, k);
    for (const auto& o : m.masked()) w[static_cast<std::size_t>((o.row + r) * k + o.col + r)] = 1.0;
  } else {
    const double s = std::max(0.5, k / 4.0);
    for (int a = -r; a <= r; ++a)
      for (int b = -r; b <= r; ++b)
        w[static_cast<std::size_t>((a + r) * k + b + r)] = std::exp(-(a * a + b * b) / (2 * s * s));
  }
  double norm = 0.0;
  for (double v : w) norm += v * v;
  norm = std::sqrt(norm);
  for (auto& v : w) v /= norm;
  return w;
}

Tensor4 gen_correlated_noise(const NoiseSpec& spec, std::size_t height, std::size_t width,
                             std::size_t channels) {
  if (spec.sigma < 0.0) throw std::invalid_argument("noise sigma must be >= 0");
  const auto kernel = noise_kernel(spec);
  Tensor4 out(1, channels, height, width);
  if (spec.sigma == 0.0) return out;

  const int k = spec.support;
  const std::size_t r = static_cast<std::size_t>((k - 1) / 2);
  const std::size_t ph = height + 2 * r, pw = width + 2 * r;
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> white(ph * pw);
  for (std::size_t c = 0; c < channels; ++c) {
    for (auto& v : white) v = normal(rng);
    for (std::size_t y = 0; y < height; ++y)
      for (std::size_t x = 0; x < width; ++x) {
        double acc = 0.0;
        for (int a = 0; a < k; ++a)
          for (int b = 0; b < k; ++b) {
            const double kv = kernel[static_cast<std::size_t>(a * k + b)];
            if (kv == 0.0) continue;
            acc += kv * white[(y + static_cast<std::size_t>(a)) * pw + x + static_cast<std::size_t>(b)];
          }
        out.at(0, c, y, x) = spec.sigma * acc;
      }
  }
  return out;
}

std::map<std::size_t, std::size_t> NoiseRegionStats::histogram() const {
  std::map<std::size_t, std::size_t> h;
  for (std::size_t a : areas) ++h[a];
  return h;
}

NoiseRegionStats analyze_regions(const Tensor4& residual, double threshold) {
  if (residual.batch() != 1) throw ShapeError("analyze_regions expects a single image");
  if (!(threshold > 0.0)) throw std::invalid_argument("threshold must be > 0");
  const std::size_t H = residual.height(), W = residual.width();
  std::vector<char> on(H * W, 0);
  for (std::size_t c = 0; c < residual.channels(); ++c)
    for (std::size_t y = 0; y < H; ++y)
      for (std::size_t x = 0; x < W; ++x)
        if (std::abs(residual.at(0, c, y, x)) > threshold) on[y * W + x] = 1;

  NoiseRegionStats stats;
  std::vector<char> seen(H * W, 0);
  std::vector<std::size_t> stack;
  for (std::size_t start = 0; start < H * W; ++start) {
    if (!on[start] || seen[start]) continue;
    std::size_t area = 0;
    stack.push_back(start);
    seen[start] = 1;
    while (!stack.empty()) {
      const std::size_t p = stack.back();
      stack.pop_back();
      ++area;
      const auto py = static_cast<std::ptrdiff_t>(p / W), px = static_cast<std::ptrdiff_t>(p % W);
      for (std::ptrdiff_t dy = -1; dy <= 1; ++dy)
        for (std::ptrdiff_t dx = -1; dx <= 1; ++dx) {
          const std::ptrdiff_t ny = py + dy, nx = px + dx;
          if (ny < 0 || nx < 0 || ny >= static_cast<std::ptrdiff_t>(H) ||
              nx >= static_cast<std::ptrdiff_t>(W))
            continue;
          const std::size_t q = static_cast<std::size_t>(ny) * W + static_cast<std::size_t>(nx);
          if (on[q] && !seen[q]) {
            seen[q] = 1;
            stack.push_back(q);
          }
        }
    }
    stats.areas.push_back(area);
  }
  std::sort(stats.areas.begin(), stats.areas.end());

  for (std::size_t a : stats.areas) stats.noisy_pixels += a;
  if (stats.noisy_pixels == 0) return stats;
  std::array<std::size_t, 4> bucket{};
  std::size_t large = 0;
  for (std::size_t a : stats.areas) {
    const std::size_t idx = a <= 9 ? 0 : a <= 25 ? 1 : a <= 100 ? 2 : 3;
    bucket[idx] += a;
    if (a > kLargeNoiseArea) large += a;
  }
  const double total = static_cast<double>(stats.noisy_pixels);
  for (std::size_t i = 0; i < 4; ++i) stats.bucket_proportions[i] = bucket[i] / total;
  stats.large_fraction = static_cast<double>(large) / total;
  return stats;
}

double robust_threshold(const Tensor4& residual) {
  std::vector<double> v(residual.values().begin(), residual.values().end());
  auto median = [](std::vector<double>& xs) {
    const std::size_t mid = xs.size() / 2;
    std::nth_element(xs.begin(), xs.begin() + static_cast<std::ptrdiff_t>(mid), xs.end());
    double m = xs[mid];
    if (xs.size() % 2 == 0) {
      m = 0.5 * (m + *std::max_element(xs.begin(), xs.begin() + static_cast<std::ptrdiff_t>(mid)));
    }
    return m;
  };
  const double med = median(v);
  for (auto& x : v) x = std::abs(x - med);
  const double mad = median(v);
  return 2.0 * 1.4826 * mad;
}

double psnr(const Tensor4& a, const Tensor4& b, double peak) {
  require_same_shape(a, b, "psnr");
  double se = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) {
    const double d = a[j] - b[j];
    se += d * d;
  }
  const double mse = se / static_cast<double>(a.size());
  if (mse < 1e-12) return 99.0;
  return std::min(99.0, 10.0 * std::log10(peak * peak / mse));
}

namespace {

std::vector<double> gaussian_window(int size, double sigma) {
  std::vector<double> w(static_cast<std::size_t>(size));
  const int r = size / 2;
  double sum = 0.0;
  for (int i = 0; i < size; ++i) {
    const double d = i - r;
    w[static_cast<std::size_t>(i)] = std::exp(-d * d / (2.0 * sigma * sigma));
    sum += w[static_cast<std::size_t>(i)];
  }
  for (auto& v : w) v /= sum;
  return w;
}

// Separable valid filtering of an H x W plane.
std::vector<double> filter_valid(const std::vector<double>& src, std::size_t H, std::size_t W,
                                 const std::vector<double>& w) {
  const std::size_t k = w.size();
  const std::size_t oh = H - k + 1, ow = W - k + 1;
  std::vector<double> tmp(H * ow, 0.0);
  for (std::size_t y = 0; y < H; ++y)
    for (std::size_t x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (std::size_t i = 0; i < k; ++i) acc += w[i] * src[y * W + x + i];
      tmp[y * ow + x] = acc;
    }
  std::vector<double> out(oh * ow, 0.0);
  for (std::size_t y = 0; y < oh; ++y)
    for (std::size_t x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (std::size_t i = 0; i < k; ++i) acc += w[i] * tmp[(y + i) * ow + x];
      out[y * ow + x] = acc;
    }
  return out;
}

}  // namespace

double ssim(const Tensor4& a, const Tensor4& b, double peak) {
  require_same_shape(a, b, "ssim");
  const std::size_t H = a.height(), W = a.width();
  int win = static_cast<int>(std::min<std::size_t>({11, H, W}));
  if (win % 2 == 0) --win;
  const auto w = gaussian_window(win, 1.5);
  const double c1 = (0.01 * peak) * (0.01 * peak);
  const double c2 = (0.03 * peak) * (0.03 * peak);

  double total = 0.0;
  std::size_t planes = 0;
  std::vector<double> pa(H * W), pb(H * W), aa(H * W), bb(H * W), ab(H * W);
  for (std::size_t n = 0; n < a.batch(); ++n)
    for (std::size_t c = 0; c < a.channels(); ++c) {
      const double* x = a.plane(n, c);
      const double* y = b.plane(n, c);
      for (std::size_t j = 0; j < H * W; ++j) {
        pa[j] = x[j];
        pb[j] = y[j];
        aa[j] = x[j] * x[j];
        bb[j] = y[j] * y[j];
        ab[j] = x[j] * y[j];
      }
      const auto mu_a = filter_valid(pa, H, W, w);
      const auto mu_b = filter_valid(pb, H, W, w);
      const auto e_aa = filter_valid(aa, H, W, w);
      const auto e_bb = filter_valid(bb, H, W, w);
      const auto e_ab = filter_valid(ab, H, W, w);
      double sum = 0.0;
      for (std::size_t j = 0; j < mu_a.size(); ++j) {
        const double va = e_aa[j] - mu_a[j] * mu_a[j];
        const double vb = e_bb[j] - mu_b[j] * mu_b[j];
        const double cov = e_ab[j] - mu_a[j] * mu_b[j];
        sum += ((2.0 * mu_a[j] * mu_b[j] + c1) * (2.0 * cov + c2)) /
               ((mu_a[j] * mu_a[j] + mu_b[j] * mu_b[j] + c1) * (va + vb + c2));
      }
      total += sum / static_cast<double>(mu_a.size());
      ++planes;
    }
  return total / static_cast<double>(planes);
}

Tensor4 clamp01(Tensor4 x) {
  for (auto& v : x.values()) v = std::clamp(v, 0.0, 1.0);
  return x;
}

}  // namespace mmbsn
