#include "mmbsn/ops.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include <Eigen/Core>

namespace mmbsn {

ConvParams::ConvParams(std::size_t out_ch, std::size_t in_ch, int k, int dil,
                       std::optional<KernelMask> m)
    : weight(out_ch, in_ch, static_cast<std::size_t>(k), static_cast<std::size_t>(k)),
      bias(out_ch, 0.0),
      dilation(dil),
      mask(std::move(m)) {
  if (k < 1 || k % 2 == 0) throw ShapeError("conv kernel size must be odd");
  if (dil < 1) throw ShapeError("conv dilation must be >= 1");
  if (mask && mask->size() != k) throw ShapeError("kernel mask size does not match kernel size");
}

bool ConvParams::tap_masked(int ky, int kx) const {
  if (!mask) return false;
  const int r = mask->radius();
  return mask->is_masked(ky - r, kx - r);
}

void ConvParams::project_mask() {
  if (!mask) return;
  const int k = kernel_size();
  const auto dense = mask->dense();
  for (std::size_t o = 0; o < out_channels(); ++o)
    for (std::size_t i = 0; i < in_channels(); ++i) {
      double* w = weight.plane(o, i);
      for (int t = 0; t < k * k; ++t)
        if (dense[static_cast<std::size_t>(t)]) w[t] = 0.0;
    }
}

void ConvParams::init_kaiming(std::uint64_t seed) {
  const int k = kernel_size();
  const double fan_in = static_cast<double>(in_channels()) * k * k;
  // Kaiming-uniform with the ReLU gain: U(-b, b), b = sqrt(6 / fan_in).
  const double bound = std::sqrt(6.0 / fan_in);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (auto& v : weight.values()) v = dist(rng);
  std::fill(bias.begin(), bias.end(), 0.0);
  project_mask();
}

namespace {

/// Unmasked taps as (flat kernel index, row offset, col offset).
struct Tap {
  int index;
  std::ptrdiff_t dy, dx;
};

std::vector<Tap> active_taps(const ConvParams& p) {
  const int k = p.kernel_size();
  const int r = (k - 1) / 2;
  std::vector<Tap> taps;
  for (int ky = 0; ky < k; ++ky)
    for (int kx = 0; kx < k; ++kx) {
      if (p.tap_masked(ky, kx)) continue;
      taps.push_back({ky * k + kx, static_cast<std::ptrdiff_t>(ky - r) * p.dilation,
                      static_cast<std::ptrdiff_t>(kx - r) * p.dilation});
    }
  return taps;
}

bool is_pointwise(const std::vector<Tap>& taps) {
  return taps.size() == 1 && taps[0].dy == 0 && taps[0].dx == 0;
}

// Column matrix of one image: row (i * taps + t) holds input channel i shifted
// by tap t, zero outside the image. Masked taps never appear.
void im2col(const double* src, std::size_t cin, std::size_t h, std::size_t w,
            const std::vector<Tap>& taps, double* col) {
  const auto H = static_cast<std::ptrdiff_t>(h), W = static_cast<std::ptrdiff_t>(w);
  for (std::size_t i = 0; i < cin; ++i) {
    const double* plane = src + i * h * w;
    for (std::size_t t = 0; t < taps.size(); ++t) {
      double* row = col + (i * taps.size() + t) * h * w;
      const std::ptrdiff_t dy = taps[t].dy, dx = taps[t].dx;
      const std::ptrdiff_t x0 = std::clamp<std::ptrdiff_t>(-dx, 0, W);
      const std::ptrdiff_t x1 = std::clamp<std::ptrdiff_t>(W - dx, 0, W);
      for (std::ptrdiff_t y = 0; y < H; ++y) {
        double* dst = row + y * W;
        const std::ptrdiff_t sy = y + dy;
        if (sy < 0 || sy >= H || x0 >= x1) {
          std::fill(dst, dst + W, 0.0);
          continue;
        }
        std::fill(dst, dst + x0, 0.0);
        std::copy(plane + sy * W + x0 + dx, plane + sy * W + x1 + dx, dst + x0);
        std::fill(dst + x1, dst + W, 0.0);
      }
    }
  }
}

// Adjoint of im2col: scatter-add column rows back into the image planes.
void col2im(const double* col, std::size_t cin, std::size_t h, std::size_t w,
            const std::vector<Tap>& taps, double* dst) {
  const auto H = static_cast<std::ptrdiff_t>(h), W = static_cast<std::ptrdiff_t>(w);
  for (std::size_t i = 0; i < cin; ++i) {
    double* plane = dst + i * h * w;
    for (std::size_t t = 0; t < taps.size(); ++t) {
      const double* row = col + (i * taps.size() + t) * h * w;
      const std::ptrdiff_t dy = taps[t].dy, dx = taps[t].dx;
      const std::ptrdiff_t x0 = std::clamp<std::ptrdiff_t>(-dx, 0, W);
      const std::ptrdiff_t x1 = std::clamp<std::ptrdiff_t>(W - dx, 0, W);
      for (std::ptrdiff_t y = 0; y < H; ++y) {
        const std::ptrdiff_t sy = y + dy;
        if (sy < 0 || sy >= H) continue;
        double* __restrict prow = plane + sy * W + dx;
        const double* __restrict crow = row + y * W;
        for (std::ptrdiff_t x = x0; x < x1; ++x) prow[x] += crow[x];
      }
    }
  }
}

// Weights restricted to the active taps: (out, in * taps), row-major.
std::vector<double> gather_weights(const ConvParams& p, const std::vector<Tap>& taps) {
  const std::size_t cout = p.out_channels(), cin = p.in_channels(), nt = taps.size();
  std::vector<double> wc(cout * cin * nt);
  for (std::size_t o = 0; o < cout; ++o)
    for (std::size_t i = 0; i < cin; ++i) {
      const double* wk = p.weight.plane(o, i);
      for (std::size_t t = 0; t < nt; ++t) wc[(o * cin + i) * nt + t] = wk[taps[t].index];
    }
  return wc;
}

void check_conv_input(const Tensor4& input, const ConvParams& p) {
  if (p.weight.height() != p.weight.width()) throw ShapeError("conv2d: kernel must be square");
  if (p.bias.size() != p.out_channels()) throw ShapeError("conv2d: bias length mismatch");
  if (input.channels() != p.in_channels()) {
    throw ShapeError("conv2d: dimension mismatch, input has " + std::to_string(input.channels()) +
                     " channels, weight expects " + std::to_string(p.in_channels()));
  }
}

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMat>;
using ConstMatMap = Eigen::Map<const RowMat>;

ConstMatMap view(const double* data, std::size_t rows, std::size_t cols) {
  return {data, static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols)};
}
MatMap view(double* data, std::size_t rows, std::size_t cols) {
  return {data, static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols)};
}

}  // namespace

Tensor4 conv2d(const Tensor4& input, const ConvParams& p) {
  check_conv_input(input, p);
  const std::size_t B = input.batch(), Cin = p.in_channels(), Cout = p.out_channels();
  const std::size_t H = input.height(), W = input.width(), N = H * W;
  Tensor4 out(B, Cout, H, W);
  const auto taps = active_taps(p);
  const std::size_t K = Cin * taps.size();
  const std::vector<double> wc = gather_weights(p, taps);
  const bool pointwise = is_pointwise(taps);
  std::vector<double> col(pointwise ? 0 : K * N);

  for (std::size_t b = 0; b < B; ++b) {
    double* dst = out.plane(b, 0);
    for (std::size_t o = 0; o < Cout; ++o) std::fill(dst + o * N, dst + (o + 1) * N, p.bias[o]);
    if (K == 0) continue;  // every tap masked: the layer is its bias
    const double* cols = input.plane(b, 0);
    if (!pointwise) {
      im2col(cols, Cin, H, W, taps, col.data());
      cols = col.data();
    }
    view(dst, Cout, N).noalias() += view(wc.data(), Cout, K) * view(cols, K, N);
  }
  return out;
}

ConvGrads conv2d_backward(const Tensor4& grad_out, const Tensor4& input, const ConvParams& p) {
  check_conv_input(input, p);
  const std::size_t B = input.batch(), Cin = p.in_channels(), Cout = p.out_channels();
  const std::size_t H = input.height(), W = input.width(), N = H * W;
  if (grad_out.shape() != Shape4{B, Cout, H, W}) {
    throw ShapeError("conv2d_backward: dimension mismatch, grad_out " + grad_out.shape().str() +
                     " vs expected " + Shape4{B, Cout, H, W}.str());
  }
  const auto taps = active_taps(p);
  const std::size_t nt = taps.size(), K = Cin * nt;
  const std::vector<double> wc = gather_weights(p, taps);
  const bool pointwise = is_pointwise(taps);

  ConvGrads g;
  g.grad_input = Tensor4(input.shape());
  g.weight = Tensor4(p.weight.shape());
  g.bias.assign(Cout, 0.0);

  for (std::size_t o = 0; o < Cout; ++o) {
    double s = 0.0;
    for (std::size_t b = 0; b < B; ++b) {
      const double* go = grad_out.plane(b, o);
      for (std::size_t j = 0; j < N; ++j) s += go[j];
    }
    g.bias[o] = s;
  }

  if (K == 0) return g;
  std::vector<double> gwc(Cout * K, 0.0);
  std::vector<double> col(pointwise ? 0 : K * N);
  std::vector<double> gcol(pointwise ? 0 : K * N);
  for (std::size_t b = 0; b < B; ++b) {
    const double* go = grad_out.plane(b, 0);
    const double* cols = input.plane(b, 0);
    if (!pointwise) {
      im2col(cols, Cin, H, W, taps, col.data());
      cols = col.data();
    }
    // dW += dY * cols^T, batches accumulated in order.
    view(gwc.data(), Cout, K).noalias() += view(go, Cout, N) * view(cols, K, N).transpose();
    // dcols = W^T * dY
    double* gi = g.grad_input.plane(b, 0);
    double* target = pointwise ? gi : gcol.data();
    view(target, K, N).noalias() = view(wc.data(), Cout, K).transpose() * view(go, Cout, N);
    if (!pointwise) col2im(gcol.data(), Cin, H, W, taps, gi);
  }

  for (std::size_t o = 0; o < Cout; ++o)
    for (std::size_t i = 0; i < Cin; ++i) {
      double* gw = g.weight.plane(o, i);
      for (std::size_t t = 0; t < nt; ++t) gw[taps[t].index] = gwc[(o * Cin + i) * nt + t];
    }
  return g;
}

Tensor4 relu(const Tensor4& x) {
  Tensor4 out(x.shape());
  const auto src = x.values();
  auto dst = out.values();
  for (std::size_t j = 0; j < src.size(); ++j) dst[j] = src[j] > 0.0 ? src[j] : 0.0;
  return out;
}

Tensor4 relu_backward(const Tensor4& grad_out, const Tensor4& forward_output) {
  require_same_shape(grad_out, forward_output, "relu_backward");
  Tensor4 out(grad_out.shape());
  const auto g = grad_out.values();
  const auto y = forward_output.values();
  auto dst = out.values();
  for (std::size_t j = 0; j < g.size(); ++j) dst[j] = y[j] > 0.0 ? g[j] : 0.0;
  return out;
}

Tensor4 concat_channels(std::span<const Tensor4* const> parts) {
  if (parts.empty()) throw ShapeError("concat_channels: no inputs");
  const Shape4 first = parts.front()->shape();
  std::size_t total = 0;
  for (const Tensor4* t : parts) {
    const Shape4 s = t->shape();
    if (s.batch != first.batch || s.height != first.height || s.width != first.width) {
      throw ShapeError("concat_channels: dimension mismatch " + s.str() + " vs " + first.str());
    }
    total += s.channels;
  }
  Tensor4 out(first.batch, total, first.height, first.width);
  const std::size_t plane = first.plane();
  for (std::size_t b = 0; b < first.batch; ++b) {
    std::size_t c0 = 0;
    for (const Tensor4* t : parts) {
      const std::size_t n = t->channels() * plane;
      std::copy_n(t->plane(b, 0), n, out.plane(b, c0));
      c0 += t->channels();
    }
  }
  return out;
}

Tensor4 concat_channels(const std::vector<Tensor4>& parts) {
  std::vector<const Tensor4*> ptrs;
  ptrs.reserve(parts.size());
  for (const auto& t : parts) ptrs.push_back(&t);
  return concat_channels(std::span<const Tensor4* const>(ptrs));
}

std::vector<Tensor4> split_channels(const Tensor4& x, std::span<const std::size_t> sizes) {
  std::size_t total = 0;
  for (std::size_t s : sizes) {
    if (s == 0) throw ShapeError("split_channels: zero-width part");
    total += s;
  }
  if (total != x.channels()) {
    throw ShapeError("split_channels: dimension mismatch, sizes sum to " + std::to_string(total) +
                     " but tensor has " + std::to_string(x.channels()) + " channels");
  }
  const std::size_t plane = x.height() * x.width();
  std::vector<Tensor4> out;
  out.reserve(sizes.size());
  std::size_t c0 = 0;
  for (std::size_t s : sizes) {
    Tensor4 part(x.batch(), s, x.height(), x.width());
    for (std::size_t b = 0; b < x.batch(); ++b) {
      std::copy_n(x.plane(b, c0), s * plane, part.plane(b, 0));
    }
    c0 += s;
    out.push_back(std::move(part));
  }
  return out;
}

Tensor4 add(const Tensor4& a, const Tensor4& b) {
  require_same_shape(a, b, "add");
  Tensor4 out(a.shape());
  for (std::size_t j = 0; j < a.size(); ++j) out[j] = a[j] + b[j];
  return out;
}

LossAndGrad l1_loss_and_grad(const Tensor4& pred, const Tensor4& target) {
  require_same_shape(pred, target, "l1_loss");
  LossAndGrad r;
  r.grad = Tensor4(pred.shape());
  const double n = static_cast<double>(pred.size());
  double sum = 0.0;
  for (std::size_t j = 0; j < pred.size(); ++j) {
    const double d = pred[j] - target[j];
    sum += std::abs(d);
    r.grad[j] = (d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0)) / n;
  }
  r.loss = sum / n;
  return r;
}

}  // namespace mmbsn
