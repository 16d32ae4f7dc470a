#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "mmbsn/mask.hpp"
#include "mmbsn/tensor.hpp"

namespace mmbsn {

/// Weights of one same-padded 2-D convolution. The weight tensor is laid out
/// as (out_ch, in_ch, k, k); masked taps are stored and kept at zero.
struct ConvParams {
  Tensor4 weight;
  std::vector<double> bias;
  int dilation = 1;
  std::optional<KernelMask> mask;

  ConvParams() = default;
  ConvParams(std::size_t out_ch, std::size_t in_ch, int k, int dilation = 1,
             std::optional<KernelMask> mask = std::nullopt);

  std::size_t out_channels() const { return weight.batch(); }
  std::size_t in_channels() const { return weight.channels(); }
  int kernel_size() const { return static_cast<int>(weight.height()); }
  std::size_t parameter_count() const { return weight.size() + bias.size(); }

  bool tap_masked(int ky, int kx) const;
  /// Zeroes every masked tap of every (out, in) kernel.
  void project_mask();
  /// Kaiming-uniform fan-in weights, zero bias, masked taps zeroed.
  void init_kaiming(std::uint64_t seed);
};

struct ConvGrads {
  Tensor4 grad_input;
  Tensor4 weight;
  std::vector<double> bias;
};

/// Same-size convolution with zero padding of (k-1)/2 * dilation.
Tensor4 conv2d(const Tensor4& input, const ConvParams& params);

/// Gradients of sum(grad_out * conv2d(input, params)). Weight gradients are
/// zero at masked taps.
ConvGrads conv2d_backward(const Tensor4& grad_out, const Tensor4& input, const ConvParams& params);

Tensor4 relu(const Tensor4& x);
/// Gradient through relu given the forward output (or input; same sign test).
Tensor4 relu_backward(const Tensor4& grad_out, const Tensor4& forward_output);

Tensor4 concat_channels(std::span<const Tensor4* const> parts);
Tensor4 concat_channels(const std::vector<Tensor4>& parts);
std::vector<Tensor4> split_channels(const Tensor4& x, std::span<const std::size_t> sizes);

Tensor4 add(const Tensor4& a, const Tensor4& b);

struct LossAndGrad {
  double loss = 0.0;
  Tensor4 grad;
};

/// Mean absolute error and its (sub)gradient sign(pred - target) / N.
LossAndGrad l1_loss_and_grad(const Tensor4& pred, const Tensor4& target);

}  // namespace mmbsn
