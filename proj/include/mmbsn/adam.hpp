#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "mmbsn/ops.hpp"

namespace mmbsn {

/// Adam moments for a list of conv layers. Moment buffers mirror the flattened
/// (weight, bias) storage of each layer.
struct AdamState {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::uint64_t step = 0;
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;

  AdamState() = default;
  explicit AdamState(std::span<const ConvParams> params, double lr = 1e-4);
};

struct ParamGrads {
  Tensor4 weight;
  std::vector<double> bias;
};

/// One bias-corrected Adam update over every layer, then masked taps are
/// projected back to zero.
void adam_step(std::span<ConvParams> params, std::span<const ParamGrads> grads, AdamState& state);

}  // namespace mmbsn
