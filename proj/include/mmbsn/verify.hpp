#pragma once

#include <cstdint>

#include "mmbsn/mask.hpp"
#include "mmbsn/model.hpp"

namespace mmbsn {

struct EmpiricalOptions {
  int radius = 6;
  int trials = 3;
  int probes_per_trial = 5;
  double magnitude = 1.0;
  std::uint64_t seed = 0;
};

/// Offsets whose perturbation never changes the output, bit for bit, across
/// `trials` fresh weight draws (Kaiming weights, small positive biases) and
/// several interior probe positions. The model
/// is copied; the caller's weights are untouched.
ExclusionSet empirical_exclusion(const ModelGraph& model, const EmpiricalOptions& options);

/// Reachability prediction for a built model: the intersection of the
/// exclusion sets of its masked branches.
ExclusionSet model_exclusion_set(const ModelGraph& model, int radius);

/// Largest |d out(c', y, x) / d in(c, y, x)| over channel pairs, from the
/// autodiff Jacobian column at pixel (y, x).
double center_self_sensitivity(const ModelGraph& model, const Tensor4& input, std::size_t y,
                               std::size_t x);

}  // namespace mmbsn
