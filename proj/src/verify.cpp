#include "mmbsn/verify.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

namespace mmbsn {

ExclusionSet empirical_exclusion(const ModelGraph& model, const EmpiricalOptions& opt) {
  if (opt.trials < 1 || opt.probes_per_trial < 1 || opt.radius < 0) {
    throw std::invalid_argument("empirical_exclusion: trials, probes and radius must be positive");
  }
  const int R = opt.radius;
  // Probes sit in the central window so every (probe - offset) is interior
  // with an R-pixel margin.
  const std::size_t side = static_cast<std::size_t>(std::max(4 * R + 9, 16));
  const int lo = 2 * R;
  const int hi = static_cast<int>(side) - 1 - 2 * R;
  const std::size_t ch = model.in_channels();

  std::vector<char> dependent(static_cast<std::size_t>((2 * R + 1) * (2 * R + 1)), 0);
  std::mt19937_64 rng(opt.seed);

  for (int t = 0; t < opt.trials; ++t) {
    ModelGraph trial = model;
    trial.init(rng());
    // Positive biases keep ReLUs from switching whole paths off, which would
    // hide real dependencies.
    std::uniform_real_distribution<double> bias(0.05, 0.25);
    for (auto& p : trial.params())
      for (auto& b : p.bias) b = bias(rng);
    Tensor4 x(1, ch, side, side);
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    for (auto& v : x.values()) v = uni(rng);
    const Tensor4 base = trial.forward(x);
    if (base.height() != side || base.width() != side) {
      throw ShapeError("empirical_exclusion: model output spatial shape differs from input");
    }
    std::uniform_int_distribution<int> pos(lo, hi);
    for (int probe = 0; probe < opt.probes_per_trial; ++probe) {
      const int py = pos(rng), px = pos(rng);
      Tensor4 xp = x;
      for (std::size_t c = 0; c < ch; ++c) {
        xp.at(0, c, static_cast<std::size_t>(py), static_cast<std::size_t>(px)) += opt.magnitude;
      }
      const Tensor4 out = trial.forward(xp);
      for (int a = -R; a <= R; ++a)
        for (int b = -R; b <= R; ++b) {
          const auto qy = static_cast<std::size_t>(py - a);
          const auto qx = static_cast<std::size_t>(px - b);
          for (std::size_t c = 0; c < out.channels(); ++c) {
            if (out.at(0, c, qy, qx) != base.at(0, c, qy, qx)) {
              dependent[static_cast<std::size_t>((a + R) * (2 * R + 1) + (b + R))] = 1;
              break;
            }
          }
        }
    }
  }

  ExclusionSet result;
  result.radius = R;
  for (int a = -R; a <= R; ++a)
    for (int b = -R; b <= R; ++b)
      if (!dependent[static_cast<std::size_t>((a + R) * (2 * R + 1) + (b + R))]) {
        result.offsets.insert({a, b});
      }
  return result;
}

ExclusionSet model_exclusion_set(const ModelGraph& model, int radius) {
  if (model.branches().empty()) {
    throw std::invalid_argument("model has no masked branches to analyse");
  }
  std::optional<ExclusionSet> acc;
  for (const auto& br : model.branches()) {
    ExclusionSet s = exclusion_set(br.mask, br.dilation, radius, br.dilated_depth);
    acc = acc ? intersect(*acc, s) : s;
  }
  return *acc;
}

double center_self_sensitivity(const ModelGraph& model, const Tensor4& input, std::size_t y,
                               std::size_t x) {
  const ForwardPass pass = model.forward_pass(input);
  double worst = 0.0;
  for (std::size_t c = 0; c < pass.output().channels(); ++c) {
    Tensor4 seed(pass.output().shape());
    seed.at(0, c, y, x) = 1.0;
    const Gradients g = model.backward(pass, seed);
    for (std::size_t ci = 0; ci < g.input.channels(); ++ci) {
      worst = std::max(worst, std::abs(g.input.at(0, ci, y, x)));
    }
  }
  return worst;
}

}  // namespace mmbsn
