#pragma once

// Helpers shared by the unit tests and the acceptance runner.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "mmbsn/model.hpp"
#include "mmbsn/tensor.hpp"

namespace testsupport {

inline mmbsn::Tensor4 random_tensor(mmbsn::Shape4 s, std::uint64_t seed, double lo = -1.0,
                                    double hi = 1.0) {
  mmbsn::Tensor4 t(s);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  for (auto& v : t.values()) v = u(rng);
  return t;
}

// Closed-form parameter inventory, written from the layer list alone.
struct Inventory {
  std::size_t C, in, n_masks, cdcl, trunk;
  std::vector<int> sizes;

  static std::size_t conv(std::size_t a, std::size_t b, std::size_t k) { return a * b * k * k + b; }
  static std::size_t pw(std::size_t a, std::size_t b) { return conv(a, b, 1); }
  std::size_t dcl() const { return conv(C, C, 3) + pw(C, C); }
  std::size_t half() const { return std::max<std::size_t>(1, C / 2); }
  std::size_t tail(std::size_t width) const { return pw(width, C) + pw(C, half()) + pw(half(), in); }

  std::size_t apbsn_path() const {
    std::size_t n = pw(in, C);
    for (int k : sizes) {
      n += conv(C, C, static_cast<std::size_t>(k)) + 2 * pw(C, C) + (cdcl + trunk) * dcl();
    }
    return n;
  }
  std::size_t apbsn() const { return apbsn_path() + tail(sizes.size() * C); }
  std::size_t smmbsn() const { return n_masks * apbsn_path() + tail(n_masks * sizes.size() * C); }
  std::size_t mmbsn() const {
    std::size_t n = pw(in, C);
    for (int k : sizes) {
      const std::size_t branch =
          conv(C, C, static_cast<std::size_t>(k)) + 2 * pw(C, C) + cdcl * dcl() + pw(2 * C, C);
      n += n_masks * branch + pw(n_masks * C, C) + trunk * dcl();
    }
    return n + tail(sizes.size() * C);
  }
};

struct GradCheckResult {
  std::size_t checked = 0;
  std::size_t skipped_kinks = 0;
  double max_rel = 0.0;
};

inline double relative_error(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-6});
}

// On/off state of every ReLU unit in a forward pass.
inline std::vector<bool> relu_pattern(const mmbsn::ModelGraph& model, const mmbsn::Tensor4& x) {
  const mmbsn::ForwardPass pass = model.forward_pass(x);
  std::vector<bool> bits;
  for (std::size_t n = 0; n < model.nodes().size(); ++n) {
    if (model.nodes()[n].kind != mmbsn::NodeKind::Relu) continue;
    for (double v : pass.activations[n].values()) bits.push_back(v > 0.0);
  }
  return bits;
}

// Central differences of L = sum(R * model(x)) against backward(). Components
// are sampled from unmasked weights, biases and the input. When a ReLU changes
// state inside the stencil the loss is not differentiable there, so that
// component is redrawn.
inline GradCheckResult grad_check(mmbsn::ModelGraph model, mmbsn::Tensor4 x, std::size_t samples,
                                  std::uint64_t seed, double h = 1e-5) {
  using namespace mmbsn;
  const ForwardPass pass = model.forward_pass(x);
  const Tensor4 proj = random_tensor(pass.output().shape(), seed ^ 0xabcdefULL);
  const Gradients g = model.backward(pass, proj);
  auto loss = [&]() {
    const Tensor4 y = model.forward(x);
    double s = 0.0;
    for (std::size_t j = 0; j < y.size(); ++j) s += y[j] * proj[j];
    return s;
  };
  const auto pattern0 = relu_pattern(model, x);

  std::mt19937_64 rng(seed);
  GradCheckResult r;
  std::size_t attempts = 0;
  while (r.checked < samples && attempts < samples * 20) {
    ++attempts;
    double* slot = nullptr;
    double analytic = 0.0;
    const std::size_t pick = rng() % 4;
    if (pick == 0) {
      const std::size_t j = rng() % x.size();
      slot = &x[j];
      analytic = g.input[j];
    } else {
      auto& params = model.params();
      const std::size_t li = rng() % params.size();
      ConvParams& p = params[li];
      if (pick == 1) {
        const std::size_t o = rng() % p.bias.size();
        slot = &p.bias[o];
        analytic = g.params[li].bias[o];
      } else {
        const std::size_t j = rng() % p.weight.size();
        const int k = p.kernel_size();
        const int tap = static_cast<int>(j % static_cast<std::size_t>(k * k));
        if (p.tap_masked(tap / k, tap % k)) continue;
        slot = &p.weight[j];
        analytic = g.params[li].weight[j];
      }
    }
    const double orig = *slot;
    *slot = orig + h;
    const double lp = loss();
    const auto pat_p = relu_pattern(model, x);
    *slot = orig - h;
    const double lm = loss();
    const auto pat_m = relu_pattern(model, x);
    *slot = orig;
    if (pat_p != pattern0 || pat_m != pattern0) {
      ++r.skipped_kinks;
      continue;
    }
    const double numeric = (lp - lm) / (2 * h);
    r.max_rel = std::max(r.max_rel, relative_error(analytic, numeric));
    ++r.checked;
  }
  return r;
}

}  // namespace testsupport
