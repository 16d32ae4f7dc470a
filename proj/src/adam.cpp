#include "mmbsn/adam.hpp"

#include <cmath>

namespace mmbsn {

AdamState::AdamState(std::span<const ConvParams> params, double learning_rate) : lr(learning_rate) {
  m.reserve(params.size());
  v.reserve(params.size());
  for (const auto& p : params) {
    m.emplace_back(p.parameter_count(), 0.0);
    v.emplace_back(p.parameter_count(), 0.0);
  }
}

void adam_step(std::span<ConvParams> params, std::span<const ParamGrads> grads, AdamState& state) {
  if (params.size() != grads.size() || params.size() != state.m.size()) {
    throw ShapeError("adam_step: parameter, gradient and state counts differ");
  }
  for (std::size_t l = 0; l < params.size(); ++l) {
    if (grads[l].weight.shape() != params[l].weight.shape() ||
        grads[l].bias.size() != params[l].bias.size() ||
        state.m[l].size() != params[l].parameter_count()) {
      throw ShapeError("adam_step: dimension mismatch at layer " + std::to_string(l));
    }
  }

  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);

  auto update = [&](double& theta, double g, double& m, double& v) {
    m = state.beta1 * m + (1.0 - state.beta1) * g;
    v = state.beta2 * v + (1.0 - state.beta2) * g * g;
    const double m_hat = m / c1;
    const double v_hat = v / c2;
    theta -= state.lr * m_hat / (std::sqrt(v_hat) + state.eps);
  };

  for (std::size_t l = 0; l < params.size(); ++l) {
    auto& p = params[l];
    auto& m = state.m[l];
    auto& v = state.v[l];
    const std::size_t nw = p.weight.size();
    for (std::size_t j = 0; j < nw; ++j) update(p.weight[j], grads[l].weight[j], m[j], v[j]);
    for (std::size_t j = 0; j < p.bias.size(); ++j) {
      update(p.bias[j], grads[l].bias[j], m[nw + j], v[nw + j]);
    }
    p.project_mask();
  }
}

}  // namespace mmbsn
