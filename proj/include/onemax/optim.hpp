#pragma once

// Adam with bias-corrected moments, generic over any parameter set that
// exposes param_blocks() and zeros_like().

#include <cmath>
#include <cstdint>
#include <string>

#include "onemax/error.hpp"
#include "onemax/params.hpp"

namespace onemax::optim {

struct AdamConfig {
  double alpha = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  void validate() const {
    if (!(alpha > 0.0) || !std::isfinite(alpha)) throw InvalidArgument("adam: alpha must be positive");
    if (!(beta1 >= 0.0 && beta1 < 1.0)) throw InvalidArgument("adam: beta1 must be in [0, 1)");
    if (!(beta2 >= 0.0 && beta2 < 1.0)) throw InvalidArgument("adam: beta2 must be in [0, 1)");
    if (!(epsilon > 0.0) || !std::isfinite(epsilon)) throw InvalidArgument("adam: epsilon must be positive");
  }
  friend bool operator==(const AdamConfig&, const AdamConfig&) = default;
};

template <class Params>
struct AdamState {
  AdamConfig config;
  std::uint64_t step = 0;
  Params m;
  Params v;
  friend bool operator==(const AdamState&, const AdamState&) = default;
};

template <class Params>
AdamState<Params> adam_init(const Params& shape_like, const AdamConfig& config = {}) {
  config.validate();
  return {config, 0, zeros_like(shape_like), zeros_like(shape_like)};
}

// theta <- theta - alpha * m_hat / (sqrt(v_hat) + eps), elementwise.
// Gradients are checked for finiteness before any state is touched.
template <class Params, class Grads>
void adam_step(AdamState<Params>& state, Params& params, const Grads& grads) {
  auto p = param_blocks(params);
  auto g = param_blocks(grads);
  auto m = param_blocks(state.m);
  auto v = param_blocks(state.v);
  if (p.size() != g.size() || p.size() != m.size() || p.size() != v.size())
    throw ShapeError("adam_step: block count mismatch");
  for (std::size_t b = 0; b < p.size(); ++b) {
    if (p[b].values.size() != g[b].values.size() || p[b].values.size() != m[b].values.size() ||
        p[b].values.size() != v[b].values.size())
      throw ShapeError("adam_step: block '" + p[b].name + "' size mismatch");
    for (double x : g[b].values)
      if (!std::isfinite(x)) throw DivergenceError("adam_step: non-finite gradient in block '" + g[b].name + "'");
  }

  const auto& c = state.config;
  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double bc1 = 1.0 - std::pow(c.beta1, t);
  const double bc2 = 1.0 - std::pow(c.beta2, t);
  for (std::size_t b = 0; b < p.size(); ++b) {
    auto theta = p[b].values;
    auto gb = g[b].values;
    auto mb = m[b].values;
    auto vb = v[b].values;
    for (std::size_t i = 0; i < theta.size(); ++i) {
      mb[i] = c.beta1 * mb[i] + (1.0 - c.beta1) * gb[i];
      vb[i] = c.beta2 * vb[i] + (1.0 - c.beta2) * gb[i] * gb[i];
      const double m_hat = mb[i] / bc1;
      const double v_hat = vb[i] / bc2;
      theta[i] -= c.alpha * m_hat / (std::sqrt(v_hat) + c.epsilon);
    }
  }
}

}  // namespace onemax::optim
