// Copyright 2026 The perfseer Authors
// SPDX-License-Identifier: Apache-2.0

#include "perfseer/adam.hpp"

#include <cmath>

#include "perfseer/error.hpp"

namespace perfseer::nk {

AdamState make_adam_state(const ParameterSet& params) {
  return AdamState{params.zeros_like(), params.zeros_like(), 0};
}

void adam_step(ParameterSet& params, const Gradients& grads, AdamState& state, double lr,
               const AdamConfig& config) {
  if (grads.size() != params.size() || state.first_moment.size() != params.size() ||
      state.second_moment.size() != params.size()) {
    throw Error(ErrorCode::kLengthMismatch, "adam_step: parameter/gradient count mismatch");
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(config.beta1, t);
  const double correction2 = 1.0 - std::pow(config.beta2, t);
  for (ParamId id = 0; id < params.size(); ++id) {
    auto g = grads[id].data();
    auto m = state.first_moment[id].data();
    auto v = state.second_moment[id].data();
    auto p = params.mutable_value(id).data();
    if (g.size() != p.size() || m.size() != p.size() || v.size() != p.size()) {
      throw Error(ErrorCode::kLengthMismatch, "adam_step: shape mismatch for " + params.name(id));
    }
    for (std::size_t k = 0; k < p.size(); ++k) {
      m[k] = config.beta1 * m[k] + (1.0 - config.beta1) * g[k];
      v[k] = config.beta2 * v[k] + (1.0 - config.beta2) * g[k] * g[k];
      const double m_hat = m[k] / correction1;
      const double v_hat = v[k] / correction2;
      p[k] -= lr * m_hat / (std::sqrt(v_hat) + config.epsilon);
    }
  }
}

}  // namespace perfseer::nk
