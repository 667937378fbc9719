// Copyright 2026 The perfseer Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>

#include "perfseer/tape.hpp"

namespace perfseer::nk {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  Gradients first_moment;
  Gradients second_moment;
  std::uint64_t step = 0;
};

AdamState make_adam_state(const ParameterSet& params);

// One bias-corrected Adam update of every parameter.
void adam_step(ParameterSet& params, const Gradients& grads, AdamState& state, double lr,
               const AdamConfig& config = {});

}  // namespace perfseer::nk
