// Copyright 2026 The perfseer Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "perfseer/rng.hpp"
#include "perfseer/tape.hpp"

namespace perfseer::nk {

enum class Activation { kNone, kRelu };

struct MlpLayer {
  ParamId weight = 0;  // out x in
  ParamId bias = 0;    // 1 x out
  Activation activation = Activation::kNone;
};

using Mlp = std::vector<MlpLayer>;

// Registers "<prefix>.weight" and "<prefix>.bias". ReLU layers get
// He-uniform weights, linear layers Xavier-uniform; biases start at zero.
MlpLayer add_layer(ParameterSet& params, const std::string& prefix, std::size_t in,
                   std::size_t out, Activation activation, Rng& rng);

std::size_t layer_in(const ParameterSet& params, const MlpLayer& layer);
std::size_t layer_out(const ParameterSet& params, const MlpLayer& layer);

Var layer_forward(Tape& t, const MlpLayer& layer, Var x);
Var mlp_forward(Tape& t, std::span<const MlpLayer> layers, Var x);

}  // namespace perfseer::nk
